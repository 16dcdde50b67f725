import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from activedecode.code import (AlistError, CodeSpec, bch_code, bch_generator_matrix, gf2_rank,
                               hamming74, hamming_distance, load_code, parse_alist, parse_dense,
                               single_parity_check, syndrome, to_alist, to_dense)

SPC_ALIST = """3 1
1 3
1 1 1
3
1
1
1
1 2 3
"""

HAMMING_ALIST = """7 3
3 4
1 1 2 1 2 2 3
4 4 4
1 0 0
2 0 0
1 2 0
3 0 0
1 3 0
2 3 0
1 2 3
1 3 5 7
2 3 6 7
4 5 6 7
"""


def test_parse_spc():
    code = parse_alist(SPC_ALIST)
    assert code.N == 3 and code.M == 1 and code.K == 2
    assert code.check_neighbors == ((0, 1, 2),)


def test_parse_hamming_with_zero_padding():
    code = parse_alist(HAMMING_ALIST, name="h")
    assert code.N == 7 and code.K == 4
    # three rows of weight 4
    assert code.n_edges == 12
    assert np.array_equal(code.H, hamming74().H)


def test_too_many_column_lists_reports_line():
    bad = """3 1
1 3
1 1 1
3
1
1
1
1
1 2 3
"""
    with pytest.raises(AlistError) as err:
        parse_alist(bad)
    assert err.value.line == 9


def test_column_degree_list_mismatch():
    bad = SPC_ALIST.replace("1 1 1\n3", "1 1 1 1\n3", 1)
    with pytest.raises(AlistError) as err:
        parse_alist(bad)
    assert err.value.line == 3


def test_index_out_of_range():
    bad = SPC_ALIST.replace("1\n1\n1\n1 2 3", "1\n1\n2\n1 2 3")
    with pytest.raises(AlistError, match="out of range") as err:
        parse_alist(bad)
    assert err.value.line == 7


def test_rows_must_agree_with_columns():
    bad = HAMMING_ALIST.replace("4 5 6 7", "4 5 6 1")
    with pytest.raises(AlistError, match="disagrees") as err:
        parse_alist(bad)
    assert err.value.line == 14


def test_non_integer_token():
    with pytest.raises(AlistError, match="non-integer"):
        parse_alist("3 x\n")


def test_alist_roundtrip_is_idempotent(bch63):
    text = to_alist(bch63)
    again = to_alist(parse_alist(text, name=bch63.name, K=bch63.K))
    assert text == again
    assert np.array_equal(parse_alist(text).H, bch63.H)


def test_dense_format_roundtrip(ham):
    code = parse_dense(to_dense(ham))
    assert np.array_equal(code.H, ham.H) and code.K == 4


def test_dense_format_errors():
    with pytest.raises(AlistError) as err:
        parse_dense("2 3\n1 1 0\n0 1\n")
    assert err.value.line == 3
    with pytest.raises(AlistError, match="0 or 1"):
        parse_dense("1 3\n1 2 0\n")


def test_load_code_from_file(tmp_path, bch63):
    p = tmp_path / "bch_63_36.alist"
    p.write_text(to_alist(bch63))
    code = load_code(p)
    assert code.name == "bch_63_36" and code.t_h == 5 and code.K == 36


def test_codespec_invariants():
    with pytest.raises(ValueError, match="all-zero row"):
        CodeSpec("x", np.array([[1, 1], [0, 0]]), K=1)
    with pytest.raises(ValueError, match="all-zero column"):
        CodeSpec("x", np.array([[1, 0]]), K=1)
    with pytest.raises(ValueError, match="0 or 1"):
        CodeSpec("x", np.array([[1, 2]]), K=1)
    code = hamming74()
    assert code.rate == 4 / 7
    for c, v in code.edges:
        assert code.H[c, v] == 1
        assert v in code.check_neighbors[c] and c in code.var_neighbors[v]
    assert len(code.edges) == int(code.H.sum())


def test_codespec_is_immutable(ham):
    with pytest.raises(ValueError):
        ham.H[0, 0] = 0


@pytest.mark.parametrize("n,k,t", [(63, 45, 3), (63, 36, 5), (127, 64, 10), (15, 7, 2)])
def test_bch_parity_check_matches_generator(n, k, t):
    code = bch_code(n, k, t)
    G = bch_generator_matrix(n, k, t).astype(np.int64)
    assert code.H.shape == (n - k, n)
    assert gf2_rank(code.H) == n - k
    assert gf2_rank(G) == k
    assert not ((G @ code.H.T.astype(np.int64)) % 2).any()
    assert code.t_h == t


def test_bch15_minimum_distance():
    # small enough to enumerate: designed distance 5
    code = bch_code(15, 7, 2)
    G = bch_generator_matrix(15, 7, 2).astype(np.int64)
    msgs = np.array(np.meshgrid(*[[0, 1]] * 7)).reshape(7, -1).T
    weights = ((msgs @ G) % 2).sum(axis=1)
    assert weights[weights > 0].min() == 5
    assert code.K == 7


@pytest.mark.parametrize("word,expected", [([0, 0, 0], [0]), ([1, 1, 0], [0]), ([1, 0, 0], [1])])
def test_syndrome_spc(spc3, word, expected):
    assert syndrome(spc3, word).tolist() == expected


def test_syndrome_length_mismatch(spc3):
    with pytest.raises(ValueError):
        syndrome(spc3, [0, 1])


@pytest.mark.parametrize("a,b,d", [("000", "000", 0), ("000", "101", 2), ("1111111", "0000000", 7)])
def test_hamming_distance_examples(a, b, d):
    assert hamming_distance([int(x) for x in a], [int(x) for x in b]) == d


def test_hamming_distance_length_mismatch():
    with pytest.raises(ValueError):
        hamming_distance([0, 1], [0])


@settings(max_examples=200, deadline=None)
@given(arrays(np.uint8, 63, elements=st.integers(0, 1)))
def test_syndrome_matches_matrix_product(word):
    code = bch_code(63, 36, 5)
    direct = np.zeros(code.M, dtype=np.int64)
    for i in range(code.M):
        for j in range(code.N):
            direct[i] ^= int(code.H[i, j]) & int(word[j])
    assert np.array_equal(syndrome(code, word), direct)


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1)),
                min_size=1, max_size=40))
def test_hamming_distance_metric_axioms(triples):
    a, b, c = (np.array(x) for x in zip(*triples))
    assert hamming_distance(a, b) == hamming_distance(b, a)
    assert hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c)
    assert (hamming_distance(a, b) == 0) == np.array_equal(a, b)


def test_single_parity_check_codewords():
    code = single_parity_check(4)
    assert code.K == 3
    assert not syndrome(code, [1, 1, 0, 0]).any()
