"""Binary linear codes: parity-check matrices, Tanner graphs, alist I/O."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class AlistError(ValueError):
    """Malformed alist or dense-matrix text. Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """A binary linear code given by its parity-check matrix.

    ``H`` has shape (M, N) with M = N - K. The Tanner graph is stored as a
    list of edges ``(check, variable)`` sorted by check, then variable; edge
    ``e`` has check ``edge_check[e]`` and variable ``edge_var[e]``.
    ``t_h`` is the hard-decision correction radius, supplied as metadata.
    """

    name: str
    H: np.ndarray
    K: int
    t_h: int = 0
    edges: tuple[tuple[int, int], ...] = field(init=False, repr=False)
    var_neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    check_neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        H = np.array(self.H, dtype=np.uint8)
        if H.ndim != 2:
            raise ValueError("H must be a 2-D matrix")
        if not np.isin(H, (0, 1)).all():
            raise ValueError("H entries must be 0 or 1")
        if (H.sum(axis=1) == 0).any():
            raise ValueError("H has an all-zero row")
        if (H.sum(axis=0) == 0).any():
            raise ValueError("H has an all-zero column")
        if not 0 < self.K < H.shape[1]:
            raise ValueError(f"need 0 < K < N, got K={self.K}, N={H.shape[1]}")
        if self.t_h < 0:
            raise ValueError("t_h must be non-negative")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)
        checks, variables = np.nonzero(H)
        object.__setattr__(self, "edges", tuple(zip(checks.tolist(), variables.tolist())))
        object.__setattr__(
            self, "check_neighbors",
            tuple(tuple(np.flatnonzero(row).tolist()) for row in H))
        object.__setattr__(
            self, "var_neighbors",
            tuple(tuple(np.flatnonzero(col).tolist()) for col in H.T))

    @property
    def N(self) -> int:
        return self.H.shape[1]

    @property
    def M(self) -> int:
        return self.H.shape[0]

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def edge_check(self) -> np.ndarray:
        return np.array([c for c, _ in self.edges], dtype=np.intp)

    @property
    def edge_var(self) -> np.ndarray:
        return np.array([v for _, v in self.edges], dtype=np.intp)

    def checksum(self) -> str:
        """Short digest of (N, K, H); identifies the matrix inside weight files."""
        h = hashlib.sha256()
        h.update(f"{self.N},{self.K};".encode())
        h.update(np.packbits(self.H, axis=None).tobytes())
        return h.hexdigest()[:16]


def syndrome(code: CodeSpec, word) -> np.ndarray:
    """Parity of each check over ``word``. Accepts a single word or a batch (..., N)."""
    word = np.asarray(word)
    if word.shape[-1] != code.N:
        raise ValueError(f"word length {word.shape[-1]} != N={code.N}")
    return (word.astype(np.int64) @ code.H.T.astype(np.int64)) % 2


def hamming_distance(a, b) -> np.ndarray | int:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    d = np.count_nonzero(a != b, axis=-1)
    return int(d) if np.ndim(d) == 0 else d


# ---------------------------------------------------------------------------
# alist / dense text formats
# ---------------------------------------------------------------------------

def _int_rows(text: str) -> list[tuple[int, list[int]]]:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append((lineno, [int(tok) for tok in line.split()]))
        except ValueError:
            raise AlistError(f"non-integer token in {line.strip()!r}", lineno) from None
    return rows


def parse_alist(text: str, name: str = "alist", K: int | None = None, t_h: int = 0) -> CodeSpec:
    """Parse MacKay's alist layout into a :class:`CodeSpec`.

    ``K`` defaults to ``N - rank(H)`` over GF(2). Zero padding in the index
    lists is allowed. Row lists are cross-checked against column lists.
    """
    rows = _int_rows(text)
    if len(rows) < 4:
        raise AlistError("truncated alist: need header, max degrees and degree lists",
                         rows[-1][0] if rows else None)

    (ln, header) = rows[0]
    if len(header) != 2:
        raise AlistError("header must be 'N M'", ln)
    n, m = header
    if n <= 0 or m <= 0:
        raise AlistError("non-positive dimensions", ln)
    ln, maxdeg = rows[1]
    if len(maxdeg) != 2:
        raise AlistError("expected 'max_col_degree max_row_degree'", ln)
    ln, col_deg = rows[2]
    if len(col_deg) != n:
        raise AlistError(f"expected {n} column degrees, got {len(col_deg)}", ln)
    ln, row_deg = rows[3]
    if len(row_deg) != m:
        raise AlistError(f"expected {m} row degrees, got {len(row_deg)}", ln)
    if max(col_deg) > maxdeg[0] or max(row_deg) > maxdeg[1]:
        raise AlistError("degree exceeds declared maximum", rows[1][0])

    body = rows[4:]
    if len(body) < n + m:
        where = body[-1][0] if body else rows[3][0]
        raise AlistError(f"expected {n} column lists and {m} row lists, got {len(body)} lines", where)
    if len(body) > n + m:
        # the first surplus line is where the header's dimensions were violated
        raise AlistError(f"header declares N={n}, M={m} but found {len(body)} index lists",
                         body[n + m][0])

    H = np.zeros((m, n), dtype=np.uint8)
    for j, (ln, entries) in enumerate(body[:n]):
        idx = [e for e in entries if e != 0]
        if len(idx) != col_deg[j]:
            raise AlistError(f"column {j + 1} lists {len(idx)} entries, degree is {col_deg[j]}", ln)
        for r in idx:
            if not 1 <= r <= m:
                raise AlistError(f"row index {r} out of range 1..{m}", ln)
            H[r - 1, j] = 1

    for i, (ln, entries) in enumerate(body[n:]):
        idx = [e for e in entries if e != 0]
        if len(idx) != row_deg[i]:
            raise AlistError(f"row {i + 1} lists {len(idx)} entries, degree is {row_deg[i]}", ln)
        for c in idx:
            if not 1 <= c <= n:
                raise AlistError(f"column index {c} out of range 1..{n}", ln)
        if sorted(idx) != (np.flatnonzero(H[i]) + 1).tolist():
            raise AlistError(f"row {i + 1} disagrees with the column lists", ln)

    if K is None:
        K = n - gf2_rank(H)
    return CodeSpec(name=name, H=H, K=K, t_h=t_h)


def to_alist(code: CodeSpec) -> str:
    """Serialize to alist with zero padding to the maximum degree."""
    H = code.H
    m, n = H.shape
    col_deg = H.sum(axis=0)
    row_deg = H.sum(axis=1)
    max_c, max_r = int(col_deg.max()), int(row_deg.max())
    lines = [f"{n} {m}", f"{max_c} {max_r}",
             " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    for nbrs in code.var_neighbors:
        idx = [c + 1 for c in nbrs] + [0] * (max_c - len(nbrs))
        lines.append(" ".join(map(str, idx)))
    for nbrs in code.check_neighbors:
        idx = [v + 1 for v in nbrs] + [0] * (max_r - len(nbrs))
        lines.append(" ".join(map(str, idx)))
    return "\n".join(lines) + "\n"


def parse_dense(text: str, name: str = "dense", K: int | None = None, t_h: int = 0) -> CodeSpec:
    """Parse the fallback format: a line 'M N' followed by M rows of 0/1."""
    rows = _int_rows(text)
    if not rows:
        raise AlistError("empty matrix file")
    ln, header = rows[0]
    if len(header) != 2:
        raise AlistError("header must be 'M N'", ln)
    m, n = header
    if len(rows) - 1 != m:
        where = rows[m + 1][0] if len(rows) - 1 > m else rows[-1][0]
        raise AlistError(f"header declares {m} rows, found {len(rows) - 1}", where)
    H = np.zeros((m, n), dtype=np.uint8)
    for i, (ln, vals) in enumerate(rows[1:]):
        if len(vals) != n:
            raise AlistError(f"expected {n} entries, got {len(vals)}", ln)
        if any(v not in (0, 1) for v in vals):
            raise AlistError("entries must be 0 or 1", ln)
        H[i] = vals
    if K is None:
        K = n - gf2_rank(H)
    return CodeSpec(name=name, H=H, K=K, t_h=t_h)


def to_dense(code: CodeSpec) -> str:
    lines = [f"{code.M} {code.N}"] + [" ".join(map(str, row)) for row in code.H]
    return "\n".join(lines) + "\n"


def load_code(path, fmt: str = "auto", name: str | None = None,
              K: int | None = None, t_h: int | None = None) -> CodeSpec:
    """Read a code from disk. ``fmt`` is 'alist', 'dense' or 'auto' (by suffix)."""
    path = Path(path)
    text = path.read_text()
    if fmt == "auto":
        fmt = "alist" if path.suffix.lower() == ".alist" else "dense"
    name = name or path.stem
    if t_h is None:
        t_h = KNOWN_T_H.get(name, 0)
    if fmt == "alist":
        return parse_alist(text, name=name, K=K, t_h=t_h)
    if fmt == "dense":
        return parse_dense(text, name=name, K=K, t_h=t_h)
    raise ValueError(f"unknown code format {fmt!r}")


def gf2_rank(H: np.ndarray) -> int:
    A = np.array(H, dtype=np.uint8) % 2
    rank = 0
    rows, cols = A.shape
    for col in range(cols):
        pivot = np.flatnonzero(A[rank:, col])
        if pivot.size == 0:
            continue
        p = rank + pivot[0]
        A[[rank, p]] = A[[p, rank]]
        mask = A[:, col].astype(bool)
        mask[rank] = False
        A[mask] ^= A[rank]
        rank += 1
        if rank == rows:
            break
    return rank


# ---------------------------------------------------------------------------
# Small codes and narrow-sense binary BCH codes
# ---------------------------------------------------------------------------

def single_parity_check(n: int) -> CodeSpec:
    return CodeSpec(name=f"spc_{n}_{n - 1}", H=np.ones((1, n), dtype=np.uint8), K=n - 1, t_h=0)


def repetition(n: int) -> CodeSpec:
    H = np.zeros((n - 1, n), dtype=np.uint8)
    for i in range(n - 1):
        H[i, i] = H[i, i + 1] = 1
    return CodeSpec(name=f"rep_{n}_1", H=H, K=1, t_h=(n - 1) // 2)


def hamming74() -> CodeSpec:
    H = np.array([[1, 0, 1, 0, 1, 0, 1],
                  [0, 1, 1, 0, 0, 1, 1],
                  [0, 0, 0, 1, 1, 1, 1]], dtype=np.uint8)
    return CodeSpec(name="hamming_7_4", H=H, K=4, t_h=1)


# primitive polynomials, bit i = coefficient of x^i
_PRIMITIVE = {3: 0b1011, 4: 0b10011, 5: 0b100101, 6: 0b1000011, 7: 0b10001001}

# hard-decision radii of the three BCH codes used in the experiments
KNOWN_T_H = {"bch_63_45": 3, "bch_63_36": 5, "bch_127_64": 10}


def _poly_mul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _poly_divmod(a: int, b: int) -> tuple[int, int]:
    q = 0
    db = b.bit_length()
    while a.bit_length() >= db:
        shift = a.bit_length() - db
        q |= 1 << shift
        a ^= b << shift
    return q, a


def bch_generator(n: int, t: int) -> int:
    """Generator polynomial of the narrow-sense primitive BCH code of length n = 2^m - 1."""
    m = (n + 1).bit_length() - 1
    if (1 << m) - 1 != n or m not in _PRIMITIVE:
        raise ValueError(f"unsupported BCH length {n}")
    prim = _PRIMITIVE[m]
    # antilog table of GF(2^m)
    exp = [1]
    for _ in range(n - 1):
        x = exp[-1] << 1
        if x >> m:
            x ^= prim
        exp.append(x)

    def gf_mul(a, b):
        if a == 0 or b == 0:
            return 0
        return exp[(exp.index(a) + exp.index(b)) % n]

    g = 1
    seen: set[int] = set()
    for i in range(1, 2 * t + 1):
        if i % n in seen:
            continue
        coset = []
        j = i % n
        while j not in coset:
            coset.append(j)
            j = (2 * j) % n
        seen.update(coset)
        # minimal polynomial: prod over the coset of (x - alpha^j), coefficients in GF(2^m)
        poly = [1]
        for j in coset:
            root = exp[j]
            nxt = [0] * (len(poly) + 1)
            for k, c in enumerate(poly):
                nxt[k + 1] ^= c
                nxt[k] ^= gf_mul(c, root)
            poly = nxt
        assert all(c in (0, 1) for c in poly)
        g = _poly_mul(g, sum(c << k for k, c in enumerate(poly)))
    return g


def bch_code(n: int, k: int, t: int) -> CodeSpec:
    """BCH(n, k) with the cyclic parity-check matrix built from h(x) = (x^n + 1)/g(x).

    Row i holds the reciprocal of h(x) shifted by i; rows are linearly
    independent, so the matrix is (n-k) x n.
    """
    g = bch_generator(n, t)
    if g.bit_length() - 1 != n - k:
        raise ValueError(f"designed distance {2 * t + 1} gives k={n - g.bit_length() + 1}, not {k}")
    h, rem = _poly_divmod((1 << n) | 1, g)
    assert rem == 0
    h_coeffs = [(h >> i) & 1 for i in range(k + 1)]
    H = np.zeros((n - k, n), dtype=np.uint8)
    for i in range(n - k):
        for j, c in enumerate(reversed(h_coeffs)):
            H[i, i + j] = c
    return CodeSpec(name=f"bch_{n}_{k}", H=H, K=k, t_h=t)


def bch_generator_matrix(n: int, k: int, t: int) -> np.ndarray:
    """Shifts of g(x); only used to check ``bch_code`` against an independent route."""
    g = bch_generator(n, t)
    coeffs = [(g >> i) & 1 for i in range(n - k + 1)]
    G = np.zeros((k, n), dtype=np.uint8)
    for i in range(k):
        G[i, i:i + n - k + 1] = coeffs
    return G


def builtin_code(name: str) -> CodeSpec:
    """Codes available without a matrix file."""
    table = {
        "hamming_7_4": hamming74,
        "bch_63_45": lambda: bch_code(63, 45, 3),
        "bch_63_36": lambda: bch_code(63, 36, 5),
        "bch_127_64": lambda: bch_code(127, 64, 10),
    }
    if name in table:
        return table[name]()
    parts = name.split("_")
    if parts[0] == "spc" and len(parts) >= 2:
        return single_parity_check(int(parts[1]))
    if parts[0] == "rep" and len(parts) >= 2:
        return repetition(int(parts[1]))
    raise KeyError(f"no built-in code named {name!r}")
