import json

import numpy as np
import pytest

from activedecode.bp import DecoderConfig
from activedecode.eval import (EvalReport, SnrPoint, binomial_interval, bp_decoder, monte_carlo,
                               read_report, wbp_decoder, write_metadata, write_report)
from activedecode.wbp import init_weights


def complement(z):
    return np.ones(z.shape, dtype=np.uint8), np.ones(z.shape[0], dtype=np.int64)


def test_always_wrong_decoder_stops_at_exact_count(ham):
    rep = monte_carlo(complement, ham, [3.0], min_errors=1000, batch_size=384)
    pt = rep.points[0]
    assert pt.frames == 1000 and pt.frame_errors == 1000 and pt.fer == 1.0
    assert pt.ber(7) == 1.0 and not pt.censored


def test_noiseless_point_is_censored(ham):
    rep = monte_carlo(bp_decoder(ham), ham, [40.0], max_frames=10**4, batch_size=3000)
    pt = rep.points[0]
    assert pt.frames == 10**4 and pt.frame_errors == 0 and pt.censored
    assert pt.fer == 0.0


def test_scripted_decoder_counts_exactly(ham):
    # every third frame has 2 bit errors, every fifth frame one more
    counter = {"i": 0}

    def scripted(z):
        B = z.shape[0]
        idx = counter["i"] + np.arange(B)
        counter["i"] += B
        bits = np.zeros((B, 7), dtype=np.uint8)
        bits[idx % 3 == 0, :2] = 1
        bits[idx % 5 == 0, 6] = 1
        return bits, np.full(B, 2)

    rep = monte_carlo(scripted, ham, [1.0], min_errors=10**9, max_frames=3000, batch_size=700)
    pt = rep.points[0]
    idx = np.arange(3000)
    assert pt.frames == 3000 and pt.censored
    assert pt.frame_errors == int(((idx % 3 == 0) | (idx % 5 == 0)).sum())
    assert pt.bit_errors == int(2 * (idx % 3 == 0).sum() + (idx % 5 == 0).sum())
    assert pt.avg_iterations == 2.0


def test_bit_error_stopping(ham):
    rep = monte_carlo(complement, ham, [3.0], min_errors=700, batch_size=50, error_kind="bit")
    assert rep.points[0].frames == 100 and rep.points[0].bit_errors == 700


def test_invalid_arguments(ham):
    with pytest.raises(ValueError):
        monte_carlo(complement, ham, [])
    with pytest.raises(ValueError):
        monte_carlo(complement, ham, [1.0], error_kind="word")


def test_same_seed_same_report(bch63):
    dec = bp_decoder(bch63)
    a = monte_carlo(dec, bch63, [4.0, 5.0], seed=9, min_errors=30, batch_size=500)
    b = monte_carlo(dec, bch63, [4.0, 5.0], seed=9, min_errors=30, batch_size=500)
    assert a.rows() == b.rows()


def test_workers_are_deterministic(bch63):
    dec = bp_decoder(bch63)
    a = monte_carlo(dec, bch63, [4.0], seed=2, min_errors=40, batch_size=300, workers=3)
    b = monte_carlo(dec, bch63, [4.0], seed=2, min_errors=40, batch_size=300, workers=3)
    assert a.rows() == b.rows()
    assert a.points[0].frame_errors == 40


def test_all_ones_wbp_matches_bp_curve(bch63):
    kw = dict(seed=4, min_errors=50, batch_size=500)
    a = monte_carlo(bp_decoder(bch63), bch63, [4.0, 5.0], **kw)
    b = monte_carlo(wbp_decoder(init_weights(bch63, 5), bch63), bch63, [4.0, 5.0], **kw)
    assert a.rows() == b.rows()


def test_report_invariants(bch63):
    rep = monte_carlo(bp_decoder(bch63, DecoderConfig(tau=5)), bch63, [3.0, 6.0], seed=1,
                      min_errors=50, batch_size=500)
    for row in rep.rows():
        assert row["frame_errors"] <= row["frames"]
        assert row["bit_errors"] <= 63 * row["frame_errors"]
        assert row["ber"] <= row["fer"]
        assert 1.0 <= row["avg_iterations"] <= 5.0


def test_header_only_csv(tmp_path):
    p = tmp_path / "e.csv"
    write_report(EvalReport("x", 7), p)
    assert p.read_text() == "snr_db,frames,frame_errors,bit_errors,ber,fer,avg_iterations,censored\n"


def test_csv_roundtrip(tmp_path):
    rep = EvalReport("x", 63, [SnrPoint(4.0, 123456, 1000, 3210, 555555, False),
                               SnrPoint(9.0, 10**8, 0, 0, 10**8, True)])
    p = tmp_path / "e.csv"
    write_report(rep, p)
    assert len(p.read_text().splitlines()) == 3
    rows = read_report(p)
    assert [(r["frames"], r["frame_errors"], r["bit_errors"]) for r in rows] == \
        [(123456, 1000, 3210), (10**8, 0, 0)]
    assert rows[1]["censored"] and not rows[0]["censored"]
    assert rows[0]["fer"] == pytest.approx(1000 / 123456, rel=1e-5)


def test_metadata(tmp_path):
    p = tmp_path / "m.json"
    write_metadata(p, seed=3, decoder="bp")
    assert json.loads(p.read_text()) == {"decoder": "bp", "seed": 3}


def test_binomial_interval():
    lo, hi = binomial_interval(50, 100)
    assert lo < 0.5 < hi
    assert binomial_interval(0, 0) == (0.0, 1.0)
    assert binomial_interval(0, 1000)[0] == pytest.approx(0.0, abs=1e-15)
