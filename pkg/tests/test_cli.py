import configparser

import numpy as np
import pytest

from activedecode.cli import ConfigError, load_run_config, main
from activedecode.code import hamming74, to_alist
from activedecode.wbp import init_weights, load_weights, save_weights


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


SMOKE = """
[code]
builtin = hamming_7_4

[decoder]
tau = 3

[train]
snr_set = 2, 3
batch_per_snr = 20
max_steps = {steps}
val_every = 2
val_size = 200

[eval]
snr_list = 2, 4
min_errors = 20
batch_size = 200

[run]
seed = 5
workers = 1
"""


def test_missing_code_file_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, "[code]\npath = nowhere/h.alist\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "nowhere/h.alist" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    assert main(["evaluate", "--config", str(tmp_path / "none.ini")]) == 2


def test_bad_value_names_field(tmp_path):
    cfg = _write(tmp_path, "[code]\nbuiltin = hamming_7_4\n[train]\nbatch_per_snr = lots\n")
    with pytest.raises(ConfigError, match=r"^train\.batch_per_snr"):
        load_run_config(cfg)


def test_unknown_section(tmp_path):
    cfg = _write(tmp_path, "[code]\nbuiltin = hamming_7_4\n[trian]\n")
    with pytest.raises(ConfigError, match="trian"):
        load_run_config(cfg)


def test_length_defaults(tmp_path):
    cfg = _write(tmp_path, "[code]\nbuiltin = bch_63_36\n[train]\nstrategy = distance\n")
    rc = load_run_config(cfg)
    assert rc.train.d_max == 2 and rc.train.batch_size == 5000
    cfg = _write(tmp_path, "[code]\nbuiltin = bch_63_36\n[train]\nstrategy = reliability\n")
    assert load_run_config(cfg).train.prior.mu == (0.025, 0.1)


def test_alist_code_path_is_relative_to_config(tmp_path):
    (tmp_path / "codes").mkdir()
    (tmp_path / "codes" / "ham.alist").write_text(to_alist(hamming74()))
    cfg = _write(tmp_path, "[code]\npath = codes/ham.alist\nk = 4\n")
    rc = load_run_config(cfg)
    assert np.array_equal(rc.code.H, hamming74().H) and rc.code.K == 4


def test_out_precedence(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "[code]\nbuiltin = hamming_7_4\n")
    monkeypatch.setenv("ACTIVEDECODE_OUT", str(tmp_path / "env"))
    assert load_run_config(cfg).out == tmp_path / "env"
    assert load_run_config(cfg, out=str(tmp_path / "flag")).out == tmp_path / "flag"
    cfg = _write(tmp_path, "[code]\nbuiltin = hamming_7_4\n[run]\nout = here\n")
    assert load_run_config(cfg).out == tmp_path / "here"


def test_zero_steps_writes_all_ones(tmp_path):
    cfg = _write(tmp_path, SMOKE.format(steps=0))
    out = tmp_path / "o"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    w = load_weights(out / "weights.npz")
    assert np.all(w.flat() == 1.0) and w.tau == 3
    assert (out / "history.csv").read_text().startswith("step,loss,val_fer")
    assert (out / "config.resolved.ini").is_file()


def test_all_ones_weights_evaluate_like_bp(tmp_path):
    cfg = _write(tmp_path, SMOKE.format(steps=0))
    wpath = tmp_path / "ones.npz"
    save_weights(init_weights(hamming74(), 3), wpath, hamming74())
    assert main(["evaluate", "--config", str(cfg), "--out", str(tmp_path / "bp")]) == 0
    assert main(["evaluate", "--config", str(cfg), "--out", str(tmp_path / "wbp"),
                 "--weights", str(wpath)]) == 0
    assert (tmp_path / "bp" / "eval.csv").read_bytes() == (tmp_path / "wbp" / "eval.csv").read_bytes()
    assert '"decoder": "wbp"' in (tmp_path / "wbp" / "eval.meta.json").read_text()


def test_mismatched_weights_exit_3(tmp_path, capsys):
    cfg = _write(tmp_path, SMOKE.format(steps=0))
    from activedecode.code import single_parity_check
    wpath = tmp_path / "spc.npz"
    save_weights(init_weights(single_parity_check(7), 3), wpath)
    assert main(["evaluate", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--weights", str(wpath)]) == 3
    assert "spc" in capsys.readouterr().err


def test_tau_mismatch_exit_3(tmp_path):
    cfg = _write(tmp_path, SMOKE.format(steps=0))
    wpath = tmp_path / "w.npz"
    save_weights(init_weights(hamming74(), 5), wpath)
    assert main(["evaluate", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--weights", str(wpath)]) == 3


@pytest.mark.parametrize("prior", ["tau_set = 5\ncount = 300\nsnr_set = 3", "count = 0"])
def test_prior_degenerate_exit_4(tmp_path, prior, capsys):
    cfg = _write(tmp_path, f"[code]\nbuiltin = hamming_7_4\n[prior]\n{prior}\n")
    assert main(["prior", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4
    assert "degenerate" in capsys.readouterr().err


def test_prior_command_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, "[code]\nbuiltin = bch_63_36\n[prior]\ntau_set = 2, 5\n"
                           "count = 500\nsnr_set = 3, 4\n")
    out = tmp_path / "o"
    assert main(["prior", "--config", str(cfg), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert printed.startswith("mu    = (") and "Sigma = diag(" in printed
    assert len((out / "prior_scatter.csv").read_text().splitlines()) == 501
    back = configparser.ConfigParser()
    back.read(out / "prior.ini")
    assert len(back["sampler"]["prior_mu"].split(",")) == 2


def test_config_echo_roundtrips(tmp_path):
    cfg = _write(tmp_path, SMOKE.format(steps=4))
    a = tmp_path / "a"
    assert main(["train", "--config", str(cfg), "--out", str(a)]) == 0
    rc1 = load_run_config(cfg, out=str(a))
    rc2 = load_run_config(a / "config.resolved.ini")
    assert rc1.train == rc2.train and rc1.decoder == rc2.decoder
    assert rc1.eval_snr_list == rc2.eval_snr_list and rc1.seed == rc2.seed
    b = tmp_path / "b"
    assert main(["train", "--config", str(a / "config.resolved.ini"), "--out", str(b)]) == 0
    assert (a / "history.csv").read_bytes() == (b / "history.csv").read_bytes()
    assert np.array_equal(load_weights(a / "weights.npz").flat(), load_weights(b / "weights.npz").flat())
