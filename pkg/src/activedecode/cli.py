"""Command line: ``activedecode train|evaluate|prior --config run.ini``.

The config is an INI file with sections [code], [decoder], [train],
[sampler], [prior], [eval] and [run]. Anything left out takes the defaults
for the code length (batch size, d_max and reliability prior for N = 63 or
127). Every command writes ``config.resolved.ini`` with all defaults
expanded; feeding it back reproduces the run.

Exit codes: 0 ok, 1 training diverged, 2 bad config, 3 weights/code
mismatch, 4 degenerate data.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bp import DecoderConfig
from .code import CodeSpec, builtin_code, load_code
from .eval import bp_decoder, monte_carlo, timing, wbp_decoder, write_metadata, write_report
from .sampling import (DEFAULT_D_MAX, DEFAULT_PRIORS, STRATEGIES, DegenerateDataError, PriorConfig,
                       ReliabilityPrior, choose_prior, write_scatter_csv)
from .training import TrainConfig, TrainingDiverged, train, write_history
from .wbp import WeightsMismatch, load_weights, save_weights

log = logging.getLogger("activedecode")

OUT_ENV = "ACTIVEDECODE_OUT"

EXIT_OK, EXIT_DIVERGED, EXIT_CONFIG, EXIT_MISMATCH, EXIT_DEGENERATE = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    """Invalid run configuration; the message starts with the offending field path."""


@dataclass
class RunConfig:
    code: CodeSpec
    code_source: dict
    decoder: DecoderConfig
    tied: bool
    train: TrainConfig
    prior_cfg: PriorConfig
    prior_snr_set: tuple[float, ...]
    eval_snr_list: tuple[float, ...]
    eval_min_errors: int
    eval_max_frames: int
    eval_batch_size: int
    eval_error_kind: str
    seed: int
    out: Path
    workers: int
    resolved: configparser.ConfigParser = field(repr=False, default=None)


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _num(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _list(vals) -> str:
    return ", ".join(_num(v) for v in vals)


class _Section:
    """Typed access to one config section; errors name 'section.key'."""

    def __init__(self, cp: configparser.ConfigParser, name: str):
        self.name = name
        self.data = dict(cp[name]) if cp.has_section(name) else {}

    def get(self, key, conv, default=None):
        if key not in self.data or self.data[key].strip() == "":
            return default
        try:
            return conv(self.data[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{self.name}.{key}: {exc}") from None


def load_run_config(path, seed: Optional[int] = None, workers: Optional[int] = None,
                    out: Optional[str] = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config: file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    known = {"code", "decoder", "train", "sampler", "prior", "eval", "run"}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"{sec}: unknown section")
    base = path.parent

    # [code]
    c = _Section(cp, "code")
    builtin = c.get("builtin", str)
    code_path = c.get("path", str)
    fmt = c.get("format", str, "auto")
    name = c.get("name", str)
    k = c.get("k", int)
    t_h = c.get("t_h", int)
    if builtin and code_path:
        raise ConfigError("code: give either path or builtin, not both")
    try:
        if builtin:
            code = builtin_code(builtin)
            source = {"builtin": builtin}
        elif code_path:
            p = Path(code_path)
            if not p.is_absolute():
                p = (base / p).resolve()
            if not p.is_file():
                raise ConfigError(f"code.path: file not found: {p}")
            code = load_code(p, fmt=fmt, name=name, K=k, t_h=t_h)
            source = {"path": str(p), "format": fmt}
        else:
            raise ConfigError("code: need 'path' or 'builtin'")
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"code: {exc}") from None
    if builtin and (name or k or t_h is not None):
        code = CodeSpec(name=name or code.name, H=code.H, K=k or code.K,
                        t_h=code.t_h if t_h is None else t_h)
    source.update(name=code.name, k=code.K, t_h=code.t_h)
    n = code.N

    # [decoder]
    d = _Section(cp, "decoder")
    try:
        decoder = DecoderConfig(tau=d.get("tau", int, 5), clip=d.get("clip", float, 10.0),
                                early_termination=d.get("early_termination", _bool, True),
                                arctanh_eps=d.get("arctanh_eps", float, 1e-7))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"decoder: {exc}") from None
    tied = d.get("tied", _bool, False)

    # [train] + [sampler]
    t = _Section(cp, "train")
    s = _Section(cp, "sampler")
    strategy = t.get("strategy", str, "random")
    if strategy not in STRATEGIES:
        raise ConfigError(f"train.strategy: must be one of {', '.join(STRATEGIES)}")
    snr_set = t.get("snr_set", _floats, (4.0, 5.0, 6.0, 7.0))
    d_max = s.get("d_max", int, DEFAULT_D_MAX.get(n, {}).get(strategy))
    prior = None
    mu = s.get("prior_mu", _floats)
    var = s.get("prior_sigma", _floats)
    if mu is not None or var is not None:
        if mu is None or var is None or len(mu) != 2 or len(var) != 2:
            raise ConfigError("sampler.prior_mu/prior_sigma: need two values each")
        try:
            prior = ReliabilityPrior.diagonal(mu, var)
        except ValueError as exc:
            raise ConfigError(f"sampler.prior_sigma: {exc}") from None
    elif strategy.startswith("reliability"):
        prior = DEFAULT_PRIORS.get(n)
    try:
        train_cfg = TrainConfig(
            strategy=strategy, snr_set=snr_set,
            batch_per_snr=t.get("batch_per_snr", int, 1250 if n <= 63 else 300),
            learning_rate=t.get("learning_rate", float, 0.01),
            rms_decay=t.get("rms_decay", float, 0.99),
            rms_eps=t.get("rms_eps", float, 1e-8),
            tau=decoder.tau, clip=decoder.clip, tied=tied,
            max_steps=t.get("max_steps", int, 100_000),
            val_every=t.get("val_every", int, 100),
            patience=t.get("patience", int, 10),
            val_snr=t.get("val_snr", float, 6.0),
            val_size=t.get("val_size", int, 10_000),
            chunk=t.get("chunk", int, 512),
            max_resample=t.get("max_resample", int, 100),
            d_max=d_max if strategy in ("distance", "reliability+distance") else None,
            prior=prior if strategy.startswith("reliability") else None,
            oversample_factor=s.get("oversample_factor", int, 5),
            refill=s.get("refill", _bool, False))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from None

    # [prior]
    pr = _Section(cp, "prior")
    try:
        prior_cfg = PriorConfig(tau_set=pr.get("tau_set", _ints, (5, 7, 10, 15)),
                                count=pr.get("count", int, 20000))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"prior: {exc}") from None
    prior_snr = pr.get("snr_set", _floats, snr_set)

    # [eval]
    e = _Section(cp, "eval")
    snr_list = e.get("snr_list", _floats, tuple(float(x) for x in range(1, 11)))
    if not snr_list:
        raise ConfigError("eval.snr_list: must be non-empty")
    error_kind = e.get("error_kind", str, "frame")
    if error_kind not in ("frame", "bit"):
        raise ConfigError("eval.error_kind: must be 'frame' or 'bit'")
    min_errors = e.get("min_errors", int, 1000)
    max_frames = e.get("max_frames", lambda x: int(float(x)), 10**8)
    eval_batch = e.get("batch_size", int, 2000)
    if min_errors < 1 or max_frames < 1 or eval_batch < 1:
        raise ConfigError("eval: min_errors, max_frames and batch_size must be positive")

    # [run]
    r = _Section(cp, "run")
    seed = seed if seed is not None else r.get("seed", int, 0)
    workers = workers if workers is not None else r.get("workers", int, os.cpu_count() or 1)
    if workers < 1:
        raise ConfigError("run.workers: must be >= 1")
    out_dir = out or r.get("out", str) or os.environ.get(OUT_ENV) or "runs"
    out_path = Path(out_dir)
    if not out_path.is_absolute() and not out and r.get("out", str):
        out_path = base / out_path

    rc = RunConfig(code=code, code_source=source, decoder=decoder, tied=tied, train=train_cfg,
                   prior_cfg=prior_cfg, prior_snr_set=prior_snr, eval_snr_list=snr_list,
                   eval_min_errors=min_errors, eval_max_frames=max_frames,
                   eval_batch_size=eval_batch, eval_error_kind=error_kind, seed=seed,
                   out=out_path.resolve(), workers=workers)
    rc.resolved = resolved_config(rc)
    return rc


def resolved_config(rc: RunConfig) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp["code"] = {k: str(v) for k, v in rc.code_source.items()}
    cp["decoder"] = {"tau": _num(rc.decoder.tau), "clip": _num(rc.decoder.clip),
                     "early_termination": _num(rc.decoder.early_termination),
                     "arctanh_eps": _num(rc.decoder.arctanh_eps), "tied": _num(rc.tied)}
    t = rc.train
    cp["train"] = {"strategy": t.strategy, "snr_set": _list(t.snr_set),
                   "batch_per_snr": _num(t.batch_per_snr), "learning_rate": _num(t.learning_rate),
                   "rms_decay": _num(t.rms_decay), "rms_eps": _num(t.rms_eps),
                   "max_steps": _num(t.max_steps), "val_every": _num(t.val_every),
                   "patience": _num(t.patience), "val_snr": _num(t.val_snr),
                   "val_size": _num(t.val_size), "chunk": _num(t.chunk),
                   "max_resample": _num(t.max_resample)}
    sampler = {"oversample_factor": _num(t.oversample_factor), "refill": _num(t.refill)}
    if t.d_max is not None:
        sampler["d_max"] = _num(t.d_max)
    if t.prior is not None:
        sampler["prior_mu"] = _list(t.prior.mu)
        sampler["prior_sigma"] = _list((t.prior.sigma[0][0], t.prior.sigma[1][1]))
    cp["sampler"] = sampler
    cp["prior"] = {"tau_set": _list(rc.prior_cfg.tau_set), "count": _num(rc.prior_cfg.count),
                   "snr_set": _list(rc.prior_snr_set)}
    cp["eval"] = {"snr_list": _list(rc.eval_snr_list), "min_errors": _num(rc.eval_min_errors),
                  "max_frames": _num(rc.eval_max_frames), "batch_size": _num(rc.eval_batch_size),
                  "error_kind": rc.eval_error_kind}
    cp["run"] = {"seed": _num(rc.seed), "out": str(rc.out), "workers": _num(rc.workers)}
    return cp


def _write_resolved(rc: RunConfig) -> None:
    rc.out.mkdir(parents=True, exist_ok=True)
    with open(rc.out / "config.resolved.ini", "w") as fh:
        rc.resolved.write(fh)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_train(rc: RunConfig) -> int:
    _write_resolved(rc)
    rng = np.random.default_rng(np.random.SeedSequence(rc.seed))
    log.info("training %s on %s, %d words per step", rc.train.strategy, rc.code.name,
             rc.train.batch_size)
    result = train(rc.code, rc.train, rng)
    save_weights(result.weights, rc.out / "weights.npz", rc.code)
    write_history(result.history, rc.out / "history.csv")
    log.info("stopped (%s); best val FER %.5g at step %d", result.stopped,
             result.best_val_fer, result.best_step)
    return EXIT_OK


def cmd_evaluate(rc: RunConfig, weights_path: Optional[str] = None) -> int:
    _write_resolved(rc)
    cfg = rc.decoder
    if weights_path:
        w = load_weights(weights_path)
        w.check_compatible(rc.code, cfg.tau)
        decoder, kind, checksum = wbp_decoder(w, rc.code, cfg), "wbp", _sha256(weights_path)
    else:
        decoder, kind, checksum = bp_decoder(rc.code, cfg), "bp", None

    def progress(pt):
        log.info("%5.2f dB: %d frames, %d frame errors, fer %.3g", pt.snr_db, pt.frames,
                 pt.frame_errors, pt.fer)

    report = monte_carlo(decoder, rc.code, rc.eval_snr_list, seed=rc.seed,
                         min_errors=rc.eval_min_errors, max_frames=rc.eval_max_frames,
                         batch_size=rc.eval_batch_size, workers=rc.workers,
                         error_kind=rc.eval_error_kind, progress=progress)
    write_report(report, rc.out / "eval.csv")
    write_metadata(rc.out / "eval.meta.json", code_name=rc.code.name,
                   code_checksum=rc.code.checksum(), decoder=kind, weights_sha256=checksum,
                   tau=cfg.tau, seed=rc.seed, workers=rc.workers,
                   batch_size=rc.eval_batch_size, min_errors=rc.eval_min_errors,
                   error_kind=rc.eval_error_kind, wall_clock=timing(report))
    return EXIT_OK


def cmd_prior(rc: RunConfig) -> int:
    _write_resolved(rc)
    rng = np.random.default_rng(np.random.SeedSequence(rc.seed))
    prior, records = choose_prior(rc.code, rc.prior_snr_set, rc.prior_cfg, rng, rc.decoder)
    write_scatter_csv(records, rc.out / "prior_scatter.csv")
    print(f"mu    = ({prior.mu[0]:.6g}, {prior.mu[1]:.6g})")
    print(f"Sigma = diag({prior.sigma[0][0]:.6g}, {prior.sigma[1][1]:.6g})")
    with open(rc.out / "prior.ini", "w") as fh:
        fh.write("[sampler]\n")
        fh.write(f"prior_mu = {_list(prior.mu)}\n")
        fh.write(f"prior_sigma = {_list((prior.sigma[0][0], prior.sigma[1][1]))}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="activedecode", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "evaluate", "prior"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out")
        if name == "evaluate":
            p.add_argument("--weights")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = load_run_config(args.config, seed=args.seed, workers=args.workers, out=args.out)
        if args.command == "train":
            return cmd_train(rc)
        if args.command == "evaluate":
            if args.weights and not Path(args.weights).is_file():
                raise ConfigError(f"--weights: file not found: {args.weights}")
            return cmd_evaluate(rc, args.weights)
        return cmd_prior(rc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WeightsMismatch as exc:
        print(f"weights mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except DegenerateDataError as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
