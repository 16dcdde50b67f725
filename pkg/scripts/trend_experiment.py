"""Train WBP on BCH(63,36) with random and distance sampling, then compare FERs.

Trains each strategy to the patience stop, evaluates plain BP and both
trained decoders at 6 and 7 dB until ``--min-errors`` frame errors, and
writes ``trend.json`` plus the weights and histories to ``--out``.
Takes hours at the default settings.

    python3 scripts/trend_experiment.py --out runs/trend
"""

import argparse
import json
import logging
from pathlib import Path

import numpy as np

from activedecode.bp import DecoderConfig
from activedecode.code import builtin_code
from activedecode.eval import binomial_interval, bp_decoder, monte_carlo, wbp_decoder
from activedecode.training import TrainConfig, train, write_history
from activedecode.wbp import save_weights


def run(out: Path, seed: int = 0, min_errors: int = 500, max_steps: int = 100_000,
        workers: int = 1, snrs=(6.0, 7.0)) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    code = builtin_code("bch_63_36")
    dec_cfg = DecoderConfig(tau=5)
    decoders = {"bp": bp_decoder(code, dec_cfg)}
    summary = {"code": code.name, "seed": seed, "min_errors": min_errors, "train": {}}
    for i, strategy in enumerate(("random", "distance")):
        cfg = TrainConfig.for_length(63, strategy, max_steps=max_steps)
        res = train(code, cfg, np.random.default_rng(np.random.SeedSequence([seed, i])))
        save_weights(res.weights, out / f"weights_{strategy}.npz", code)
        write_history(res.history, out / f"history_{strategy}.csv")
        summary["train"][strategy] = dict(best_step=res.best_step, best_val_fer=res.best_val_fer,
                                          stopped=res.stopped, steps=len(res.history) - 1)
        decoders[strategy] = wbp_decoder(res.weights, code, dec_cfg)
    fer = {}
    for name, dec in decoders.items():
        rep = monte_carlo(dec, code, snrs, seed=seed + 1000, min_errors=min_errors, workers=workers)
        fer[name] = {str(p.snr_db): dict(frames=p.frames, frame_errors=p.frame_errors, fer=p.fer,
                                         ci=binomial_interval(p.frame_errors, p.frames))
                     for p in rep.points}
    summary["fer"] = fer
    with open(out / "trend.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def check(summary: dict) -> dict:
    """Verdicts: trained beats BP with disjoint 95% intervals; distance <= random at 7 dB."""
    fer = summary["fer"]
    verdict = {}
    for strategy in ("random", "distance"):
        for snr in ("6.0", "7.0"):
            verdict[f"{strategy}<bp@{snr}"] = fer[strategy][snr]["ci"][1] < fer["bp"][snr]["ci"][0]
    verdict["distance<=random@7.0"] = fer["distance"]["7.0"]["fer"] <= fer["random"]["7.0"]["fer"]
    return verdict


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", type=Path, default=Path("runs/trend"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--min-errors", type=int, default=500)
    ap.add_argument("--max-steps", type=int, default=100_000)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    summary = run(args.out, args.seed, args.min_errors, args.max_steps, args.workers)
    for key, ok in check(summary).items():
        print(f"{'PASS' if ok else 'FAIL'} {key}")


if __name__ == "__main__":
    main()
