"""Monte-Carlo BER/FER over AWGN with a frame-error stopping rule."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bp import DecoderConfig, bp_decode_batch
from .channel import zero_codeword_llrs
from .code import CodeSpec
from .wbp import WbpWeights, wbp_decode_batch

# decoder(z) -> (bits, iterations); z has shape (B, N)
Decoder = Callable[[np.ndarray], tuple]

REPORT_FIELDS = ("snr_db", "frames", "frame_errors", "bit_errors", "ber", "fer",
                 "avg_iterations", "censored")


@dataclass
class SnrPoint:
    snr_db: float
    frames: int = 0
    frame_errors: int = 0
    bit_errors: int = 0
    iterations: int = 0
    censored: bool = False
    seconds: float = 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    def ber(self, n: int) -> float:
        return self.bit_errors / (self.frames * n) if self.frames else 0.0

    @property
    def avg_iterations(self) -> float:
        return self.iterations / self.frames if self.frames else 0.0


@dataclass
class EvalReport:
    code_name: str
    n: int
    points: list[SnrPoint] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [dict(snr_db=p.snr_db, frames=p.frames, frame_errors=p.frame_errors,
                     bit_errors=p.bit_errors, ber=p.ber(self.n), fer=p.fer,
                     avg_iterations=p.avg_iterations, censored=p.censored)
                for p in self.points]


def bp_decoder(code: CodeSpec, cfg: DecoderConfig = DecoderConfig()) -> Decoder:
    def run(z):
        bits, _, iters = bp_decode_batch(code, z, cfg)
        return bits, iters
    return run


def wbp_decoder(w: WbpWeights, code: CodeSpec, cfg: DecoderConfig = DecoderConfig()) -> Decoder:
    w.check_compatible(code, cfg.tau)

    def run(z):
        bits, _, iters = wbp_decode_batch(w, code, z, cfg)
        return bits, iters
    return run


def _run_batch(decoder: Decoder, code: CodeSpec, snr_db: float, size: int, rng):
    z = zero_codeword_llrs(code.N, np.full(size, snr_db), code.rate, rng)
    bits, iters = decoder(z)
    bit_err = np.count_nonzero(bits, axis=1)
    return bit_err > 0, bit_err, np.asarray(iters)


def monte_carlo(decoder: Decoder, code: CodeSpec, snr_list: Sequence[float],
                seed: int = 0, min_errors: int = 1000, max_frames: int = 10**8,
                batch_size: int = 2000, workers: int = 1, error_kind: str = "frame",
                progress: Callable[[SnrPoint], None] | None = None) -> EvalReport:
    """Stream zero-codeword frames through ``decoder`` until ``min_errors`` errors.

    ``error_kind`` picks frame or bit errors for the stopping count. Each SNR
    point gets its own seed stream, split into one generator per worker;
    workers decode one batch each per round and results are merged in worker
    order. Tallies are truncated at the exact frame where the target is
    reached, so the outcome depends only on (seed, workers, batch_size).
    A point that hits ``max_frames`` short of the target is marked censored.
    """
    if not len(snr_list):
        raise ValueError("snr_list must be non-empty")
    if error_kind not in ("frame", "bit"):
        raise ValueError("error_kind must be 'frame' or 'bit'")
    point_seqs = np.random.SeedSequence(seed).spawn(len(snr_list))
    report = EvalReport(code.name, code.N)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for snr, seq in zip(snr_list, point_seqs):
            rngs = [np.random.Generator(np.random.PCG64(s)) for s in seq.spawn(workers)]
            pt = SnrPoint(float(snr))
            t0 = time.perf_counter()
            counted = 0
            while counted < min_errors and pt.frames < max_frames:
                sizes = [batch_size] * workers
                if pool is None:
                    results = [_run_batch(decoder, code, snr, sizes[0], rngs[0])]
                else:
                    futs = [pool.submit(_run_batch, decoder, code, snr, s, r)
                            for s, r in zip(sizes, rngs)]
                    results = [f.result() for f in futs]
                frame_err = np.concatenate([r[0] for r in results])
                bit_err = np.concatenate([r[1] for r in results])
                iters = np.concatenate([r[2] for r in results])
                errs = frame_err.astype(np.int64) if error_kind == "frame" else bit_err
                cum = counted + np.cumsum(errs)
                stop = frame_err.size
                hit = np.flatnonzero(cum >= min_errors)
                if hit.size:
                    stop = hit[0] + 1
                stop = int(min(stop, max_frames - pt.frames))
                pt.frames += stop
                pt.frame_errors += int(frame_err[:stop].sum())
                pt.bit_errors += int(bit_err[:stop].sum())
                pt.iterations += int(iters[:stop].sum())
                counted += int(errs[:stop].sum())
            pt.censored = counted < min_errors
            pt.seconds = time.perf_counter() - t0
            report.points.append(pt)
            if progress:
                progress(pt)
    finally:
        if pool is not None:
            pool.shutdown()
    return report


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    return f"{v:.6g}"


def write_report(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_FIELDS)
        for row in report.rows():
            writer.writerow([_fmt(row[k]) for k in REPORT_FIELDS])


def read_report(path) -> list[dict]:
    with open(path, newline="") as fh:
        out = []
        for row in csv.DictReader(fh):
            out.append(dict(snr_db=float(row["snr_db"]), frames=int(row["frames"]),
                            frame_errors=int(row["frame_errors"]), bit_errors=int(row["bit_errors"]),
                            ber=float(row["ber"]), fer=float(row["fer"]),
                            avg_iterations=float(row["avg_iterations"]),
                            censored=row["censored"] == "1"))
        return out


def write_metadata(path, **meta) -> None:
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def timing(report: EvalReport) -> list[dict]:
    """Wall-clock seconds per point, kept out of the CSV so reruns compare byte-equal."""
    return [dict(snr_db=p.snr_db, seconds=p.seconds) for p in report.points]


def binomial_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)

