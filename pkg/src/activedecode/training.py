"""Multiloss, exact reverse-mode gradients of the unrolled decoder, RMSProp, training loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .bp import DecoderConfig
from .code import CodeSpec
from .graph import TannerGraph, tanner_graph
from .sampling import (DEFAULT_D_MAX, DEFAULT_PRIORS, STRATEGIES, DegenerateDataError,
                       ReliabilityPrior, SamplerConfig, WordBatch, filter_by_distance,
                       sample_by_reliability, sample_channel, sample_distance_constrained)
from .wbp import ForwardRecord, WbpWeights, init_weights, wbp_decode_batch, wbp_forward

log = logging.getLogger(__name__)

LOG_CLAMP = 1e-12


class TrainingDiverged(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# loss and gradients
# ---------------------------------------------------------------------------

def _targets(c, shape) -> np.ndarray:
    c = np.zeros(shape[-1]) if c is None else np.asarray(c, dtype=np.float64)
    return np.broadcast_to(c, shape)


def bce_multiloss(rec: ForwardRecord, c=None) -> float:
    """Binary cross entropy summed over all taps, divided by N, averaged over words.

    ``c`` is the transmitted codeword (a single word or one per batch row);
    it defaults to all-zero.
    """
    if rec.tau == 0:
        raise ValueError("forward record has no taps")
    taps = rec.taps                                   # (tau, B, N)
    c = _targets(c, taps.shape[1:])
    x = np.clip(taps, LOG_CLAMP, 1.0 - LOG_CLAMP)
    per_word = -(c * np.log(x) + (1.0 - c) * np.log(1.0 - x)).sum(axis=(0, 2)) / taps.shape[2]
    return float(per_word.mean())


def _check_backward(g: TannerGraph, grad_prod: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. u of sum_e grad_prod[e] * prod_{e' != e, same check} u[e'].

    For check slots j: dF/du_j = P_j * R_j + L_j * S_{j+1}, with P/S the
    prefix/suffix products and R/L running sums from the right/left; no
    division, so zeros in u are handled exactly.
    """
    G = g.gather_checks(grad_prod, 0.0)               # (B, M, d)
    U = g.gather_checks(u, 1.0)
    B, M, d = U.shape
    P = np.ones((B, M, d + 1))
    S = np.ones((B, M, d + 1))
    np.cumprod(U, axis=2, out=P[:, :, 1:])            # P[j] = prod_{k<j}
    np.cumprod(U[:, :, ::-1], axis=2, out=S[:, :, 1:])
    S = S[:, :, ::-1]                                  # S[j] = prod_{k>=j}
    R = np.zeros((B, M, d))
    for j in range(d - 2, -1, -1):
        R[:, :, j] = G[:, :, j + 1] * S[:, :, j + 2] + U[:, :, j + 1] * R[:, :, j + 1]
    L = np.zeros((B, M, d))
    for j in range(1, d):
        L[:, :, j] = G[:, :, j - 1] * P[:, :, j - 1] + U[:, :, j - 1] * L[:, :, j - 1]
    dU = P[:, :, :d] * R + L * S[:, :, 1:]
    return g.scatter_checks(dU)


def backward(rec: ForwardRecord, w: WbpWeights, code: CodeSpec, c=None) -> WbpWeights:
    """Gradient of :func:`bce_multiloss` w.r.t. every weight, as a ``WbpWeights``.

    Clip and arctanh-guard sites pass no gradient where they were active.
    """
    if rec.tau != w.tau:
        raise ValueError(f"record has {rec.tau} taps, weights have tau={w.tau}")
    g = tanner_graph(code)
    if rec.cv[0].shape[1] != g.n_edges:
        raise ValueError("record does not match the code's Tanner graph")
    idx = w.param_index(g)
    B, N = rec.z.shape
    c = _targets(c, (B, N))
    ev = g.edge_var
    scale = 1.0 / (N * B)

    grad_pair = np.zeros_like(w.edge_pair)
    grad_out = np.zeros_like(w.output)
    g_cv = np.zeros((B, g.n_edges))                  # dL/dm_t from later layers
    for t in range(w.tau - 1, -1, -1):
        x = rec.xhat[t]
        inside = (x > LOG_CLAMP) & (x < 1.0 - LOG_CLAMP)
        g_s = scale * (c - x) * inside                # dL/ds_t
        g_s_e = g_s[:, ev]
        grad_out += np.einsum("be,be->e", g_s_e, rec.cv[t])
        g_cv = g_cv + g_s_e * w.output
        g_a = g_cv * ~rec.cv_clipped[t]
        prod = rec.prod[t]
        g_prod = g_a * (2.0 / (1.0 - prod * prod)) * ~rec.guarded[t]
        u = rec.u[t]
        g_u = _check_backward(g, g_prod, u)
        g_pre = g_u * 0.5 * (1.0 - u * u) * ~rec.pre_clipped[t]
        if t == 0:
            break                                     # m_0 = 0: no weight or message gradient
        cv_prev = rec.cv[t - 1]
        per_pair = np.einsum("bp,bp->p", g_pre[:, g.pair_dst], cv_prev[:, g.pair_src])
        grad_pair[t] = np.bincount(idx, weights=per_pair, minlength=w.edge_pair.shape[1])
        weights_t = w.edge_pair[t][idx]
        g_cv = np.asarray((g.pair_matrix(weights_t).T @ g_pre.T).T)
    return WbpWeights(w.code_name, w.code_checksum, w.tau, w.tied, grad_pair, grad_out)


def loss_and_grad(w: WbpWeights, code: CodeSpec, z: np.ndarray, cfg: DecoderConfig,
                  c=None, chunk: int = 512):
    """Mean loss and gradient over a batch, processed in fixed-order chunks."""
    B = z.shape[0]
    total_loss = 0.0
    grad = None
    for start in range(0, B, chunk):
        zc = z[start:start + chunk]
        cc = c[start:start + chunk] if c is not None and np.ndim(c) == 2 else c
        rec = wbp_forward(w, code, zc, replace(cfg, early_termination=False))
        frac = zc.shape[0] / B
        total_loss += frac * bce_multiloss(rec, cc)
        gc = backward(rec, w, code, cc)
        if grad is None:
            grad = gc
            grad.edge_pair *= frac
            grad.output *= frac
        else:
            grad.edge_pair += frac * gc.edge_pair
            grad.output += frac * gc.output
    return total_loss, grad


# ---------------------------------------------------------------------------
# RMSProp
# ---------------------------------------------------------------------------

@dataclass
class OptimizerState:
    sq_edge_pair: np.ndarray
    sq_output: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, w: WbpWeights) -> OptimizerState:
        return cls(np.zeros_like(w.edge_pair), np.zeros_like(w.output))


def rmsprop_step(state: OptimizerState, w: WbpWeights, grad: WbpWeights, lr: float,
                 decay: float = 0.99, eps: float = 1e-8):
    """One RMSProp update; returns new ``(state, weights)`` without mutating inputs."""
    if grad.edge_pair.shape != w.edge_pair.shape or grad.output.shape != w.output.shape:
        raise ValueError("gradient shape does not match weights")
    if state.sq_edge_pair.shape != w.edge_pair.shape or state.sq_output.shape != w.output.shape:
        raise ValueError("optimizer state shape does not match weights")
    new_state = OptimizerState(
        decay * state.sq_edge_pair + (1.0 - decay) * grad.edge_pair ** 2,
        decay * state.sq_output + (1.0 - decay) * grad.output ** 2,
        state.step + 1)
    new_w = w.copy()
    new_w.edge_pair -= lr * grad.edge_pair / (np.sqrt(new_state.sq_edge_pair) + eps)
    new_w.output -= lr * grad.output / (np.sqrt(new_state.sq_output) + eps)
    return new_state, new_w


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters. Defaults follow the length-63 experiments."""

    strategy: str = "random"
    snr_set: tuple[float, ...] = (4.0, 5.0, 6.0, 7.0)
    batch_per_snr: int = 1250
    learning_rate: float = 0.01
    rms_decay: float = 0.99
    rms_eps: float = 1e-8
    tau: int = 5
    clip: float = 10.0
    tied: bool = False
    max_steps: int = 100_000
    val_every: int = 100
    patience: int = 10
    val_snr: float = 6.0
    val_size: int = 10_000
    d_max: Optional[int] = None
    prior: Optional[ReliabilityPrior] = None
    oversample_factor: int = 5
    refill: bool = False
    max_resample: int = 100
    chunk: int = 512

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_per_snr < 1:
            raise ValueError("batch_per_snr must be >= 1")
        if not self.snr_set:
            raise ValueError("snr_set must be non-empty")
        if self.val_every < 1 or self.patience < 1:
            raise ValueError("val_every and patience must be >= 1")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.strategy in ("distance", "reliability+distance") and not self.d_max:
            raise ValueError(f"strategy {self.strategy!r} needs d_max")
        if self.strategy.startswith("reliability") and self.prior is None:
            raise ValueError(f"strategy {self.strategy!r} needs a prior")

    @property
    def batch_size(self) -> int:
        return len(self.snr_set) * self.batch_per_snr

    @property
    def decoder(self) -> DecoderConfig:
        return DecoderConfig(tau=self.tau, clip=self.clip)

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(snr_set=tuple(self.snr_set), d_max=self.d_max, prior=self.prior,
                             batch_size=self.batch_size, oversample_factor=self.oversample_factor,
                             refill=self.refill)

    @classmethod
    def for_length(cls, n: int, strategy: str = "random", **overrides) -> TrainConfig:
        """Batch size, d_max and prior for code length 63 or 127."""
        kw = dict(strategy=strategy, batch_per_snr=1250 if n <= 63 else 300)
        if strategy in DEFAULT_D_MAX.get(n, {}):
            kw["d_max"] = DEFAULT_D_MAX[n][strategy]
        if strategy.startswith("reliability") and n in DEFAULT_PRIORS:
            kw["prior"] = DEFAULT_PRIORS[n]
        kw.update(overrides)
        return cls(**kw)


@dataclass
class TrainResult:
    weights: WbpWeights
    history: list = field(default_factory=list)
    best_step: int = 0
    best_val_fer: float = math.nan
    stopped: str = ""


HISTORY_FIELDS = ("step", "loss", "val_fer", "lr", "batch_size", "kept_fraction")


def frame_error_rate(w: WbpWeights, code: CodeSpec, z: np.ndarray, cfg: DecoderConfig) -> float:
    bits, _, _ = wbp_decode_batch(w, code, z, cfg)
    return float(bits.any(axis=1).mean())


def draw_batch(w: WbpWeights, code: CodeSpec, cfg: TrainConfig, rng: np.random.Generator) -> WordBatch:
    """One training batch for the configured strategy (may be smaller after filtering)."""
    scfg = cfg.sampler()
    dec_cfg = replace(cfg.decoder, early_termination=False)

    def current_decoder(z):
        return wbp_decode_batch(w, code, z, dec_cfg)[0]

    if cfg.strategy == "random":
        return sample_channel(code, cfg.snr_set, cfg.batch_size, rng, stratified=True)
    if cfg.strategy == "distance":
        pool = sample_distance_constrained(code, cfg.snr_set, scfg.distance_set, cfg.batch_size, rng)
        kept = filter_by_distance(current_decoder, pool)
        if cfg.refill:
            parts = [kept]
            have = len(kept)
            for _ in range(cfg.max_resample):
                if have >= cfg.batch_size:
                    break
                more = filter_by_distance(current_decoder, sample_distance_constrained(
                    code, cfg.snr_set, scfg.distance_set, cfg.batch_size, rng))
                parts.append(more)
                have += len(more)
            frac = kept.stats.get("kept_fraction", 0.0)
            kept = WordBatch.concat(parts).take(slice(0, cfg.batch_size))
            kept.stats["kept_fraction"] = frac
        return kept
    return sample_by_reliability(current_decoder, code, scfg, rng)


def train(code: CodeSpec, cfg: TrainConfig, rng: np.random.Generator,
          weights: WbpWeights | None = None) -> TrainResult:
    """Train from all-ones weights (or ``weights``) on freshly sampled batches.

    Validation FER at ``cfg.val_snr`` on a fixed held-out batch is measured
    before step 0 and every ``val_every`` steps; training stops after
    ``patience`` checks without strict improvement, or at ``max_steps``.
    The best-so-far weights are returned.
    """
    w = weights.copy() if weights is not None else init_weights(code, cfg.tau, cfg.tied)
    dec_cfg = cfg.decoder
    val_rng, train_rng = _split(rng)
    val_z = sample_channel(code, [cfg.val_snr], cfg.val_size, val_rng).z
    state = OptimizerState.fresh(w)

    result = TrainResult(weights=w.copy())
    best = math.inf
    stale = 0
    step = 0
    while True:
        row = dict(step=step, loss=math.nan, val_fer=math.nan, lr=cfg.learning_rate,
                   batch_size=0, kept_fraction=math.nan)
        if step % cfg.val_every == 0 or step == cfg.max_steps:
            fer = frame_error_rate(w, code, val_z, dec_cfg)
            row["val_fer"] = fer
            if fer < best:
                best, stale = fer, 0
                result.weights, result.best_step, result.best_val_fer = w.copy(), step, fer
            elif step > 0:
                stale += 1
            log.info("step %d val_fer %.5f (best %.5f, stale %d)", step, fer, best, stale)
            if stale >= cfg.patience:
                result.history.append(row)
                result.stopped = "patience"
                break
        if step >= cfg.max_steps:
            result.history.append(row)
            result.stopped = "max_steps"
            break

        batch = None
        for _ in range(cfg.max_resample):
            batch = draw_batch(w, code, cfg, train_rng)
            if len(batch):
                break
        if batch is None or len(batch) == 0:
            raise DegenerateDataError(
                f"strategy {cfg.strategy!r} produced empty batches {cfg.max_resample} times in a row")
        loss, grad = loss_and_grad(w, code, batch.z, dec_cfg, chunk=cfg.chunk)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss} at step {step}")
        row.update(loss=loss, batch_size=len(batch),
                   kept_fraction=batch.stats.get("kept_fraction", math.nan))
        result.history.append(row)
        state, w = rmsprop_step(state, w, grad, cfg.learning_rate, cfg.rms_decay, cfg.rms_eps)
        step += 1
    return result


def _split(rng: np.random.Generator):
    seq = rng.bit_generator.seed_seq
    a, b = seq.spawn(2)
    return np.random.Generator(np.random.PCG64(a)), np.random.Generator(np.random.PCG64(b))


def write_history(history, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_FIELDS)
        for row in history:
            writer.writerow([_fmt(row[k]) for k in HISTORY_FIELDS])


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.10g}"
    return str(v)
