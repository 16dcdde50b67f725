"""Training-word distributions and the active selection rules.

Every word is an LLR vector for the all-zero codeword sent at an Eb/N0
drawn from a finite SNR set. On top of that plain stream, words can be
restricted by the number of hard-decision errors (rejection sampling),
filtered by what the current decoder does with them, or re-weighted by a
Gaussian prior over two reliability statistics of the channel output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit

from .bp import DecoderConfig, bp_decode_batch
from .channel import hard_decision, zero_codeword_llrs
from .code import CodeSpec

LOG_CLAMP = 1e-12
ACCEPTANCE_FLOOR = 1e-4
VARIANCE_FLOOR = 1e-8


class DegenerateDataError(RuntimeError):
    """A sampler or prior fit ran out of usable words."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReliabilityPrior:
    mu: tuple[float, float]
    sigma: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        S = np.asarray(self.sigma, dtype=np.float64)
        if S.shape != (2, 2) or not np.allclose(S, S.T):
            raise ValueError("prior covariance must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(S).min() <= 0:
            raise ValueError("prior covariance must be positive definite")

    @classmethod
    def diagonal(cls, mu, var) -> ReliabilityPrior:
        return cls(tuple(map(float, mu)), ((float(var[0]), 0.0), (0.0, float(var[1]))))


@dataclass(frozen=True)
class ReliabilityPoint:
    abp: float
    mbce: float


# tuned per code length; keys are N
DEFAULT_PRIORS = {
    63: ReliabilityPrior.diagonal((0.025, 0.1), (6.25e-4, 5.625e-3)),
    127: ReliabilityPrior.diagonal((0.03, 0.1), (6.25e-4, 5.625e-3)),
}
DEFAULT_D_MAX = {63: {"distance": 2, "reliability+distance": 3},
               127: {"distance": 4, "reliability+distance": 5}}

STRATEGIES = ("random", "distance", "reliability", "reliability+distance")


@dataclass(frozen=True)
class SamplerConfig:
    snr_set: tuple[float, ...] = (4.0, 5.0, 6.0, 7.0)
    d_max: Optional[int] = None
    prior: Optional[ReliabilityPrior] = None
    batch_size: int = 5000
    oversample_factor: int = 5
    refill: bool = False

    def __post_init__(self):
        if not self.snr_set:
            raise ValueError("snr_set must be non-empty")
        if self.d_max is not None and self.d_max < 1:
            raise ValueError("d_max must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.oversample_factor < 1:
            raise ValueError("oversample_factor must be >= 1")

    @property
    def distance_set(self) -> tuple[int, ...]:
        return tuple(range(1, self.d_max + 1)) if self.d_max else ()


@dataclass(frozen=True)
class PriorConfig:
    tau_set: tuple[int, ...] = (5, 7, 10, 15)
    count: int = 20000

    def __post_init__(self):
        if not self.tau_set or list(self.tau_set) != sorted(set(self.tau_set)):
            raise ValueError("tau_set must be non-empty, strictly ascending")


@dataclass
class WordBatch:
    """LLR words with their SNR and number of hard-decision errors."""

    z: np.ndarray
    snr: np.ndarray
    d_in: np.ndarray
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.z.shape[0]

    def take(self, idx) -> WordBatch:
        return WordBatch(self.z[idx], self.snr[idx], self.d_in[idx], dict(self.stats))

    @staticmethod
    def concat(parts: Sequence[WordBatch]) -> WordBatch:
        return WordBatch(np.concatenate([p.z for p in parts]),
                         np.concatenate([p.snr for p in parts]),
                         np.concatenate([p.d_in for p in parts]))


# ---------------------------------------------------------------------------
# reliability statistics
# ---------------------------------------------------------------------------

def _bit_probs(c, z):
    c, z = np.asarray(c, dtype=np.float64), np.asarray(z, dtype=np.float64)
    if c.shape[-1] != z.shape[-1]:
        raise ValueError("c and z lengths differ")
    # P(bit=1) and P(bit=0), each with full relative precision
    return c, expit(-z), expit(z)


def abp(c, z) -> np.ndarray | float:
    """Average absolute deviation between the bits and P(bit = 1 | channel)."""
    c, p1, p0 = _bit_probs(c, z)
    dev = np.where(c == 1, p0, np.where(c == 0, p1, np.abs(c - p1)))
    out = np.mean(dev, axis=-1)
    return float(out) if out.ndim == 0 else out


def mbce(c, z) -> np.ndarray | float:
    """Mean per-bit cross entropy between the bits and the channel probabilities."""
    c, p1, p0 = _bit_probs(c, z)
    log_p1 = np.log(np.clip(p1, LOG_CLAMP, 1.0 - LOG_CLAMP))
    log_p0 = np.log(np.clip(p0, LOG_CLAMP, 1.0 - LOG_CLAMP))
    out = np.mean(np.abs(c * log_p1 + (1.0 - c) * log_p0), axis=-1)
    return float(out) if out.ndim == 0 else out


def gaussian_logpdf(points, prior: ReliabilityPrior) -> np.ndarray:
    """Bivariate normal log density; ``points`` has shape (..., 2)."""
    S = np.asarray(prior.sigma, dtype=np.float64)
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0:
        raise np.linalg.LinAlgError("singular prior covariance")
    diff = np.asarray(points, dtype=np.float64) - np.asarray(prior.mu)
    maha = np.einsum("...i,ij,...j->...", diff, np.linalg.inv(S), diff)
    return -0.5 * maha - math.log(2 * math.pi) - 0.5 * logdet


def gaussian_weight(p: ReliabilityPoint, prior: ReliabilityPrior) -> float:
    return float(np.exp(gaussian_logpdf([p.abp, p.mbce], prior)))


# ---------------------------------------------------------------------------
# weighted sampling without replacement
# ---------------------------------------------------------------------------

def weighted_sample_without_replacement(weights, b: int, rng: np.random.Generator,
                                        log_weights: bool = False) -> np.ndarray:
    """Indices of ``b`` distinct items in draw order.

    Each draw picks among the remaining items with probability proportional
    to their weight. Implemented as an exponential race: item i arrives at
    E_i / w_i with E_i ~ Exp(1), and arrival order has exactly that law.
    Zero-weight items only fill in (uniformly) once every positive-weight
    item is taken.
    """
    w = np.asarray(weights, dtype=np.float64)
    n = w.size
    if b > n:
        raise ValueError(f"cannot draw {b} items from {n}")
    if b < 0:
        raise ValueError("b must be non-negative")
    if log_weights:
        if np.isnan(w).any() or (w == np.inf).any():
            raise ValueError("log weights must be finite or -inf")
        logw = w
    else:
        if (w < 0).any() or not np.isfinite(w).all():
            raise ValueError("weights must be finite and non-negative")
        with np.errstate(divide="ignore"):
            logw = np.log(w)
    positive = np.isfinite(logw)
    if not positive.any():
        raise ValueError("all weights are zero")
    e = rng.standard_exponential(n)
    key = np.full(n, np.inf)
    # shift by the max log-weight so the race is scale free
    key[positive] = np.log(e[positive]) - (logw[positive] - logw[positive].max())
    order = np.argsort(key, kind="stable")
    n_pos = int(positive.sum())
    if b > n_pos:
        zeros = order[n_pos:]
        order = np.concatenate([order[:n_pos], zeros[rng.permutation(zeros.size)]])
    return order[:b]


# ---------------------------------------------------------------------------
# word streams
# ---------------------------------------------------------------------------

def sample_channel(code: CodeSpec, snr_set, count: int, rng: np.random.Generator,
                   stratified: bool = False) -> WordBatch:
    """``count`` zero-codeword words; SNR uniform over ``snr_set`` per word,
    or in equal contiguous blocks when ``stratified`` (count must divide)."""
    snr_set = np.asarray(snr_set, dtype=np.float64)
    if stratified:
        if count % snr_set.size:
            raise ValueError("stratified count must be a multiple of |snr_set|")
        snr = np.repeat(snr_set, count // snr_set.size)
    else:
        snr = snr_set[rng.integers(0, snr_set.size, size=count)]
    z = zero_codeword_llrs(code.N, snr, code.rate, rng) if count else np.zeros((0, code.N))
    d_in = hard_decision(z).sum(axis=1).astype(np.int64)
    return WordBatch(z, snr, d_in)


def sample_distance_constrained(code: CodeSpec, snr_set, distance_set, count: int,
                                rng: np.random.Generator,
                                acceptance_floor: float = ACCEPTANCE_FLOOR,
                                chunk: int = 4096) -> WordBatch:
    """Rejection-sample words whose hard decision has a number of errors in ``distance_set``.

    Raises :class:`DegenerateDataError` once at least 10/floor words were
    drawn and the acceptance fraction is below ``acceptance_floor``.
    """
    allowed = np.array(sorted(set(distance_set)), dtype=np.int64)
    if allowed.size == 0:
        raise ValueError("distance_set must be non-empty")
    parts, accepted, drawn = [], 0, 0
    min_draws = int(math.ceil(10 / acceptance_floor))
    while accepted < count:
        batch = sample_channel(code, snr_set, chunk, rng)
        keep = np.isin(batch.d_in, allowed)
        drawn += chunk
        if keep.any():
            parts.append(batch.take(keep))
            accepted += int(keep.sum())
        if drawn >= min_draws and accepted < acceptance_floor * drawn:
            raise DegenerateDataError(
                f"acceptance {accepted}/{drawn} below {acceptance_floor:g}: "
                f"distances {allowed.tolist()} are unreachable at SNRs {list(snr_set)}")
    out = WordBatch.concat(parts).take(slice(0, count))
    out.stats["acceptance"] = accepted / drawn
    out.stats["drawn"] = drawn
    return out


def distance_filter_mask(d_in, d_out) -> np.ndarray:
    """True for words to keep: the decoder neither fixed them nor failed to improve them."""
    d_in, d_out = np.asarray(d_in), np.asarray(d_out)
    return ~((d_out == 0) | (d_out >= d_in))


def filter_by_distance(decoder: Callable[[np.ndarray], np.ndarray], batch: WordBatch,
                       c=None) -> WordBatch:
    """Drop words the current decoder fixes outright or leaves no better.

    ``decoder`` maps an LLR batch to hard decisions and must not stop early.
    ``c`` defaults to the all-zero codeword.
    """
    if len(batch) == 0:
        return batch
    bits = decoder(batch.z)
    c = np.zeros(batch.z.shape[1], dtype=np.uint8) if c is None else np.asarray(c)
    d_out = np.count_nonzero(bits != c, axis=1)
    keep = distance_filter_mask(batch.d_in, d_out)
    out = batch.take(keep)
    out.stats["kept_fraction"] = float(keep.mean())
    return out


def reliability_points(batch: WordBatch, c=None) -> np.ndarray:
    """(B, 2) array of (abp, mbce) against codeword ``c`` (default all-zero)."""
    c = np.zeros(batch.z.shape[1]) if c is None else np.asarray(c)
    return np.stack([abp(c, batch.z), mbce(c, batch.z)], axis=-1).reshape(-1, 2)


def sample_by_reliability(decoder, code: CodeSpec, scfg: SamplerConfig,
                          rng: np.random.Generator) -> WordBatch:
    """Draw an oversampled pool, weight it by the prior density, keep ``batch_size`` words.

    With ``scfg.d_max`` set, the pool is drawn distance-constrained and passed
    through :func:`filter_by_distance` with ``decoder`` before weighting; if
    fewer than ``batch_size`` words survive, all survivors are returned.
    """
    if scfg.prior is None:
        raise ValueError("reliability sampling needs a prior")
    pool_size = scfg.oversample_factor * scfg.batch_size
    if scfg.d_max:
        pool = sample_distance_constrained(code, scfg.snr_set, scfg.distance_set, pool_size, rng)
        pool = filter_by_distance(decoder, pool)
    else:
        pool = sample_channel(code, scfg.snr_set, pool_size, rng)
    if len(pool) == 0:
        return pool
    logw = gaussian_logpdf(reliability_points(pool), scfg.prior)
    b = min(scfg.batch_size, len(pool))
    idx = weighted_sample_without_replacement(logw, b, rng, log_weights=True)
    out = pool.take(idx)
    out.stats["pool"] = len(pool)
    return out


# ---------------------------------------------------------------------------
# prior selection
# ---------------------------------------------------------------------------

@dataclass
class PriorRecord:
    word_id: int
    snr_db: float
    abp: float
    mbce: float
    min_decode_tau: Optional[int]


def choose_prior(code: CodeSpec, snr_set, pcfg: PriorConfig, rng: np.random.Generator,
                 decoder_cfg: DecoderConfig = DecoderConfig()):
    """Fit a diagonal Gaussian to words plain BP decodes only with extra iterations.

    Each word is labelled with the smallest tau in ``pcfg.tau_set`` at which
    plain BP (with early termination) returns the transmitted codeword. The
    target set is every word whose label exists and exceeds ``tau_set[0]``.
    Returns ``(prior, records)``.
    """
    if pcfg.count <= 0:
        raise DegenerateDataError("count must be positive to fit a prior")
    batch = sample_channel(code, snr_set, pcfg.count, rng)
    pts = reliability_points(batch)
    label = np.zeros(len(batch), dtype=np.int64)        # 0 = never decoded
    for tau in pcfg.tau_set:
        cfg = DecoderConfig(tau=tau, clip=decoder_cfg.clip,
                            early_termination=decoder_cfg.early_termination,
                            arctanh_eps=decoder_cfg.arctanh_eps)
        bits, _, _ = bp_decode_batch(code, batch.z, cfg)
        ok = ~bits.any(axis=1) & (label == 0)
        label[ok] = tau
    records = [PriorRecord(i, float(batch.snr[i]), float(pts[i, 0]), float(pts[i, 1]),
                           int(label[i]) if label[i] else None) for i in range(len(batch))]
    target = pts[label > pcfg.tau_set[0]]
    if target.shape[0] == 0:
        raise DegenerateDataError(
            "no word needed extra iterations to decode; widen the SNR set, raise the count, "
            "or configure the prior directly")
    return fit_prior(target), records


def fit_prior(points) -> ReliabilityPrior:
    """Diagonal Gaussian through a set of (abp, mbce) points, with the same checks as choose_prior."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise DegenerateDataError("empty target set")
    var = pts.var(axis=0, ddof=1) if pts.shape[0] > 1 else np.zeros(2)
    if (var < VARIANCE_FLOOR).any():
        raise DegenerateDataError(f"variance {var.tolist()} below floor {VARIANCE_FLOOR}")
    return ReliabilityPrior.diagonal(pts.mean(axis=0), var)


def write_scatter_csv(records: Sequence[PriorRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("word_id,snr_db,abp,mbce,min_decode_tau\n")
        for r in records:
            tau = "none" if r.min_decode_tau is None else str(r.min_decode_tau)
            fh.write(f"{r.word_id},{r.snr_db:g},{r.abp:.6g},{r.mbce:.6g},{tau}\n")
