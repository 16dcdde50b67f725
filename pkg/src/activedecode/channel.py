"""BPSK over AWGN: modulation, noise, LLRs, hard decisions, SNR conversion.

SNR values are Eb/N0 in dB. Bit 0 maps to +1, so a positive LLR favours 0.
Every stochastic function takes an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def snr_to_sigma(snr_db: float, rate: float) -> float:
    """Noise standard deviation for Eb/N0 = ``snr_db`` at code rate ``rate``."""
    if not 0 < rate <= 1:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    return 1.0 / math.sqrt(2.0 * rate * 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class ChannelSpec:
    snr_db: float
    rate: float

    @property
    def sigma(self) -> float:
        return snr_to_sigma(self.snr_db, self.rate)


def modulate_bpsk(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def awgn(x, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0:
        return x.copy()
    return x + sigma * rng.standard_normal(x.shape)


def llr(y, sigma) -> np.ndarray:
    """Channel LLRs 2y/sigma^2. ``sigma`` may be an array broadcasting against ``y``."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive to form LLRs")
    return 2.0 * np.asarray(y, dtype=np.float64) / sigma ** 2


def hard_decision(z) -> np.ndarray:
    # sigmoid(-z) > 0.5 iff z < 0; z == 0 goes to bit 0
    return (np.asarray(z) < 0).astype(np.uint8)


def zero_codeword_llrs(n: int, snr_db, rate: float, rng: np.random.Generator) -> np.ndarray:
    """LLRs for all-zero codewords, one row per entry of ``snr_db``."""
    snr_db = np.atleast_1d(np.asarray(snr_db, dtype=np.float64))
    sigma = np.array([snr_to_sigma(s, rate) for s in snr_db])[:, None]
    y = 1.0 + sigma * rng.standard_normal((snr_db.size, n))
    return 2.0 * y / sigma ** 2


def spawn(rng_or_seed, n: int) -> list[np.random.Generator]:
    """Independent child generators derived from a seed or a parent generator.

    A parent ``Generator`` is split through its bit generator's seed sequence,
    so children are reproducible from the master seed.
    """
    if isinstance(rng_or_seed, np.random.Generator):
        seq = rng_or_seed.bit_generator.seed_seq
    elif isinstance(rng_or_seed, np.random.SeedSequence):
        seq = rng_or_seed
    else:
        seq = np.random.SeedSequence(rng_or_seed)
    return [np.random.Generator(np.random.PCG64(s)) for s in seq.spawn(n)]
