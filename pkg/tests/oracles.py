"""Independent reference computations. Nothing here calls the decoders."""

import itertools
import math

import mpmath
import numpy as np


def codewords(H):
    H = np.asarray(H)
    n = H.shape[1]
    words = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    return words[((words @ H.T) % 2 == 0).all(axis=1)]


def bitwise_map_llr(H, z):
    """log P(c_v = 0 | z) / P(c_v = 1 | z) by summing over every codeword."""
    cws = codewords(H)
    z = np.asarray(z, dtype=np.float64)
    # P(c | z) is proportional to exp(-sum_i c_i z_i)
    logp = -(cws * z).sum(axis=1)
    out = np.empty(z.size)
    for v in range(z.size):
        l0 = np.logaddexp.reduce(logp[cws[:, v] == 0])
        l1 = np.logaddexp.reduce(logp[cws[:, v] == 1])
        out[v] = l0 - l1
    return out


def gaussian_tail(x):
    """Phi(-x) via the complementary error function."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def sigma_hp(snr_db, rate, dps=40):
    with mpmath.workdps(dps):
        return 1 / mpmath.sqrt(2 * mpmath.mpf(rate) * mpmath.power(10, mpmath.mpf(snr_db) / 10))


def abp_hp(c, z, dps=40):
    with mpmath.workdps(dps):
        total = mpmath.mpf(0)
        for ci, zi in zip(c, z):
            p1 = 1 / (1 + mpmath.exp(mpmath.mpf(float(zi))))
            total += abs(int(ci) - p1)
        return total / len(z)


def mbce_hp(c, z, clamp=1e-12, dps=40):
    with mpmath.workdps(dps):
        lo, hi = mpmath.mpf(clamp), 1 - mpmath.mpf(clamp)
        total = mpmath.mpf(0)
        for ci, zi in zip(c, z):
            p1 = 1 / (1 + mpmath.exp(mpmath.mpf(float(zi))))
            p0 = 1 / (1 + mpmath.exp(-mpmath.mpf(float(zi))))
            p1 = min(max(p1, lo), hi)
            p0 = min(max(p0, lo), hi)
            total += abs(int(ci) * mpmath.log(p1) + (1 - int(ci)) * mpmath.log(p0))
        return total / len(z)


def central_differences(f, x, h=1e-5):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.size):
        a, b = x.copy(), x.copy()
        a[i] += h
        b[i] -= h
        out[i] = (f(a) - f(b)) / (2 * h)
    return out


def binomial_pmf(n, k, p):
    return math.comb(n, k) * p ** k * (1 - p) ** (n - k)
