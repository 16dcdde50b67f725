"""Plain flooding belief propagation in the LLR domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import hard_decision
from .code import CodeSpec, syndrome
from .graph import tanner_graph


@dataclass(frozen=True)
class DecoderConfig:
    """Iteration count, message clipping and numerical guards.

    ``clip`` bounds every LLR-domain message; ``arctanh_eps`` keeps the
    check-node product inside (-1, 1) before arctanh.
    """

    tau: int = 5
    clip: float = 10.0
    early_termination: bool = True
    arctanh_eps: float = 1e-7

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.clip <= 0:
            raise ValueError("clip must be positive")
        if not 0 < self.arctanh_eps < 1e-3:
            raise ValueError("arctanh_eps must lie in (0, 1e-3)")


@dataclass
class DecodeResult:
    bits: np.ndarray
    soft: np.ndarray          # posterior LLRs
    iterations_used: int

    def success(self, codeword) -> bool:
        return bool(np.array_equal(self.bits, np.asarray(codeword)))


def check_update(graph, vc: np.ndarray, cfg: DecoderConfig) -> np.ndarray:
    """Check-to-variable LLRs from variable-to-check LLRs (tanh rule)."""
    prod = graph.leave_one_out_product(np.tanh(0.5 * vc))
    bound = 1.0 - cfg.arctanh_eps
    np.clip(prod, -bound, bound, out=prod)
    return np.clip(2.0 * np.arctanh(prod), -cfg.clip, cfg.clip)


def bp_decode_batch(code: CodeSpec, z: np.ndarray, cfg: DecoderConfig = DecoderConfig()):
    """Decode a batch of LLR words, shape (B, N).

    Returns ``(bits, posteriors, iterations)``. With early termination a word
    stops at the first iteration whose hard decision has zero syndrome; its
    outputs are frozen there.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != code.N:
        raise ValueError(f"LLR length {z.shape[1]} != N={code.N}")
    g = tanner_graph(code)
    B = z.shape[0]
    bits = np.zeros((B, code.N), dtype=np.uint8)
    post = np.zeros((B, code.N))
    iters = np.full(B, cfg.tau, dtype=np.int64)

    active = np.arange(B)
    cv = np.zeros((B, g.n_edges))
    for it in range(1, cfg.tau + 1):
        total = z + g.marginal(cv)
        vc = np.clip(total[:, g.edge_var] - cv, -cfg.clip, cfg.clip)
        cv = check_update(g, vc, cfg)
        if np.isnan(cv).any():
            raise FloatingPointError("NaN in check-to-variable messages")
        p = z + g.marginal(cv)
        hd = hard_decision(p)
        post[active] = p
        bits[active] = hd
        if cfg.early_termination and it < cfg.tau:
            done = ~syndrome(code, hd).any(axis=1)
            if done.any():
                iters[active[done]] = it
                keep = ~done
                active, z, cv = active[keep], z[keep], cv[keep]
                if active.size == 0:
                    break
    return bits, post, iters


def bp_decode(code: CodeSpec, z, cfg: DecoderConfig = DecoderConfig()) -> DecodeResult:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("bp_decode takes a single word; use bp_decode_batch for batches")
    bits, post, iters = bp_decode_batch(code, z[None, :], cfg)
    return DecodeResult(bits=bits[0], soft=post[0], iterations_used=int(iters[0]))
