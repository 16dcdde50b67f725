"""Weighted belief propagation: the unrolled decoder with trainable edge weights.

One iteration t = 1..tau is

    pre   = z_v + sum_{h' != h} w[t, (h', v, h)] * m_{t-1, (h', v)}
    u     = tanh(pre / 2)                          variable -> check, tanh domain
    m_t   = 2 arctanh(prod_{v' != v} u_(v', h))    check -> variable, LLR domain
    s_t   = z_v + sum_{h'} w_out[(h', v)] * m_{t, (h', v)}
    xhat  = sigmoid(-s_t)                          output tap, P(bit = 1)

``pre`` and ``m_t`` are clipped to +-clip, the arctanh argument to
+-(1 - eps). Channel weights are fixed to 1. With all weights equal to 1
this is plain BP.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bp import DecoderConfig
from .code import CodeSpec, syndrome
from .graph import TannerGraph, tanner_graph

FORMAT_NAME = "activedecode-wbp"
FORMAT_VERSION = 1


class WeightsMismatch(ValueError):
    """Weights were built for a different code, iteration count or layout."""


@dataclass
class WbpWeights:
    """Trainable tensors.

    ``edge_pair`` has shape (tau, n_params). With ``tied=False`` column p is
    the weight of graph pair p, i.e. w[t, (h', v, h)]; with ``tied=True``
    column e is w[t, (h', v)] for incoming edge e, shared by every outgoing h.
    ``output`` has one weight per edge, shared by all marginalization taps.
    """

    code_name: str
    code_checksum: str
    tau: int
    tied: bool
    edge_pair: np.ndarray
    output: np.ndarray

    @property
    def n_weights(self) -> int:
        return self.edge_pair.size + self.output.size

    def copy(self) -> WbpWeights:
        return WbpWeights(self.code_name, self.code_checksum, self.tau, self.tied,
                          self.edge_pair.copy(), self.output.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.edge_pair.ravel(), self.output])

    def with_flat(self, vec: np.ndarray) -> WbpWeights:
        k = self.edge_pair.size
        return WbpWeights(self.code_name, self.code_checksum, self.tau, self.tied,
                          vec[:k].reshape(self.edge_pair.shape).copy(), vec[k:].copy())

    def param_index(self, graph: TannerGraph) -> np.ndarray:
        """Column of ``edge_pair`` used by each graph pair."""
        return graph.pair_src if self.tied else np.arange(graph.n_pairs)

    def check_compatible(self, code: CodeSpec, tau: int | None = None) -> None:
        if self.code_checksum != code.checksum():
            raise WeightsMismatch(
                f"weights are for code {self.code_name!r} ({self.code_checksum}), "
                f"got {code.name!r} ({code.checksum()})")
        if tau is not None and tau != self.tau:
            raise WeightsMismatch(f"weights have tau={self.tau}, decoder wants tau={tau}")
        g = tanner_graph(code)
        cols = g.n_edges if self.tied else g.n_pairs
        if self.edge_pair.shape != (self.tau, cols) or self.output.shape != (g.n_edges,):
            raise WeightsMismatch("weight tensor shapes do not match the Tanner graph")


def init_weights(code: CodeSpec, tau: int, tied: bool = False) -> WbpWeights:
    g = tanner_graph(code)
    cols = g.n_edges if tied else g.n_pairs
    return WbpWeights(code.name, code.checksum(), tau, tied,
                      np.ones((tau, cols)), np.ones(g.n_edges))


@dataclass
class ForwardRecord:
    """Everything the backward pass needs, one entry per iteration.

    Arrays are (B, E) for edge quantities and (B, N) for taps.
    ``*_clipped`` / ``guarded`` mark where a clamp was active.
    """

    z: np.ndarray
    cv: list = field(default_factory=list)          # m_t after clipping
    u: list = field(default_factory=list)           # tanh-domain v->c messages
    prod: list = field(default_factory=list)        # clamped arctanh argument
    pre_clipped: list = field(default_factory=list)
    guarded: list = field(default_factory=list)
    cv_clipped: list = field(default_factory=list)
    bracket: list = field(default_factory=list)     # s_t
    xhat: list = field(default_factory=list)

    @property
    def tau(self) -> int:
        return len(self.xhat)

    @property
    def taps(self) -> np.ndarray:
        """Shape (tau, B, N)."""
        return np.stack(self.xhat)

    def any_clamp(self) -> np.ndarray:
        """Per-word flag: did any clip or arctanh guard fire?"""
        flags = np.zeros(self.z.shape[0], dtype=bool)
        for masks in (self.pre_clipped, self.guarded, self.cv_clipped):
            for m in masks:
                flags |= m.any(axis=1)
        return flags


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _layer(g: TannerGraph, pair_op, z: np.ndarray, cv_prev: np.ndarray, cfg: DecoderConfig):
    pre = z[:, g.edge_var] + np.asarray((pair_op @ cv_prev.T).T)
    pre_clipped = np.abs(pre) > cfg.clip
    u = np.tanh(0.5 * np.clip(pre, -cfg.clip, cfg.clip))
    prod = g.leave_one_out_product(u)
    bound = 1.0 - cfg.arctanh_eps
    guarded = np.abs(prod) > bound
    np.clip(prod, -bound, bound, out=prod)
    a = 2.0 * np.arctanh(prod)
    cv_clipped = np.abs(a) > cfg.clip
    cv = np.clip(a, -cfg.clip, cfg.clip)
    if np.isnan(cv).any():
        raise FloatingPointError("NaN in check-to-variable messages")
    return pre_clipped, u, prod, guarded, cv, cv_clipped


def wbp_forward(w: WbpWeights, code: CodeSpec, z, cfg: DecoderConfig = DecoderConfig()) -> ForwardRecord:
    """Run all ``w.tau`` iterations without early termination, recording every tap."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != code.N:
        raise ValueError(f"LLR length {z.shape[1]} != N={code.N}")
    w.check_compatible(code)
    g = tanner_graph(code)
    idx = w.param_index(g)
    rec = ForwardRecord(z=z)
    cv = np.zeros((z.shape[0], g.n_edges))
    for t in range(w.tau):
        pre_clipped, u, prod, guarded, cv, cv_clipped = _layer(
            g, g.pair_matrix(w.edge_pair[t][idx]), z, cv, cfg)
        s = z + g.marginal(cv, w.output)
        rec.pre_clipped.append(pre_clipped)
        rec.u.append(u)
        rec.prod.append(prod)
        rec.guarded.append(guarded)
        rec.cv.append(cv)
        rec.cv_clipped.append(cv_clipped)
        rec.bracket.append(s)
        rec.xhat.append(sigmoid(-s))
    return rec


def wbp_decode_batch(w: WbpWeights, code: CodeSpec, z, cfg: DecoderConfig = DecoderConfig()):
    """Evaluation-time decoding with optional syndrome early termination.

    Returns ``(bits, brackets, iterations)``; a bit is 1 iff its tap exceeds
    0.5, i.e. iff the output bracket is negative.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != code.N:
        raise ValueError(f"LLR length {z.shape[1]} != N={code.N}")
    w.check_compatible(code, cfg.tau)
    g = tanner_graph(code)
    idx = w.param_index(g)
    B = z.shape[0]
    bits = np.zeros((B, code.N), dtype=np.uint8)
    post = np.zeros((B, code.N))
    iters = np.full(B, cfg.tau, dtype=np.int64)
    active = np.arange(B)
    cv = np.zeros((B, g.n_edges))
    for t in range(cfg.tau):
        cv = _layer(g, g.pair_matrix(w.edge_pair[t][idx]), z, cv, cfg)[4]
        s = z + g.marginal(cv, w.output)
        hd = (s < 0).astype(np.uint8)
        post[active] = s
        bits[active] = hd
        if cfg.early_termination and t + 1 < cfg.tau:
            done = ~syndrome(code, hd).any(axis=1)
            if done.any():
                iters[active[done]] = t + 1
                keep = ~done
                active, z, cv = active[keep], z[keep], cv[keep]
                if active.size == 0:
                    break
    return bits, post, iters


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_weights(w: WbpWeights, path, code: CodeSpec | None = None) -> None:
    """Write an ``.npz`` container. Index tables are included when ``code`` is given."""
    meta = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "code_name": w.code_name,
            "code_checksum": w.code_checksum, "tau": w.tau, "tied": w.tied}
    arrays = {"meta": np.array(json.dumps(meta, sort_keys=True)),
              "edge_pair": w.edge_pair, "output": w.output}
    if code is not None:
        g = tanner_graph(code)
        # edge_pair columns: (v, h', h) per pair, or (v, h') per incoming edge when tied
        if w.tied:
            arrays["edge_pair_index"] = np.stack([g.edge_var, g.edge_check], axis=1)
        else:
            arrays["edge_pair_index"] = np.stack(
                [g.pair_var, g.pair_in_check, g.pair_out_check], axis=1)
        arrays["output_index"] = np.stack([g.edge_var, g.edge_check], axis=1)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_weights(path) -> WbpWeights:
    with np.load(Path(path), allow_pickle=False) as data:
        try:
            meta = json.loads(str(data["meta"]))
        except KeyError:
            raise WeightsMismatch(f"{path}: not a weights file (no metadata)") from None
        if meta.get("format") != FORMAT_NAME:
            raise WeightsMismatch(f"{path}: unknown format {meta.get('format')!r}")
        if meta["version"] > FORMAT_VERSION:
            raise WeightsMismatch(f"{path}: format version {meta['version']} is newer than supported")
        return WbpWeights(meta["code_name"], meta["code_checksum"], int(meta["tau"]),
                          bool(meta["tied"]), data["edge_pair"].copy(), data["output"].copy())
