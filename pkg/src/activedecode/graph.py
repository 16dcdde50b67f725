"""Edge-indexed Tanner graph arrays shared by the BP and WBP decoders.

Messages live on edges, stored as arrays of shape (batch, E) in the edge
order of ``CodeSpec.edges`` (sorted by check, then variable).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .code import CodeSpec


class TannerGraph:
    def __init__(self, code: CodeSpec):
        self.code = code
        E, N, M = code.n_edges, code.N, code.M
        self.n_edges = E
        self.edge_var = code.edge_var
        self.edge_check = code.edge_check

        # (N, E) incidence: variable marginal = messages @ var_incidence.T
        self.var_incidence = sp.csr_matrix(
            (np.ones(E), (self.edge_var, np.arange(E))), shape=(N, E))

        # checks padded to the max degree; pad slot points at index E
        deg = np.bincount(self.edge_check, minlength=M)
        dmax = int(deg.max())
        self.check_slots = np.full((M, dmax), E, dtype=np.intp)
        self.check_mask = np.arange(dmax)[None, :] < deg[:, None]
        self.check_slots[self.check_mask] = np.arange(E)

        # ordered pairs (src, dst) of distinct edges sharing a variable:
        # src carries m_(h',v), dst is the outgoing edge (v,h)
        edges_of_var = [np.flatnonzero(self.edge_var == v) for v in range(N)]
        src, dst = [], []
        for es in edges_of_var:
            for d in es:
                for s in es:
                    if s != d:
                        src.append(s)
                        dst.append(d)
        order = np.lexsort((np.array(src, dtype=np.intp), np.array(dst, dtype=np.intp)))
        self.pair_src = np.array(src, dtype=np.intp)[order]
        self.pair_dst = np.array(dst, dtype=np.intp)[order]
        self.n_pairs = self.pair_src.size
        self.pair_var = self.edge_var[self.pair_dst]
        self.pair_in_check = self.edge_check[self.pair_src]
        self.pair_out_check = self.edge_check[self.pair_dst]

    def pair_matrix(self, weights: np.ndarray) -> sp.csr_matrix:
        """(E, E) operator mapping check->variable messages to weighted variable->check sums."""
        return sp.csr_matrix((weights, (self.pair_dst, self.pair_src)),
                             shape=(self.n_edges, self.n_edges))

    def marginal(self, msgs: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
        """Sum of (optionally weighted) incoming check messages per variable, shape (B, N)."""
        if weights is None:
            op = self.var_incidence
        else:
            # csr entries are stored by variable; indices holds each entry's edge
            inc = self.var_incidence
            op = sp.csr_matrix((np.asarray(weights)[inc.indices], inc.indices, inc.indptr),
                               shape=self.var_incidence.shape)
        return np.asarray((op @ msgs.T).T)

    def gather_checks(self, x: np.ndarray, pad: float) -> np.ndarray:
        """Edge values arranged as (B, M, dmax), missing slots filled with ``pad``."""
        ext = np.concatenate([x, np.full((x.shape[0], 1), pad)], axis=1)
        return ext[:, self.check_slots]

    def scatter_checks(self, x: np.ndarray) -> np.ndarray:
        return x[:, self.check_mask]

    def leave_one_out_product(self, u: np.ndarray) -> np.ndarray:
        """For every edge (h, v): product of u over the other edges of check h."""
        U = self.gather_checks(u, 1.0)
        return self.scatter_checks(_loo_prod(U))


def _loo_prod(U: np.ndarray) -> np.ndarray:
    """Products excluding each position along the last axis, without division."""
    B, M, d = U.shape
    prefix = np.ones((B, M, d + 1))
    suffix = np.ones((B, M, d + 1))
    np.cumprod(U, axis=2, out=prefix[:, :, 1:])
    np.cumprod(U[:, :, ::-1], axis=2, out=suffix[:, :, 1:])
    suffix = suffix[:, :, ::-1]
    return prefix[:, :, :d] * suffix[:, :, 1:]


@lru_cache(maxsize=16)
def tanner_graph(code: CodeSpec) -> TannerGraph:
    return TannerGraph(code)
