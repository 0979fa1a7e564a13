"""Normalized-adjacency base kernel, Gram matrices and out-of-sample rows.

The base kernel on a visible graph with ``N = n + m`` nodes is

    K(x, x') = N * W(x, x') / sqrt(D(x) D(x'))

so that ``G_K / N`` is the symmetric normalized adjacency.  A node of degree
zero gets an all-zero kernel row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph_data import GraphDataset, VisibleGraph


def _normalized_values(scale, w, d_row, d_col):
    """``scale * w / sqrt(d_row * d_col)`` with 0 wherever a degree is 0.

    Gram entries and query rows both go through here, which keeps kernel
    rows bit-identical to Gram columns.
    """
    prod = d_row * d_col
    out = np.zeros_like(w, dtype=np.float64)
    ok = prod > 0
    out[ok] = scale * w[ok] / np.sqrt(prod[ok])
    return out


@dataclass(frozen=True)
class SparseGram:
    """Symmetric Gram matrix over ``n`` labeled then ``m`` unlabeled samples."""

    matrix: sp.csr_matrix
    n: int

    def __post_init__(self):
        G = self.matrix
        if not sp.issparse(G):
            G = sp.csr_matrix(np.asarray(G, dtype=np.float64))
        G = G.tocsr().astype(np.float64)
        G.sort_indices()
        if G.shape[0] != G.shape[1]:
            raise ValueError(f"Gram matrix must be square, got {G.shape}")
        if not 0 <= self.n <= G.shape[0]:
            raise ValueError(f"n={self.n} outside [0, {G.shape[0]}]")
        object.__setattr__(self, "matrix", G)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.size - self.n

    @property
    def labeled_columns(self) -> sp.csr_matrix:
        """``G_{K, n+m, n}``: the first ``n`` columns."""
        return self.matrix[:, : self.n].tocsr()

    def matvec(self, x):
        return self.matrix @ x

    def normalized_matvec(self, x):
        """``(G_K / (n+m)) @ x``."""
        return (self.matrix @ x) / self.size

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class KernelRowEvaluator:
    """Evaluates ``v_K(x)`` for a node given its weighted edges to visible nodes."""

    degree: np.ndarray
    scale: int
    position: dict

    def row(self, query_edges) -> np.ndarray:
        return kernel_row(self, query_edges)


def gram_from_weights(W, n: int) -> SparseGram:
    """Normalized Gram ``N * D^-1/2 W D^-1/2`` of a symmetric weight matrix.

    Accepts any nonnegative symmetric ``W`` (self-weights allowed); degrees
    are row sums.
    """
    W = sp.csr_matrix(W, dtype=np.float64)
    W.sort_indices()
    N = W.shape[0]
    d = np.asarray(W.sum(axis=1)).ravel()
    coo = W.tocoo()
    vals = _normalized_values(float(N), coo.data, d[coo.row], d[coo.col])
    G = sp.csr_matrix((vals, (coo.row, coo.col)), shape=W.shape)
    G.eliminate_zeros()
    return SparseGram(G, n)


def build_normalized_kernel(vg: VisibleGraph) -> tuple[SparseGram, KernelRowEvaluator]:
    """Gram matrix of the base kernel over ``vg`` plus a row evaluator."""
    if vg.size < 1:
        raise ValueError("visible graph is empty")
    gram = gram_from_weights(vg.adjacency, vg.n)
    ev = KernelRowEvaluator(np.asarray(vg.degree, dtype=np.float64), vg.size, vg.position)
    return gram, ev


def kernel_row(ev: KernelRowEvaluator, query_edges) -> np.ndarray:
    """``v_K(x)`` for a query whose edges are ``[(node_id, weight), ...]``.

    ``node_id`` is a dataset node id that must be visible.  The query's own
    degree counts only these edges; no edges means a zero vector.
    """
    v = np.zeros(ev.scale)
    if len(query_edges) == 0:
        return v
    try:
        idx = np.array([ev.position[int(i)] for i, _ in query_edges], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"node {exc.args[0]} is not visible") from None
    w = np.array([float(wt) for _, wt in query_edges])
    order = np.argsort(idx, kind="stable")
    idx, w = idx[order], w[order]
    dx = np.sum(w)
    vals = _normalized_values(float(ev.scale), w, np.full(len(w), dx), ev.degree[idx])
    np.add.at(v, idx, vals)
    return v


def kernel_rows(ds: GraphDataset, vg: VisibleGraph, node_ids) -> sp.csr_matrix:
    """Kernel rows for many dataset nodes at once, using only visible edges.

    Row ``k`` equals ``kernel_row`` applied to node ``node_ids[k]``'s edges
    into the visible set.
    """
    node_ids = np.asarray(node_ids, dtype=np.int64)
    A = ds.adjacency()
    Wq = A[node_ids][:, vg.visible_ids].tocsr()
    Wq.sort_indices()
    dq = np.asarray(Wq.sum(axis=1)).ravel()
    coo = Wq.tocoo()
    vals = _normalized_values(float(vg.size), coo.data, dq[coo.row], vg.degree[coo.col])
    R = sp.csr_matrix((vals, (coo.row, coo.col)), shape=Wq.shape)
    R.eliminate_zeros()
    return R


def center_gram(G) -> np.ndarray:
    """Empirical double centering ``G - rowmean - colmean + totalmean``."""
    if isinstance(G, SparseGram):
        G = G.toarray()
    elif sp.issparse(G):
        G = G.toarray()
    G = np.asarray(G, dtype=np.float64)
    row = G.mean(axis=1, keepdims=True)
    col = G.mean(axis=0, keepdims=True)
    return G - row - col + G.mean()
