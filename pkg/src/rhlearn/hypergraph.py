"""Hyperedge generation, weighting, incidence structure and the normalized Laplacian.

Every vertex anchors exactly one hyperedge of length ``t``: itself plus its
``t - 1`` most similar vertices.  Edges are stored as an ``(n, t)`` integer
array whose first column is the anchoring vertex.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform


class HypergraphError(ValueError):
    pass


@dataclass(frozen=True)
class Hypergraph:
    n_vertices: int
    edges: np.ndarray
    weights: Optional[np.ndarray] = None
    sigma_fallback: bool = False

    @property
    def t(self) -> int:
        return self.edges.shape[1]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]


@dataclass(frozen=True)
class IncidenceStructure:
    H: np.ndarray
    Dv: np.ndarray
    De: np.ndarray
    W: np.ndarray


def _check_t(t: int, n: int) -> None:
    if not 2 <= t <= n:
        raise HypergraphError(f"hyperedge length t={t} must satisfy 2 <= t <= n={n}")


def _top_edges(score: np.ndarray, t: int) -> np.ndarray:
    """Each row i -> [i, indices of the t-1 largest scores], ties to the lower index."""
    n = score.shape[0]
    edges = np.empty((n, t), dtype=np.int64)
    for i in range(n):
        row = score[i].astype(float, copy=True)
        row[i] = -np.inf
        order = np.argsort(-row, kind="stable")
        edges[i, 0] = i
        edges[i, 1:] = order[: t - 1]
    return edges


def build_rh_edges(sim, t: int) -> Hypergraph:
    """Regression hyperedges: each sample with its top ``t - 1`` similar samples."""
    S = np.asarray(getattr(sim, "S", sim), dtype=float)
    n = S.shape[0]
    _check_t(t, n)
    return Hypergraph(n, _top_edges(S, t))


def _pair_mean(K: np.ndarray, edges: np.ndarray) -> np.ndarray:
    t = edges.shape[1]
    a, b = np.triu_indices(t, k=1)
    return K[edges[:, a], edges[:, b]].mean(axis=1)


def rh_edge_weights(sim, hg: Hypergraph) -> Hypergraph:
    """Weight of each edge = mean similarity over its t(t-1)/2 vertex pairs."""
    S = np.asarray(getattr(sim, "S", sim), dtype=float)
    if S.shape != (hg.n_vertices, hg.n_vertices):
        raise HypergraphError("similarity matrix does not match hypergraph size")
    return replace(hg, weights=_pair_mean(S, hg.edges))


def mean_pairwise_distance(X: np.ndarray) -> float:
    return float(pdist(np.asarray(X, dtype=float).T).mean())


def build_knn_edges(X: np.ndarray, t: int) -> Hypergraph:
    """Neighborhood baseline: each sample with its ``t - 1`` Euclidean nearest neighbors.

    Weights are mean Gaussian-kernel values ``exp(-||xa - xb||^2 / sigma^2)``
    over the edge's vertex pairs, with sigma the mean pairwise distance.  If
    all samples coincide, sigma falls back to 1 and ``sigma_fallback`` is set.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    _check_t(t, n)
    dist = squareform(pdist(X.T))
    edges = _top_edges(-dist, t)
    sigma = float(dist[np.triu_indices(n, 1)].mean())
    fallback = not sigma > 0
    if fallback:
        sigma = 1.0
    K = np.exp(-(dist ** 2) / sigma ** 2)
    return Hypergraph(n, edges, _pair_mean(K, edges), sigma_fallback=fallback)


def incidence(hg: Hypergraph) -> IncidenceStructure:
    if hg.weights is None:
        raise HypergraphError("hyperedge weights are not set")
    n, m = hg.n_vertices, hg.n_edges
    H = np.zeros((n, m))
    H[hg.edges, np.arange(m)[:, None]] = 1.0
    W = np.asarray(hg.weights, dtype=float)
    De = H.sum(axis=0)
    Dv = H @ W
    return IncidenceStructure(H, Dv, De, W)


def laplacian(inc: IncidenceStructure) -> np.ndarray:
    """``I - Dv^-1/2 H W De^-1 H^T Dv^-1/2``, symmetrized."""
    bad = np.flatnonzero(~(inc.Dv > 0))
    if bad.size:
        raise HypergraphError(f"vertex {int(bad[0])} has zero degree")
    Hs = inc.H / np.sqrt(inc.Dv)[:, None]
    theta = (Hs * (inc.W / inc.De)) @ Hs.T
    L = np.eye(inc.H.shape[0]) - theta
    return 0.5 * (L + L.T)


def partition_cost(F: np.ndarray, inc: IncidenceStructure) -> float:
    """Normalized hypergraph cut cost by explicit summation over edges.

    Sums over ordered vertex pairs of each edge with a 1/2 prefactor, which
    makes the value equal ``trace(F^T L F)``.
    """
    F = np.asarray(F, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    G = F / np.sqrt(inc.Dv)[:, None]
    total = 0.0
    for j in range(inc.H.shape[1]):
        members = np.flatnonzero(inc.H[:, j])
        coef = inc.W[j] / inc.De[j]
        for u in members:
            for v in members:
                if u != v:
                    diff = G[u] - G[v]
                    total += coef * float(diff @ diff)
    return 0.5 * total
