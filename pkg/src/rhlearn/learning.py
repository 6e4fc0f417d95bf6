"""Spectral clustering and transduction on a hypergraph Laplacian, plus metrics."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.optimize import linear_sum_assignment

from . import hypergraph as hgmod
from .dataset import make_rng
from .regression import RegressionConfig, leave_one_out_coefficients
from .similarity import normalize_similarity, similarity_from_coefficients


class LearningError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage


@dataclass
class ClusterResult:
    labels: np.ndarray
    embedding: np.ndarray
    objective: float


# --- spectral embedding -------------------------------------------------------

def _fix_signs(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def spectral_embed(L: np.ndarray, m: int, zero_tol: float = 1e-8,
                   skip_null: bool = True, return_eigenvalues: bool = False):
    """Eigenvectors of the ``m`` smallest nonzero eigenvalues of ``L``.

    An eigenvalue counts as zero when it is below ``zero_tol`` times the
    largest eigenvalue (floored at 1).  ``skip_null=False`` keeps the null
    space, i.e. returns the plain ``m`` smallest eigenpairs.  Each vector is
    sign-fixed so its largest-magnitude entry is positive.
    """
    L = np.asarray(L, dtype=float)
    evals, evecs = linalg.eigh(L)
    start = 0
    if skip_null:
        threshold = zero_tol * max(1.0, float(abs(evals[-1])))
        start = int(np.count_nonzero(evals < threshold))
    if m < 1 or start + m > L.shape[0]:
        raise LearningError(
            f"requested {m} eigenvectors but only {L.shape[0] - start} nonzero "
            f"eigenvalues are available; spectrum = {np.array2string(evals, precision=3)}")
    F = _fix_signs(evecs[:, start:start + m])
    return (F, evals[start:start + m]) if return_eigenvalues else F


# --- k-means --------------------------------------------------------------------

def _sq_dists(E, centers):
    return ((E[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _seed_centers(E, k, rng):
    n = E.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((E - E[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((E - E[nxt]) ** 2).sum(axis=1))
    return E[chosen].copy()


def _lloyd(E, centers, max_iter, rel_tol):
    prev = np.inf
    for _ in range(max_iter):
        D = _sq_dists(E, centers)
        labels = np.argmin(D, axis=1)
        inertia = float(D[np.arange(E.shape[0]), labels].sum())
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                centers[j] = E[members].mean(axis=0)
            else:
                # Empty cluster: move it to the point worst served by its center.
                far = int(np.argmax(D[np.arange(E.shape[0]), labels]))
                centers[j] = E[far]
                labels[far] = j
        if prev - inertia <= rel_tol * max(inertia, 1e-300):
            break
        prev = inertia
    D = _sq_dists(E, centers)
    labels = np.argmin(D, axis=1)
    return labels, float(D[np.arange(E.shape[0]), labels].sum())


def kmeans(E: np.ndarray, k: int, restarts: int = 10, seed: int = 0,
           max_iter: int = 300, rel_tol: float = 1e-9) -> ClusterResult:
    """Lloyd's algorithm with D^2-weighted seeding; keeps the lowest-inertia restart."""
    E = np.asarray(E, dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    n = E.shape[0]
    if k < 1 or restarts < 1:
        raise LearningError("k and restarts must be >= 1")
    if k > n:
        raise LearningError(f"k={k} exceeds the number of points n={n}")
    rng = make_rng(seed)
    best = None
    for _ in range(restarts):
        labels, inertia = _lloyd(E, _seed_centers(E, k, rng), max_iter, rel_tol)
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    return ClusterResult(best[0].astype(np.int64), E, best[1])


# --- pipelines ----------------------------------------------------------------

@dataclass
class Stages:
    """Wall-clock timings (ms) and intermediate products of a pipeline run."""

    timings_ms: dict = field(default_factory=dict)
    products: dict = field(default_factory=dict)
    converged: bool = True
    sigma_fallback: bool = False

    def run(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            out = fn(*args, **kwargs)
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, exc) from exc
        self.timings_ms[name] = (time.perf_counter() - t0) * 1e3
        return out


def rh_laplacian(X, cfg: RegressionConfig, t: int, literal_eq3: bool = False,
                 raw_similarity: bool = False, n_jobs: int = 1,
                 stages: Optional[Stages] = None) -> np.ndarray:
    """Regression hypergraph Laplacian of the samples in ``X``.

    ``raw_similarity`` ranks and weights hyperedges with the un-normalized
    similarities.
    """
    st = stages if stages is not None else Stages()
    C = st.run("regression", leave_one_out_coefficients, X, cfg, n_jobs=n_jobs)
    st.converged = C.all_converged
    S = st.run("similarity", similarity_from_coefficients, C)
    if not raw_similarity:
        S = st.run("normalize", normalize_similarity, S, literal=literal_eq3)
    hg = st.run("edges", hgmod.build_rh_edges, S, t)
    hg = st.run("weights", hgmod.rh_edge_weights, S, hg)
    inc = st.run("incidence", hgmod.incidence, hg)
    L = st.run("laplacian", hgmod.laplacian, inc)
    st.products.update(coefficients=C.coeffs, similarity=S.S, H=inc.H,
                       weights=inc.W, laplacian=L)
    return L


def knn_laplacian(X, t: int, stages: Optional[Stages] = None) -> np.ndarray:
    st = stages if stages is not None else Stages()
    hg = st.run("edges", hgmod.build_knn_edges, X, t)
    st.sigma_fallback = hg.sigma_fallback
    inc = st.run("incidence", hgmod.incidence, hg)
    L = st.run("laplacian", hgmod.laplacian, inc)
    st.products.update(H=inc.H, weights=inc.W, laplacian=L)
    return L


def cluster_laplacian(L, k: int, seed: int = 0, restarts: int = 10,
                      skip_null: bool = False, stages: Optional[Stages] = None) -> ClusterResult:
    st = stages if stages is not None else Stages()
    F = st.run("embed", spectral_embed, L, k, skip_null=skip_null)
    res = st.run("kmeans", kmeans, F, k, restarts=restarts, seed=seed)
    return res


def rhsc(X, cfg: RegressionConfig, t: int, k: int, seed: int = 0,
         skip_null: bool = False, stages: Optional[Stages] = None, **kwargs) -> ClusterResult:
    """Regression-based hypergraph spectral clustering of the columns of ``X``.

    With ``skip_null=True`` the embedding drops the numerically-zero
    eigenvalues before taking the ``k`` smallest; by default the null space
    is kept (see :func:`spectral_embed`).
    """
    st = stages if stages is not None else Stages()
    L = rh_laplacian(X, cfg, t, stages=st, **kwargs)
    return cluster_laplacian(L, k, seed=seed, skip_null=skip_null, stages=st)


def knn_hsc(X, t: int, k: int, seed: int = 0, skip_null: bool = False,
            stages: Optional[Stages] = None) -> ClusterResult:
    st = stages if stages is not None else Stages()
    L = knn_laplacian(X, t, stages=st)
    return cluster_laplacian(L, k, seed=seed, skip_null=skip_null, stages=st)


# --- transduction -------------------------------------------------------------

def label_matrix(labels, labeled, n_classes: int) -> np.ndarray:
    """+1 for the own class, -1 for other classes on labeled rows; zero rows otherwise."""
    labels = np.asarray(labels, dtype=np.int64)
    labeled = np.asarray(labeled, dtype=bool)
    Y = -np.ones((labels.size, n_classes))
    Y[np.arange(labels.size), labels] = 1.0
    Y[~labeled] = 0.0
    return Y


def transduce(L: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """``F = 1/(1+lam) * ((L + lam I)/(1+lam))^-1 Y``.

    The two 1/(1+lam) factors cancel, so this is ``(L + lam I)^-1 Y``; the
    minimizer of ``trace(F^T L F) + lam ||F - Y||^2`` is ``lam`` times that,
    with an identical row-wise argmax.
    """
    if not lam > 0:
        raise LearningError(f"lambda must be > 0, got {lam}")
    L = np.asarray(L, dtype=float)
    Y = np.asarray(Y, dtype=float)
    K = (L + lam * np.eye(L.shape[0])) / (1.0 + lam)
    F = linalg.cho_solve(linalg.cho_factor(K, lower=True), Y) / (1.0 + lam)
    return F


def classify(F: np.ndarray) -> np.ndarray:
    return np.argmax(np.asarray(F), axis=1).astype(np.int64)


# --- metrics ------------------------------------------------------------------

def _check_pair(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise LearningError(f"length mismatch: {pred.size} vs {truth.size}")
    return pred, truth


def contingency(pred, truth) -> np.ndarray:
    pred, truth = _check_pair(pred, truth)
    _, p = np.unique(pred, return_inverse=True)
    _, q = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max(initial=-1) + 1, q.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (p, q), 1)
    return table


def clustering_accuracy(pred, truth) -> float:
    """Best match rate under a one-to-one cluster-to-class assignment."""
    table = contingency(pred, truth)
    if table.size == 0:
        return 1.0
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / float(table.sum())


def _entropy(p) -> float:
    p = p[p > 0]
    return -math.fsum(p * np.log(p))


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of the two entropies.

    Entropies are summed with ``math.fsum`` so relabeled but identical
    partitions score exactly 1.0.
    """
    table = contingency(pred, truth).astype(float)
    n = table.sum()
    if n == 0:
        return 1.0
    pxy = table / n
    hx = _entropy(pxy.sum(axis=1))
    hy = _entropy(pxy.sum(axis=0))
    if hx <= 0 and hy <= 0:
        return 1.0
    if hx <= 0 or hy <= 0:
        return 0.0
    mi = math.fsum([hx, hy, -_entropy(pxy.ravel())])
    return float(min(1.0, max(0.0, mi / math.sqrt(hx * hy))))
