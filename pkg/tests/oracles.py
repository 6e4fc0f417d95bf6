"""Independent reference computations for the test-suite.

Nothing here calls into the solvers or the Laplacian assembly under test.
"""
import itertools

import numpy as np


def ridge_normal_equations(A, y, beta):
    return np.linalg.solve(A.T @ A + beta * np.eye(A.shape[1]), A.T @ y)


def lasso_brute_force(A, y, beta):
    """Exact minimum of ||y - Ac||^2 + beta ||c||_1 by sign-pattern enumeration.

    For each sign vector s in {-1, 0, 1}^p the objective restricted to that
    orthant is a quadratic; its stationary point is kept when it has the
    assumed signs.  The global minimizer is among the kept points.
    """
    p = A.shape[1]
    best_obj, best_c = float(y @ y), np.zeros(p)
    for signs in itertools.product((-1, 0, 1), repeat=p):
        s = np.array(signs, dtype=float)
        act = np.flatnonzero(s)
        if act.size == 0:
            continue
        Aa = A[:, act]
        G = Aa.T @ Aa
        if np.linalg.matrix_rank(G) < act.size:
            continue
        ca = np.linalg.solve(G, Aa.T @ y - 0.5 * beta * s[act])
        if not np.all(np.sign(ca) == s[act]):
            continue
        c = np.zeros(p)
        c[act] = ca
        r = y - A @ c
        obj = float(r @ r + beta * np.abs(c).sum())
        if obj < best_obj:
            best_obj, best_c = obj, c
    return best_obj, best_c


def theta_pairwise(edges, weights, n):
    """Dense W_e/delta_e co-membership sums, built edge by edge."""
    T = np.zeros((n, n))
    for e, w in zip(edges, weights):
        for u in e:
            for v in e:
                T[u, v] += w / len(e)
    return T


def random_hypergraph(rng, n, t):
    """Random vertex-anchored hyperedges with positive weights."""
    edges = []
    for i in range(n):
        others = rng.permutation(np.delete(np.arange(n), i))[: t - 1]
        edges.append([i, *others])
    return np.array(edges), rng.uniform(0.1, 2.0, size=n)


def brute_force_accuracy(pred, truth):
    pred_ids, truth_ids = np.unique(pred), np.unique(truth)
    best = 0
    if len(pred_ids) <= len(truth_ids):
        for perm in itertools.permutations(truth_ids, len(pred_ids)):
            m = dict(zip(pred_ids, perm))
            best = max(best, sum(m[p] == t for p, t in zip(pred, truth)))
    else:
        for perm in itertools.permutations(pred_ids, len(truth_ids)):
            m = dict(zip(perm, truth_ids))
            best = max(best, sum(m.get(p) == t for p, t in zip(pred, truth)))
    return best / len(pred)
