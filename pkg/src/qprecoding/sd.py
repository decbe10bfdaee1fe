"""Schnorr-Euchner sphere decoding over a finite real alphabet.

Solves ``min ||c - G p||^2`` for ``p`` in ``labels^n`` with ``G`` upper
triangular. The search is depth first from the last coordinate down to the
first, visiting the labels at each level in ascending order of their partial
distance, so a branch that violates the current radius ends the scan of its
siblings.

With M > K the quadratic form of the precoder update is flat along the null
space of the channel except for the multiplier term, and the exact search
can visit an astronomical number of nodes when the multiplier is small. An
optional node budget stops the search early; the result is then the best
leaf found so far, which is never worse than the successive nearest-label
point reached by the first descent.
"""
import numpy as np
from numba import njit

__all__ = ["sphere_decode", "brute_force_ils", "ils_objective", "SdResult"]

_BRUTE_FORCE_LIMIT = 10**7


class SdResult:
    """Search diagnostics returned by ``sphere_decode(..., return_info=True)``."""

    def __init__(self, p, objective, first_radius, nodes, trace, truncated=False):
        self.p = p
        self.objective = objective
        self.first_radius = first_radius
        self.nodes = nodes
        self.trace = trace
        self.truncated = truncated

    def __repr__(self):
        flag = ", truncated" if self.truncated else ""
        return f"SdResult(objective={self.objective:.6g}, nodes={self.nodes}{flag})"


def ils_objective(G, c, p):
    r = np.asarray(c) - np.asarray(G) @ np.asarray(p)
    return float(r @ r)


@njit(cache=True)
def _sort_level(G, c, p, labels, m, xi, order, key):
    n = G.shape[0]
    s = c[m]
    for j in range(m + 1, n):
        s -= G[m, j] * p[j]
    xi[m] = s
    L = labels.shape[0]
    for i in range(L):
        key[i] = abs(s - G[m, m] * labels[i])
    # stable insertion sort: equal keys keep the lower label index first
    for i in range(L):
        order[m, i] = i
    for i in range(1, L):
        cur = order[m, i]
        k = key[cur]
        j = i - 1
        while j >= 0 and key[order[m, j]] > k:
            order[m, j + 1] = order[m, j]
            j -= 1
        order[m, j + 1] = cur


@njit(cache=True)
def _se_search(G, c, labels, trace, max_nodes):
    n = G.shape[0]
    L = labels.shape[0]
    order = np.empty((n, L), dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    p = np.zeros(n)
    best = np.zeros(n)
    partial = np.zeros(n + 1)
    xi = np.zeros(n)
    key = np.empty(L)
    r_opt = np.inf
    first_radius = -1.0
    nodes = 0
    n_trace = 0
    max_trace = trace.shape[0]

    truncated = False
    m = n - 1
    _sort_level(G, c, p, labels, m, xi, order, key)
    while True:
        # the first descent always reaches a leaf, so a result exists here
        if max_nodes > 0 and nodes >= max_nodes and first_radius >= 0:
            truncated = True
            break
        if pos[m] < L:
            idx = order[m, pos[m]]
            diff = xi[m] - G[m, m] * labels[idx]
            dist = partial[m + 1] + diff * diff
            nodes += 1
            if n_trace < max_trace:
                trace[n_trace, 0] = m
                trace[n_trace, 1] = pos[m]
                trace[n_trace, 2] = dist
                n_trace += 1
            if dist < r_opt:
                p[m] = labels[idx]
                partial[m] = dist
                if m == 0:
                    r_opt = dist
                    best[:] = p
                    if first_radius < 0:
                        first_radius = dist
                    pos[m] += 1
                    continue
                m -= 1
                pos[m] = 0
                _sort_level(G, c, p, labels, m, xi, order, key)
                continue
        # every later sibling is at least as far: go up one level
        m += 1
        if m >= n:
            break
        pos[m] += 1
    return best, r_opt, first_radius, nodes, n_trace, truncated


def _check(G, c, labels):
    G = np.ascontiguousarray(G, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    labels = np.ascontiguousarray(labels, dtype=float)
    if labels.size == 0:
        raise ValueError("label set is empty")
    if G.ndim != 2 or G.shape[0] != G.shape[1] or c.shape != (G.shape[0],):
        raise ValueError(f"incompatible shapes G{G.shape}, c{c.shape}")
    return G, c, labels


def sphere_decode(prob, return_info=False, trace_limit=0, max_nodes=None):
    """Exact minimizer of ``||c - G p||^2`` over ``labels^n``.

    Parameters
    ----------
    prob : IlsProblem-like
        Object with ``G`` (upper triangular, positive diagonal), ``c`` and
        ``labels`` attributes.
    return_info : bool
        Return an :class:`SdResult` with the first-descent radius, node count
        and, if ``trace_limit > 0``, the visited ``(level, rank, distance)``
        triples.
    max_nodes : int, optional
        Node budget. When it runs out the best leaf so far is returned and
        ``SdResult.truncated`` is set; the answer is then not certified
        optimal. ``None`` searches exhaustively.
    """
    G, c, labels = _check(prob.G, prob.c, prob.labels)
    if G.shape[0] == 0:
        p = np.zeros(0)
        return SdResult(p, 0.0, 0.0, 0, np.zeros((0, 3))) if return_info else p
    if max_nodes is not None and max_nodes < 1:
        raise ValueError(f"max_nodes must be >= 1, got {max_nodes}")
    trace = np.zeros((int(trace_limit), 3))
    budget = -1 if max_nodes is None else int(max_nodes)
    p, r_opt, first, nodes, n_trace, truncated = _se_search(G, c, labels, trace, budget)
    if not return_info:
        return p
    return SdResult(p, float(r_opt), float(first), int(nodes), trace[:n_trace], bool(truncated))


def brute_force_ils(prob):
    """Exhaustive minimizer; ties go to the lexicographically first index vector."""
    G, c, labels = _check(prob.G, prob.c, prob.labels)
    n, L = G.shape[0], labels.size
    total = L**n
    if total > _BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force over {total} candidates exceeds the {_BRUTE_FORCE_LIMIT} guard")
    weights = L ** np.arange(n - 1, -1, -1)
    best_val, best_p = np.inf, None
    chunk = 1 << 16
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = (idx[:, None] // weights[None, :]) % L
        P = labels[digits]
        R = c[None, :] - P @ G.T
        obj = np.einsum("ij,ij->i", R, R)
        i = int(np.argmin(obj))
        if obj[i] < best_val:
            best_val, best_p = obj[i], P[i].copy()
    return best_p
