"""Greedy baselines: utility-per-marginal-cost greedy and highest-utility-first."""
from __future__ import annotations

import numpy as np

from .errors import InfeasibleError
from .instance import Instance, Matching

TOL = 1e-9


def greedy(inst: Instance, tol: float = TOL) -> Matching:
    """Repeatedly match the edge with the best utility / marginal-cost ratio.

    The marginal cost of ``(i, p)`` is the next platform marginal plus the next
    marginal of every group containing ``i`` on ``p``. Edges with a negative
    marginal cost come first (most negative, then highest utility), then edges
    with zero marginal cost (highest utility), then the best ratio. Remaining
    ties go to the lowest item id, then the lowest platform id. Edges with
    zero utility are never picked.
    """
    if inst.ell <= tol:
        return {}
    order = sorted(range(len(inst.edges)), key=lambda k: inst.edges[k])
    items = np.array([inst.edges[k][0] for k in order], dtype=np.int64)
    plats = np.array([inst.edges[k][1] for k in order], dtype=np.int64)
    utils = np.array([inst.utilities[k] for k in order])

    pairs = list(inst.group_degree)
    pair_id = {pj: r for r, pj in enumerate(pairs)}
    depth = max((len(g) for g in inst.item_groups), default=0)
    dummy = len(pairs)
    edge_pairs = np.full((len(order), max(depth, 1)), dummy, dtype=np.int64)
    for r, (i, p) in enumerate(zip(items, plats)):
        for c, j in enumerate(inst.item_groups[i]):
            edge_pairs[r, c] = pair_id[p, j]

    # padded marginal tables: row x holds marginals 1..cap then +inf
    def padded(tables):
        width = max((t.cap for t in tables), default=0) + 1
        out = np.full((len(tables), width), np.inf)
        for r, t in enumerate(tables):
            out[r, :t.cap] = t.marginals
        return out

    pmarg = padded(inst.platform_tables)
    gm = padded([inst.group_tables[pj] for pj in pairs])
    gmarg = np.vstack([gm, np.zeros((1, gm.shape[1]))])  # last row: the padding pair
    sigma = np.zeros(inst.m, dtype=np.int64)
    nu = np.zeros(len(pairs) + 1, dtype=np.int64)
    free = np.ones(inst.n, dtype=bool)
    live = utils > 0
    rank = np.arange(len(order))

    matching, total = {}, 0.0
    while total < inst.ell - tol:
        cand = live & free[items]
        if not cand.any():
            raise InfeasibleError(
                f"greedy stopped at utility {total:g}, below the floor {inst.ell:g}", best=total)
        cur_p = pmarg[np.arange(inst.m), np.minimum(sigma, pmarg.shape[1] - 1)]
        cur_g = gmarg[np.arange(len(nu)), np.minimum(nu, gmarg.shape[1] - 1)]
        cur_g[dummy] = 0.0
        denom = cur_p[plats] + cur_g[edge_pairs].sum(axis=1)
        idx = np.flatnonzero(cand)
        d, u = denom[idx], utils[idx]
        neg = d < 0
        zero = d == 0
        if neg.any():
            sel = idx[neg]
            k = sel[np.lexsort((rank[sel], -utils[sel], denom[sel]))[0]]
        elif zero.any():
            sel = idx[zero]
            k = sel[np.lexsort((rank[sel], -utils[sel]))[0]]
        else:
            k = idx[int(np.argmax(u / d))]
        i, p = int(items[k]), int(plats[k])
        matching[i] = p
        total += float(utils[k])
        free[i] = False
        sigma[p] += 1
        nu[edge_pairs[k][edge_pairs[k] != dummy]] += 1
    return matching


def naive_greedy(inst: Instance, tol: float = TOL) -> Matching:
    """Take edges by decreasing utility (ties: lowest item, then platform) until the floor is met."""
    matching, total = {}, 0.0
    if inst.ell <= tol:
        return matching
    for k in sorted(range(len(inst.edges)), key=lambda k: (-inst.utilities[k], inst.edges[k])):
        i, p = inst.edges[k]
        if i in matching:
            continue
        matching[i] = p
        total += inst.utilities[k]
        if total >= inst.ell - tol:
            return matching
    raise InfeasibleError(
        f"naive greedy stopped at utility {total:g}, below the floor {inst.ell:g}", best=total)
