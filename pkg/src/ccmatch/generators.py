"""Brute-force oracle and instance generators."""
from __future__ import annotations

import itertools
import random

import numpy as np

from .errors import InfeasibleError, InstanceError
from .instance import CostSpec, Instance, assignment_arrays, matching_cost, validate_instance

ORACLE_LIMIT = 2 ** 24
CHUNK = 1 << 16
COST_KINDS = ("quadratic", "piecewise", "linear", "nsw", "table")


def brute_force_opt(inst: Instance, limit: int = ORACLE_LIMIT, tol: float = 1e-9):
    """Cheapest matching with utility >= ell, by exhaustive enumeration.

    Every item is tried unmatched and on each neighbour. Among assignments
    within ``tol`` of the optimum the lexicographically first one wins, where
    item 0 is the most significant position and "unmatched" precedes the
    platforms in increasing order. Returns ``(cost, matching)``.
    """
    options = [[-1] + sorted(inst.edges[k][1] for k in inst.item_edges[i]) for i in range(inst.n)]
    radices = [len(o) for o in options]
    total = 1
    for r in radices:
        total *= r
    if total > limit:
        raise InstanceError([f"{total} assignments exceed the enumeration limit {limit}"])
    opt_arr = [np.array(o) for o in options]
    best_cost, best_row = np.inf, None
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        choices = np.empty((idx.size, inst.n), dtype=np.int64)
        rem = idx
        for i in range(inst.n - 1, -1, -1):
            rem, digit = np.divmod(rem, radices[i])
            choices[:, i] = opt_arr[i][digit]
        cost, util = assignment_arrays(inst, choices)
        cost = np.where(util >= inst.ell - tol, cost, np.inf)
        k = int(np.argmin(cost))
        if cost[k] < best_cost - tol:
            best_cost, best_row = cost[k], choices[k]
    if best_row is None:
        raise InfeasibleError(f"no assignment reaches utility {inst.ell:g}", best=inst.max_utility())
    matching = {i: int(p) for i, p in enumerate(best_row) if p >= 0}
    return matching_cost(inst, matching), matching


# -- random instances ------------------------------------------------------

def _connect(rng, n, m, edges):
    """Add edges until the bipartite graph on items and platforms is connected."""
    # every vertex gets an edge first, so each component has both sides
    for i in range(n):
        if not any(e[0] == i for e in edges):
            edges.add((i, rng.randrange(m)))
    for p in range(m):
        if not any(e[1] == p for e in edges):
            edges.add((rng.randrange(n), p))
    parent = list(range(n + m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, p in edges:
        parent[find(i)] = find(n + p)
    comps = {}
    for v in range(n + m):
        comps.setdefault(find(v), []).append(v)
    groups = sorted(comps.values())
    base = groups[0]
    for comp in groups[1:]:
        # link a member of this component with a member of the base one
        items_here = [v for v in comp if v < n]
        plats_base = [v - n for v in base if v >= n]
        edges.add((rng.choice(items_here), rng.choice(plats_base)))
        base = base + comp
    return edges


def _partition(rng, items, k):
    items = list(items)
    rng.shuffle(items)
    parts = [[x] for x in items[:k]]
    for x in items[k:]:
        parts[rng.randrange(k)].append(x)
    return [sorted(p) for p in parts]


def _laminar(rng, n, num_groups, depth):
    roots = _partition(rng, range(n), num_groups)
    family = [list(r) for r in roots]
    frontier = [(r, 1) for r in roots]
    nested = False
    while frontier:
        g, lvl = frontier.pop(0)
        if lvl >= depth or len(g) < 2 or rng.random() < 0.3:
            continue
        kids = _partition(rng, g, rng.choice([1, 2]) if len(g) > 2 else 1)
        for kid in kids:
            if len(kid) == len(g):
                kid = kid[:-1]
            family.append(kid)
            frontier.append((kid, lvl + 1))
            nested = True
    if not nested and depth >= 2:
        big = max(family, key=len)
        family.append(big[:max(1, len(big) - 1)])
    return family


def _cost_specs(rng, kind, inst_shape):
    """Default specs plus per-platform / per-(platform, group) overrides."""
    m, group_degree, platform_degree = inst_shape
    if kind == "quadratic":
        return CostSpec.make("quadratic"), CostSpec.make("quadratic"), {}, {}
    if kind == "linear":
        return CostSpec.make("linear", slope=1), CostSpec.make("linear", slope=1), {}, {}
    if kind == "nsw":
        return CostSpec.make("nsw_log", scale=1), CostSpec.make("nsw_log", scale=1), {}, {}
    if kind == "piecewise":
        # convex threshold costs: zero up to a threshold, linear above it
        po = {p: CostSpec.make("hinge", threshold=rng.randint(0, 2), slope=rng.randint(1, 3))
              for p in range(m)}
        go = {pj: CostSpec.make("hinge", threshold=rng.randint(0, 1), slope=rng.randint(1, 2))
              for pj in group_degree}
        return CostSpec.make("zero"), CostSpec.make("zero"), po, go
    if kind == "table":
        def table(cap):
            marg = sorted(rng.randint(-3, 6) for _ in range(cap))
            vals = [float(rng.randint(0, 2))]
            for d in marg:
                vals.append(vals[-1] + d)
            return CostSpec.make("table", table=vals)
        po = {p: table(platform_degree[p]) for p in range(m)}
        go = {pj: table(d) for pj, d in group_degree.items()}
        return CostSpec.make("zero"), CostSpec.make("zero"), po, go
    raise InstanceError([f"unknown cost kind {kind!r}; expected one of {COST_KINDS}"])


def gen_random(n: int, m: int, density: float = 0.5, utility_range=(1, 5), num_groups: int = 2,
               structure: str = "disjoint", cost_kind: str = "quadratic", seed: int = 0,
               ell: float | None = None, depth: int = 2, uniform: bool = False) -> Instance:
    """Reproducible random instance on a connected bipartite graph.

    ``structure`` is ``"disjoint"`` (a random partition into ``num_groups``
    groups) or ``"laminar"`` (``num_groups`` roots refined up to ``depth``
    levels). Integer ``utility_range`` bounds give integer utilities; with
    ``uniform`` every edge gets the lower bound. ``ell`` defaults to a random
    value between 0 and the maximum achievable utility.
    """
    if n < 1 or m < 1:
        raise InstanceError(["n and m must be positive"])
    if not 0 < density <= 1:
        raise InstanceError([f"density must be in (0, 1], got {density}"])
    if not 1 <= num_groups <= n:
        raise InstanceError([f"num_groups must be between 1 and n={n}, got {num_groups}"])
    if structure not in ("disjoint", "laminar"):
        raise InstanceError([f"structure must be disjoint or laminar, got {structure!r}"])
    rng = random.Random(seed)
    edges = {(i, p) for i in range(n) for p in range(m) if density >= 1 or rng.random() < density}
    edges = sorted(_connect(rng, n, m, edges))
    lo, hi = utility_range
    integral = isinstance(lo, int) and isinstance(hi, int)
    if uniform:
        utils = [lo] * len(edges)
    elif integral:
        utils = [rng.randint(lo, hi) for _ in edges]
    else:
        utils = [round(rng.uniform(lo, hi), 3) for _ in edges]
    if structure == "disjoint":
        groups = _partition(rng, range(n), num_groups)
    else:
        groups = _laminar(rng, n, num_groups, depth)
    shape = Instance(n, m, edges, utils, 0.0, groups)
    pc, gc, po, go = _cost_specs(rng, cost_kind, (m, shape.group_degree, shape.platform_degree))
    best = shape.max_utility()
    if ell is None:
        if uniform:
            ell = lo * rng.randint(0, n)
        elif integral:
            ell = rng.randint(0, int(best))
        else:
            ell = round(rng.uniform(0, best), 3)
    inst = Instance(n, m, edges, utils, ell, groups, pc, gc, po, go, structure,
                    name=f"random-{structure}-{cost_kind}-{seed}")
    return validate_instance(inst)


def gen_laminar(n: int, m: int, depth: int = 3, seed: int = 0, **kw) -> Instance:
    return gen_random(n, m, structure="laminar", depth=depth, seed=seed, **kw)


# -- hardness reduction ------------------------------------------------------

def gen_independent_set_reduction(n_vertices: int, graph_edges, ell: int) -> Instance:
    """Matching instance with a zero-cost solution iff the graph has an independent set of size ``ell``.

    Items are vertices; platform 0 (``a``) pays utility 1 and platform 1
    (``b``) utility 0. Each graph edge is a group whose cost on ``a`` becomes
    positive once both endpoints sit there. ``a`` charges for more than
    ``ell`` items and ``b`` for more than ``|V| - ell``. Vertices without
    edges get a singleton group with zero cost.
    """
    if not 0 <= ell <= n_vertices:
        raise InstanceError([f"ell must be between 0 and |V|={n_vertices}"])
    gedges = sorted({(min(u, v), max(u, v)) for u, v in graph_edges if u != v})
    edges, utils = [], []
    for v in range(n_vertices):
        edges += [(v, 0), (v, 1)]
        utils += [1.0, 0.0]
    groups = [set(e) for e in gedges]
    covered = set().union(*groups) if groups else set()
    groups += [{v} for v in range(n_vertices) if v not in covered]
    zero = CostSpec.make("zero")
    go = {(0, j): CostSpec.make("piecewise", threshold=1, slope=1) for j in range(len(gedges))}
    po = {0: CostSpec.make("hinge", threshold=ell, slope=1),
          1: CostSpec.make("hinge", threshold=n_vertices - ell, slope=1)}
    inst = Instance(n_vertices, 2, edges, utils, ell, groups, zero, zero, po, go,
                    name=f"indset-{n_vertices}-{ell}")
    return validate_instance(inst)


def has_independent_set(n_vertices: int, graph_edges, k: int) -> bool:
    """Direct enumeration of vertex subsets of size ``k``."""
    adj = {(min(u, v), max(u, v)) for u, v in graph_edges}
    for combo in itertools.combinations(range(n_vertices), k):
        if not any((a, b) in adj for a, b in itertools.combinations(combo, 2)):
            return True
    return False


def random_graph(n_vertices: int, p: float, seed: int):
    rng = random.Random(seed)
    return [(u, v) for u, v in itertools.combinations(range(n_vertices), 2) if rng.random() < p]


def path_graph(k: int):
    return [(v, v + 1) for v in range(k - 1)]


def cycle_graph(k: int):
    return path_graph(k) + [(k - 1, 0)]


def complete_graph(k: int):
    return list(itertools.combinations(range(k), 2))
