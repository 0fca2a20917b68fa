"""
Problem instances: items, platforms, groups and convex cost functions.

An instance is a bipartite graph between ``n`` items and ``m`` platforms, a
utility per edge, a utility floor ``ell``, a family of item groups and, for
every platform ``p``, one convex cost on the number of items it serves plus
one convex cost per group on the number of that group's items it serves.

Cost functions are only ever evaluated at integer counts, so they are stored
as tables (:class:`ConvexCostTable`) built from a :class:`CostSpec` at the
degree bound of the platform or (platform, group) pair.

A matching is a plain ``dict`` mapping item id to platform id.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConvexityError, InstanceError

CONVEXITY_TOL = 1e-9

Matching = dict  # item id -> platform id


@dataclass(frozen=True)
class ConvexCostTable:
    """Values ``f(0), ..., f(cap)`` of a convex function on integer counts."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise InstanceError(["cost table must have at least one value"])
        bad = [k for k, v in enumerate(vals) if not math.isfinite(v)]
        if bad:
            raise InstanceError([f"cost table has non-finite value at k={bad[0]}"])
        marg = self.marginals
        for k in range(1, len(marg)):
            lo, hi = marg[k - 1], marg[k]
            if hi < lo - CONVEXITY_TOL * max(1.0, abs(lo), abs(hi)):
                raise ConvexityError(
                    [f"cost table {list(vals)} is not convex: marginal at k={k} is "
                     f"{lo:g} but at k={k + 1} is {hi:g}"])

    @property
    def cap(self) -> int:
        return len(self.values) - 1

    @cached_property
    def marginals(self) -> tuple:
        """``(f(1)-f(0), ..., f(cap)-f(cap-1))``; entry ``k-1`` is the k-th marginal."""
        v = self.values
        return tuple(v[k] - v[k - 1] for k in range(1, len(v)))

    def marginal(self, k: int) -> float:
        if not 1 <= k <= self.cap:
            raise IndexError(f"marginal index {k} outside 1..{self.cap}")
        return self.values[k] - self.values[k - 1]

    def __call__(self, k: int) -> float:
        return self.values[k]

    def __len__(self):
        return len(self.values)


PRESETS = ("quadratic", "nsw_log", "piecewise", "hinge", "linear", "zero", "table")


@dataclass(frozen=True)
class CostSpec:
    """A cost function description, tabulated on demand at a given cap.

    ``kind`` is one of :data:`PRESETS`. ``params`` holds preset parameters as
    sorted ``(name, value)`` pairs so the description stays hashable; ``table`` is
    only used by ``kind="table"``.
    """

    kind: str
    params: tuple = ()
    table: tuple | None = None

    @classmethod
    def make(cls, kind: str, table: Sequence[float] | None = None, **params) -> "CostSpec":
        if kind not in PRESETS:
            raise InstanceError([f"unknown cost preset {kind!r}"])
        if kind == "table":
            if table is None:
                raise InstanceError(["table cost needs explicit values"])
            return cls("table", (), tuple(float(v) for v in table))
        return cls(kind, tuple(sorted((k, float(v)) for k, v in params.items())), None)

    def param(self, name, default=None):
        return dict(self.params).get(name, default)

    def tabulate(self, cap: int) -> ConvexCostTable:
        return cost_preset(self, cap)

    def to_json(self) -> dict:
        if self.kind == "table":
            return {"table": list(self.table)}
        out = {"preset": self.kind}
        if self.params:
            out["params"] = {k: _compact(v) for k, v in self.params}
        return out

    @classmethod
    def from_json(cls, obj) -> "CostSpec":
        if isinstance(obj, str):
            return cls.make(obj)
        if not isinstance(obj, Mapping):
            raise InstanceError([f"cost entry must be an object, got {obj!r}"])
        if "table" in obj:
            return cls.make("table", table=obj["table"])
        if "preset" not in obj:
            raise InstanceError([f"cost entry needs 'preset' or 'table': {obj!r}"])
        return cls.make(obj["preset"], **dict(obj.get("params", {})))


def _compact(v: float):
    return int(v) if float(v).is_integer() else v


def cost_preset(kind, cap: int, **params) -> ConvexCostTable:
    """Tabulate a cost function on ``0..cap``.

    >>> cost_preset("quadratic", 3).values
    (0.0, 1.0, 4.0, 9.0)
    >>> cost_preset("hinge", 3, threshold=1, slope=2).values
    (0.0, 0.0, 2.0, 4.0)

    ``piecewise`` is ``0`` up to ``threshold`` and ``slope * k`` above it. That
    jump is only convex while ``cap <= threshold + 1``; beyond that a
    :class:`ConvexityError` is raised. ``hinge`` is the convex
    ``slope * max(0, k - threshold)``. ``nsw_log`` is ``-log(k + 1) / scale``.
    """
    spec = kind if isinstance(kind, CostSpec) else CostSpec.make(kind, **params)
    if cap < 0:
        raise InstanceError([f"cap must be nonnegative, got {cap}"])
    ks = range(cap + 1)
    k = spec.kind
    if k == "quadratic":
        vals = [float(x * x) for x in ks]
    elif k == "linear":
        slope = spec.param("slope", 1.0)
        vals = [slope * x for x in ks]
    elif k == "zero":
        vals = [0.0] * (cap + 1)
    elif k == "nsw_log":
        scale = spec.param("scale", 1.0)
        if scale <= 0:
            raise InstanceError([f"nsw_log scale must be positive, got {scale:g}"])
        vals = [-math.log(x + 1) / scale for x in ks]
    elif k == "piecewise":
        t, s = spec.param("threshold", 0.0), spec.param("slope", 1.0)
        vals = [0.0 if x <= t else s * x for x in ks]
    elif k == "hinge":
        t, s = spec.param("threshold", 0.0), spec.param("slope", 1.0)
        if s < 0:
            raise InstanceError([f"hinge slope must be nonnegative, got {s:g}"])
        vals = [s * max(0.0, x - t) for x in ks]
    elif k == "table":
        if len(spec.table) < cap + 1:
            raise InstanceError(
                [f"explicit cost table has {len(spec.table)} values but cap {cap} "
                 f"needs {cap + 1}"])
        vals = list(spec.table[:cap + 1])
    else:  # pragma: no cover - guarded by CostSpec.make
        raise InstanceError([f"unknown cost preset {k!r}"])
    return ConvexCostTable(tuple(vals))


QUADRATIC = CostSpec.make("quadratic")


@dataclass(frozen=True)
class GroupFamily:
    """A classified group family.

    ``kind`` is ``"disjoint"``, ``"laminar"`` or ``"general"``. For the first
    two, ``parent[j]`` is the index of the smallest group strictly above
    ``j`` (``None`` for roots), ``level[j]`` is 1 for groups without children
    and ``1 + max(child levels)`` otherwise, and ``depth`` is the largest
    level. For general families those fields are empty / zero.
    """

    groups: tuple
    kind: str
    parent: tuple = ()
    level: tuple = ()
    depth: int = 0

    @cached_property
    def children(self) -> tuple:
        kids = [[] for _ in self.groups]
        for j, par in enumerate(self.parent):
            if par is not None:
                kids[par].append(j)
        return tuple(tuple(k) for k in kids)

    @property
    def is_nested(self) -> bool:
        return self.kind in ("disjoint", "laminar")


def _below(groups, a: int, b: int) -> bool:
    """Group ``a`` sits strictly below ``b`` in the containment order.

    Identical sets are chained by index so duplicates still form a forest.
    """
    ga, gb = groups[a], groups[b]
    if ga < gb:
        return True
    return ga == gb and a > b


def classify_groups(groups: Iterable[Iterable[int]]) -> GroupFamily:
    """Classify a group family as disjoint, laminar or general.

    >>> classify_groups([{1}, {2}, {3}]).kind
    'disjoint'
    >>> classify_groups([{1, 2}, {2, 3}]).kind
    'general'
    >>> fam = classify_groups([{1, 2, 3, 4, 5, 6}, {1, 2}, {3, 4, 5, 6}, {5, 6}])
    >>> fam.kind, fam.depth, fam.parent
    ('laminar', 3, (None, 0, 0, 2))
    """
    gs = tuple(frozenset(g) for g in groups)
    tau = len(gs)
    disjoint = True
    for a in range(tau):
        for b in range(a + 1, tau):
            inter = gs[a] & gs[b]
            if not inter:
                continue
            disjoint = False
            if not (gs[a] <= gs[b] or gs[b] <= gs[a]):
                return GroupFamily(gs, "general")
    if disjoint:
        return GroupFamily(gs, "disjoint", (None,) * tau, (1,) * tau, 1 if tau else 0)

    parent = []
    for a in range(tau):
        above = [b for b in range(tau) if b != a and _below(gs, a, b)]
        # the minimal element of a chain is the one below all the others
        best = None
        for b in above:
            if best is None or _below(gs, b, best):
                best = b
        parent.append(best)

    children = [[] for _ in range(tau)]
    for a, par in enumerate(parent):
        if par is not None:
            children[par].append(a)
    level = [0] * tau
    order = sorted(range(tau), key=lambda j: (len(gs[j]), -j))
    for j in order:
        level[j] = 1 + max((level[c] for c in children[j]), default=0)
    return GroupFamily(gs, "laminar", tuple(parent), tuple(level), max(level))


@dataclass(frozen=True)
class Instance:
    """A convex-cost matching instance. See the module docstring."""

    n: int
    m: int
    edges: tuple
    utilities: tuple
    ell: float
    groups: tuple
    platform_cost: CostSpec = QUADRATIC
    group_cost: CostSpec = QUADRATIC
    platform_overrides: Mapping = field(default_factory=dict)
    group_overrides: Mapping = field(default_factory=dict)
    declared_structure: str | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(i), int(p)) for i, p in self.edges))
        object.__setattr__(self, "utilities", tuple(float(u) for u in self.utilities))
        object.__setattr__(self, "groups", tuple(frozenset(int(x) for x in g) for g in self.groups))
        object.__setattr__(self, "ell", float(self.ell))

    # -- graph structure -------------------------------------------------
    @cached_property
    def edge_index(self) -> dict:
        return {e: k for k, e in enumerate(self.edges)}

    @cached_property
    def platform_degree(self) -> tuple:
        deg = [0] * self.m
        for _, p in self.edges:
            deg[p] += 1
        return tuple(deg)

    @cached_property
    def item_edges(self) -> tuple:
        out = [[] for _ in range(self.n)]
        for k, (i, _) in enumerate(self.edges):
            out[i].append(k)
        return tuple(tuple(x) for x in out)

    @cached_property
    def family(self) -> GroupFamily:
        return classify_groups(self.groups)

    @cached_property
    def item_groups(self) -> tuple:
        """Groups containing each item, smallest first (a chain for laminar families)."""
        out = [[] for _ in range(self.n)]
        for j, g in enumerate(self.groups):
            for i in g:
                if 0 <= i < self.n:
                    out[i].append(j)
        gs = self.groups
        return tuple(tuple(sorted(js, key=lambda j: (len(gs[j]), -j))) for js in out)

    @cached_property
    def group_degree(self) -> dict:
        """``(p, j) -> Δ_j(p)``, only for pairs with at least one adjacent item."""
        deg = {}
        for i, p in self.edges:
            for j in self.item_groups[i]:
                deg[p, j] = deg.get((p, j), 0) + 1
        return dict(sorted(deg.items()))

    @cached_property
    def platform_groups(self) -> tuple:
        """``g(p)``: sorted groups with an item adjacent to ``p``."""
        out = [[] for _ in range(self.m)]
        for p, j in self.group_degree:
            out[p].append(j)
        return tuple(tuple(x) for x in out)

    # -- costs -----------------------------------------------------------
    def platform_spec(self, p: int) -> CostSpec:
        return self.platform_overrides.get(p, self.platform_cost)

    def group_spec(self, p: int, j: int) -> CostSpec:
        return self.group_overrides.get((p, j), self.group_cost)

    @cached_property
    def platform_tables(self) -> tuple:
        return tuple(self.platform_spec(p).tabulate(self.platform_degree[p]) for p in range(self.m))

    @cached_property
    def group_tables(self) -> dict:
        return {pj: self.group_spec(*pj).tabulate(d) for pj, d in self.group_degree.items()}

    @cached_property
    def cost_constant(self) -> float:
        """Sum of ``f(0)`` over every table; flow weights exclude it."""
        return (sum(t.values[0] for t in self.platform_tables)
                + sum(t.values[0] for t in self.group_tables.values()))

    @property
    def structure(self) -> str:
        return self.family.kind

    @property
    def depth(self) -> int:
        return self.family.depth

    def max_utility(self) -> float:
        best = [0.0] * self.n
        for (i, _), u in zip(self.edges, self.utilities):
            best[i] = max(best[i], u)
        return sum(best)


def validate_instance(inst: Instance) -> Instance:
    """Check an instance, collecting every problem before raising.

    Returns the instance itself (its derived quantities are cached on it).
    """
    problems = []
    if inst.n < 0 or inst.m < 0:
        problems.append("n and m must be nonnegative")
    if len(inst.utilities) != len(inst.edges):
        problems.append(f"{len(inst.edges)} edges but {len(inst.utilities)} utilities")
    seen = set()
    for i, p in inst.edges:
        if not (0 <= i < inst.n and 0 <= p < inst.m):
            problems.append(f"edge ({i}, {p}) references an unknown item or platform")
        if (i, p) in seen:
            problems.append(f"duplicate edge ({i}, {p})")
        seen.add((i, p))
    for (i, p), u in zip(inst.edges, inst.utilities):
        if not math.isfinite(u) or u < 0:
            problems.append(f"edge ({i}, {p}) has invalid utility {u:g}")
    if not math.isfinite(inst.ell) or inst.ell < 0:
        problems.append(f"utility floor must be a nonnegative real, got {inst.ell:g}")

    covered = set()
    for j, g in enumerate(inst.groups):
        if not g:
            problems.append(f"group {j} is empty")
        outside = [i for i in g if not 0 <= i < inst.n]
        if outside:
            problems.append(f"group {j} contains unknown items {sorted(outside)[:5]}")
        covered |= g
    missing = set(range(inst.n)) - covered
    if missing:
        problems.append(f"group union misses items {sorted(missing)[:10]}")

    declared = inst.declared_structure
    kind = inst.family.kind
    if declared not in (None, "disjoint", "laminar", "general"):
        problems.append(f"unknown declared structure {declared!r}")
    elif declared == "disjoint" and kind != "disjoint":
        problems.append(f"groups declared disjoint but are {kind}")
    elif declared == "laminar" and kind == "general":
        problems.append("groups declared laminar but two groups cross")

    if problems:
        raise InstanceError(problems)

    for p in inst.platform_overrides:
        if not 0 <= p < inst.m:
            problems.append(f"cost override for unknown platform {p}")
    for (p, j) in inst.group_overrides:
        if (p, j) not in inst.group_degree:
            problems.append(f"group cost override for platform {p}, group {j}, "
                            "but no item of that group is adjacent to the platform")
    for p in range(inst.m):
        try:
            inst.platform_spec(p).tabulate(inst.platform_degree[p])
        except InstanceError as exc:
            problems.extend(f"platform {p}: {msg}" for msg in exc.problems)
    for (p, j), d in inst.group_degree.items():
        try:
            inst.group_spec(p, j).tabulate(d)
        except InstanceError as exc:
            problems.extend(f"platform {p}, group {j}: {msg}" for msg in exc.problems)
    if problems:
        raise InstanceError(problems)
    return inst


def _counts(inst: Instance, matching: Mapping[int, int]):
    sigma = [0] * inst.m
    nu = {}
    index = inst.edge_index
    for i, p in matching.items():
        if (i, p) not in index:
            raise InstanceError([f"matching uses non-edge ({i}, {p})"])
        sigma[p] += 1
        for j in inst.item_groups[i]:
            nu[p, j] = nu.get((p, j), 0) + 1
    return sigma, nu


def load_counts(inst: Instance, matching: Mapping[int, int]):
    """Return ``(sigma, nu)``: items per platform and per (platform, group)."""
    return _counts(inst, matching)


def matching_cost(inst: Instance, matching: Mapping[int, int]) -> float:
    """Total platform cost of a matching, including every ``f(0)`` term."""
    sigma, nu = _counts(inst, matching)
    total = 0.0
    for p, table in enumerate(inst.platform_tables):
        total += table(sigma[p])
    for pj, table in inst.group_tables.items():
        total += table(nu.get(pj, 0))
    return total


def matching_utility(inst: Instance, matching: Mapping[int, int]) -> float:
    index = inst.edge_index
    u = inst.utilities
    total = 0.0
    for i, p in matching.items():
        k = index.get((i, p))
        if k is None:
            raise InstanceError([f"matching uses non-edge ({i}, {p})"])
        total += u[k]
    return total


def assignment_arrays(inst: Instance, choices: np.ndarray):
    """Vectorised cost and utility of many assignments at once.

    ``choices`` has shape ``(N, n)`` with entries in ``-1..m-1`` (``-1`` means
    unmatched); every ``(i, choices[r, i])`` must be an edge. Uses the same
    tables as :func:`matching_cost`.
    """
    choices = np.asarray(choices)
    N = choices.shape[0]
    cost = np.zeros(N)
    util = np.zeros(N)
    for i in range(inst.n):
        col = choices[:, i]
        for k in inst.item_edges[i]:
            util += np.where(col == inst.edges[k][1], inst.utilities[k], 0.0)
    for p, table in enumerate(inst.platform_tables):
        on_p = choices == p
        cost += np.asarray(table.values)[on_p.sum(axis=1)]
        for j in inst.platform_groups[p]:
            members = np.zeros(inst.n, dtype=bool)
            members[list(g for g in inst.groups[j] if g < inst.n)] = True
            nu = (on_p & members).sum(axis=1)
            cost += np.asarray(inst.group_tables[p, j].values)[nu]
    return cost, util
