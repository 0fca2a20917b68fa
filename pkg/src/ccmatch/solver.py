"""
Utility-constrained min-cost matching through the flow network.

The LP relaxation (min-cost flow subject to total utility >= ell) is solved by
a Lagrangian search over ``lambda >= 0`` on arc costs ``w - lambda * u``. Each
probe is an integral free-value min-cost flow, so every flow the search sees is
an integral extreme point of the flow polytope. The search walks the lower
convex hull of the points ``(utility, weight)`` until it finds the hull edge
that crosses ``utility = ell``; the LP optimum is the interpolation on that
edge. The two endpoints are then tightened to adjacent flows ``x0`` and ``x1``
that differ by a single cycle, and ``x1`` (the one meeting the floor) is
returned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import ConvergenceError, InfeasibleError, StructureError
from .instance import Instance, Matching, matching_cost, matching_utility
from .mcmf import FlowState, Tie, min_cost_flow_free, normalize_prefix, TOL
from .network import FlowNetwork, build_network, flow_to_matching, matching_to_flow

MAX_ITER = 200


class Status(Enum):
    EXACT = "ExactIntegral"
    ROUNDED = "Rounded"
    INFEASIBLE = "Infeasible"
    HEURISTIC = "Heuristic"  # baseline matchings: feasible, no optimality claim


@dataclass
class Bracket:
    """Adjacent integral flows with ``utility(x0) < ell <= utility(x1)``.

    The LP optimum is ``mu * x0 + (1 - mu) * x1``.
    """

    x0: FlowState
    x1: FlowState
    mu: float
    matching0: Matching = field(default_factory=dict)
    matching1: Matching = field(default_factory=dict)


@dataclass
class Solution:
    matching: Matching
    cost: float
    utility: float
    lp_lower_bound: float | None  # None for matchings without an LP certificate
    additive_bound: float | None
    status: Status
    lam: float = 0.0
    bracket: Bracket | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def gap(self) -> float | None:
        """Realized gap ``cost - lp_lower_bound``."""
        if self.lp_lower_bound is None:
            return None
        return self.cost - self.lp_lower_bound


# -- bound ----------------------------------------------------------------

def additive_bound(inst: Instance) -> float:
    """Worst-case extra cost of the rounded matching over the LP optimum.

    Disjoint groups: the spread between the most and least expensive
    ``platform + group`` marginal pair over all platforms and counts. Laminar
    groups: the expensive side adds one group marginal per level.
    """
    fam = inst.family
    laminar = fam.kind == "laminar"
    hi, lo = -math.inf, math.inf
    for p in range(inst.m):
        if inst.platform_degree[p] == 0:
            continue
        pm = inst.platform_tables[p].marginals
        gmax = {}
        gmin = math.inf
        for j in inst.platform_groups[p]:
            gm = inst.group_tables[p, j].marginals
            r = fam.level[j] if laminar else 1
            gmax[r] = max(gmax.get(r, -math.inf), max(gm))
            gmin = min(gmin, min(gm))
        hi = max(hi, max(pm) + sum(gmax.values()))
        lo = min(lo, min(pm) + gmin)
    if hi == -math.inf:
        return 0.0
    return max(0.0, hi - lo)


# -- Lagrangian probes ----------------------------------------------------

def lagrangian_costs(net: FlowNetwork, lam: float) -> list:
    return [w - lam * u for w, u in zip(net.weight, net.utility)]


def lagrangian_flow(net: FlowNetwork, lam: float, tie: Tie = Tie.MAX_UTILITY) -> FlowState:
    """Integral free-value flow minimising ``weight - lam * utility``."""
    return min_cost_flow_free(net, lagrangian_costs(net, lam), tie)


def max_utility_flow(net: FlowNetwork) -> FlowState:
    """Cheapest flow among those of maximum utility."""
    return min_cost_flow_free(net, [-u for u in net.utility], secondary=list(net.weight))


# -- cycles ---------------------------------------------------------------

VIRTUAL = -1  # the return arc t -> s closing value-changing differences


def cycle_decomposition(net: FlowNetwork, flow_a, flow_b) -> list:
    """Split ``flow_b - flow_a`` into simple cycles.

    Each cycle is a list of ``(arc, sign)``; ``sign`` is +1 where ``flow_b``
    has more flow. A difference in flow value is closed through a virtual
    return arc ``(VIRTUAL, +-1)`` from sink to source.
    """
    out = [[] for _ in range(net.n_nodes)]
    for a in range(net.n_arcs):
        d = flow_b[a] - flow_a[a]
        if d > 0:
            out[net.tail[a]].extend([(a, 1, net.head[a])] * d)
        elif d < 0:
            out[net.head[a]].extend([(a, -1, net.tail[a])] * (-d))
    src = net.source
    dv = (sum(flow_b[a] for a in range(net.n_arcs) if net.tail[a] == src)
          - sum(flow_a[a] for a in range(net.n_arcs) if net.tail[a] == src))
    if dv > 0:
        out[net.sink].extend([(VIRTUAL, 1, src)] * dv)
    elif dv < 0:
        out[src].extend([(VIRTUAL, -1, net.sink)] * (-dv))
    for lst in out:
        lst.reverse()  # pop() then yields arcs in increasing order

    cycles = []
    for start in range(net.n_nodes):
        while out[start]:
            path_nodes = [start]
            path_arcs = []
            pos = {start: 0}
            v = start
            while True:
                if not out[v]:
                    raise ValueError("flow difference is not a circulation")
                a, sign, w = out[v].pop()
                path_arcs.append((a, sign))
                if w in pos:
                    k = pos[w]
                    cycles.append(path_arcs[k:])
                    for x in path_nodes[k + 1:]:
                        del pos[x]
                    del path_arcs[k:]
                    del path_nodes[k + 1:]
                    v = w
                    if v == start and not path_arcs:
                        break
                    continue
                pos[w] = len(path_nodes)
                path_nodes.append(w)
                v = w
    return cycles


def cycle_utility(net: FlowNetwork, cycle) -> float:
    return math.fsum(sign * net.utility[a] for a, sign in cycle if a != VIRTUAL)


def is_single_cycle(net: FlowNetwork, flow_a, flow_b) -> bool:
    """Arcs where the two flows differ form exactly one simple cycle.

    Sink arcs count once whatever their capacity; a change in flow value is
    closed with the virtual sink-to-source arc.
    """
    cycles = cycle_decomposition(net, flow_a, flow_b)
    return len(cycles) == 1


def _walk_to_floor(net: FlowNetwork, lo: FlowState, hi: FlowState, ell: float, tol: float):
    """Adjacent pair ``x0, x1`` on the segment ``lo..hi`` straddling ``ell``.

    Cycles of ``hi - lo`` are added to ``lo`` one at a time (those that do not
    raise utility first). The running flow stays between ``lo`` and ``hi``;
    the returned states are its prefix-normalized copies.
    """
    cycles = cycle_decomposition(net, lo.arc_flow, hi.arc_flow)
    order = sorted(range(len(cycles)), key=lambda k: cycle_utility(net, cycles[k]) > 0)
    raw = list(lo.arc_flow)
    cur = lo
    for k in order:
        for a, sign in cycles[k]:
            if a != VIRTUAL:
                raw[a] += sign
        nxt = FlowState.from_arcs(net, normalize_prefix(net, list(raw)))
        if nxt.utility >= ell - tol:
            return cur, nxt
        cur = nxt
    raise ConvergenceError("cycle walk never reached the utility floor",
                           {"lo_utility": lo.utility, "hi_utility": hi.utility, "ell": ell})


# -- main entry -----------------------------------------------------------

def _exact(inst, net, fs: FlowState, lam, diag) -> Solution:
    matching = flow_to_matching(net, fs.arc_flow)
    cost = matching_cost(inst, matching)
    diag["realized_gap"] = cost - (fs.weight + net.cost_constant)
    return Solution(matching, cost, matching_utility(inst, matching),
                    fs.weight + net.cost_constant, 0.0, Status.EXACT, lam, None, diag)


def solve(inst: Instance, tol: float = TOL, max_iter: int = MAX_ITER,
          net: FlowNetwork | None = None) -> Solution:
    """Solve a disjoint or laminar instance; see the module docstring.

    Raises :class:`InfeasibleError` when no matching reaches ``inst.ell``,
    :class:`StructureError` for general group families and
    :class:`ConvergenceError` if the search exceeds ``max_iter`` probes.
    """
    if inst.family.kind == "general":
        raise StructureError("solve() needs disjoint or laminar groups")
    ell = inst.ell
    best = inst.max_utility()
    if best < ell - tol:
        raise InfeasibleError(f"maximum achievable utility {best:g} is below the floor {ell:g}",
                              best=best)
    if net is None:
        net = build_network(inst)
    diag = {"theoretical_bound": additive_bound(inst), "probes": []}

    lo = lagrangian_flow(net, 0.0)
    diag["probes"].append((0.0, lo.utility, lo.weight))
    if lo.utility >= ell - tol:
        return _exact(inst, net, lo, 0.0, diag)

    hi = max_utility_flow(net)
    if hi.utility < ell - tol:  # pragma: no cover - caught by the max_utility check
        raise InfeasibleError("no flow reaches the utility floor", best=hi.utility)

    lam = 0.0
    for it in range(max_iter):
        lam = (hi.weight - lo.weight) / (hi.utility - lo.utility)
        x = lagrangian_flow(net, lam)
        diag["probes"].append((lam, x.utility, x.weight))
        line = lo.weight - lam * lo.utility
        val = x.weight - lam * x.utility
        if val >= line - tol * max(1.0, abs(line), abs(val)):
            break
        if abs(x.utility - ell) <= tol:
            diag["iterations"] = it + 1
            return _exact(inst, net, x, lam, diag)
        if x.utility >= ell:
            hi = x
        else:
            lo = x
    else:
        raise ConvergenceError(
            f"Lagrangian search did not converge in {max_iter} probes",
            {"lambda": lam, "lo": (lo.utility, lo.weight), "hi": (hi.utility, hi.weight),
             "probes": diag["probes"]})
    diag["iterations"] = len(diag["probes"]) - 1

    x0, x1 = _walk_to_floor(net, lo, hi, ell, tol)
    if abs(x1.utility - ell) <= tol:
        return _exact(inst, net, x1, lam, diag)
    mu = (x1.utility - ell) / (x1.utility - x0.utility)
    lp = mu * x0.weight + (1.0 - mu) * x1.weight + net.cost_constant
    m0 = flow_to_matching(net, x0.arc_flow)
    m1 = flow_to_matching(net, x1.arc_flow)
    cost = matching_cost(inst, m1)
    diag["realized_gap"] = cost - lp
    return Solution(m1, cost, matching_utility(inst, m1), lp, diag["theoretical_bound"],
                    Status.ROUNDED, lam, Bracket(x0, x1, mu, m0, m1), diag)


# -- verification ---------------------------------------------------------

@dataclass
class Report:
    checks: list = field(default_factory=list)  # (name, passed, detail)
    gap: float = 0.0
    bound: float = 0.0

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)

    def failures(self) -> list:
        return [(n, d) for n, passed, d in self.checks if not passed]

    def add(self, name, passed, detail=""):
        self.checks.append((name, bool(passed), detail))

    def __str__(self):
        lines = [f"{'ok  ' if p else 'FAIL'} {n}: {d}" for n, p, d in self.checks]
        return "\n".join(lines)


def verify_solution(inst: Instance, sol: Solution, tol: float = 1e-6,
                    net: FlowNetwork | None = None) -> Report:
    """Re-evaluate a solution from scratch and check its certificate."""
    rep = Report(bound=sol.additive_bound)
    if sol.status is Status.INFEASIBLE:
        rep.add("status", False, "solution is marked infeasible")
        return rep
    try:
        cost = matching_cost(inst, sol.matching)
        util = matching_utility(inst, sol.matching)
    except Exception as exc:  # non-edge in the matching
        rep.add("matching", False, str(exc))
        return rep
    scale = max(1.0, abs(cost))
    rep.add("cost", abs(cost - sol.cost) <= tol * scale, f"recomputed {cost:.6g}, reported {sol.cost:.6g}")
    rep.add("utility", abs(util - sol.utility) <= tol * max(1.0, util),
            f"recomputed {util:.6g}, reported {sol.utility:.6g}")
    rep.add("floor", util >= inst.ell - tol, f"utility {util:.6g} vs floor {inst.ell:.6g}")
    if sol.lp_lower_bound is None:  # baseline matchings carry no certificate
        return rep
    rep.gap = cost - sol.lp_lower_bound
    rep.add("lower", sol.lp_lower_bound <= cost + tol * scale,
            f"lp {sol.lp_lower_bound:.6g} <= cost {cost:.6g}")
    rep.add("upper", cost <= sol.lp_lower_bound + sol.additive_bound + tol * scale,
            f"cost {cost:.6g} <= lp {sol.lp_lower_bound:.6g} + bound {sol.additive_bound:.6g}")
    br = sol.bracket
    if br is not None:
        if net is None:
            net = build_network(inst)
        f0 = matching_to_flow(net, inst, br.matching0)
        f1 = matching_to_flow(net, inst, br.matching1)
        u0 = matching_utility(inst, br.matching0)
        u1 = matching_utility(inst, br.matching1)
        w0 = matching_cost(inst, br.matching0)
        w1 = matching_cost(inst, br.matching1)
        rep.add("bracket_floor", u0 < inst.ell <= u1 + tol, f"u0 {u0:.6g} < ell <= u1 {u1:.6g}")
        mix_u = br.mu * u0 + (1 - br.mu) * u1
        rep.add("bracket_mix", abs(mix_u - inst.ell) <= tol * max(1.0, inst.ell),
                f"mu-mix utility {mix_u:.6g}")
        mix_w = br.mu * w0 + (1 - br.mu) * w1
        rep.add("bracket_lp", abs(mix_w - sol.lp_lower_bound) <= tol * max(1.0, abs(mix_w)),
                f"mu-mix cost {mix_w:.6g}")
        rep.add("single_cycle", is_single_cycle(net, f0, f1),
                f"{len(cycle_decomposition(net, f0, f1))} cycle(s) in x1 - x0")
    return rep
