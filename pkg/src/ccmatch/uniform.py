"""Exact solver for instances where every edge has the same utility ``q``."""
from __future__ import annotations

import math

from .errors import InfeasibleError, InstanceError, StructureError
from .instance import Instance, matching_cost, matching_utility
from .mcmf import min_cost_flow_at_least
from .network import build_network, flow_to_matching
from .solver import Solution, Status, TOL


def uniform_utility(inst: Instance, tol: float = TOL) -> float | None:
    """The common edge utility, or ``None`` when utilities differ."""
    if not inst.utilities:
        return None
    q = inst.utilities[0]
    if all(abs(u - q) <= tol * max(1.0, abs(q)) for u in inst.utilities):
        return q
    return None


def solve_uniform(inst: Instance, q: float | None = None, tol: float = TOL) -> Solution:
    """Min-cost flow carrying ``ceil(ell / q)`` units, then any further units that lower the cost.

    Exact when ``ell / q`` is an integer. Otherwise ``lp_lower_bound`` is the
    flow-cost curve interpolated at ``ell / q`` and ``additive_bound`` is the
    realized gap to it.
    """
    if inst.family.kind == "general":
        raise StructureError("solve_uniform needs disjoint or laminar groups")
    common = uniform_utility(inst, tol)
    if q is None:
        q = common if common is not None else 0.0
    if q <= 0:
        raise InstanceError([f"uniform utility q must be positive, got {q:g}"])
    if inst.utilities and (common is None or abs(common - q) > tol * max(1.0, q)):
        raise InstanceError([f"utilities are not all equal to q={q:g}"])

    ratio = inst.ell / q
    target = max(0, math.ceil(ratio - tol))
    if target > inst.n:
        raise InfeasibleError(f"floor needs {target} items but there are only {inst.n}", best=inst.n)
    net = build_network(inst)
    try:
        fs = min_cost_flow_at_least(net, net.weight, target, tol=tol)
    except InfeasibleError as exc:
        raise InfeasibleError(f"at most {exc.best} items can be matched; the floor needs {target}",
                              best=exc.best) from None

    curve = {0: 0.0}
    curve.update(dict(fs.history))
    exact = abs(ratio - round(ratio)) <= tol
    if fs.value > target or exact or target == 0:
        lp = fs.weight
    else:
        lo, hi = target - 1, target
        frac = ratio - lo
        lp = min(fs.weight, (1 - frac) * curve[lo] + frac * curve[hi])
    lp += net.cost_constant
    matching = flow_to_matching(net, fs.arc_flow)
    cost = matching_cost(inst, matching)
    status = Status.EXACT if exact else Status.ROUNDED
    return Solution(matching, cost, matching_utility(inst, matching), lp, max(0.0, cost - lp),
                    status, 0.0, None, {"target": target, "flow_value": fs.value})
