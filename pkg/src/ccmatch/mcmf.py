"""
Successive shortest paths on a :class:`~ccmatch.network.FlowNetwork`.

Costs are lexicographic pairs ``(primary, secondary)``: paths are compared on
the primary cost (with an absolute tolerance) and ties are broken on the
secondary one. Utility tie-breaking uses ``secondary = -utility`` (prefer high
utility) or ``+utility`` (prefer low utility).

Initial node potentials come from a topological pass over the forward arcs,
which are acyclic by construction, so negative arc costs are fine. After that
every iteration runs Dijkstra on reduced costs, shifts the potentials and
pushes as many units as possible along zero-reduced-cost arcs before the next
Dijkstra.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import InfeasibleError
from .network import FlowNetwork

TOL = 1e-9
INF = math.inf


class Tie(Enum):
    MIN_UTILITY = "min_utility"
    MAX_UTILITY = "max_utility"


@dataclass
class FlowState:
    arc_flow: list
    value: int
    weight: float
    utility: float
    potentials: list | None = None
    history: list = field(default_factory=list)  # (value, primary cost) after each push

    @classmethod
    def from_arcs(cls, net: FlowNetwork, arc_flow, **kw) -> "FlowState":
        value = sum(arc_flow[a] for a in range(net.n_arcs) if net.tail[a] == net.source)
        weight = math.fsum(x * w for x, w in zip(arc_flow, net.weight) if x)
        utility = math.fsum(x * u for x, u in zip(arc_flow, net.utility) if x)
        return cls(list(arc_flow), value, weight, utility, **kw)

    @property
    def integral(self) -> bool:
        return all(float(x).is_integer() for x in self.arc_flow)

    def lagrangian(self, lam: float) -> float:
        return self.weight - lam * self.utility


def shortest_path_potentials_init(net: FlowNetwork, costs, secondary=None) -> list:
    """Shortest distances from the source over forward arcs, in topological order.

    Unreachable nodes get ``inf``. With ``secondary`` given, distances are
    ``(primary, secondary)`` pairs compared lexicographically.
    """
    order = sorted(range(net.n_nodes), key=net.node_rank.__getitem__)
    out = net.out_arcs()
    lex = secondary is not None
    d1 = [INF] * net.n_nodes
    d2 = [INF] * net.n_nodes
    d1[net.source] = 0.0
    d2[net.source] = 0.0
    for v in order:
        if d1[v] == INF:
            continue
        for a in out[v]:
            if net.cap[a] <= 0:
                continue
            w = net.head[a]
            c1 = d1[v] + costs[a]
            c2 = d2[v] + (secondary[a] if lex else 0.0)
            if c1 < d1[w] - TOL or (c1 <= d1[w] + TOL and c2 < d2[w]):
                d1[w], d2[w] = c1, c2
    if lex:
        return list(zip(d1, d2))
    return d1


class _Residual:
    """Residual graph: arc ``a`` of the network becomes ``2a`` (forward) and ``2a+1``."""

    def __init__(self, net: FlowNetwork, c1, c2, tol=TOL):
        self.net = net
        self.tol = tol
        A = net.n_arcs
        self.to = [0] * (2 * A)
        self.rcap = [0] * (2 * A)
        self.c1 = [0.0] * (2 * A)
        self.c2 = [0.0] * (2 * A)
        self.adj = [[] for _ in range(net.n_nodes)]
        for a in range(A):
            t, h = net.tail[a], net.head[a]
            f, b = 2 * a, 2 * a + 1
            self.to[f], self.to[b] = h, t
            self.rcap[f] = net.cap[a]
            self.c1[f], self.c1[b] = c1[a], -c1[a]
            self.c2[f], self.c2[b] = c2[a], -c2[a]
            self.adj[t].append(f)
            self.adj[h].append(b)
        pots = shortest_path_potentials_init(net, c1, c2)
        self.p1 = [x[0] if x[0] < INF else 0.0 for x in pots]
        self.p2 = [x[1] if x[0] < INF else 0.0 for x in pots]
        self.value = 0
        self.cost1 = 0.0
        self.cost2 = 0.0
        self.history = []

    def dijkstra(self):
        """Lexicographic Dijkstra on reduced costs; stops once the sink is settled."""
        n = self.net.n_nodes
        s, t = self.net.source, self.net.sink
        to, rcap, c1, c2, adj = self.to, self.rcap, self.c1, self.c2, self.adj
        p1, p2, tol = self.p1, self.p2, self.tol
        d1 = [INF] * n
        d2 = [INF] * n
        pred = [-1] * n
        done = bytearray(n)
        d1[s] = 0.0
        d2[s] = 0.0
        heap = [(0.0, 0.0, s)]
        pop, push = heapq.heappop, heapq.heappush
        while heap:
            a1, a2, u = pop(heap)
            if done[u]:
                continue
            done[u] = 1
            if u == t:
                break
            pu1, pu2 = p1[u], p2[u]
            for e in adj[u]:
                if not rcap[e]:
                    continue
                v = to[e]
                if done[v]:
                    continue
                r1 = c1[e] + pu1 - p1[v]
                if r1 <= tol:
                    r1 = 0.0
                    r2 = c2[e] + pu2 - p2[v]
                    if r2 < 0.0:
                        r2 = 0.0
                else:
                    r2 = c2[e] + pu2 - p2[v]
                n1 = a1 + r1
                n2 = a2 + r2
                b1 = d1[v]
                if n1 < b1 - tol or (n1 <= b1 + tol and n2 < d2[v] - tol):
                    d1[v] = n1
                    d2[v] = n2
                    pred[v] = e
                    push(heap, (n1, n2, v))
        return d1, d2, pred, done

    def admissible(self, e, u, v):
        tol = self.tol
        r1 = self.c1[e] + self.p1[u] - self.p1[v]
        if r1 > tol or r1 < -tol:
            return False
        return self.c2[e] + self.p2[u] - self.p2[v] <= tol

    def push_path(self, arcs, units):
        rcap, c1, c2 = self.rcap, self.c1, self.c2
        for e in arcs:
            rcap[e] -= units
            rcap[e ^ 1] += units
            self.cost1 += units * c1[e]
            self.cost2 += units * c2[e]
        self.value += units
        self.history.append((self.value, self.cost1))

    def blocking_flow(self, limit):
        """Push up to ``limit`` units along admissible arcs (all shortest paths)."""
        net = self.net
        s, t = net.source, net.sink
        to, rcap, adj = self.to, self.rcap, self.adj
        it = [0] * net.n_nodes
        dead = bytearray(net.n_nodes)
        on_path = bytearray(net.n_nodes)
        pushed = 0
        while pushed < limit:
            stack = [s]
            arcs = []
            on_path[s] = 1
            found = False
            while stack:
                u = stack[-1]
                if u == t:
                    found = True
                    break
                lst = adj[u]
                advanced = False
                while it[u] < len(lst):
                    e = lst[it[u]]
                    v = to[e]
                    if rcap[e] > 0 and not dead[v] and not on_path[v] and self.admissible(e, u, v):
                        stack.append(v)
                        arcs.append(e)
                        on_path[v] = 1
                        advanced = True
                        break
                    it[u] += 1
                if not advanced:
                    dead[u] = 1
                    on_path[u] = 0
                    stack.pop()
                    if arcs:
                        arcs.pop()
                        it[stack[-1]] += 1
            for v in stack:
                on_path[v] = 0
            if not found:
                break
            units = min(min(rcap[e] for e in arcs), limit - pushed)
            self.push_path(arcs, units)
            pushed += units
        return pushed

    def run(self, min_value, max_value, continue_negative):
        """Augment until ``min_value`` is reached, then while paths are lex-negative."""
        s, t = self.net.source, self.net.sink
        tol = self.tol
        while self.value < max_value:
            d1, d2, pred, done = self.dijkstra()
            if not done[t]:
                if self.value < min_value:
                    raise InfeasibleError(
                        f"maximum flow value is {self.value}, below the requested {min_value}",
                        best=self.value)
                break
            D1, D2 = d1[t], d2[t]
            p1, p2 = self.p1, self.p2
            for v in range(self.net.n_nodes):
                if done[v]:
                    p1[v] += d1[v]
                    p2[v] += d2[v]
                else:
                    p1[v] += D1
                    p2[v] += D2
            path1 = p1[t] - p1[s]
            path2 = p2[t] - p2[s]
            negative = path1 < -tol or (path1 <= tol and path2 < -tol)
            if self.value >= min_value and not (continue_negative and negative):
                break
            limit = (max_value if negative and continue_negative else min_value) - self.value
            # the Dijkstra tree path is always admissible; push it first
            arcs = []
            v = t
            while v != s:
                e = pred[v]
                arcs.append(e)
                v = self.to[e ^ 1]
            arcs.reverse()
            units = min(min(self.rcap[e] for e in arcs), limit)
            self.push_path(arcs, units)
            if units < limit:
                self.blocking_flow(limit - units)

    def state(self) -> FlowState:
        net = self.net
        flow = [self.rcap[2 * a + 1] for a in range(net.n_arcs)]
        normalize_prefix(net, flow)
        fs = FlowState.from_arcs(net, flow, potentials=list(self.p1), history=list(self.history))
        return fs


def normalize_prefix(net: FlowNetwork, arc_flow) -> list:
    """Move flow inside each parallel bundle onto its lowest-index copies (in place)."""
    for arcs in net.bundles:
        units = sum(arc_flow[a] for a in arcs)
        for r, a in enumerate(arcs):
            arc_flow[a] = 1 if r < units else 0
    return arc_flow


def _secondary(net: FlowNetwork, tie: Tie | None):
    if tie is None:
        return [0.0] * net.n_arcs
    sign = -1.0 if tie is Tie.MAX_UTILITY else 1.0
    return [sign * u for u in net.utility]


def min_cost_flow_fixed(net: FlowNetwork, costs, target_value: int, tie: Tie | None = None,
                        tol: float = TOL) -> FlowState:
    """Integral flow of exactly ``target_value`` units of minimum total cost.

    Raises :class:`InfeasibleError` (with ``best`` set to the maximum flow
    value) when the network cannot carry ``target_value`` units.
    """
    if target_value < 0:
        raise ValueError("target value must be nonnegative")
    res = _Residual(net, costs, _secondary(net, tie), tol)
    res.run(target_value, target_value, continue_negative=False)
    return res.state()


def min_cost_flow_free(net: FlowNetwork, costs, tie: Tie = Tie.MAX_UTILITY, tol: float = TOL,
                       secondary=None) -> FlowState:
    """Minimum-cost integral flow with free value.

    Augments while the cheapest residual path has negative cost; among
    cost-optimal flows, returns one with maximum (``Tie.MAX_UTILITY``) or
    minimum utility. ``secondary`` overrides the tie-break costs.
    """
    sec = _secondary(net, tie) if secondary is None else list(secondary)
    res = _Residual(net, costs, sec, tol)
    res.run(0, math.inf, continue_negative=True)
    return res.state()


def min_cost_flow_at_least(net: FlowNetwork, costs, min_value: int, tie: Tie | None = None,
                           tol: float = TOL) -> FlowState:
    """Cheapest integral flow carrying at least ``min_value`` units."""
    res = _Residual(net, costs, _secondary(net, tie), tol)
    res.run(min_value, math.inf, continue_negative=True)
    return res.state()


def reduced_cost_violation(net: FlowNetwork, costs, flow: FlowState) -> float:
    """Most negative reduced cost over residual arcs under ``flow.potentials``.

    Zero (or a value within rounding) certifies optimality of the flow.
    """
    pi = flow.potentials
    worst = 0.0
    for a in range(net.n_arcs):
        t, h = net.tail[a], net.head[a]
        rc = costs[a] + pi[t] - pi[h]
        if flow.arc_flow[a] < net.cap[a]:
            worst = min(worst, rc)
        if flow.arc_flow[a] > 0:
            worst = min(worst, -rc)
    return worst
