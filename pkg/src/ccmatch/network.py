"""
Layered flow network for an instance with disjoint or laminar groups.

Layers, in topological order::

    source -> items -> group copies (levels 1..d) -> platform l1 -> platform l2 -> sink

Each item has one arc (carrying the edge utility) into the copy of each
neighbouring platform under the smallest group containing the item. A copy
``p^j`` forwards its ``Δ_j(p)`` units either to the copy of ``p`` under the
parent group (subset arcs) or, for root groups, to ``p(l1)`` (L1 arcs); the
k-th parallel arc of such a bundle costs the k-th marginal of ``f_p^j``. Groups
that hold the same neighbours of ``p`` share a copy, and a group holding a
single neighbour inside a larger group is charged on the item arc, so each
platform has at most ``Δ(p)`` copies. L2
arcs ``p(l1) -> p(l2)`` carry the marginals of ``f_p`` and a single sink arc of
capacity ``Δ(p)`` leaves ``p(l2)``.

Arc weights are marginals, so the weight of a flow is the matching cost minus
``Instance.cost_constant``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InstanceError, StructureError
from .instance import Instance, Matching

SOURCE, ITEM, SUBSET, L1, L2, SINK = "source", "item", "subset", "L1", "L2", "sink"
COST_KINDS = (SUBSET, L1, L2)


@dataclass
class FlowNetwork:
    n_nodes: int
    source: int
    sink: int
    node_label: list
    node_rank: list
    tail: list = field(default_factory=list)
    head: list = field(default_factory=list)
    cap: list = field(default_factory=list)
    weight: list = field(default_factory=list)
    utility: list = field(default_factory=list)
    copy: list = field(default_factory=list)
    kind: list = field(default_factory=list)
    origin: list = field(default_factory=list)
    bundle: list = field(default_factory=list)
    structure: str = "disjoint"
    depth: int = 1
    cost_constant: float = 0.0
    item_node: dict = field(default_factory=dict)
    copy_node: dict = field(default_factory=dict)
    copy_level: dict = field(default_factory=dict)    # (p, j) -> level of the copy
    copy_members: dict = field(default_factory=dict)  # (p, j) -> groups sharing the copy
    folded: dict = field(default_factory=dict)        # edge -> groups charged on its item arc
    l1_node: dict = field(default_factory=dict)
    l2_node: dict = field(default_factory=dict)
    item_arc: list = field(default_factory=list)   # instance edge index -> arc
    bundles: list = field(default_factory=list)    # bundle id -> arcs ordered by copy index

    @property
    def n_arcs(self) -> int:
        return len(self.tail)

    def add_arc(self, tail, head, cap, weight=0.0, utility=0.0, kind=SOURCE, k=0, origin=-1, bundle=-1):
        self.tail.append(tail)
        self.head.append(head)
        self.cap.append(cap)
        self.weight.append(float(weight))
        self.utility.append(float(utility))
        self.kind.append(kind)
        self.copy.append(k)
        self.origin.append(origin)
        self.bundle.append(bundle)
        return len(self.tail) - 1

    def count(self, kind: str) -> int:
        return sum(1 for k in self.kind if k == kind)

    def out_arcs(self) -> list:
        out = [[] for _ in range(self.n_nodes)]
        for a, t in enumerate(self.tail):
            out[t].append(a)
        return out

    def to_edge_list(self) -> str:
        """One arc per line: ``tail head capacity weight utility kind k``.

        Nodes are written by label (``s``, ``t``, ``i3``, ``p1^g0``, ``p1:l1``,
        ``p1:l2``); arcs keep construction order.
        """
        names = [_node_name(lbl) for lbl in self.node_label]
        lines = []
        for a in range(self.n_arcs):
            lines.append(f"{names[self.tail[a]]} {names[self.head[a]]} {self.cap[a]} "
                         f"{self.weight[a]:.6g} {self.utility[a]:.6g} {self.kind[a]} {self.copy[a]}")
        return "\n".join(lines) + "\n"


def _node_name(label) -> str:
    tag = label[0]
    if tag in ("s", "t"):
        return tag
    if tag == "item":
        return f"i{label[1]}"
    if tag == "copy":
        return f"p{label[1]}^g{label[2]}"
    return f"p{label[1]}:{tag}"


def build_network(inst: Instance) -> FlowNetwork:
    """Build the network matching the instance's group structure."""
    kind = inst.family.kind
    if kind == "general":
        raise StructureError("groups are neither disjoint nor laminar; no flow network exists")
    return _build(inst)


def build_disjoint(inst: Instance) -> FlowNetwork:
    if inst.family.kind != "disjoint":
        raise StructureError(f"build_disjoint needs disjoint groups, got {inst.family.kind}")
    return _build(inst)


def build_laminar(inst: Instance) -> FlowNetwork:
    if not inst.family.is_nested:
        raise StructureError("build_laminar needs a laminar group family")
    return _build(inst)


def _compress(inst: Instance, p: int):
    """Group copies needed on platform ``p``.

    Groups are compared by the items they hold among ``p``'s neighbours.
    Groups with identical restrictions share one copy (their tables add up),
    and a one-item restriction inside a larger one is charged on that item's
    arc instead of getting a copy. This keeps at most ``Δ(p)`` copies per
    platform. Returns ``classes`` (representative -> member groups), the
    parent and level of each representative, ``rep`` (group -> representative)
    and ``folded`` (item -> groups).
    """
    fam = inst.family
    nbrs = {i for i, q in inst.edges if q == p}
    restricted = {}
    for j in inst.platform_groups[p]:
        restricted.setdefault(frozenset(inst.groups[j] & nbrs), []).append(j)
    sets = sorted(restricted, key=len)
    parent_set = {}
    for a, sa in enumerate(sets):
        sup = [sb for sb in sets[a + 1:] if len(sb) > len(sa) and sa < sb]
        parent_set[sa] = min(sup, key=len) if sup else None
    classes, parent, folded, rep, rep_of = {}, {}, {}, {}, {}
    for sa in sets:
        members = sorted(restricted[sa], key=lambda j: (fam.level[j], j))
        if len(sa) == 1 and parent_set[sa] is not None:
            (i,) = sa
            folded.setdefault(i, []).extend(members)
            continue
        rep_of[sa] = members[0]
        classes[members[0]] = members
        rep.update((j, members[0]) for j in members)
    for sa, r in rep_of.items():
        parent[r] = rep_of[parent_set[sa]] if parent_set[sa] is not None else None
    level = {}
    for sa in sets:  # children are smaller, so they come first
        if sa in rep_of:
            r = rep_of[sa]
            level.setdefault(r, 1)
            if parent[r] is not None:
                level[parent[r]] = max(level.get(parent[r], 1), level[r] + 1)
    return classes, parent, level, rep, folded


def _build(inst: Instance) -> FlowNetwork:
    fam = inst.family
    plan = {p: _compress(inst, p) for p in range(inst.m)}
    d = max([1] + [lv for p in plan for lv in plan[p][2].values()])
    labels, ranks = [("s",)], [0]
    item_node = {}
    for i in range(inst.n):
        item_node[i] = len(labels)
        labels.append(("item", i))
        ranks.append(1)
    pairs = sorted(((p, j) for p in plan for j in plan[p][0]),
                   key=lambda pj: (plan[pj[0]][2][pj[1]], pj[0], pj[1]))
    copy_node, copy_level, copy_members = {}, {}, {}
    for (p, j) in pairs:
        copy_node[p, j] = len(labels)
        copy_level[p, j] = plan[p][2][j]
        copy_members[p, j] = tuple(plan[p][0][j])
        labels.append(("copy", p, j))
        ranks.append(1 + copy_level[p, j])
    l1_node, l2_node = {}, {}
    for p in range(inst.m):
        l1_node[p] = len(labels)
        labels.append(("l1", p))
        ranks.append(d + 2)
    for p in range(inst.m):
        l2_node[p] = len(labels)
        labels.append(("l2", p))
        ranks.append(d + 3)
    sink = len(labels)
    labels.append(("t",))
    ranks.append(d + 4)

    net = FlowNetwork(n_nodes=len(labels), source=0, sink=sink, node_label=labels, node_rank=ranks,
                      structure=fam.kind, depth=d, cost_constant=inst.cost_constant,
                      item_node=item_node, copy_node=copy_node, l1_node=l1_node, l2_node=l2_node,
                      copy_level=copy_level, copy_members=copy_members)

    for i in range(inst.n):
        net.add_arc(0, item_node[i], 1, kind=SOURCE)

    item_arc = [0] * len(inst.edges)
    for e, ((i, p), u) in enumerate(zip(inst.edges, inst.utilities)):
        _, _, _, rep, folded = plan[p]
        target = next(rep[j] for j in inst.item_groups[i] if j in rep)
        extra = tuple(folded.get(i, ()))
        w = sum(inst.group_tables[p, j].marginal(1) for j in extra)
        item_arc[e] = net.add_arc(item_node[i], copy_node[p, target], 1, weight=w, utility=u,
                                  kind=ITEM, origin=e)
        if extra:
            net.folded[e] = extra
    net.item_arc = item_arc

    def bundle(tail, head, members, count, kind):
        tables = [inst.group_tables[p, j] for j in members] if kind != L2 else members
        bid = len(net.bundles)
        arcs = [net.add_arc(tail, head, 1, weight=sum(t.marginal(k) for t in tables), kind=kind, k=k,
                            bundle=bid)
                for k in range(1, count + 1)]
        net.bundles.append(arcs)

    for (p, j) in pairs:
        par = plan[p][1][j]
        if par is not None:
            bundle(copy_node[p, j], copy_node[p, par], copy_members[p, j], inst.group_degree[p, j], SUBSET)
    for (p, j) in sorted(pairs):
        if plan[p][1][j] is None:
            bundle(copy_node[p, j], l1_node[p], copy_members[p, j], inst.group_degree[p, j], L1)
    for p in range(inst.m):
        bundle(l1_node[p], l2_node[p], [inst.platform_tables[p]], inst.platform_degree[p], L2)
    for p in range(inst.m):
        net.add_arc(l2_node[p], sink, inst.platform_degree[p], kind=SINK)
    return net


def flow_to_matching(net: FlowNetwork, arc_flow) -> Matching:
    """Read the matching off an integral, conserving flow."""
    check_flow(net, arc_flow)
    matching = {}
    for a, e in enumerate(net.origin):
        if e >= 0 and arc_flow[a] == 1:
            i = net.node_label[net.tail[a]][1]
            p = net.node_label[net.head[a]][1]
            matching[i] = p
    return matching


def check_flow(net: FlowNetwork, arc_flow) -> None:
    if len(arc_flow) != net.n_arcs:
        raise InstanceError([f"flow has {len(arc_flow)} entries for {net.n_arcs} arcs"])
    balance = [0] * net.n_nodes
    for a, x in enumerate(arc_flow):
        if x != int(x):
            raise InstanceError([f"flow on arc {a} is fractional ({x})"])
        if not 0 <= x <= net.cap[a]:
            raise InstanceError([f"flow {x} on arc {a} violates capacity {net.cap[a]}"])
        balance[net.tail[a]] -= x
        balance[net.head[a]] += x
    bad = [v for v in range(net.n_nodes) if v not in (net.source, net.sink) and balance[v]]
    if bad:
        raise InstanceError([f"flow conservation violated at node {net.node_label[bad[0]]}"])


def matching_to_flow(net: FlowNetwork, inst: Instance, matching: Matching) -> list:
    """The prefix-form integral flow that corresponds to a matching."""
    flow = [0] * net.n_arcs
    through = [0] * net.n_nodes
    for i, p in matching.items():
        e = inst.edge_index.get((i, p))
        if e is None:
            raise InstanceError([f"matching uses non-edge ({i}, {p})"])
        a = net.item_arc[e]
        flow[a] = 1
        flow[i] = 1  # source arcs come first, one per item
        through[net.head[a]] += 1
    # group copies in level order so children are settled before parents
    for arcs in net.bundles:
        tail = net.tail[arcs[0]]
        units = through[tail]
        if units > len(arcs):
            raise InstanceError(["matching exceeds a degree bound"])
        for a in arcs[:units]:
            flow[a] = 1
        through[net.head[arcs[0]]] += units
    for a in range(net.n_arcs):
        if net.kind[a] == SINK:
            flow[a] = through[net.tail[a]]
    return flow
