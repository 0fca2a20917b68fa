import itertools
import math
import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccmatch import (ConvexCostTable, ConvexityError, CostSpec, Instance, InstanceError,
                     assignment_arrays, brute_force_opt, classify_groups, cost_preset,
                     load_counts, matching_cost, matching_utility, validate_instance)
from ccmatch.generators import _laminar
from support import nested_instance, small_instances

Q = CostSpec.make("quadratic")


def one_platform(tables_p, tables_g, n=2, groups=None):
    groups = groups or [set(range(n))]
    return Instance(n, 1, [(i, 0) for i in range(n)], [1] * n, 0, groups,
                    CostSpec.make("table", table=tables_p), CostSpec.make("table", table=tables_g))


# -- cost tables ----------------------------------------------------------------

def test_quadratic_table_is_valid():
    t = ConvexCostTable((0, 1, 4, 9))
    assert t.marginals == (1, 3, 5)
    assert t.cap == 3 and t(2) == 4 and t.marginal(3) == 5


def test_decreasing_marginals_rejected():
    with pytest.raises(ConvexityError):
        ConvexCostTable((0, 2, 3, 3))


@pytest.mark.parametrize("bad", [(0, math.nan), (0, math.inf, 1)])
def test_non_finite_rejected(bad):
    with pytest.raises(InstanceError):
        ConvexCostTable(bad)


def test_validate_reports_nonconvex_table():
    inst = one_platform([0, 2, 3], [0, 1, 4])
    with pytest.raises(InstanceError) as exc:
        validate_instance(inst)
    assert any("not convex" in p for p in exc.value.problems)


def test_preset_quadratic():
    assert cost_preset("quadratic", 3).values == (0, 1, 4, 9)


def test_preset_piecewise_convex_range():
    # zero up to the threshold, slope * k above it
    assert cost_preset("piecewise", 2, threshold=1, slope=1).values == (0, 0, 2)


def test_preset_piecewise_beyond_convex_range():
    # (0, 0, 2, 3) has marginals 0, 2, 1
    with pytest.raises(ConvexityError):
        cost_preset("piecewise", 3, threshold=1, slope=1)


def test_preset_nsw():
    vals = cost_preset("nsw_log", 2, scale=1).values
    assert vals == pytest.approx((0, -math.log(2), -math.log(3)))


def test_preset_nsw_scale_must_be_positive():
    with pytest.raises(InstanceError):
        cost_preset("nsw_log", 2, scale=0)


def test_preset_hinge_and_explicit():
    assert cost_preset("hinge", 4, threshold=2, slope=3).values == (0, 0, 0, 3, 6)
    assert cost_preset(CostSpec.make("table", table=[1, 1, 2, 4]), 2).values == (1, 1, 2)
    with pytest.raises(InstanceError):
        cost_preset(CostSpec.make("table", table=[0, 1]), 3)
    with pytest.raises(ConvexityError):
        cost_preset(CostSpec.make("table", table=[0, 3, 4]), 2)


def test_costspec_json_roundtrip():
    for spec in (Q, CostSpec.make("hinge", threshold=2, slope=1.5), CostSpec.make("table", table=[0, 1, 3])):
        assert CostSpec.from_json(spec.to_json()) == spec


# -- groups -------------------------------------------------------------------

def test_classify_fig2_laminar():
    fam = classify_groups([{1, 2, 3, 4, 5, 6}, {1, 2}, {3, 4, 5, 6}, {5, 6}])
    assert fam.kind == "laminar" and fam.depth == 3
    assert fam.parent == (None, 0, 0, 2)
    assert fam.level == (3, 1, 2, 1)


def test_classify_disjoint_and_general():
    assert classify_groups([{1}, {2}, {3}]).kind == "disjoint"
    assert classify_groups([{1}, {2}, {3}]).depth == 1
    assert classify_groups([{1, 2}, {2, 3}]).kind == "general"


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.integers(1, 3), st.integers(1, 4), st.integers(0, 10 ** 6))
def test_laminar_forest_reproduces_containment(n, roots, depth, seed):
    groups = [frozenset(g) for g in _laminar(random.Random(seed), n, min(roots, n), depth)]
    fam = classify_groups(groups)
    assert fam.kind in ("disjoint", "laminar")
    for j, par in enumerate(fam.parent):
        supersets = [k for k in range(len(groups)) if k != j and groups[j] <= groups[k]]
        if par is None:
            assert all(groups[k] == groups[j] and k > j for k in supersets)
        else:
            # the parent is a superset and every other superset contains the parent
            assert groups[j] <= groups[par]
            assert all(groups[par] <= groups[k] for k in supersets if k != par)
    # ancestors reproduce every containment
    for a, b in itertools.permutations(range(len(groups)), 2):
        if groups[a] < groups[b]:
            k = a
            while k is not None and k != b:
                k = fam.parent[k]
            assert k == b
    # levels: each level's groups are pairwise disjoint
    for r in set(fam.level):
        same = [groups[j] for j in range(len(groups)) if fam.level[j] == r]
        for x, y in itertools.combinations(same, 2):
            assert not x & y
    assert fam.depth == max(fam.level)


# -- validation ---------------------------------------------------------------

def test_validation_collects_every_problem():
    inst = Instance(3, 1, [(0, 0), (1, 0), (5, 0)], [1, -2, 1], 0, [{0}, {1}])
    with pytest.raises(InstanceError) as exc:
        validate_instance(inst)
    text = " | ".join(exc.value.problems)
    assert "unknown item" in text and "invalid utility" in text and "misses items" in text
    assert len(exc.value.problems) >= 3


def test_validation_declared_structure():
    inst = Instance(3, 1, [(0, 0)], [1], 0, [{0, 1}, {1, 2}], declared_structure="disjoint")
    with pytest.raises(InstanceError):
        validate_instance(inst)
    inst = Instance(3, 1, [(0, 0)], [1], 0, [{0, 1, 2}, {1, 2}], declared_structure="disjoint")
    with pytest.raises(InstanceError):
        validate_instance(inst)


def test_validation_attaches_degrees():
    inst = validate_instance(Instance(3, 2, [(0, 0), (1, 0), (2, 1), (1, 1)], [1, 1, 1, 1], 0,
                                      [{0, 1}, {2}]))
    assert inst.platform_degree == (2, 2)
    assert inst.group_degree == {(0, 0): 2, (1, 0): 1, (1, 1): 1}
    assert inst.platform_groups == ((0,), (0, 1))
    assert inst.structure == "disjoint"


def test_duplicate_edge_and_bad_override():
    inst = Instance(2, 1, [(0, 0), (0, 0)], [1, 1], 0, [{0, 1}])
    with pytest.raises(InstanceError):
        validate_instance(inst)
    inst = Instance(2, 1, [(0, 0)], [1], 0, [{0}, {1}], group_overrides={(0, 1): Q})
    with pytest.raises(InstanceError):
        validate_instance(inst)


# -- evaluators -----------------------------------------------------------------

def test_empty_matching_costs_zero():
    inst = validate_instance(Instance(2, 1, [(0, 0), (1, 0)], [3, 5], 0, [{0, 1}]))
    assert matching_cost(inst, {}) == 0
    assert matching_utility(inst, {}) == 0


def test_two_items_same_group():
    inst = validate_instance(Instance(2, 1, [(0, 0), (1, 0)], [3, 5], 0, [{0, 1}]))
    assert matching_cost(inst, {0: 0, 1: 0}) == 8
    assert matching_utility(inst, {0: 0, 1: 0}) == 8


def test_laminar_item_counts_in_every_group():
    inst = nested_instance()
    sigma, nu = load_counts(inst, {4: 0})
    assert sigma == [1] and nu == {(0, 0): 1, (0, 2): 1, (0, 3): 1}
    # f_p(1) + the three group terms at 1
    assert matching_cost(inst, {4: 0}) == 4
    assert matching_cost(inst, {4: 0, 5: 0}) == 4 + 3 * 4


def test_non_edge_rejected():
    inst = validate_instance(Instance(2, 2, [(0, 0), (1, 1)], [1, 1], 0, [{0, 1}]))
    with pytest.raises(InstanceError):
        matching_cost(inst, {0: 1})
    with pytest.raises(InstanceError):
        matching_utility(inst, {0: 1})


def _random_matching(inst, rng):
    m = {}
    for i in range(inst.n):
        opts = [inst.edges[k][1] for k in inst.item_edges[i]]
        if opts and rng.random() < 0.7:
            m[i] = rng.choice(opts)
    return m


def test_disjoint_sigma_is_sum_of_nu():
    rng = random.Random(1)
    for inst in small_instances(40, seed=3):
        if inst.structure != "disjoint":
            continue
        sigma, nu = load_counts(inst, _random_matching(inst, rng))
        for p in range(inst.m):
            assert sigma[p] == sum(v for (q, _), v in nu.items() if q == p)


def test_constant_shift_keeps_argmin():
    for inst in small_instances(12, seed=5, cost_kinds=("quadratic",), n_range=(3, 6)):
        c = 2.5
        po = {p: CostSpec.make("table", table=[v + c for v in t.values])
              for p, t in enumerate(inst.platform_tables)}
        go = {pj: CostSpec.make("table", table=[v + c for v in t.values])
              for pj, t in inst.group_tables.items()}
        shifted = validate_instance(replace(inst, platform_overrides=po, group_overrides=go))
        ntab = inst.m + len(inst.group_tables)
        rng = random.Random(0)
        for _ in range(5):
            mt = _random_matching(inst, rng)
            assert matching_cost(shifted, mt) == pytest.approx(matching_cost(inst, mt) + c * ntab)
        c0, m0 = brute_force_opt(inst)
        c1, m1 = brute_force_opt(shifted)
        assert m0 == m1 and c1 == pytest.approx(c0 + c * ntab)


def test_evaluators_ignore_edge_order():
    rng = random.Random(2)
    for inst in small_instances(10, seed=7):
        perm = list(range(len(inst.edges)))
        rng.shuffle(perm)
        other = validate_instance(replace(inst, edges=tuple(inst.edges[k] for k in perm),
                                          utilities=tuple(inst.utilities[k] for k in perm)))
        mt = _random_matching(inst, rng)
        assert matching_cost(other, mt) == matching_cost(inst, mt)
        assert matching_utility(other, mt) == matching_utility(inst, mt)


def test_assignment_arrays_match_scalar_evaluators():
    rng = random.Random(4)
    for inst in small_instances(10, seed=9):
        rows, mts = [], []
        for _ in range(6):
            mt = _random_matching(inst, rng)
            mts.append(mt)
            rows.append([mt.get(i, -1) for i in range(inst.n)])
        cost, util = assignment_arrays(inst, np.array(rows))
        for k, mt in enumerate(mts):
            assert cost[k] == pytest.approx(matching_cost(inst, mt))
            assert util[k] == pytest.approx(matching_utility(inst, mt))
