import os
import random
from pathlib import Path

import pytest

from ccmatch import CostSpec, Instance, gen_random, validate_instance

ML_DIR = Path(os.environ.get("ML100K_DIR", "/root/data/ml-100k"))
ACCEPTANCE_LINES = []


def ml_files():
    data, users = ML_DIR / "u.data", ML_DIR / "u.user"
    if not (data.exists() and users.exists()):
        pytest.skip(f"MovieLens-100k files not found under {ML_DIR} (set ML100K_DIR)")
    return data, users


def small_instances(count, seed=0, cost_kinds=("quadratic", "piecewise"), n_range=(3, 8),
                    m_range=(1, 3), utility_range=(1, 6), **kw):
    """Seeded random instances small enough for the brute-force oracle."""
    rng = random.Random(seed)
    out = []
    structures = ("disjoint", "laminar")
    for k in range(count):
        n = rng.randint(*n_range)
        m = rng.randint(*m_range)
        structure = structures[k % 2]
        kind = cost_kinds[(k // 2) % len(cost_kinds)]
        groups = rng.randint(1, min(3, n))
        out.append(gen_random(n, m, rng.choice([0.4, 0.6, 0.8, 1.0]), utility_range, groups, structure,
                              kind, seed=seed * 100000 + k, depth=3, **kw))
    return out


def nested_instance(ell=0.0, platform_cost=None, group_cost=None):
    """Six items, one platform adjacent to all, groups nested as {1..6} > {1,2}, {3..6} > {5,6}."""
    groups = [{0, 1, 2, 3, 4, 5}, {0, 1}, {2, 3, 4, 5}, {4, 5}]
    q = CostSpec.make("quadratic")
    return validate_instance(Instance(6, 1, [(i, 0) for i in range(6)], [1] * 6, ell, groups,
                                      platform_cost or q, group_cost or q))


def five_item_instance():
    """Five items, three platforms and seven edges; item 2 has no edge."""
    edges = [(0, 0), (0, 1), (1, 1), (3, 0), (3, 1), (3, 2), (4, 2)]
    return validate_instance(Instance(5, 3, edges, [1, 2, 3, 4, 5, 6, 7], 0, [{0, 1, 2}, {3}, {4}]))
