"""
Files in and out: instance and solution JSON, MovieLens-100k ingestion, the
experiment harness and its CSV reports.

Instance JSON::

    {"n": 3, "m": 2, "ell": 4,
     "edges": [[0, 0, 5], [1, 0, 3], [2, 1, 4]],
     "groups": {"structure": "disjoint", "sets": [[0, 1], [2]]},
     "costs": {"platform_defaults": {"platform": {"preset": "quadratic"},
                                     "group": {"preset": "quadratic"}},
               "per_platform": {"1": {"table": [0, 2, 5]}},
               "per_group_per_platform": [{"platform": 0, "group": 0,
                                           "cost": {"preset": "zero"}}]}}

Floats in CSV output use six significant digits.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import statistics
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

from .baselines import greedy, naive_greedy
from .errors import CCMatchError, InfeasibleError, InstanceError
from .instance import CostSpec, Instance, load_counts, matching_cost, matching_utility, validate_instance
from .network import build_network
from .solver import Bracket, Solution, Status, solve

log = logging.getLogger(__name__)


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return format(x, ".6g")
    return str(x)


def _num(x):
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2 ** 53 else x


# -- instances ----------------------------------------------------------------

def instance_to_json(inst: Instance) -> dict:
    costs = {"platform_defaults": {"platform": inst.platform_cost.to_json(),
                                   "group": inst.group_cost.to_json()}}
    if inst.platform_overrides:
        costs["per_platform"] = {str(p): s.to_json() for p, s in sorted(inst.platform_overrides.items())}
    if inst.group_overrides:
        costs["per_group_per_platform"] = [
            {"platform": p, "group": j, "cost": s.to_json()}
            for (p, j), s in sorted(inst.group_overrides.items())]
    out = {
        "n": inst.n,
        "m": inst.m,
        "ell": _num(inst.ell),
        "edges": [[i, p, _num(u)] for (i, p), u in zip(inst.edges, inst.utilities)],
        "groups": {"structure": inst.declared_structure or inst.family.kind,
                   "sets": [sorted(g) for g in inst.groups]},
        "costs": costs,
    }
    if inst.name:
        out["name"] = inst.name
    return out


def instance_from_json(obj) -> Instance:
    problems = []

    def need(d, key, where):
        if not isinstance(d, dict) or key not in d:
            problems.append(f"{where}: missing field {key!r}")
            return None
        return d[key]

    n = need(obj, "n", "instance")
    m = need(obj, "m", "instance")
    ell = obj.get("ell", 0) if isinstance(obj, dict) else 0
    raw_edges = need(obj, "edges", "instance") or []
    edges, utils = [], []
    for k, e in enumerate(raw_edges):
        if not (isinstance(e, list) and len(e) == 3):
            problems.append(f"edges[{k}]: expected [item, platform, utility], got {e!r}")
            continue
        edges.append((e[0], e[1]))
        utils.append(e[2])
    groups_obj = need(obj, "groups", "instance") or {}
    sets = need(groups_obj, "sets", "groups") or []
    structure = groups_obj.get("structure") if isinstance(groups_obj, dict) else None
    costs = obj.get("costs", {}) if isinstance(obj, dict) else {}
    defaults = costs.get("platform_defaults", {})
    specs = {}
    try:
        specs["platform"] = CostSpec.from_json(defaults.get("platform", {"preset": "quadratic"}))
        specs["group"] = CostSpec.from_json(defaults.get("group", {"preset": "quadratic"}))
    except InstanceError as exc:
        problems.extend(f"costs.platform_defaults: {p}" for p in exc.problems)
    po, go = {}, {}
    for key, spec in costs.get("per_platform", {}).items():
        try:
            po[int(key)] = CostSpec.from_json(spec)
        except (InstanceError, ValueError) as exc:
            problems.append(f"costs.per_platform[{key}]: {exc}")
    for k, entry in enumerate(costs.get("per_group_per_platform", [])):
        try:
            go[int(entry["platform"]), int(entry["group"])] = CostSpec.from_json(entry["cost"])
        except (InstanceError, KeyError, TypeError, ValueError) as exc:
            problems.append(f"costs.per_group_per_platform[{k}]: {exc}")
    if problems:
        raise InstanceError(problems)
    try:
        inst = Instance(int(n), int(m), edges, utils, ell, sets, specs["platform"], specs["group"],
                        po, go, structure, name=obj.get("name", ""))
    except (TypeError, ValueError) as exc:
        raise InstanceError([f"instance: {exc}"]) from None
    return validate_instance(inst)


def loads_instance(text: str) -> Instance:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError([f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    return instance_from_json(obj)


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_json(inst), indent=1) + "\n"


def read_instance(path) -> Instance:
    return loads_instance(Path(path).read_text())


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps_instance(inst))


# -- solutions --------------------------------------------------------------

def _pairs(matching):
    return [[i, p] for i, p in sorted(matching.items())]


def solution_to_json(sol: Solution, algorithm: str = "solve") -> dict:
    out = {
        "algorithm": algorithm,
        "status": sol.status.value,
        "cost": sol.cost,
        "utility": sol.utility,
        "lp_lower_bound": sol.lp_lower_bound,
        "additive_bound": sol.additive_bound,
        "gap": sol.cost - sol.lp_lower_bound if sol.lp_lower_bound is not None else None,
        "lambda": sol.lam,
        "matching": _pairs(sol.matching),
    }
    if sol.bracket is not None:
        b = sol.bracket
        out["bracket"] = {"mu": b.mu, "x0": _pairs(b.matching0), "x1": _pairs(b.matching1)}
    return out


def solution_from_json(obj) -> Solution:
    try:
        status = Status(obj["status"])
        matching = {int(i): int(p) for i, p in obj["matching"]}
        bracket = None
        if obj.get("bracket"):
            b = obj["bracket"]
            bracket = Bracket(None, None, float(b["mu"]),
                              {int(i): int(p) for i, p in b["x0"]},
                              {int(i): int(p) for i, p in b["x1"]})
        return Solution(matching, float(obj["cost"]), float(obj["utility"]),
                        obj.get("lp_lower_bound"), obj.get("additive_bound"), status,
                        float(obj.get("lambda") or 0.0), bracket)
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError([f"malformed solution: {exc!r}"]) from None


def matching_solution(inst: Instance, matching, status: Status = Status.HEURISTIC) -> Solution:
    """Wrap a baseline or oracle matching; it carries no LP certificate."""
    return Solution(dict(matching), matching_cost(inst, matching), matching_utility(inst, matching),
                    None, None, status)


SOLUTION_COLUMNS = ("algorithm", "status", "cost", "utility", "lp_lower_bound", "additive_bound",
                    "gap", "matched")


def solution_csv(sol: Solution, algorithm: str = "solve") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SOLUTION_COLUMNS)
    gap = None if sol.lp_lower_bound is None else sol.cost - sol.lp_lower_bound
    w.writerow([algorithm, sol.status.value, fmt(sol.cost), fmt(sol.utility), fmt(sol.lp_lower_bound),
                fmt(sol.additive_bound), fmt(gap), len(sol.matching)])
    return buf.getvalue()


# -- MovieLens ----------------------------------------------------------------

AGE_BRACKETS = ((15, 29), (30, 44), (45, 59), (60, 74))


def age_group(age: int) -> int:
    """0..3 for the brackets 15-29, 30-44, 45-59, 60-74; 4 for under 15; 75+ joins 60-74."""
    if age < 15:
        return 4
    for k, (lo, hi) in enumerate(AGE_BRACKETS):
        if lo <= age <= hi:
            return k
    return 3


@dataclass
class MovieLensData:
    ratings: list  # (user, movie, rating)
    ages: dict     # user -> age
    skipped_ratings: int = 0
    skipped_users: int = 0


def read_movielens(data_path, user_path) -> MovieLensData:
    ratings, skipped = [], 0
    with open(data_path, encoding="latin-1") as fh:
        for line in fh:
            parts = line.split("\t")
            try:
                user, movie, rating = int(parts[0]), int(parts[1]), float(parts[2])
            except (IndexError, ValueError):
                if line.strip():
                    skipped += 1
                continue
            ratings.append((user, movie, rating))
    ages, bad_users = {}, 0
    with open(user_path, encoding="latin-1") as fh:
        for line in fh:
            parts = line.split("|")
            try:
                ages[int(parts[0])] = int(parts[1])
            except (IndexError, ValueError):
                if line.strip():
                    bad_users += 1
    if skipped or bad_users:
        log.warning("skipped %d malformed rating rows and %d malformed user rows", skipped, bad_users)
    return MovieLensData(ratings, ages, skipped, bad_users)


def nsw_costs(inst: Instance) -> Instance:
    """Log costs: platform terms scaled by ``m``, group terms by the platform's group count."""
    po = {p: CostSpec.make("nsw_log", scale=inst.m) for p in range(inst.m)}
    go = {(p, j): CostSpec.make("nsw_log", scale=len(inst.platform_groups[p]))
          for (p, j) in inst.group_degree}
    return validate_instance(replace(inst, platform_overrides=po, group_overrides=go))


def ingest_movielens(data_path, user_path, top_k: int = 10, cost="quadratic", ell: float = 0.0) -> Instance:
    """Users x top-k most rated movies, utility = rating, groups = age brackets.

    ``cost`` is ``"quadratic"``, ``"nsw"`` or a :class:`CostSpec` used for
    every platform and group.
    """
    data = read_movielens(data_path, user_path)
    counts = Counter(movie for _, movie, _ in data.ratings)
    if not counts or top_k < 1:
        raise InstanceError(["no movies selected"])
    top = sorted(counts, key=lambda mv: (-counts[mv], mv))[:top_k]
    plat = {mv: k for k, mv in enumerate(top)}
    rated = {}
    for user, movie, rating in data.ratings:
        if movie in plat and user in data.ages:
            rated[user, plat[movie]] = rating
    users = sorted({u for u, _ in rated})
    if not users:
        raise InstanceError(["no user rated the selected movies"])
    item = {u: k for k, u in enumerate(users)}
    edges = sorted((item[u], p) for u, p in rated)
    inv = {v: k for k, v in item.items()}
    utils = [rated[inv[i], p] for i, p in edges]
    buckets = [[] for _ in range(5)]
    for u in users:
        buckets[age_group(data.ages[u])].append(item[u])
    groups = [b for b in buckets if b]
    spec = CostSpec.make("quadratic") if cost in ("quadratic", "nsw") else cost
    inst = Instance(len(users), len(top), edges, utils, ell, groups, spec, spec,
                    declared_structure="disjoint", name=f"movielens-top{top_k}")
    inst = validate_instance(inst)
    return nsw_costs(inst) if cost == "nsw" else inst


# -- experiments ------------------------------------------------------------

@dataclass
class ExperimentRow:
    threshold: float
    naive_cost: float | None = None
    greedy_cost: float | None = None
    lp_lower_bound: float | None = None
    alg_cost: float | None = None
    greedy_runtime_s: float = 0.0
    alg_runtime_s: float = 0.0
    additive_bound: float | None = None
    status: str = ""
    error: str = ""


ROW_COLUMNS = ("threshold", "naive_cost", "greedy_cost", "lp_lower_bound", "alg_cost",
               "greedy_runtime_s", "alg_runtime_s", "additive_bound", "status", "error")


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    loads: list = field(default_factory=list)        # (threshold, algorithm, platform, sigma)
    group_loads: list = field(default_factory=list)  # (threshold, platform, group, nu, share)
    neighborhood: list = field(default_factory=list)  # (platform, group, Δ_j(p), Δ(p), share)

    def variance(self) -> list:
        """``(threshold, algorithm, variance of sigma over platforms)`` for each run."""
        by = {}
        for t, alg, _, s in self.loads:
            by.setdefault((t, alg), []).append(s)
        return [(t, alg, statistics.pvariance(v)) for (t, alg), v in by.items()]


def run_experiment(inst: Instance, thresholds) -> ExperimentReport:
    """Run the naive greedy, the greedy and the solver at every threshold."""
    rep = ExperimentReport()
    net = build_network(inst)
    for (p, j), d in inst.group_degree.items():
        rep.neighborhood.append((p, j, d, inst.platform_degree[p], d / inst.platform_degree[p]))
    for t in thresholds:
        cur = replace(inst, ell=float(t))
        row = ExperimentRow(float(t))
        errors = []
        try:
            mt = naive_greedy(cur)
            row.naive_cost = matching_cost(cur, mt)
            _add_loads(rep, cur, t, "naive", mt)
        except InfeasibleError as exc:
            errors.append(f"naive: {exc}")
        try:
            start = time.perf_counter()
            mt = greedy(cur)
            row.greedy_runtime_s = time.perf_counter() - start
            row.greedy_cost = matching_cost(cur, mt)
            _add_loads(rep, cur, t, "greedy", mt)
        except InfeasibleError as exc:
            errors.append(f"greedy: {exc}")
        try:
            start = time.perf_counter()
            sol = solve(cur, net=net)
            row.alg_runtime_s = time.perf_counter() - start
            row.alg_cost, row.lp_lower_bound = sol.cost, sol.lp_lower_bound
            row.additive_bound, row.status = sol.additive_bound, sol.status.value
            _add_loads(rep, cur, t, "alg", sol.matching)
            _, nu = load_counts(cur, sol.matching)
            sigma = [0] * cur.m
            for p in sol.matching.values():
                sigma[p] += 1
            for (p, j), v in sorted(nu.items()):
                rep.group_loads.append((float(t), p, j, v, v / sigma[p]))
        except CCMatchError as exc:
            row.status = Status.INFEASIBLE.value if isinstance(exc, InfeasibleError) else "error"
            errors.append(f"solve: {exc}")
        row.error = "; ".join(errors)
        rep.rows.append(row)
    return rep


def _add_loads(rep, inst, t, alg, matching):
    sigma, _ = load_counts(inst, matching)
    rep.loads.extend((float(t), alg, p, s) for p, s in enumerate(sigma))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def rows_csv(rep: ExperimentReport) -> str:
    return _csv(ROW_COLUMNS, ([getattr(r, c) for c in ROW_COLUMNS] for r in rep.rows))


def loads_csv(rep: ExperimentReport) -> str:
    return _csv(("threshold", "algorithm", "platform", "sigma"), rep.loads)


def variance_csv(rep: ExperimentReport) -> str:
    return _csv(("threshold", "algorithm", "sigma_variance"), rep.variance())


def group_loads_csv(rep: ExperimentReport) -> str:
    return _csv(("threshold", "platform", "group", "nu", "share"), rep.group_loads)


def neighborhood_csv(rep: ExperimentReport) -> str:
    return _csv(("platform", "group", "group_degree", "platform_degree", "share"), rep.neighborhood)


def write_report(rep: ExperimentReport, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"rows.csv": rows_csv, "loads.csv": loads_csv, "variance.csv": variance_csv,
             "group_loads.csv": group_loads_csv, "neighborhood.csv": neighborhood_csv}
    paths = []
    for name, fn in files.items():
        (out / name).write_text(fn(rep))
        paths.append(out / name)
    return paths
