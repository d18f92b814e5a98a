"""Invariant suites run by `lll-lab verify` and the acceptance tests."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .conditions import check_coupling_condition, check_theorem_general, hss_rhs, symmetric_x, zeta
from .coupling import Coupler, CoupleState, ExecutionLog, LogEntry, LogError, bound_rhs
from .csp import (
    AtomicCsp,
    SimplifiedConstraint,
    constraint_params,
    dependency_graph,
    instance_params,
    try_simplify,
)
from .exact import ProbabilityEngine, all_assignments, influence_norms, tv_distance
from .hardcore import (
    TreeInstance,
    build_mu_n_csp,
    edge_influence,
    fixed_point,
    influence_lower_bound,
    nonuniqueness_margin,
)
from .rng import make_rng
from .structure import (
    component_witness,
    disjoint_prob_bound,
    enumerate_two_trees,
    extract_two_tree,
    is_two_tree,
    two_tree_count_bound,
)
from .suites import pin_states

ENUM_STATES = 2**14      # pins whose U has at most this many assignments get full outcome enumeration
RATIONAL_STATES = 2**16  # instances up to this size run the coupling checks in exact arithmetic
TOL = 1e-12


@dataclass
class Tally:
    """Counts of checks and failures per invariant name."""

    items: dict = field(default_factory=dict)

    def record(self, name: str, ok: bool, detail: str = "") -> bool:
        it = self.items.setdefault(name, {"checked": 0, "failed": 0, "examples": []})
        it["checked"] += 1
        if not ok:
            it["failed"] += 1
            if len(it["examples"]) < 3:
                it["examples"].append(detail)
        return ok

    def merge(self, other: "Tally"):
        for name, it in other.items.items():
            mine = self.items.setdefault(name, {"checked": 0, "failed": 0, "examples": []})
            mine["checked"] += it["checked"]
            mine["failed"] += it["failed"]
            mine["examples"] = (mine["examples"] + it["examples"])[:3]

    @property
    def passed(self) -> bool:
        return all(it["failed"] == 0 for it in self.items.values())

    def to_json(self) -> dict:
        return {k: self.items[k] for k in sorted(self.items)}


def effective_D(D: int) -> int:
    # D is an upper bound on the dependency degree; bounds stated for D >= 1 use max(D, 1).
    return max(D, 1)


# csp-core


def check_csp(name: str, csp: AtomicCsp, tally: Tally, seed: int = 0, trials: int = 20):
    rng = make_rng(seed, 1)
    C = csp.initial_constraints()
    n = csp.n
    for _ in range(trials):
        perm = rng.permutation(n)
        a, b = int(rng.integers(0, n + 1)), 0
        b = int(rng.integers(a, n + 1))
        x = {int(v): int(rng.integers(csp.variables[v].size)) for v in perm[:a]}
        y = {int(v): int(rng.integers(csp.variables[v].size)) for v in perm[a:b]}
        both = try_simplify(C, {**x, **y})
        first = try_simplify(C, x)
        two = None if first is None else try_simplify(first, y)
        tally.record("csp.simplify-composition", both == two, f"{name}: x={x} y={y}")
    g = dependency_graph(csp.constraints)
    if csp.constraints:
        D = instance_params(csp).D
        tally.record("csp.degree-bound", max(d for _, d in g.degree()) <= D, name)
    if math.prod(csp.sizes) <= 2**12:
        X = all_assignments(csp.sizes)
        for _ in range(min(trials, 5)):
            a = int(rng.integers(0, n + 1))
            x = {int(v): int(rng.integers(csp.variables[v].size)) for v in rng.permutation(n)[:a]}
            simp = try_simplify(C, x)
            if simp is None:
                continue
            consistent = np.ones(len(X), dtype=bool)
            for v, val in x.items():
                consistent &= X[:, v] == val
            rows = X[consistent]
            for sc in simp:
                orig = csp.constraints[sc.origin]
                ev_sigma = np.all(rows[:, list(sc.remaining)] == np.asarray(sc.forbidden), axis=1)
                ev_viol = np.all(rows[:, list(orig.scope)] == np.asarray(orig.forbidden), axis=1)
                tally.record("csp.simplified-event", bool(np.array_equal(ev_sigma, ev_viol)), f"{name}: {sc} under {x}")


# exact-engine


def check_engine(name: str, csp: AtomicCsp, tally: Tally, seed: int = 0):
    eng = ProbabilityEngine(csp)
    small = math.prod(csp.sizes) <= 2**16
    if small:
        ex = ProbabilityEngine(csp, exact=True)
        dist = ex.lll_distribution()
        tally.record("exact.lll-mass-sums-to-one", sum(dist.mass) == 1, name)
    if csp.n <= 12 and math.prod(csp.sizes) <= 2**20:
        e1 = ProbabilityEngine(csp, method="enumerate")
        e2 = ProbabilityEngine(csp, method="inclusion_exclusion")
        rng = make_rng(seed, 2)
        cons = sorted(csp.initial_constraints())
        for _ in range(10):
            sub = frozenset(c for c in cons if rng.random() < 0.7)
            u = int(rng.integers(csp.n))
            pin = {u: int(rng.integers(csp.variables[u].size))} if rng.random() < 0.5 else {}
            a, b = e1.prob(sub, pin), e2.prob(sub, pin)
            tally.record("exact.enumeration-vs-inclusion-exclusion", abs(a - b) <= TOL, f"{name}: {a} vs {b}")
    M = eng.influence_matrix()
    vals = M.values
    tally.record("exact.influence-range", bool((vals >= -TOL).all() and (vals <= 1 + TOL).all()
                                                and (np.diag(vals) == 0).all()), name)
    if csp.is_boolean:
        worst = 0.0
        for u in range(csp.n):
            for v in range(csp.n):
                if u == v:
                    continue
                try:
                    s = eng.signed_influence(u, v)
                except ValueError:
                    continue   # infeasible pin
                worst = max(worst, abs(abs(s) - vals[u, v]))
        tally.record("exact.signed-influence-magnitude", worst <= TOL, f"{name}: {worst}")
    check_lll_hss(name, csp, tally, eng)
    return eng, M


def check_lll_hss(name: str, csp: AtomicCsp, tally: Tally, eng: ProbabilityEngine | None = None) -> bool:
    """When e p (D+1) <= 1: Pr[all] >= (1 - e p)^m and the HSS bound for single-variable events."""
    if not csp.constraints:
        return False
    prm = instance_params(csp)
    if math.e * prm.p * (prm.D + 1) > 1:
        return False
    eng = eng or ProbabilityEngine(csp)
    C = csp.initial_constraints()
    x = symmetric_x(csp)
    pc = eng.prob(C)
    lower = (1 - math.e * prm.p) ** len(csp.constraints)
    tally.record("conditions.lll-lower-bound", pc >= lower, f"{name}: {pc} < {lower}")
    for v in range(csp.n):
        marg = eng.marginal(C, v)
        for a in range(csp.variables[v].size):
            rhs = hss_rhs(csp, {v}, csp.weight(v, a), x)
            tally.record("conditions.hss-single-variable", marg[a] <= rhs + TOL, f"{name}: v={v} a={a} {marg[a]} > {rhs}")
    return True


# coupling and structure per pinned pair


@dataclass
class PinSummary:
    u: int
    i: int
    j: int
    expected_hamming: float
    sym_diff: int
    coupling_condition: bool | None
    bound: float | None


def check_pin(name: str, csp: AtomicCsp, u: int, i: int, j: int, st: CoupleState, cp: Coupler,
              tally: Tally, eng_float: ProbabilityEngine, chi: tuple[float, float]) -> PinSummary:
    chi_min, chi_max = chi
    both = st.S | st.T
    label = f"{name}: u={u} i={i} j={j}"
    dist = cp.outcome_distribution(st)
    total = sum(dist.values())
    tally.record("coupling.execution-tree-mass", abs(total - 1) <= TOL, f"{label}: {total}")
    eh = sum((p * h for (_, h), p in dist.items()), cp.engine.zero)
    k = max((c.width for c in both), default=0)
    tally.record("coupling.disc-bound-all-outcomes", all(h <= k * len(b) for (b, h) in dist), label)
    g = dependency_graph({c.origin: c.remaining for c in both})
    sd_origins = {c.origin for c in st.sym_diff}
    for (b, _), p in dist.items():
        tally.record("structure.component-witness", component_witness(g, b, sd_origins).passed, f"{label}: bad={sorted(b)}")

    if math.prod(csp.variables[v].size for v in st.U) <= ENUM_STATES:
        outs = cp.enumerate_outcomes(st)
        wsum = sum((w for w, *_ in outs), cp.engine.zero)
        tally.record("coupling.enumeration-mass", wsum == 1 if cp.exact else abs(wsum - 1) <= TOL, f"{label}: {wsum}")
        e_enum = cp.engine.zero
        for w, log, bad, ham in outs:
            try:
                lp = cp.log_probability(log, st.S, st.T, st.U)
                ok = (lp == w) if cp.exact else abs(lp - w) <= TOL
                tally.record("coupling.log-probability", ok, f"{label}: {lp} vs {w}")
                tally.record("coupling.log-facts", True)
            except LogError as exc:
                tally.record("coupling.log-facts", False, f"{label}: {exc}")
            tally.record("coupling.disc-bound", ham <= k * len(bad), label)
            tally.record("structure.component-witness", component_witness(g, bad, sd_origins).passed, f"{label}: bad={sorted(bad)}")
            e_enum += w * ham
        ok = (e_enum == eh) if cp.exact else abs(e_enum - eh) <= TOL
        tally.record("coupling.enumeration-vs-execution-tree", ok, f"{label}: {e_enum} vs {eh}")

    # coupling lemma: sum of marginal TV distances is at most the expected discrepancy
    tv_sum = 0.0
    C = csp.initial_constraints()
    for v in sorted(st.U):
        tv_sum += float(tv_distance(eng_float.marginal(C, v, {u: i}), eng_float.marginal(C, v, {u: j})))
    tally.record("coupling.coupling-lemma", tv_sum <= float(eh) + 1e-9, f"{label}: {tv_sum} > {float(eh)}")

    cond, rhs = None, None
    if both and st.sym_diff:
        pp = constraint_params(csp, both)
        D = effective_D(pp.D)
        delta = chi_max**2
        rep = check_coupling_condition(delta, chi_min, pp.p, D)
        cond = rep.satisfied
        if cond:
            rhs = bound_rhs(pp.k, D, delta, len(st.sym_diff))
            tally.record("coupling.expected-discrepancy-bound", float(eh) <= rhs, f"{label}: {float(eh)} > {rhs}")
        if check_coupling_condition(1.0, chi_min, pp.p, D).satisfied and math.e * pp.p < 1:
            check_disjoint_bound(label, dist, g, pp.p, D, zeta(chi_min), tally)
    return PinSummary(u, i, j, float(eh), len(st.sym_diff), cond, rhs)


def independent_sets(g: nx.Graph, max_size: int = 4):
    nodes = sorted(g)
    for r in range(1, min(max_size, len(nodes)) + 1):
        for A in itertools.combinations(nodes, r):
            if all(not g.has_edge(a, b) for a, b in itertools.combinations(A, 2)):
                yield frozenset(A)


def check_disjoint_bound(label: str, dist: dict, g: nx.Graph, p: float, D: int, z: float, tally: Tally):
    for A in independent_sets(g):
        pa = float(sum(pr for (b, _), pr in dist.items() if A <= b))
        bound = disjoint_prob_bound(len(A), p, D, z)
        tally.record("structure.disjoint-prob-bound", pa <= bound, f"{label}: A={sorted(A)} {pa} > {bound}")


def check_structure(name: str, csp: AtomicCsp, tally: Tally, max_size: int = 3):
    g = dependency_graph({c.id: c.scope for c in csp.constraints})
    check_graph(name, g, tally, max_size)


def check_graph(name: str, g: nx.Graph, tally: Tally, max_size: int = 3):
    if g.number_of_nodes() == 0:
        return
    d = max(deg for _, deg in g.degree())
    for v in g:
        for size in range(1, max_size + 1):
            trees = enumerate_two_trees(g, v, size)
            tally.record("structure.two-tree-predicates", all(is_two_tree(g, t) and v in t and len(t) == size for t in trees),
                         f"{name}: v={v} size={size}")
            if size >= 2 and d >= 2:
                tally.record("structure.two-tree-count-bound", len(trees) <= two_tree_count_bound(d, size),
                             f"{name}: {len(trees)} trees of size {size}")
    for comp in nx.connected_components(g):
        v = min(comp)
        t = extract_two_tree(g, comp, v)
        tally.record("structure.extract-two-tree", is_two_tree(g, t) and len(t) * (d + 1) >= len(comp), f"{name}: {sorted(comp)}")


# whole instance


@dataclass
class InstanceReport:
    name: str
    n: int
    m: int
    inf_norm: float
    max_expected_hamming: float
    theorem_condition: bool | None
    pins: list = field(default_factory=list)


def verify_instance(name: str, csp: AtomicCsp, tally: Tally, seed: int = 0) -> InstanceReport:
    check_csp(name, csp, tally, seed)
    eng, M = check_engine(name, csp, tally, seed)
    check_structure(name, csp, tally)
    exact = math.prod(csp.sizes) <= RATIONAL_STATES
    cp = Coupler(csp, exact=exact)
    chi = (instance_params(csp).chi_min, instance_params(csp).chi_max) if csp.constraints else (None, None)
    pins = []
    if csp.constraints:
        for u, i, j, st in pin_states(csp):
            pins.append(check_pin(name, csp, u, i, j, st, cp, tally, eng, chi))
    _, inf_norm = influence_norms(M)
    A = max((p.expected_hamming for p in pins), default=0.0)
    chi_max = chi[1] if chi[1] is not None else max(1 / w for v in csp.variables for w in v.weights)
    tally.record("exact.expected-discrepancy-controls-influence", inf_norm <= chi_max**2 * A + 1e-9,
                 f"{name}: {inf_norm} > {chi_max**2 * A}")
    thm = None
    if csp.constraints:
        prm = instance_params(csp)
        thm = check_theorem_general(prm.chi_max, prm.chi_min, prm.p, prm.D).satisfied
        if thm:
            tally.record("theorem.influence-norm-bound", inf_norm <= prm.k * (prm.D + 1) ** 2,
                         f"{name}: {inf_norm} > {prm.k * (prm.D + 1) ** 2}")
    return InstanceReport(name, csp.n, len(csp.constraints), inf_norm, A, thm, pins)


# hardcore


def check_hardcore(tally: Tally, lams=(5, 6, 8), levels=(2, 3), delta: int = 3, tol: float = 1e-10) -> list[dict]:
    """Exact norm vs the lower-bound formula, edge influences and the product identity."""
    rows = []
    for lam in lams:
        fp = fixed_point(lam, delta)
        for n in levels:
            inst = TreeInstance(delta, n, lam, fp.q_star)
            csp = build_mu_n_csp(inst)
            eng = ProbabilityEngine(csp)
            _, norm = influence_norms(eng.influence_matrix())
            lb = influence_lower_bound(delta, n, fp)
            # at n = 2 the bound is attained exactly (the root row), so compare up to rounding
            tally.record("hardcore.lower-bound", norm >= lb - tol, f"lam={lam} n={n}: {norm} < {lb}")
            signed = np.zeros((csp.n, csp.n))
            for a in range(csp.n):
                for b in range(csp.n):
                    if a != b:
                        signed[a, b] = eng.signed_influence(a, b)
            e = edge_influence(inst)
            for v in range(1, csp.n):
                p = inst.parents[v]
                tally.record("hardcore.edge-influence", abs(signed[p, v] - e) <= tol and abs(signed[v, p] - e) <= tol,
                             f"lam={lam} n={n} edge {p}-{v}")
            worst = 0.0
            for a, b in itertools.permutations(range(csp.n), 2):
                for w in inst.path(a, b)[1:-1]:
                    err = abs(signed[a, b] - signed[a, w] * signed[w, b])
                    worst = max(worst, err)
                    tally.record("hardcore.product-identity", err <= tol, f"lam={lam} n={n} {a}-{w}-{b}: {err}")
            rows.append({"lambda": lam, "levels": n, "margin": nonuniqueness_margin(delta, fp), "inf_norm": norm,
                         "lower_bound": lb, "max_product_error": worst})
    return rows


def corrupt_log(log: ExecutionLog) -> ExecutionLog:
    """Negative control: drop one assigned variable from the final X, breaking the assigned-domain property."""
    last = log.entries[-1]
    X = dict(last.X)
    if X:
        X.pop(next(iter(X)))
        bad_last = LogEntry(last.U, last.S, last.T, last.c, X, last.Y)
    else:
        bad_last = LogEntry(last.U, last.S, frozenset(last.T) | {SimplifiedConstraint(10**6, (min(last.U) if last.U else 0,), (0,))},
                            last.c, last.X, last.Y)
    return ExecutionLog(log.entries[:-1] + (bad_last,))
