"""Acceptance criteria 1-10, each run at its stated tolerance.

Every test prints one line "criterion N: PASS|FAIL ..." (also repeated in the
pytest terminal summary). Run directly with `python3 tests/test_acceptance.py`.
"""

import math
import sys
import time
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from lll_lab.conditions import pd_exponent, zeta
from lll_lab.coupling import Coupler
from lll_lab.hardcore import growth_instance
from lll_lab.rng import make_rng
from lll_lab.structure import enumerate_two_trees, extract_two_tree, is_two_tree, two_tree_count_bound
from lll_lab.suites import SUITE_SEED, pin_states, random_suite, regime_suite, small_suite
from lll_lab.verify import Tally, check_hardcore, verify_instance

RESULTS: dict[int, str] = {}


def report(n: int, ok: bool, detail: str) -> bool:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line, flush=True)
    return ok


def suite():
    return small_suite() + regime_suite()


@pytest.fixture(scope="module")
def verified():
    """verify_instance over the full suite; criteria 4, 5, 9 and 10 read from it."""
    tally = Tally()
    reports = [verify_instance(name, csp, tally) for name, csp in suite()]
    return tally, reports


def tally_line(tally: Tally, *names) -> tuple[bool, str]:
    parts, ok = [], True
    for nm in names:
        it = tally.items.get(nm, {"checked": 0, "failed": 0, "examples": []})
        ok &= it["failed"] == 0 and it["checked"] > 0
        parts.append(f"{nm} {it['checked'] - it['failed']}/{it['checked']}")
        if it["examples"]:
            parts.append(f"e.g. {it['examples'][0]}")
    return ok, "; ".join(parts)


# 1

def criterion1_runs(N=10**5):
    """Batched fresh-randomness runs on every feasible pin of the 20-instance random suite."""
    tol = 3 * math.sqrt(0.25 / N)
    comparisons = exceed = pins = 0
    expected = 0.0
    worst = 0.0
    chi2 = 0.0
    dof = 0
    bad_runs = 0
    idx = 0
    for name, csp in random_suite(20):
        cp = Coupler(csp)
        eng = cp.engine
        for u, i, j, st in pin_states(csp):
            pins += 1
            res = cp.couple_many(st, N, seed=SUITE_SEED * 10**6 + idx)
            idx += 1
            k = max((c.width for c in st.S | st.T), default=0)
            bad_runs += int((res.hamming > k * res.bad.sum(axis=1)).sum())
            for cons, A in ((st.S, res.X), (st.T, res.Y)):
                for v in sorted(st.U):
                    ex = np.array(eng.marginal(cons, v), dtype=float)
                    emp = np.bincount(A[:, v], minlength=len(ex)) / N
                    dev = np.abs(emp - ex)
                    comparisons += len(ex)
                    exceed += int((dev > tol).sum())
                    worst = max(worst, float(dev.max()))
                    live = ex > 0
                    chi2 += float((N * (emp[live] - ex[live]) ** 2 / ex[live]).sum())
                    dof += int(live.sum()) - 1
                    sd = np.sqrt(ex * (1 - ex) / N)
                    for s in sd:
                        if s > 0:
                            expected += math.erfc(tol / (s * math.sqrt(2)))
    return dict(tol=tol, pins=pins, comparisons=comparisons, exceed=exceed, expected=expected,
                worst=worst, bad_runs=bad_runs, runs=pins * N, chi2=chi2, dof=dof)


_C1 = {}


def criterion1_cached():
    if not _C1:
        t0 = time.time()
        _C1.update(criterion1_runs())
        _C1["secs"] = time.time() - t0
    return _C1


def test_criterion_1_marginals():
    r = criterion1_cached()
    secs = r["secs"]
    ok = r["exceed"] == 0 and secs <= 600
    sigma = math.sqrt(r["expected"])
    report(1, ok, f"{r['exceed']} of {r['comparisons']} marginal values outside {r['tol']:.4f} "
                  f"(max dev {r['worst']:.5f}) over {r['pins']} pins in {secs:.0f}s; "
                  f"a correct sampler is expected to exceed {r['expected']:.1f} +/- {sigma:.1f} times")
    assert ok


def test_marginal_deviations_match_sampling_noise():
    """Diagnostic for the runs above: pooled chi-square fit and exceedance count.

    Each variable's N-sample histogram against its exact marginal contributes a
    chi-square with (support - 1) degrees of freedom. A sampler with the right
    marginals gives chi2/dof near 1 and an exceedance count near its expectation.
    """
    r = criterion1_cached()
    z = (r["chi2"] - r["dof"]) / math.sqrt(2 * r["dof"])
    print(f"chi2 = {r['chi2']:.1f} on {r['dof']} dof (z = {z:.2f}); "
          f"exceedances {r['exceed']} vs expected {r['expected']:.1f}")
    assert abs(z) < 4
    assert abs(r["exceed"] - r["expected"]) < 4 * math.sqrt(r["expected"]) + 1
    assert r["bad_runs"] == 0


# 2

def test_criterion_2_log_probability():
    logs = pins = 0
    bad = []
    for name, csp in small_suite():
        cp = Coupler(csp, exact=True)
        for u, i, j, st in pin_states(csp):
            pins += 1
            outs = cp.enumerate_outcomes(st)
            total = sum((w for w, *_ in outs), Fraction(0))
            if total != 1:
                bad.append(f"{name} u={u}: mass {total}")
            for w, log, _, _ in outs:
                logs += 1
                lp = cp.log_probability(log, st.S, st.T, st.U)
                if lp != w:
                    bad.append(f"{name} u={u}: {lp} != {w}")
    ok = not bad and logs > 0
    report(2, ok, f"{logs} logs over {pins} pins, exact rational equality, {len(bad)} mismatches"
                  + (f"; e.g. {bad[0]}" if bad else ""))
    assert ok


# 3

def test_criterion_3_discrepancy_bound():
    runs = viol = 0
    jobs = []
    for name, csp in small_suite():
        cp = Coupler(csp)
        jobs += [(cp, st) for _, _, _, st in pin_states(csp) if st.S != st.T]
    rng = make_rng(SUITE_SEED, 3)
    seeds = rng.integers(0, 2**63 - 1, size=10**5)
    for t in range(10**5):
        cp, st = jobs[t % len(jobs)]
        out = cp.couple(st, int(seeds[t]))
        k = max(c.width for c in st.S | st.T)
        runs += 1
        viol += out.hamming > k * len(out.bad)
    ok = viol == 0 and runs == 10**5
    report(3, ok, f"{runs} seeded runs over {len(jobs)} pinned pairs, {viol} violations of hamming <= k|bad|")
    assert ok


# 4

def test_criterion_4_expected_discrepancy(verified):
    tally, reports = verified
    eligible = sum(1 for r in reports for p in r.pins if p.coupling_condition)
    ok, line = tally_line(tally, "coupling.expected-discrepancy-bound")
    worst = max((p.expected_hamming / p.bound for r in reports for p in r.pins if p.coupling_condition), default=0)
    report(4, ok, f"{eligible} pins meet the condition with delta = chi_max^2; {line}; max E/rhs {worst:.4f}")
    assert ok


# 5

def test_criterion_5_norm_bound(verified):
    tally, reports = verified
    names = [r.name for r in reports if r.theorem_condition]
    ok, line = tally_line(tally, "theorem.influence-norm-bound")
    report(5, ok, f"{len(names)} instances pass the general condition ({', '.join(names)}); {line}")
    assert ok


# 6

def test_criterion_6_zeta():
    z, e = zeta(2), pd_exponent(2)
    ok = abs(z - 2.8188) <= 0.001 and abs(e - 4.819) <= 0.001
    report(6, ok, f"zeta(2) = {z:.6f}, pD exponent = {e:.6f}")
    assert ok


# 7

def test_criterion_7_hardcore():
    t0 = time.time()
    tally = Tally()
    rows = check_hardcore(tally, lams=(5, 6, 8), levels=(2, 3), tol=1e-10)
    secs = time.time() - t0
    ok, line = tally_line(tally, "hardcore.lower-bound", "hardcore.edge-influence", "hardcore.product-identity")
    ok = ok and secs <= 300
    gaps = ", ".join(f"lam={r['lambda']} n={r['levels']}: {r['inf_norm']:.4f} >= {r['lower_bound']:.4f}" for r in rows)
    report(7, ok, f"{line}; {gaps}; {secs:.1f}s")
    assert ok


# 8

def test_criterion_8_construction():
    _, rep = growth_instance(36 / 49, 4)
    n2, n3 = rep.levels
    ok = (abs(rep.p - 36 / 49) < 1e-12 and rep.D == 4 and abs(rep.pD2 - 11.76) < 0.01 and rep.pD2 >= 4
          and rep.lam > rep.lambda_c and abs(rep.lambda_c - 4) < 1e-12 and abs(rep.lam - 6) < 1e-9
          and n3["inf_norm"] > n2["inf_norm"])
    report(8, ok, f"lambda={rep.lam:.6f} > lambda_c={rep.lambda_c}, p={rep.p:.6f}, D={rep.D}, pD^2={rep.pD2:.3f}, "
                  f"norm n=2 {n2['inf_norm']:.4f} < n=3 {n3['inf_norm']:.4f}")
    assert ok


# 9

def random_graphs(count=50, seed=SUITE_SEED, max_nodes=12, max_deg=4):
    rng = make_rng(seed, 9)
    out = []
    while len(out) < count:
        n = int(rng.integers(2, max_nodes + 1))
        g = nx.Graph()
        g.add_nodes_from(range(n))
        for _ in range(int(rng.integers(1, 3 * n))):
            a, b = (int(x) for x in rng.integers(0, n, size=2))
            if a != b and g.degree(a) < max_deg and g.degree(b) < max_deg:
                g.add_edge(a, b)
        if g.number_of_edges():
            out.append(g)
    return out


def test_criterion_9_structure(verified):
    tally, _ = verified
    own = Tally()
    for gi, g in enumerate(random_graphs()):
        d = max(deg for _, deg in g.degree())
        for v in g:
            for size in (2, 3, 4):
                trees = enumerate_two_trees(g, v, size)
                own.record("graphs.two-tree-count-bound", len(trees) <= two_tree_count_bound(d, size),
                           f"graph {gi} v={v} size={size}: {len(trees)}")
        for comp in nx.connected_components(g):
            for v in comp:
                t = extract_two_tree(g, comp, v)
                own.record("graphs.extract-two-tree", is_two_tree(g, t) and len(t) * (d + 1) >= len(comp),
                           f"graph {gi} v={v}")
    ok1, l1 = tally_line(own, "graphs.two-tree-count-bound", "graphs.extract-two-tree")
    ok2, l2 = tally_line(tally, "structure.component-witness", "structure.disjoint-prob-bound")
    ok = ok1 and ok2
    report(9, ok, f"50 graphs: {l1}; suite: {l2}")
    assert ok


# 10

def test_criterion_10_lll(verified):
    tally, _ = verified
    ok, line = tally_line(tally, "conditions.lll-lower-bound", "conditions.hss-single-variable")
    report(10, ok, line)
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
