"""Named instance collections used by the verifier, the acceptance run and the scripts."""

from __future__ import annotations

from .csp import AtomicCsp, UnsatisfiableError
from .coupling import CoupleState, pinned_state
from .generate import UniformAtomicConfig, random_atomic_csp, wide_chain, wide_star
from .hardcore import TreeInstance, build_mu_n_csp
from .rng import make_rng

SUITE_SEED = 2024


def random_configs(count: int = 20, seed: int = SUITE_SEED, max_vars: int = 8, max_q: int = 3,
                   max_m: int = 6) -> list[UniformAtomicConfig]:
    rng = make_rng(seed, 0)
    out = []
    for idx in range(count):
        n = int(rng.integers(3, max_vars + 1))
        q = int(rng.integers(2, max_q + 1))
        k = int(rng.integers(1, min(3, n) + 1))
        m = int(rng.integers(1, max_m + 1))
        out.append(UniformAtomicConfig(n, q, k, m, seed=seed * 1000 + idx,
                                       weights="uniform" if idx % 2 == 0 else "random"))
    return out


def random_suite(count: int = 20, seed: int = SUITE_SEED, **kw) -> list[tuple[str, AtomicCsp]]:
    return [(f"random-{i:02d}", random_atomic_csp(cfg)) for i, cfg in enumerate(random_configs(count, seed, **kw))]


def hardcore_suite() -> list[tuple[str, AtomicCsp]]:
    out = []
    for lam in (4, 6):
        for n in (2, 3):
            out.append((f"hardcore-d3-n{n}-lam{lam}", build_mu_n_csp(TreeInstance.at_fixed_point(3, n, lam))))
    return out


def regime_suite() -> list[tuple[str, AtomicCsp]]:
    """Sparse instances with wide constraints, deep inside the correlation-decay regime."""
    return [
        ("chain-q4-w7", wide_chain(4, 7, 2, seed=1)),
        ("chain-q2-w14", wide_chain(2, 14, 2, seed=2)),
        ("star-q5-w7", wide_star(5, 7, 3, seed=3)),
        ("chain-q4-w9-weighted", wide_chain(4, 9, 2, seed=4, weights=[0.2, 0.25, 0.25, 0.3])),
        ("chain-q3-w10-x3", wide_chain(3, 10, 3, seed=5)),
    ]


def small_suite() -> list[tuple[str, AtomicCsp]]:
    """Instances small enough for full enumeration of coupling outcomes."""
    return random_suite() + hardcore_suite()


def pin_states(csp: AtomicCsp) -> list[tuple[int, int, int, CoupleState]]:
    """Every (u, i, j), i != j, with both pins feasible, and its coupling state."""
    from .exact import ProbabilityEngine

    eng = ProbabilityEngine(csp)
    C = csp.initial_constraints()
    feasible = {(u, i) for u in range(csp.n) for i in range(csp.variables[u].size) if eng.prob(C, {u: i}) > 0}
    out = []
    for u in range(csp.n):
        for i in range(csp.variables[u].size):
            for j in range(csp.variables[u].size):
                if i != j and (u, i) in feasible and (u, j) in feasible:
                    try:
                        out.append((u, i, j, pinned_state(csp, u, i, j)))
                    except UnsatisfiableError:
                        continue
    return out
