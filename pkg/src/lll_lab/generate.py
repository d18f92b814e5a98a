"""Seeded instance generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .csp import AtomicCsp, build_instance
from .exact import ProbabilityEngine
from .rng import make_rng


@dataclass(frozen=True)
class UniformAtomicConfig:
    n: int
    q: int
    k: int
    m: int
    seed: int
    weights: str = "uniform"     # or "random"
    max_tries: int = 1000


def _random_weights(rng: np.random.Generator, q: int, grain: int = 1000, floor: int = 50) -> list[float]:
    """Weights that are multiples of 1/grain, each at least floor/grain."""
    spare = grain - floor * q
    parts = np.floor(rng.dirichlet(np.full(q, 2.0)) * spare).astype(int)
    parts[-1] += spare - parts.sum()
    return [(floor + int(x)) / grain for x in parts]


def _variables(rng, n: int, q: int, weights) -> list[dict]:
    """weights: "uniform", "random", or one explicit vector shared by every variable."""
    out = []
    for _ in range(n):
        var = {"domain": [str(a) for a in range(q)]}
        if not isinstance(weights, str):
            if len(weights) != q:
                raise ValueError("explicit weight vector must have q entries")
            var["weights"] = list(weights)
        elif weights == "random":
            var["weights"] = _random_weights(rng, q)
        elif weights != "uniform":
            raise ValueError(f"unknown weight scheme {weights!r}")
        out.append(var)
    return out


def random_atomic_csp(cfg: UniformAtomicConfig) -> AtomicCsp:
    """m constraints of width k on n q-ary variables; redrawn until satisfiable."""
    if not 1 <= cfg.k <= cfg.n:
        raise ValueError("need 1 <= k <= n")
    if cfg.q < 2:
        raise ValueError("q must be at least 2")
    rng = make_rng(cfg.seed)
    for _ in range(cfg.max_tries):
        variables = _variables(rng, cfg.n, cfg.q, cfg.weights)
        cons = []
        for _ in range(cfg.m):
            scope = sorted(int(v) for v in rng.choice(cfg.n, size=cfg.k, replace=False))
            cons.append({"scope": scope, "forbidden": [int(a) for a in rng.integers(cfg.q, size=cfg.k)]})
        csp = build_instance({"variables": variables, "constraints": cons})
        if ProbabilityEngine(csp).prob(csp.initial_constraints()) > 0:
            return csp
    raise RuntimeError("no satisfiable draw within max_tries")


def wide_chain(q: int, width: int, count: int, seed: int, weights="uniform") -> AtomicCsp:
    """`count` constraints of the given width, consecutive ones sharing one variable."""
    rng = make_rng(seed)
    n = count * (width - 1) + 1
    variables = _variables(rng, n, q, weights)
    cons = []
    for i in range(count):
        scope = list(range(i * (width - 1), i * (width - 1) + width))
        cons.append({"scope": scope, "forbidden": [int(a) for a in rng.integers(q, size=width)]})
    return build_instance({"variables": variables, "constraints": cons})


def wide_star(q: int, width: int, count: int, seed: int, weights="uniform") -> AtomicCsp:
    """`count` constraints of the given width all sharing variable 0."""
    rng = make_rng(seed)
    n = count * (width - 1) + 1
    variables = _variables(rng, n, q, weights)
    cons = []
    for i in range(count):
        scope = [0] + list(range(1 + i * (width - 1), 1 + (i + 1) * (width - 1)))
        cons.append({"scope": scope, "forbidden": [int(a) for a in rng.integers(q, size=width)]})
    return build_instance({"variables": variables, "constraints": cons})
