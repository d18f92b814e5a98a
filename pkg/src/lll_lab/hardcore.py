"""Hardcore model on truncated regular trees: fixed points, mu_n, influence lower bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .csp import AtomicCsp, build_instance, instance_params
from .exact import ProbabilityEngine, influence_norms

FP_TOL = 1e-12


def lambda_c(delta: int) -> float:
    if delta < 3:
        raise ValueError("delta must be at least 3")
    return (delta - 1) ** (delta - 1) / (delta - 2) ** delta


@dataclass(frozen=True)
class FixedPoint:
    r_star: float
    q_star: float
    lam: float
    delta: int


def tree_map(lam: float, delta: int, r: float) -> float:
    return lam / (1 + r) ** (delta - 1)


def fixed_point(lam: float, delta: int, iterations: int = 200) -> FixedPoint:
    """Unique root of f(R) = R on [0, lam] by bisection (f - R is decreasing)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if delta < 3:
        raise ValueError("delta must be at least 3")
    lo, hi = 0.0, float(lam)
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if mid in (lo, hi):
            break
        if tree_map(lam, delta, mid) - mid > 0:
            lo = mid
        else:
            hi = mid
    r = (lo + hi) / 2
    return FixedPoint(r, r / (1 + r), lam, delta)


def nonuniqueness_margin(delta: int, fp: FixedPoint) -> float:
    return (delta - 1) * fp.q_star


@dataclass(frozen=True)
class TreeInstance:
    """Truncated tree with n levels: root has delta children, other internal vertices delta-1."""

    delta: int
    levels: int
    lam: float
    leaf_field: float

    def __post_init__(self):
        if self.delta < 3 or self.levels < 2:
            raise ValueError("need delta >= 3 and levels >= 2")
        if not 0 < self.leaf_field < 1:
            raise ValueError("leaf field must lie in (0, 1)")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")

    @classmethod
    def at_fixed_point(cls, delta: int, levels: int, lam: float) -> "TreeInstance":
        return cls(delta, levels, lam, fixed_point(lam, delta).q_star)

    @cached_property
    def parents(self) -> tuple[int, ...]:
        """Level-order parent indices; the root's parent is -1."""
        par = [-1]
        frontier = [0]
        for level in range(1, self.levels):
            nxt = []
            for v in frontier:
                for _ in range(self.delta if v == 0 else self.delta - 1):
                    par.append(v)
                    nxt.append(len(par) - 1)
            frontier = nxt
        return tuple(par)

    @cached_property
    def depth(self) -> tuple[int, ...]:
        d = [0] * len(self.parents)
        for v in range(1, len(d)):
            d[v] = d[self.parents[v]] + 1
        return tuple(d)

    @property
    def size(self) -> int:
        return len(self.parents)

    def is_leaf(self, v: int) -> bool:
        return self.depth[v] == self.levels - 1

    def children(self, v: int) -> list[int]:
        return [w for w in range(1, self.size) if self.parents[w] == v]

    def path(self, u: int, v: int) -> list[int]:
        up_u, up_v = [u], [v]
        while up_u[-1] != 0:
            up_u.append(self.parents[up_u[-1]])
        while up_v[-1] != 0:
            up_v.append(self.parents[up_v[-1]])
        common = set(up_u) & set(up_v)
        lca = next(w for w in up_u if w in common)
        left = up_u[: up_u.index(lca) + 1]
        right = up_v[: up_v.index(lca)]
        return left + right[::-1]

    def ratio(self, v: int) -> float:
        """Occupancy ratio of the vertex's own weight: lambda inside, q/(1-q) at leaves."""
        return self.leaf_field / (1 - self.leaf_field) if self.is_leaf(v) else self.lam


@dataclass
class TreeMarginals:
    subtree_ratio: np.ndarray   # ratio of v in the subtree hanging below it
    marginal: np.ndarray        # Pr[v occupied] under mu_n


def tree_marginals(inst: TreeInstance) -> TreeMarginals:
    """Two-pass recursion: bottom-up subtree ratios, then top-down messages."""
    n = inst.size
    kids = [[] for _ in range(n)]
    for v in range(1, n):
        kids[inst.parents[v]].append(v)
    sub = np.zeros(n)
    for v in reversed(range(n)):
        sub[v] = inst.ratio(v) * math.prod(1 / (1 + sub[w]) for w in kids[v])
    # down[v]: ratio of v's parent in the tree with v's subtree removed
    down = np.zeros(n)
    full = np.zeros(n)
    full[0] = sub[0]
    for v in range(n):
        for w in kids[v]:
            others = math.prod(1 / (1 + sub[x]) for x in kids[v] if x != w)
            parent_msg = 1 / (1 + down[v]) if v != 0 else 1.0
            down[w] = inst.ratio(v) * others * parent_msg
            full[w] = sub[w] / (1 + down[w])
    return TreeMarginals(sub, full / (1 + full))


def build_mu_n_csp(inst: TreeInstance) -> AtomicCsp:
    variables = []
    for v in range(inst.size):
        p1 = inst.leaf_field if inst.is_leaf(v) else inst.lam / (1 + inst.lam)
        variables.append({"domain": ["0", "1"], "weights": [1 - p1, p1]})
    constraints = [{"scope": [inst.parents[v], v], "forbidden": [1, 1]} for v in range(1, inst.size)]
    return build_instance({"variables": variables, "constraints": constraints})


def _check_fixed_point_field(inst: TreeInstance) -> FixedPoint:
    fp = fixed_point(inst.lam, inst.delta)
    if abs(inst.leaf_field - fp.q_star) > FP_TOL:
        raise ValueError(f"leaf field {inst.leaf_field} is not the fixed-point value {fp.q_star}")
    return fp


def edge_influence(inst: TreeInstance) -> float:
    """Signed influence across any edge of mu_n: -R*/(1+R*)."""
    return -_check_fixed_point_field(inst).q_star


@dataclass
class ProductCheck:
    passed: bool
    direct: float
    product: float
    error: float


def influence_product_check(inst: TreeInstance, u: int, w: int, v: int,
                            engine: ProbabilityEngine | None = None, tol: float = 1e-10) -> ProductCheck:
    if len({u, w, v}) < 3:
        raise ValueError("u, w, v must be distinct")
    if w not in inst.path(u, v):
        raise ValueError(f"{w} is not on the path from {u} to {v}")
    eng = engine or ProbabilityEngine(build_mu_n_csp(inst))
    direct = float(eng.signed_influence(u, v))
    prod = float(eng.signed_influence(u, w)) * float(eng.signed_influence(w, v))
    return ProductCheck(abs(direct - prod) <= tol, direct, prod, abs(direct - prod))


def influence_lower_bound(delta: int, n: int, fp: FixedPoint) -> float:
    margin = nonuniqueness_margin(delta, fp)
    if margin <= 1:
        raise ValueError(f"non-uniqueness margin {margin} does not exceed 1")
    return delta / (delta - 1) * margin ** (n - 1)


def split_zero_value(csp: AtomicCsp, copies: int) -> AtomicCsp:
    """Replace value 0 of every Boolean variable by `copies` equal-weight values.

    Value 1 keeps the last index, so atomic constraints forbidding 1 stay atomic.
    """
    if copies < 1:
        raise ValueError("copies must be at least 1")
    variables = []
    for var in csp.variables:
        if var.size != 2:
            raise ValueError("domain splitting is defined for Boolean variables")
        w0, w1 = var.weights
        variables.append({"domain": [f"0.{i}" for i in range(copies)] + ["1"],
                          "weights": [w0 / copies] * copies + [w1]})
    constraints = []
    for c in csp.constraints:
        if any(a != 1 for a in c.forbidden):
            raise ValueError("splitting needs constraints that forbid value 1 only")
        constraints.append({"scope": list(c.scope), "forbidden": [copies] * len(c.scope)})
    return build_instance({"variables": variables, "constraints": constraints})


def degree_for_chi(chi_min: float) -> float:
    """Degree sizing D = 2 chi_min + 2 used with the split instances."""
    return 2 * chi_min + 2


@dataclass
class GrowthReport:
    lam: float
    delta: int
    p: float
    D: int
    pD2: float
    lambda_c: float
    above_threshold: bool
    chi_min_split: float
    levels: list = field(default_factory=list)   # dicts per n

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in ("lam", "delta", "p", "D", "pD2", "lambda_c", "above_threshold",
                                               "chi_min_split", "levels")}


def growth_instance(p_target: float, D_target: int, levels=(2, 3)) -> tuple[list[AtomicCsp], GrowthReport]:
    """Hardcore trees with p = lambda^2/(1+lambda)^2 and D = 2(Delta-1)."""
    if D_target < 4 or D_target % 2:
        raise ValueError("D must be even and at least 4")
    if not 0 < p_target < 1:
        raise ValueError("p must lie in (0, 1)")
    if p_target * D_target**2 < 4:
        raise ValueError(f"p D^2 = {p_target * D_target**2} is below 4")
    s = math.sqrt(p_target)
    lam = s / (1 - s)
    delta = D_target // 2 + 1
    lc = lambda_c(delta)
    fp = fixed_point(lam, delta)
    rep = GrowthReport(lam, delta, p_target, D_target, p_target * D_target**2, lc, lam > lc, 1 + 1 / lam)
    csps = []
    for n in levels:
        inst = TreeInstance(delta, n, lam, fp.q_star)
        csp = build_mu_n_csp(inst)
        csps.append(csp)
        entry = {"levels": n, "variables": csp.n, "D_instance": instance_params(csp).D,
                 "p_instance": instance_params(csp).p}
        if 2**csp.n <= 2**22:
            entry["inf_norm"] = influence_norms(ProbabilityEngine(csp).influence_matrix())[1]
        if nonuniqueness_margin(delta, fp) > 1:
            entry["lower_bound"] = influence_lower_bound(delta, n, fp)
        rep.levels.append(entry)
    return csps, rep
