"""Exact probabilities under the product measure: enumeration and inclusion-exclusion.

All quantities are Pr_P[...] where P is the product of the per-variable weights.
Constraint sets are split into variable-disjoint components; each component is
evaluated by enumerating its variables or by inclusion-exclusion over constraint
subsets. In exact mode every number is a Fraction.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

from .csp import (
    AtomicCsp,
    CspError,
    SimplifiedConstraint,
    UnsatisfiableError,
    try_simplify,
)

MAX_STATES = 2**28          # hard refusal threshold for any enumeration
AUTO_COMPONENT_STATES = 2**12   # auto mode enumerates components up to this size
FULL_TABLE_STATES = 2**22   # vectorised whole-instance tables up to this size


class EnumerationLimitError(CspError):
    pass


@dataclass
class DistributionTable:
    variables: tuple[int, ...]
    support: np.ndarray   # (R, n) value indices
    mass: list | np.ndarray

    def to_json(self) -> str:
        rows = [[list(map(int, a)), float(m) if not isinstance(m, Fraction) else str(m)]
                for a, m in zip(self.support, self.mass)]
        return json.dumps(rows)


@dataclass
class InfluenceMatrix:
    values: np.ndarray   # (n, n); entry (u, v) is the influence of u on v
    ids: tuple[int, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["u"] + [str(i) for i in self.ids])
        for i, row in zip(self.ids, self.values):
            w.writerow([str(i)] + [repr(float(x)) for x in row])
        return buf.getvalue()


def tv_distance(a: Sequence, b: Sequence):
    if len(a) != len(b):
        raise CspError(f"distributions over different universes ({len(a)} vs {len(b)} values)")
    return sum(abs(x - y) for x, y in zip(a, b)) / 2


def influence_norms(m: InfluenceMatrix | np.ndarray) -> tuple[float, float]:
    vals = m.values if isinstance(m, InfluenceMatrix) else np.asarray(m)
    if vals.size == 0:
        return 0.0, 0.0
    return float(vals.sum(axis=0).max()), float(vals.sum(axis=1).max())


def coupling_norm_bound(A: float, chi_max: float) -> float:
    if A < 0:
        raise ValueError("A must be non-negative")
    return chi_max**2 * A


def all_assignments(sizes: Sequence[int]) -> np.ndarray:
    """Every assignment of the given domain sizes as rows, in lexicographic order."""
    if not sizes:
        return np.zeros((1, 0), dtype=np.int64)
    grid = np.indices(tuple(sizes)).reshape(len(sizes), -1).T
    return np.ascontiguousarray(grid, dtype=np.int64)


def _components(cons: Iterable[SimplifiedConstraint]) -> list[frozenset]:
    parent: dict[int, int] = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    cons = list(cons)
    for c in cons:
        for v in c.remaining:
            parent.setdefault(v, v)
        r0 = find(c.remaining[0])
        for v in c.remaining[1:]:
            r = find(v)
            if r != r0:
                parent[r] = r0
    groups: dict[int, list] = {}
    for c in cons:
        groups.setdefault(find(c.remaining[0]), []).append(c)
    return [frozenset(g) for g in groups.values()]


class ProbabilityEngine:
    """Exact event probabilities for one instance.

    method: "auto" picks enumeration or inclusion-exclusion per component,
    "enumerate" and "inclusion_exclusion" force one path (used to cross-check).
    """

    def __init__(self, csp: AtomicCsp, exact: bool = False, method: str = "auto",
                 max_states: int = MAX_STATES):
        if method not in ("auto", "enumerate", "inclusion_exclusion"):
            raise ValueError(f"unknown method {method!r}")
        self.csp = csp
        self.exact = exact
        self.method = method
        self.max_states = min(max_states, MAX_STATES)
        if exact:
            self.w = [list(v.exact_weights) for v in csp.variables]
            self.one, self.zero = Fraction(1), Fraction(0)
        else:
            self.w = [list(v.weights) for v in csp.variables]
            self.one, self.zero = 1.0, 0.0
        self.warr = [np.asarray(v.weights, dtype=float) for v in csp.variables]
        self._cache: dict[frozenset, object] = {}
        self._table = None

    # basic events

    def pin_mass(self, pin: Mapping[int, int]):
        out = self.one
        for v, a in pin.items():
            out = out * self.w[v][a]
        return out

    def prob(self, constraints: Iterable[SimplifiedConstraint], pin: Mapping[int, int] | None = None):
        """Pr_P[all constraints satisfied and pin holds]."""
        cons = constraints if isinstance(constraints, frozenset) else frozenset(constraints)
        base = self.one
        if pin:
            cons = try_simplify(cons, pin)
            if cons is None:
                return self.zero
            base = self.pin_mass(pin)
        return base * self._prob_set(cons)

    def _prob_set(self, cons: frozenset):
        if not cons:
            return self.one
        hit = self._cache.get(cons)
        if hit is not None:
            return hit
        out = self.one
        for comp in _components(cons):
            out = out * self._prob_component(comp)
            if out == 0:
                break
        self._cache[cons] = out
        return out

    def _prob_component(self, comp: frozenset):
        if len(comp) == 1:
            (c,) = comp
            return self.one - self.pin_mass(c.forbidden_map())
        hit = self._cache.get(comp)
        if hit is not None:
            return hit
        method = self.method
        if method == "auto":
            states = math.prod(self.csp.variables[v].size for v in {v for c in comp for v in c.remaining})
            method = "enumerate" if (states <= AUTO_COMPONENT_STATES and not self.exact) else "inclusion_exclusion"
        out = self._enumerate(comp) if method == "enumerate" else self._inclusion_exclusion(comp)
        self._cache[comp] = out
        return out

    def _enumerate(self, cons: frozenset):
        vs = sorted({v for c in cons for v in c.remaining})
        sizes = [self.csp.variables[v].size for v in vs]
        states = math.prod(sizes)
        if states > self.max_states:
            raise EnumerationLimitError(f"enumeration over {states} states exceeds the limit {self.max_states}")
        pos = {v: i for i, v in enumerate(vs)}
        if self.exact:
            vecs = [np.array(self.w[v], dtype=object) for v in vs]
        else:
            vecs = [self.warr[v] for v in vs]
        tensor = reduce(np.multiply.outer, vecs) if len(vecs) > 1 else vecs[0].copy()
        for c in cons:
            idx = [slice(None)] * len(vs)
            for v, a in zip(c.remaining, c.forbidden):
                idx[pos[v]] = a
            tensor[tuple(idx)] = 0
        total = tensor.sum()
        return Fraction(total) if self.exact else float(total)

    def _inclusion_exclusion(self, cons: frozenset):
        # Pr[no constraint violated] = sum over consistent subsets A of (-1)^|A| P(all of A violated).
        cs = sorted(cons)
        w = self.w
        total = [self.zero]

        def rec(start, merged, pr, sign):
            total[0] += pr if sign > 0 else -pr
            for j in range(start, len(cs)):
                c = cs[j]
                extra = self.one
                ok = True
                new = []
                for v, a in zip(c.remaining, c.forbidden):
                    b = merged.get(v)
                    if b is None:
                        extra = extra * w[v][a]
                        new.append((v, a))
                    elif b != a:
                        ok = False
                        break
                if not ok:
                    continue
                for v, a in new:
                    merged[v] = a
                rec(j + 1, merged, pr * extra, -sign)
                for v, _ in new:
                    del merged[v]

        rec(0, {}, self.one, 1)
        return total[0]

    def event_probability(self, constraints: Iterable[SimplifiedConstraint], pin: Mapping[int, int] | None = None,
                          negated: Iterable[SimplifiedConstraint] = ()):
        full = _merge_negated(pin, negated)
        if full is None:
            return self.zero
        return self.prob(constraints, full)

    def conditional_probability(self, event: Iterable[SimplifiedConstraint],
                                given: Iterable[SimplifiedConstraint] = (),
                                given_pin: Mapping[int, int] | None = None,
                                negated: Iterable[SimplifiedConstraint] = ()):
        """Pr[event | given, given_pin, every constraint in negated violated]."""
        given = frozenset(given)
        full = _merge_negated(given_pin, negated)
        den = self.zero if full is None else self.prob(given, full)
        if den == 0:
            raise UnsatisfiableError(f"conditioning event has zero mass: {sorted(given)} pin={given_pin} negated={list(negated)}")
        num = self.prob(given | frozenset(event), full)
        return num / den

    # distributions over variables

    def marginal(self, constraints: Iterable[SimplifiedConstraint], v: int, pin: Mapping[int, int] | None = None) -> list:
        """Law of variable v under P(. | constraints, pin)."""
        cons = frozenset(constraints)
        pin = dict(pin or {})
        if v in pin:
            out = [self.zero] * self.csp.variables[v].size
            if self.prob(cons, pin) == 0:
                raise UnsatisfiableError(f"pin {pin} has zero mass")
            out[pin[v]] = self.one
            return out
        masses = []
        for a in range(self.csp.variables[v].size):
            pin[v] = a
            masses.append(self.prob(cons, pin))
        tot = sum(masses)
        if tot == 0:
            raise UnsatisfiableError(f"conditioning on {sorted(cons)} with pin {pin} has zero mass")
        return [m / tot for m in masses]

    def pinned_marginal(self, u: int, value: int, v: int) -> list:
        return self.marginal(self.csp.initial_constraints(), v, {u: value})

    def full_table(self):
        """(assignments, product mass, satisfied mask) over the whole instance."""
        if self._table is None:
            sizes = self.csp.sizes
            states = math.prod(sizes)
            if states > min(self.max_states, FULL_TABLE_STATES * 16):
                raise EnumerationLimitError(f"instance has {states} assignments; enumeration refused")
            X = all_assignments(sizes)
            mass = np.ones(len(X))
            for v in range(self.csp.n):
                mass *= self.warr[v][X[:, v]]
            sat = np.ones(len(X), dtype=bool)
            for c in self.csp.constraints:
                hit = np.ones(len(X), dtype=bool)
                for v, a in zip(c.scope, c.forbidden):
                    hit &= X[:, v] == a
                sat &= ~hit
            self._table = (X, mass, sat)
        return self._table

    def lll_distribution(self) -> DistributionTable:
        X, mass, sat = self.full_table()
        if not sat.any():
            raise UnsatisfiableError("instance is unsatisfiable")
        support = X[sat]
        if self.exact:
            ms = []
            for row in support:
                m = self.one
                for v, a in enumerate(row):
                    m *= self.w[v][a]
                ms.append(m)
            tot = sum(ms)
            return DistributionTable(tuple(range(self.csp.n)), support, [m / tot for m in ms])
        m = mass[sat]
        return DistributionTable(tuple(range(self.csp.n)), support, m / m.sum())

    def influence_matrix(self) -> InfluenceMatrix:
        n = self.csp.n
        vals = np.full((n, n), self.zero, dtype=object) if self.exact else np.zeros((n, n))
        if self.exact or math.prod(self.csp.sizes) > FULL_TABLE_STATES:
            cons = self.csp.initial_constraints()
            for u in range(n):
                margs = []
                for i in range(self.csp.variables[u].size):
                    if self.prob(cons, {u: i}) == 0:
                        continue
                    margs.append([self.marginal(cons, v, {u: i}) if v != u else None for v in range(n)])
                for v in range(n):
                    if v == u:
                        continue
                    best = 0
                    for a in range(len(margs)):
                        for b in range(a + 1, len(margs)):
                            best = max(best, tv_distance(margs[a][v], margs[b][v]))
                    vals[u, v] = best if self.exact else float(best)
            return InfluenceMatrix(vals, tuple(range(n)))
        X, mass, sat = self.full_table()
        m = np.where(sat, mass, 0.0)
        for u in range(n):
            margs = []
            for i in range(self.csp.variables[u].size):
                sel = X[:, u] == i
                mu = m[sel]
                tot = mu.sum()
                if tot == 0:
                    continue
                Xs = X[sel]
                margs.append([np.bincount(Xs[:, v], weights=mu, minlength=self.csp.variables[v].size) / tot
                              for v in range(n)])
            for v in range(n):
                if v == u or len(margs) < 2:
                    continue
                stack = np.array([mg[v] for mg in margs])
                diff = np.abs(stack[:, None, :] - stack[None, :, :]).sum(axis=2) / 2
                vals[u, v] = diff.max()
        return InfluenceMatrix(vals, tuple(range(n)))

    def signed_influence(self, u: int, v: int):
        if self.csp.variables[u].size != 2 or self.csp.variables[v].size != 2:
            raise CspError("signed influence needs Boolean variables")
        return self.pinned_marginal(u, 1, v)[1] - self.pinned_marginal(u, 0, v)[1]


def _merge_negated(pin: Mapping[int, int] | None, negated: Iterable[SimplifiedConstraint]) -> dict | None:
    out = dict(pin or {})
    for c in negated:
        for v, a in zip(c.remaining, c.forbidden):
            if out.setdefault(v, a) != a:
                return None
    return out


class ConditionalSampler:
    """Exact sampler for P_W(. | all constraints) over a variable set W.

    Variables touched by the constraints are drawn jointly by inverse CDF over
    their enumerated support when it is small, else by sequential exact
    conditionals. Untouched variables are independent draws from their weights.
    """

    TABLE_STATES = 2**20

    def __init__(self, engine: ProbabilityEngine, constraints: Iterable[SimplifiedConstraint], variables: Iterable[int]):
        self.engine = engine
        self.cons = frozenset(constraints)
        self.vars = sorted(variables)
        touched = {v for c in self.cons for v in c.remaining}
        if not touched <= set(self.vars):
            raise CspError("constraints mention variables outside the sampled set")
        self.cvars = sorted(touched)
        self.fvars = [v for v in self.vars if v not in touched]
        pos = {v: i for i, v in enumerate(self.vars)}
        self.cpos = np.array([pos[v] for v in self.cvars], dtype=np.int64)
        self.fpos = np.array([pos[v] for v in self.fvars], dtype=np.int64)
        csp = engine.csp
        self.table = None
        sizes = [csp.variables[v].size for v in self.cvars]
        if math.prod(sizes) <= self.TABLE_STATES:
            rows = all_assignments(sizes)
            mass = np.ones(len(rows))
            for i, v in enumerate(self.cvars):
                mass *= engine.warr[v][rows[:, i]]
            cpos = {v: i for i, v in enumerate(self.cvars)}
            for c in self.cons:
                hit = np.ones(len(rows), dtype=bool)
                for v, a in zip(c.remaining, c.forbidden):
                    hit &= rows[:, cpos[v]] == a
                mass[hit] = 0.0
            keep = mass > 0
            if not keep.any():
                raise UnsatisfiableError(f"cannot sample: {sorted(self.cons)} is unsatisfiable")
            self.table = rows[keep]
            cum = np.cumsum(mass[keep])
            self.cum = cum / cum[-1]
        self.fcum = [np.cumsum(engine.warr[v]) / engine.warr[v].sum() for v in self.fvars]

    def draw(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        out = np.empty((size, len(self.vars)), dtype=np.int64)
        if self.cvars:
            if self.table is not None:
                idx = np.searchsorted(self.cum, rng.random(size), side="right")
                out[:, self.cpos] = self.table[np.minimum(idx, len(self.table) - 1)]
            else:
                for t in range(size):
                    pin: dict[int, int] = {}
                    for i, v in enumerate(self.cvars):
                        marg = np.array([float(m) for m in self.engine.marginal(self.cons, v, pin)])
                        a = int(np.searchsorted(np.cumsum(marg), rng.random(), side="right"))
                        pin[v] = min(a, len(marg) - 1)
                        out[t, self.cpos[i]] = pin[v]
        for i, cum in enumerate(self.fcum):
            idx = np.searchsorted(cum, rng.random(size), side="right")
            out[:, self.fpos[i]] = np.minimum(idx, len(cum) - 1)
        return out
