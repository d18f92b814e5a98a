"""Atomic CSP data model: variables, constraints, simplification, dependency graphs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import networkx as nx

WEIGHT_TOL = 1e-12

Assignment = dict[int, int]


class CspError(ValueError):
    """Base class for instance and assignment errors."""


class AssignmentViolation(CspError):
    """An assignment falsifies a constraint (its remaining set would become empty)."""

    def __init__(self, origin: int, message: str | None = None):
        self.origin = origin
        super().__init__(message or f"assignment violates constraint {origin}")


class UnsatisfiableError(CspError):
    pass


@dataclass(frozen=True)
class VariableDecl:
    id: int
    domain: tuple[str, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.domain) < 2:
            raise CspError(f"variable {self.id}: domain size must be at least 2")
        if len(self.weights) != len(self.domain):
            raise CspError(f"variable {self.id}: {len(self.weights)} weights for {len(self.domain)} values")
        for w in self.weights:
            if not (0.0 < w <= 1.0):
                raise CspError(f"variable {self.id}: weight {w} outside (0, 1]")
        if abs(math.fsum(self.weights) - 1.0) > WEIGHT_TOL:
            raise CspError(f"variable {self.id}: weights sum to {math.fsum(self.weights)!r}, not 1")

    @property
    def size(self) -> int:
        return len(self.domain)

    @property
    def exact_weights(self) -> tuple[Fraction, ...]:
        # Snap each float to a nearby small-denominator rational so that 1/3 stays 1/3,
        # then renormalise so the exact weights sum to one.
        fr = [Fraction(w).limit_denominator(10**9) for w in self.weights]
        total = sum(fr)
        return tuple(f / total for f in fr)


@dataclass(frozen=True)
class AtomicConstraint:
    id: int
    scope: tuple[int, ...]
    forbidden: tuple[int, ...]

    def __post_init__(self):
        if not self.scope:
            raise CspError(f"constraint {self.id}: empty scope")
        if len(self.forbidden) != len(self.scope):
            raise CspError(f"constraint {self.id}: forbidden length differs from scope length")
        if any(a >= b for a, b in zip(self.scope, self.scope[1:])):
            raise CspError(f"constraint {self.id}: scope ids must be strictly increasing")


@dataclass(frozen=True, order=True)
class SimplifiedConstraint:
    """Succinct constraint (origin, Z) with the origin's forbidden values restricted to Z.

    Ordering is lexicographic on (origin, sorted Z), the total order used to pick c*.
    """

    origin: int
    remaining: tuple[int, ...]
    forbidden: tuple[int, ...] = field(compare=False)

    def __post_init__(self):
        if not self.remaining:
            raise CspError(f"simplified constraint from {self.origin} has an empty remaining set")
        if len(self.remaining) != len(self.forbidden):
            raise CspError(f"simplified constraint from {self.origin}: length mismatch")

    @property
    def width(self) -> int:
        return len(self.remaining)

    def forbidden_map(self) -> Assignment:
        return dict(zip(self.remaining, self.forbidden))

    def satisfied_by(self, x: Mapping[int, int] | Sequence[int]) -> bool:
        """True when x (covering Z) avoids the forbidden values somewhere on Z."""
        return any(x[v] != a for v, a in zip(self.remaining, self.forbidden))

    def to_json(self) -> list:
        return [self.origin, list(self.remaining)]

    def __repr__(self):
        return f"({self.origin},{set(self.remaining) or '{}'})"


ConstraintSet = frozenset  # frozenset[SimplifiedConstraint]


@dataclass(frozen=True)
class InstanceParams:
    p: float
    k: int
    D: int
    chi_min: float
    chi_max: float

    def to_json(self) -> dict:
        return {"p": self.p, "k": self.k, "D": self.D, "chi_min": self.chi_min, "chi_max": self.chi_max}


@dataclass(frozen=True)
class AtomicCsp:
    variables: tuple[VariableDecl, ...]
    constraints: tuple[AtomicConstraint, ...]

    def __post_init__(self):
        for idx, var in enumerate(self.variables):
            if var.id != idx:
                raise CspError(f"variable {idx}: id {var.id} does not match its position")
        n = len(self.variables)
        for idx, c in enumerate(self.constraints):
            if c.id != idx:
                raise CspError(f"constraint {idx}: id {c.id} does not match its position")
            for v, a in zip(c.scope, c.forbidden):
                if not (0 <= v < n):
                    raise CspError(f"constraint {idx}: unknown variable {v}")
                if not (0 <= a < self.variables[v].size):
                    raise CspError(f"constraint {idx}: forbidden value {a} outside the domain of variable {v}")

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(v.size for v in self.variables)

    @property
    def is_boolean(self) -> bool:
        return all(v.size == 2 for v in self.variables)

    def weight(self, v: int, a: int) -> float:
        return self.variables[v].weights[a]

    def initial_constraints(self) -> frozenset[SimplifiedConstraint]:
        return frozenset(SimplifiedConstraint(c.id, c.scope, c.forbidden) for c in self.constraints)

    def check_assignment(self, x: Mapping[int, int]) -> None:
        for v, a in x.items():
            if not (0 <= v < self.n):
                raise CspError(f"assignment: unknown variable {v}")
            if not (0 <= a < self.variables[v].size):
                raise CspError(f"assignment: value {a} outside the domain of variable {v}")

    def to_json(self) -> dict:
        return {
            "variables": [{"domain": list(v.domain), "weights": list(v.weights)} for v in self.variables],
            "constraints": [{"scope": list(c.scope), "forbidden": list(c.forbidden)} for c in self.constraints],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def build_instance(desc: Mapping) -> AtomicCsp:
    """Validate a parsed instance description and return an AtomicCsp."""
    if not isinstance(desc, Mapping) or "variables" not in desc:
        raise CspError("instance must be an object with a 'variables' list")
    raw_vars = desc["variables"]
    raw_cons = desc.get("constraints", [])
    if not isinstance(raw_vars, list) or not isinstance(raw_cons, list):
        raise CspError("'variables' and 'constraints' must be lists")
    variables = []
    for idx, rv in enumerate(raw_vars):
        if not isinstance(rv, Mapping) or "domain" not in rv:
            raise CspError(f"variable {idx}: missing 'domain'")
        domain = tuple(str(a) for a in rv["domain"])
        if len(set(domain)) != len(domain):
            raise CspError(f"variable {idx}: repeated value labels")
        if "weights" in rv and rv["weights"] is not None:
            try:
                weights = tuple(float(w) for w in rv["weights"])
            except (TypeError, ValueError) as exc:
                raise CspError(f"variable {idx}: weights must be numbers") from exc
        else:
            weights = tuple(1.0 / len(domain) for _ in domain) if domain else ()
        variables.append(VariableDecl(idx, domain, weights))
    constraints = []
    for idx, rc in enumerate(raw_cons):
        if not isinstance(rc, Mapping) or "scope" not in rc or "forbidden" not in rc:
            raise CspError(f"constraint {idx}: needs 'scope' and 'forbidden'")
        scope, forb = list(rc["scope"]), list(rc["forbidden"])
        if not all(isinstance(v, int) for v in scope + forb):
            raise CspError(f"constraint {idx}: scope and forbidden must be integer lists")
        if len(scope) != len(forb):
            raise CspError(f"constraint {idx}: forbidden length differs from scope length")
        if len(set(scope)) != len(scope):
            raise CspError(f"constraint {idx}: duplicate scope variable")
        pairs = sorted(zip(scope, forb))
        constraints.append(AtomicConstraint(idx, tuple(v for v, _ in pairs), tuple(a for _, a in pairs)))
    return AtomicCsp(tuple(variables), tuple(constraints))


def load_instance(path) -> AtomicCsp:
    with open(path, encoding="utf-8") as fh:
        try:
            desc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CspError(f"{path}: not valid JSON ({exc})") from exc
    return build_instance(desc)


def save_instance(csp: AtomicCsp, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(csp.dumps())
        fh.write("\n")


def uniform_csp(n: int, q: int, constraints: Iterable[tuple[Sequence[int], Sequence[int]]]) -> AtomicCsp:
    """Convenience constructor: n uniform q-ary variables."""
    return build_instance({
        "variables": [{"domain": [str(a) for a in range(q)]} for _ in range(n)],
        "constraints": [{"scope": list(s), "forbidden": list(f)} for s, f in constraints],
    })


def simplify(constraints: Iterable[SimplifiedConstraint], x: Mapping[int, int]) -> frozenset[SimplifiedConstraint]:
    """Drop constraints satisfied by x and remove x's variables from the rest.

    Raises AssignmentViolation if x matches some constraint on its whole remaining set.
    """
    out = []
    for c in constraints:
        keep_v, keep_a = [], []
        satisfied = False
        for v, a in zip(c.remaining, c.forbidden):
            if v in x:
                if x[v] != a:
                    satisfied = True
                    break
            else:
                keep_v.append(v)
                keep_a.append(a)
        if satisfied:
            continue
        if not keep_v:
            raise AssignmentViolation(c.origin)
        if len(keep_v) == len(c.remaining):
            out.append(c)
        else:
            out.append(SimplifiedConstraint(c.origin, tuple(keep_v), tuple(keep_a)))
    return frozenset(out)


def try_simplify(constraints: Iterable[SimplifiedConstraint], x: Mapping[int, int]) -> frozenset | None:
    """simplify() returning None instead of raising on a violation."""
    try:
        return simplify(constraints, x)
    except AssignmentViolation:
        return None


def concat(x: Mapping[int, int], y: Mapping[int, int]) -> Assignment:
    overlap = set(x) & set(y)
    if overlap:
        raise CspError(f"concatenation of overlapping assignments on {sorted(overlap)}")
    out = dict(x)
    out.update(y)
    return out


def dependency_graph(scopes: Mapping | Iterable) -> nx.Graph:
    """Graph on constraints with an edge whenever two scopes intersect.

    Accepts a mapping key -> scope, or an iterable of SimplifiedConstraint /
    AtomicConstraint objects (keyed by themselves).
    """
    if isinstance(scopes, Mapping):
        items = list(scopes.items())
    else:
        items = []
        for c in scopes:
            sc = c.remaining if isinstance(c, SimplifiedConstraint) else c.scope
            items.append((c, sc))
    g = nx.Graph()
    by_var: dict[int, list] = {}
    for key, sc in items:
        g.add_node(key)
        for v in sc:
            by_var.setdefault(v, []).append(key)
    for keys in by_var.values():
        for i, a in enumerate(keys):
            for b in keys[i + 1:]:
                if a != b:
                    g.add_edge(a, b)
    return g


def induced_subgraph(g: nx.Graph, nodes: Iterable) -> nx.Graph:
    return g.subgraph(list(nodes)).copy()


def constraint_params(csp: AtomicCsp, constraints: Iterable) -> InstanceParams:
    """p, k, D over the given constraint collection; chi over the whole instance."""
    cons = list(constraints)
    if not cons:
        raise CspError("no constraints")
    p, k = 0.0, 0
    for c in cons:
        sc = c.remaining if isinstance(c, SimplifiedConstraint) else c.scope
        prob = 1.0
        for v, a in zip(sc, c.forbidden):
            prob *= csp.weight(v, a)
        p = max(p, prob)
        k = max(k, len(sc))
    g = dependency_graph(cons)
    D = max((d for _, d in g.degree()), default=0)
    chi_min, chi_max = chi_range(csp)
    return InstanceParams(p=p, k=k, D=D, chi_min=chi_min, chi_max=chi_max)


def chi_range(csp: AtomicCsp) -> tuple[float, float]:
    inv = [1.0 / w for var in csp.variables for w in var.weights]
    return min(inv), max(inv)


def instance_params(csp: AtomicCsp) -> InstanceParams:
    return constraint_params(csp, csp.constraints)
