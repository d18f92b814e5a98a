"""Threshold formulas and condition checkers."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

from .csp import AtomicCsp, dependency_graph
from .exact import EnumerationLimitError, ProbabilityEngine

ZETA_NOTE = "zeta is the exponent excess over 2, so the D exponent is 2 + zeta"


@dataclass
class ConditionReport:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    inputs: dict
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def zeta(chi_min: float) -> float:
    """2 ln(2 - 1/chi) / (ln chi - ln(2 - 1/chi)); decreasing, tends to 0 as chi grows."""
    if chi_min <= 1:
        raise ValueError("chi_min must exceed 1")
    a = math.log(2 - 1 / chi_min)
    return 2 * a / (math.log(chi_min) - a)


def zeta_ratio_form(chi_min: float) -> float:
    """2 / (2 - ln(2 chi - 1)/ln chi): the alternative display, equal to 2 + zeta."""
    if chi_min <= 1:
        raise ValueError("chi_min must exceed 1")
    return 2 / (2 - math.log(2 * chi_min - 1) / math.log(chi_min))


def pd_exponent(chi_min: float) -> float:
    """Exponent of D in the regime p * D^(2 + zeta) <~ 1."""
    return 2 + zeta(chi_min)


def check_theorem_uniform(q: int, p: float, D: int) -> ConditionReport:
    z = zeta(q)
    lhs = 60 * q**3 * p * (D + 1) ** (2 + z)
    return ConditionReport("uniform-domain threshold", lhs, 1.0, lhs <= 1.0,
                           {"q": q, "p": p, "D": D}, {"zeta": z, "note": ZETA_NOTE})


def check_theorem_general(chi_max: float, chi_min: float, p: float, D: int) -> ConditionReport:
    if chi_max < chi_min:
        raise ValueError("chi_max must be at least chi_min")
    z = zeta(chi_min)
    lhs = (2 * math.e) ** (1 + z / 2) * chi_max**3 * p * (D + 1) ** (2 + z)
    return ConditionReport("general-domain threshold", lhs, 1.0, lhs <= 1.0,
                           {"chi_max": chi_max, "chi_min": chi_min, "p": p, "D": D},
                           {"zeta": z, "note": ZETA_NOTE})


def check_coupling_condition(delta: float, chi_min: float, p: float, D: int) -> ConditionReport:
    if D < 1:
        raise ValueError("the coupling condition needs D >= 1")
    if delta < 1:
        raise ValueError("delta must be at least 1")
    z = zeta(chi_min)
    lhs = (2 * math.e) ** (1 + z / 2) * delta * p * (D + 1) ** (2 + z)
    return ConditionReport("coupling discrepancy condition", lhs, 1.0, lhs <= 1.0,
                           {"delta": delta, "chi_min": chi_min, "p": p, "D": D},
                           {"zeta": z, "note": ZETA_NOTE})


def violation_probability(csp: AtomicCsp, cid: int) -> float:
    c = csp.constraints[cid]
    return math.prod(csp.weight(v, a) for v, a in zip(c.scope, c.forbidden))


def symmetric_x(csp: AtomicCsp) -> dict[int, float]:
    """x(c) = e * p for every constraint, p the instance's maximum violation probability."""
    p = max((violation_probability(csp, c.id) for c in csp.constraints), default=0.0)
    return {c.id: math.e * p for c in csp.constraints}


def check_asymmetric_lll(csp: AtomicCsp, x: Mapping[int, float], engine: ProbabilityEngine | None = None) -> ConditionReport:
    for cid, val in x.items():
        if not 0 < val < 1:
            raise ValueError(f"x({cid}) = {val} outside (0, 1)")
    g = dependency_graph({c.id: c.scope for c in csp.constraints})
    worst, per = 0.0, {}
    for c in csp.constraints:
        rhs = x[c.id] * math.prod(1 - x[o] for o in g[c.id])
        pv = violation_probability(csp, c.id)
        per[c.id] = {"violation": pv, "rhs": rhs, "ok": pv <= rhs}
        worst = max(worst, pv / rhs)
    ok = all(r["ok"] for r in per.values())
    guaranteed = math.prod(1 - x[c.id] for c in csp.constraints)
    details = {"per_constraint": per, "guaranteed_satisfaction": guaranteed}
    try:
        eng = engine or ProbabilityEngine(csp)
        details["exact_satisfaction"] = float(eng.prob(csp.initial_constraints()))
    except EnumerationLimitError:
        details["exact_satisfaction"] = None
    return ConditionReport("asymmetric local lemma", worst, 1.0, ok,
                           {"x": {str(k): v for k, v in x.items()}}, details)


def hss_rhs(csp: AtomicCsp, event_scope, event_prob: float, x: Mapping[int, float]) -> float:
    """Pr[A] times prod over constraints meeting vbl(A) of 1/(1 - x(c))."""
    scope = set(event_scope)
    out = event_prob
    for c in csp.constraints:
        if scope & set(c.scope):
            if x[c.id] >= 1:
                raise ValueError(f"x({c.id}) must be below 1")
            out /= 1 - x[c.id]
    return out
