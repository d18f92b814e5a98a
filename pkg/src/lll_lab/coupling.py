"""The recursive coupling of P_U(. | S) and P_U(. | T) for atomic constraint sets.

Coupler.couple runs the fresh-randomness procedure, couple_explicit the variant
driven by two pre-drawn samples. Both record an execution log of 6-tuples
(U_i, S_i, T_i, c_i, X_i, Y_i) and the set of bad constraints. The exact routes
(outcome_distribution, enumerate_outcomes) walk the whole execution tree.
"""

from __future__ import annotations

import json
import math
import sys
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .csp import (
    AtomicCsp,
    CspError,
    SimplifiedConstraint,
    UnsatisfiableError,
    simplify,
    try_simplify,
)
from .exact import ConditionalSampler, EnumerationLimitError, ProbabilityEngine, all_assignments
from .rng import make_rng

MAX_ROW_STATES = 2**22


@dataclass(frozen=True)
class CoupleState:
    U: frozenset
    S: frozenset
    T: frozenset

    def __post_init__(self):
        for c in self.S | self.T:
            if not set(c.remaining) <= self.U:
                raise CspError(f"constraint {c} mentions variables outside U")

    @property
    def sym_diff(self) -> frozenset:
        return self.S ^ self.T

    def depth_cap(self) -> int:
        """Upper bound on recursion depth: each level shrinks U or grows |S|+|T|."""
        total_scope = sum(c.width for c in self.S | self.T)
        return len(self.U) + len(self.S) + len(self.T) + total_scope + 1


def pinned_state(csp: AtomicCsp, u: int, i: int, j: int) -> CoupleState:
    """S^in, T^in = simplifications of all constraints under u<-i and u<-j."""
    C = csp.initial_constraints()
    S = try_simplify(C, {u: i})
    T = try_simplify(C, {u: j})
    if S is None or T is None:
        raise UnsatisfiableError(f"pin of variable {u} to {i if S is None else j} violates a constraint")
    return CoupleState(frozenset(range(csp.n)) - {u}, S, T)


@dataclass(frozen=True)
class LogEntry:
    U: frozenset
    S: frozenset
    T: frozenset
    c: SimplifiedConstraint | None
    X: Mapping[int, int]
    Y: Mapping[int, int]

    def to_json(self, level: int) -> dict:
        return {
            "level": level,
            "U": sorted(self.U),
            "S": [c.to_json() for c in sorted(self.S)],
            "T": [c.to_json() for c in sorted(self.T)],
            "c": None if self.c is None else self.c.to_json(),
            "X": {str(v): int(a) for v, a in sorted(self.X.items())},
            "Y": {str(v): int(a) for v, a in sorted(self.Y.items())},
        }

    def key(self):
        return (self.U, self.S, self.T, self.c, tuple(sorted(self.X.items())), tuple(sorted(self.Y.items())))


@dataclass(frozen=True)
class ExecutionLog:
    entries: tuple[LogEntry, ...]

    def __len__(self):
        return len(self.entries)

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(e.to_json(i)) for i, e in enumerate(self.entries)) + "\n"

    def key(self):
        return tuple(e.key() for e in self.entries)


@dataclass
class CoupleOutcome:
    X: dict
    Y: dict
    log: ExecutionLog
    bad: frozenset   # origin ids
    hamming: int


class LogError(CspError):
    pass


@dataclass
class Transition:
    """One non-terminal level of the recursion, with all of its branches."""

    c_star: SimplifiedConstraint
    side: str                 # "T": c* in T\S, X forced; "S": c* in S\T, Y forced
    p_sat: object
    sat_state: CoupleState | None
    forced: tuple[int, ...]   # sigma restricted to Z
    rows: np.ndarray          # (R, |Z|) values of the sampled side, positive-probability rows only
    row_prob: list            # exact or float probability per row
    row_group: np.ndarray     # group index per row
    cum: np.ndarray           # float CDF over rows
    groups: list = field(default_factory=list)   # (next_state, hamming increment, probability)


@dataclass
class HammingEstimate:
    mean: float
    exact: bool
    half_width: float = 0.0
    trials: int = 0
    value: object = None      # exact value (Fraction in exact mode)


@dataclass
class BatchResult:
    X: np.ndarray             # (N, n), -1 outside the initial U
    Y: np.ndarray
    bad: np.ndarray           # (N, number of constraints) bool
    hamming: np.ndarray


class Coupler:
    """Holds an engine and caches transitions and subtree results per state."""

    def __init__(self, csp: AtomicCsp, engine: ProbabilityEngine | None = None, exact: bool = False):
        self.csp = csp
        self.engine = engine or ProbabilityEngine(csp, exact=exact)
        self.exact = self.engine.exact
        self._trans: dict[CoupleState, Transition] = {}
        self._dist: dict[CoupleState, dict] = {}
        self._samplers: dict = {}
        self._exact_engine = None

    # helpers

    def exact_engine(self) -> ProbabilityEngine:
        if self.exact:
            return self.engine
        if self._exact_engine is None:
            self._exact_engine = ProbabilityEngine(self.csp, exact=True)
        return self._exact_engine

    def check_state(self, state: CoupleState):
        for name, cons in (("S", state.S), ("T", state.T)):
            if self.engine.prob(cons) == 0:
                raise UnsatisfiableError(f"{name} is unsatisfiable: {sorted(cons)}")

    def sampler(self, cons: frozenset, U: frozenset) -> ConditionalSampler:
        key = (cons, U)
        s = self._samplers.get(key)
        if s is None:
            s = self._samplers[key] = ConditionalSampler(self.engine, cons, U)
        return s

    def transition(self, state: CoupleState) -> Transition:
        tr = self._trans.get(state)
        if tr is not None:
            return tr
        eng = self.engine
        S, T = state.S, state.T
        if not T <= S:
            side, c = "T", min(T - S)
            cond, free = S, T        # p_sat = Pr[c | S]; Y sampled from P(. | T)
        else:
            side, c = "S", min(S - T)
            cond, free = T, S
        Z, sigma = c.remaining, c.forbidden
        sig_map = dict(zip(Z, sigma))
        pc = eng.prob(cond)
        forced_next = try_simplify(cond, sig_map)
        viol = self.engine.zero if forced_next is None else eng.pin_mass(sig_map) * eng.prob(forced_next)
        p_sat = 1 - viol / pc
        sat_state = None
        if p_sat > 0:
            sat_state = CoupleState(state.U, S | {c}, T) if side == "T" else CoupleState(state.U, S, T | {c})

        sizes = [self.csp.variables[v].size for v in Z]
        if math.prod(sizes) > MAX_ROW_STATES:
            raise EnumerationLimitError(f"constraint {c} spans {math.prod(sizes)} assignments")
        rows = all_assignments(sizes)
        groups = []
        row_group = np.full(len(rows), -1, dtype=np.int64)
        if p_sat < 1:
            # group rows by which free-side constraints they keep alive, and by distance to sigma
            touching = sorted(t for t in free if set(t.remaining) & set(Z))
            zpos = {v: i for i, v in enumerate(Z)}
            cols = []
            for t in touching:
                agree = np.ones(len(rows), dtype=bool)
                for v, a in zip(t.remaining, t.forbidden):
                    if v in zpos:
                        agree &= rows[:, zpos[v]] == a
                cols.append(agree)
            ham = (rows != np.asarray(sigma)).sum(axis=1)
            sig = np.column_stack(cols + [ham]) if cols else ham[:, None]
            keys, inverse = np.unique(sig, axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
            pf = eng.prob(free)
            rest_U = state.U - set(Z)
            group_of_key = {}
            for g, key in enumerate(keys):
                rep = rows[int(np.argmax(inverse == g))]
                nxt = try_simplify(free, dict(zip(Z, map(int, rep))))
                if nxt is None:
                    continue
                pn = eng.prob(nxt)
                if pn == 0:
                    continue
                if side == "T":
                    ns = CoupleState(rest_U, forced_next, nxt)
                else:
                    ns = CoupleState(rest_U, nxt, forced_next)
                group_of_key[g] = (len(groups), pn / pf)
                groups.append([ns, int(key[-1]), self.engine.zero])
            lookup = np.full(len(keys), -1, dtype=np.int64)
            for g, (gi, _) in group_of_key.items():
                lookup[g] = gi
            row_group = lookup[inverse]
            keep = row_group >= 0
            rows, row_group = rows[keep], row_group[keep]
            factors = [group_of_key[g][1] for g in sorted(group_of_key, key=lambda g: group_of_key[g][0])]
            if self.exact:
                row_prob = []
                for r, gi in zip(rows, row_group):
                    pr = eng.pin_mass(dict(zip(Z, map(int, r)))) * factors[gi]
                    row_prob.append(pr)
                    groups[gi][2] += pr
            else:
                base = np.ones(len(rows))
                for i, v in enumerate(Z):
                    base *= eng.warr[v][rows[:, i]]
                row_prob = base * np.asarray(factors, dtype=float)[row_group]
                sums = np.bincount(row_group, weights=row_prob, minlength=len(groups))
                for gi in range(len(groups)):
                    groups[gi][2] = float(sums[gi])
            groups = [tuple(g) for g in groups]
        else:
            rows = rows[:0]
            row_prob = []
        cum = np.cumsum(np.array([float(x) for x in row_prob])) if len(row_prob) else np.zeros(0)
        if len(cum):
            cum = cum / cum[-1]
        tr = Transition(c, side, p_sat, sat_state, tuple(sigma), rows, row_prob, row_group, cum, groups)
        self._trans[state] = tr
        return tr

    # fresh-randomness coupling

    def couple(self, state: CoupleState, seed: int) -> CoupleOutcome:
        self.check_state(state)
        rng = make_rng(seed)
        X, Y = {}, {}
        bad = set()
        entries = [LogEntry(state.U, state.S, state.T, None, {}, {})]
        st = state
        cap = state.depth_cap()
        while st.S != st.T:
            if len(entries) > cap:
                raise RuntimeError("recursion depth exceeded its bound")
            tr = self.transition(st)
            r = rng.random()
            if r < tr.p_sat:
                st = tr.sat_state
            else:
                idx = min(int(np.searchsorted(tr.cum, rng.random(), side="right")), len(tr.rows) - 1)
                Z = tr.c_star.remaining
                free_vals = dict(zip(Z, map(int, tr.rows[idx])))
                forced_vals = dict(zip(Z, tr.forced))
                if tr.side == "T":
                    X.update(forced_vals)
                    Y.update(free_vals)
                else:
                    X.update(free_vals)
                    Y.update(forced_vals)
                bad.add(tr.c_star.origin)
                st = tr.groups[tr.row_group[idx]][0]
            entries.append(LogEntry(st.U, st.S, st.T, tr.c_star, dict(X), dict(Y)))
        self._finish(st, rng, X, Y)
        ham = sum(1 for v in X if X[v] != Y[v])
        return CoupleOutcome(X, Y, ExecutionLog(tuple(entries)), frozenset(bad), ham)

    def _finish(self, st: CoupleState, rng, X: dict, Y: dict):
        if st.U:
            s = self.sampler(st.S, st.U)
            z = s.draw(rng, 1)[0]
            for v, a in zip(s.vars, z):
                X[v] = Y[v] = int(a)

    # explicit-randomness coupling

    def couple_explicit(self, state: CoupleState, x_samp, y_samp, seed: int) -> CoupleOutcome:
        for name, samp, cons in (("x_samp", x_samp, state.S), ("y_samp", y_samp, state.T)):
            for c in cons:
                if not c.satisfied_by(samp):
                    raise CspError(f"{name} violates constraint {c}")
        X, Y = {}, {}
        bad = set()
        entries = [LogEntry(state.U, state.S, state.T, None, {}, {})]
        U, S, T = state.U, state.S, state.T
        while S != T:
            if not T <= S:
                c = min(T - S)
                assign = not c.satisfied_by(x_samp)
                if not assign:
                    S = S | {c}
            else:
                c = min(S - T)
                assign = not c.satisfied_by(y_samp)
                if not assign:
                    T = T | {c}
            if assign:
                Z = c.remaining
                xz = {v: int(x_samp[v]) for v in Z}
                yz = {v: int(y_samp[v]) for v in Z}
                X.update(xz)
                Y.update(yz)
                S, T = simplify(S, xz), simplify(T, yz)
                U = U - set(Z)
                bad.add(c.origin)
            entries.append(LogEntry(U, S, T, c, dict(X), dict(Y)))
        st = CoupleState(U, S, T)
        self._finish(st, make_rng(seed), X, Y)
        ham = sum(1 for v in X if X[v] != Y[v])
        return CoupleOutcome(X, Y, ExecutionLog(tuple(entries)), frozenset(bad), ham)

    # exact execution-tree walks

    def outcome_distribution(self, state: CoupleState) -> dict:
        """Law of (bad set, hamming) under the fresh-randomness coupling, as {(frozenset, int): probability}."""
        self.check_state(state)
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, 20 * state.depth_cap() + 1000))
        try:
            return self._dist_rec(state)
        finally:
            sys.setrecursionlimit(old)

    def _dist_rec(self, st: CoupleState) -> dict:
        hit = self._dist.get(st)
        if hit is not None:
            return hit
        if st.S == st.T:
            out = {(frozenset(), 0): self.engine.one}
            self._dist[st] = out
            return out
        tr = self.transition(st)
        acc = defaultdict(lambda: self.engine.zero)
        if tr.p_sat > 0:
            for key, p in self._dist_rec(tr.sat_state).items():
                acc[key] += tr.p_sat * p
        q = 1 - tr.p_sat
        if q > 0:
            o = tr.c_star.origin
            for ns, dh, gp in tr.groups:
                for (b, h), p in self._dist_rec(ns).items():
                    acc[(b | {o}, h + dh)] += q * gp * p
        out = dict(acc)
        self._dist[st] = out
        return out

    def enumerate_outcomes(self, state: CoupleState, max_states: int = 2**20) -> list:
        """Run the explicit-randomness coupling on every (x_samp, y_samp) pair at once.

        Pairs are partitioned as the transitions split them, so the result is the
        exact law of (log, bad set, hamming) with pairs weighted by
        P(. | S^in) x P(. | T^in). Returns a list of (probability, log, bad, hamming).
        """
        self.check_state(state)
        Uv = sorted(state.U)
        sizes = [self.csp.variables[v].size for v in Uv]
        if math.prod(sizes) > max_states:
            raise EnumerationLimitError(f"{math.prod(sizes)} assignments over U exceed {max_states}")
        A = all_assignments(sizes)
        col = {v: i for i, v in enumerate(Uv)}

        def support(cons):
            keep = np.ones(len(A), dtype=bool)
            for c in cons:
                hit = np.ones(len(A), dtype=bool)
                for v, a in zip(c.remaining, c.forbidden):
                    hit &= A[:, col[v]] == a
                keep &= ~hit
            rows = A[keep]
            if self.exact:
                m = []
                for r in rows:
                    w = self.engine.one
                    for v, a in zip(Uv, r):
                        w *= self.engine.w[v][a]
                    m.append(w)
                m = np.array(m, dtype=object)
            else:
                m = np.ones(len(rows))
                for i, v in enumerate(Uv):
                    m *= self.engine.warr[v][rows[:, i]]
            return rows, m / m.sum()

        XR, xm = support(state.S)
        YR, ym = support(state.T)
        out = []
        stack = [(state, np.arange(len(XR)), np.arange(len(YR)), {}, {}, (LogEntry(state.U, state.S, state.T, None, {}, {}),), frozenset())]
        while stack:
            st, xi, yi, X, Y, entries, bad = stack.pop()
            if st.S == st.T:
                w = xm[xi].sum() * ym[yi].sum()
                ham = sum(1 for v in X if X[v] != Y[v])
                out.append((w, ExecutionLog(entries), bad, ham))
                continue
            if not st.T <= st.S:
                c, side = min(st.T - st.S), "T"
            else:
                c, side = min(st.S - st.T), "S"
            Z = c.remaining
            zc = [col[v] for v in Z]
            sigma = np.asarray(c.forbidden)
            if side == "T":
                decide, other = (XR, xi), (YR, yi)
            else:
                decide, other = (YR, yi), (XR, xi)
            R, idx = decide
            sat = (R[idx][:, zc] != sigma).any(axis=1)
            if sat.any():
                ns = CoupleState(st.U, st.S | {c}, st.T) if side == "T" else CoupleState(st.U, st.S, st.T | {c})
                nxi, nyi = (xi[sat], yi) if side == "T" else (xi, yi[sat])
                stack.append((ns, nxi, nyi, X, Y, entries + (LogEntry(ns.U, ns.S, ns.T, c, X, Y),), bad))
            unsat = idx[~sat]
            if len(unsat) == 0:
                continue
            R2, idx2 = other
            vals, inv = np.unique(R2[idx2][:, zc], axis=0, return_inverse=True)
            inv = inv.reshape(-1)
            forced = dict(zip(Z, map(int, sigma)))
            for g, val in enumerate(vals):
                sub = idx2[inv == g]
                free = dict(zip(Z, map(int, val)))
                xz, yz = (forced, free) if side == "T" else (free, forced)
                nX, nY = {**X, **xz}, {**Y, **yz}
                ns = CoupleState(st.U - set(Z), simplify(st.S, xz), simplify(st.T, yz))
                nxi, nyi = (unsat, sub) if side == "T" else (sub, unsat)
                stack.append((ns, nxi, nyi, nX, nY, entries + (LogEntry(ns.U, ns.S, ns.T, c, nX, nY),), bad | {c.origin}))
        return out

    # Monte Carlo

    def couple_many(self, state: CoupleState, trials: int, seed: int) -> BatchResult:
        """Run the fresh-randomness coupling on a batch of trials in lockstep from one seeded stream."""
        if trials < 1:
            raise ValueError("trials must be at least 1")
        self.check_state(state)
        rng = make_rng(seed)
        n, m = self.csp.n, len(self.csp.constraints)
        X = np.full((trials, n), -1, dtype=np.int64)
        Y = np.full((trials, n), -1, dtype=np.int64)
        bad = np.zeros((trials, m), dtype=bool)
        stack = [(state, np.arange(trials), 0)]
        cap = state.depth_cap()
        while stack:
            st, idx, depth = stack.pop()
            if depth > cap:
                raise RuntimeError("recursion depth exceeded its bound")
            if st.S == st.T:
                if st.U:
                    s = self.sampler(st.S, st.U)
                    z = s.draw(rng, len(idx))
                    cols = np.array(s.vars)
                    X[np.ix_(idx, cols)] = z
                    Y[np.ix_(idx, cols)] = z
                continue
            tr = self.transition(st)
            r = rng.random(len(idx))
            go_sat = r < float(tr.p_sat)
            rest = idx[~go_sat]
            if len(rest):
                pick = np.minimum(np.searchsorted(tr.cum, rng.random(len(rest)), side="right"), len(tr.rows) - 1)
                Z = np.array(tr.c_star.remaining)
                free_vals = tr.rows[pick]
                forced_vals = np.broadcast_to(np.asarray(tr.forced), free_vals.shape)
                xs, ys = (forced_vals, free_vals) if tr.side == "T" else (free_vals, forced_vals)
                X[np.ix_(rest, Z)] = xs
                Y[np.ix_(rest, Z)] = ys
                bad[rest, tr.c_star.origin] = True
                grp = tr.row_group[pick]
                for g in np.unique(grp)[::-1]:
                    stack.append((tr.groups[g][0], rest[grp == g], depth + 1))
            if go_sat.any():
                stack.append((tr.sat_state, idx[go_sat], depth + 1))
        cols = np.array(sorted(state.U), dtype=np.int64)
        ham = (X[:, cols] != Y[:, cols]).sum(axis=1)
        return BatchResult(X, Y, bad, ham)

    def expected_hamming(self, state: CoupleState, mode: str = "exact", trials: int = 10**5,
                         seed: int = 0) -> HammingEstimate:
        if mode == "exact":
            dist = self.outcome_distribution(state)
            val = sum((p * h for (_, h), p in dist.items()), self.engine.zero)
            return HammingEstimate(float(val), True, 0.0, 0, val)
        if mode == "montecarlo":
            res = self.couple_many(state, trials, seed)
            h = res.hamming.astype(float)
            sd = h.std(ddof=1) if trials > 1 else 0.0
            return HammingEstimate(float(h.mean()), False, 3 * sd / math.sqrt(trials), trials)
        raise ValueError(f"unknown mode {mode!r}")

    # log checks

    def validate_log(self, log: ExecutionLog, S_in: frozenset, T_in: frozenset, U0: frozenset) -> None:
        """Raise LogError naming the first violated structural fact."""
        E = log.entries
        if not E:
            raise LogError("start: empty log")
        e0 = E[0]
        if not (e0.U == U0 and e0.S == S_in and e0.T == T_in and e0.c is None and not e0.X and not e0.Y):
            raise LogError("start: first entry is not (V, S_in, T_in, -, -, -)")
        if E[-1].S != E[-1].T:
            raise LogError("end: final entry has S != T")
        for i, e in enumerate(E[:-1]):
            if e.S == e.T:
                raise LogError(f"end: entry {i} has S = T before the end")
        for i, e in enumerate(E):
            dom = U0 - e.U
            if set(e.X) != dom or set(e.Y) != dom:
                raise LogError(f"domain: entry {i} assigns variables other than V minus U_{i}")
        for i in range(1, len(E)):
            if E[i].c is None or not set(E[i].c.remaining) <= E[i - 1].U:
                raise LogError(f"choice: entry {i} chose a constraint outside U_{i-1}")
        exact = self.exact_engine()
        for i, e in enumerate(E):
            for assigned, cur, init, name in ((e.X, e.S, S_in, "X"), (e.Y, e.T, T_in, "Y")):
                need = try_simplify(init, assigned)
                if need is None:
                    if exact.prob(cur) * exact.pin_mass(assigned) != 0:
                        raise LogError(f"implication: entry {i} {name} violates the initial constraints")
                    continue
                for r in need - cur:
                    if exact.prob(cur, r.forbidden_map()) != 0:
                        raise LogError(f"implication: entry {i} {name} with its constraints does not imply {r}")

    def log_probability(self, log: ExecutionLog, S_in: frozenset, T_in: frozenset, U0: frozenset | None = None):
        if U0 is None:
            U0 = log.entries[0].U if log.entries else frozenset()
        self.validate_log(log, S_in, T_in, U0)
        last = log.entries[-1]
        eng = self.engine
        px = eng.prob(last.S, last.X) / eng.prob(S_in)
        py = eng.prob(last.T, last.Y) / eng.prob(T_in)
        return px * py


def bound_rhs(k: int, D: int, delta: float, sym_diff_size: int) -> float:
    if D < 1 or delta < 1:
        raise ValueError("bound needs D >= 1 and delta >= 1")
    return k * (D + 1) / (2 * delta) * sym_diff_size


# module-level conveniences

def couple(csp: AtomicCsp, state: CoupleState, seed: int) -> CoupleOutcome:
    return Coupler(csp).couple(state, seed)


def couple_explicit(csp: AtomicCsp, state: CoupleState, x_samp, y_samp, seed: int) -> CoupleOutcome:
    return Coupler(csp).couple_explicit(state, x_samp, y_samp, seed)


def enumerate_outcomes(csp: AtomicCsp, state: CoupleState, exact: bool = False) -> list:
    return Coupler(csp, exact=exact).enumerate_outcomes(state)


def log_probability(csp: AtomicCsp, log: ExecutionLog, S_in, T_in, exact: bool = False):
    return Coupler(csp, exact=exact).log_probability(log, frozenset(S_in), frozenset(T_in))


def expected_hamming(csp: AtomicCsp, state: CoupleState, mode: str = "exact", trials: int = 10**5,
                     seed: int = 0) -> HammingEstimate:
    return Coupler(csp).expected_hamming(state, mode, trials, seed)
