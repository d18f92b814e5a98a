"""Brute-force reference computations, written without the package's engine or coupler.

Everything enumerates full assignments with itertools and exact Fractions.
Only the plain data types (AtomicCsp, SimplifiedConstraint) are shared.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from fractions import Fraction

from lll_lab.csp import SimplifiedConstraint


def weights(csp):
    out = []
    for var in csp.variables:
        fr = [Fraction(w).limit_denominator(10**9) for w in var.weights]
        s = sum(fr)
        out.append([f / s for f in fr])
    return out


def violated(c, x):
    return all(x[v] == a for v, a in zip(c.remaining, c.forbidden))


def assignments(csp, U):
    U = sorted(U)
    for vals in itertools.product(*(range(csp.variables[v].size) for v in U)):
        yield dict(zip(U, vals))


def weight_of(W, x):
    out = Fraction(1)
    for v, a in x.items():
        out *= W[v][a]
    return out


def conditional_table(csp, U, cons):
    """{assignment tuple over sorted U: P(x | cons)} under the product measure on U."""
    W = weights(csp)
    tab = {}
    for x in assignments(csp, U):
        if not any(violated(c, x) for c in cons):
            tab[tuple(sorted(x.items()))] = weight_of(W, x)
    z = sum(tab.values())
    if z == 0:
        raise ZeroDivisionError("conditioning on a null event")
    return {k: w / z for k, w in tab.items()}


def satisfying_mass(csp, cons=None, pin=None):
    W = weights(csp)
    cons = csp.initial_constraints() if cons is None else cons
    pin = pin or {}
    tot = Fraction(0)
    for x in assignments(csp, range(csp.n)):
        if any(x[v] != a for v, a in pin.items()):
            continue
        if not any(violated(c, x) for c in cons):
            tot += weight_of(W, x)
    return tot


def lll_marginal(csp, v, pin=None):
    W = weights(csp)
    pin = pin or {}
    acc = [Fraction(0)] * csp.variables[v].size
    for x in assignments(csp, range(csp.n)):
        if any(x[w] != a for w, a in pin.items()):
            continue
        if not any(violated(c, x) for c in csp.initial_constraints()):
            acc[x[v]] += weight_of(W, x)
    z = sum(acc)
    return [a / z for a in acc]


def influence(csp):
    n = csp.n
    C = csp.initial_constraints()
    feas = {u: [i for i in range(csp.variables[u].size) if satisfying_mass(csp, C, {u: i}) > 0] for u in range(n)}
    M = [[Fraction(0)] * n for _ in range(n)]
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            margs = [lll_marginal(csp, v, {u: i}) for i in feas[u]]
            best = Fraction(0)
            for a, b in itertools.combinations(margs, 2):
                best = max(best, sum(abs(p - q) for p, q in zip(a, b)) / 2)
            M[u][v] = best
    return M


def restrict(cons, x):
    """Simplification without the package: None on a violated constraint."""
    out = set()
    for c in cons:
        if any(v in x and x[v] != a for v, a in zip(c.remaining, c.forbidden)):
            continue
        keep = [(v, a) for v, a in zip(c.remaining, c.forbidden) if v not in x]
        if not keep:
            return None
        out.add(SimplifiedConstraint(c.origin, tuple(v for v, _ in keep), tuple(a for _, a in keep)))
    return frozenset(out)


def _z_marginal(csp, U, cons, Z):
    tab = conditional_table(csp, U, cons)
    out = defaultdict(Fraction)
    for key, p in tab.items():
        x = dict(key)
        out[tuple(x[v] for v in Z)] += p
    return out


def _sat_prob(csp, U, cons, c):
    tab = conditional_table(csp, U, cons)
    return sum((p for key, p in tab.items() if not violated(c, dict(key))), Fraction(0))


def coupling_law(csp, U, S, T):
    """Exact law of (bad origins, hamming) of the fresh-randomness coupling, by direct recursion."""
    if S == T:
        return {(frozenset(), 0): Fraction(1)}
    out = defaultdict(Fraction)
    if not T <= S:
        c = min(T - S)
        free_side, forced_cons = T, S
    else:
        c = min(S - T)
        free_side, forced_cons = S, T
    p_sat = _sat_prob(csp, U, forced_cons, c)
    if p_sat:
        nxt = (U, S | {c}, T) if not T <= S else (U, S, T | {c})
        for k, p in coupling_law(csp, *nxt).items():
            out[k] += p_sat * p
    if p_sat != 1:
        Z = c.remaining
        sigma = dict(zip(Z, c.forbidden))
        for vals, pz in _z_marginal(csp, U, free_side, Z).items():
            z = dict(zip(Z, vals))
            xz, yz = (sigma, z) if not T <= S else (z, sigma)
            nS, nT = restrict(S, xz), restrict(T, yz)
            dh = sum(1 for v in Z if xz[v] != yz[v])
            for (b, h), p in coupling_law(csp, U - set(Z), nS, nT).items():
                out[(b | {c.origin}, h + dh)] += (1 - p_sat) * pz * p
    return dict(out)


def explicit_law(csp, U, S, T):
    """Run the explicit-randomness coupling on every (x, y) pair, weighted by P(x|S) P(y|T)."""
    px = conditional_table(csp, U, S)
    py = conditional_table(csp, U, T)
    out = defaultdict(Fraction)
    for kx, wx in px.items():
        for ky, wy in py.items():
            x, y = dict(kx), dict(ky)
            s, t, bad, X, Y = S, T, set(), {}, {}
            while s != t:
                if not t <= s:
                    c = min(t - s)
                    hit = violated(c, x)
                    if not hit:
                        s = s | {c}
                else:
                    c = min(s - t)
                    hit = violated(c, y)
                    if not hit:
                        t = t | {c}
                if hit:
                    xz = {v: x[v] for v in c.remaining}
                    yz = {v: y[v] for v in c.remaining}
                    X.update(xz)
                    Y.update(yz)
                    s, t = restrict(s, xz), restrict(t, yz)
                    bad.add(c.origin)
            ham = sum(1 for v in X if X[v] != Y[v])
            out[(frozenset(bad), ham)] += wx * wy
    return dict(out)


def two_trees_brute(g, v, size):
    """All vertex sets of the given size containing v that form a 2-tree."""
    import networkx as nx

    nodes = [w for w in g if w != v]
    dist = dict(nx.all_pairs_shortest_path_length(g))
    found = []
    for rest in itertools.combinations(nodes, size - 1):
        s = (v,) + rest
        if any(dist[a].get(b, 99) < 2 for a, b in itertools.combinations(s, 2)):
            continue
        h = nx.Graph()
        h.add_nodes_from(s)
        h.add_edges_from((a, b) for a, b in itertools.combinations(s, 2) if dist[a].get(b) == 2)
        if nx.is_connected(h):
            found.append(frozenset(s))
    return found
