"""Exponent excess zeta(chi) and the sparsity each threshold admits, over a grid of distortions."""

import argparse

import numpy as np

from lll_lab.conditions import check_theorem_general, check_theorem_uniform, pd_exponent, zeta


def largest_p(check, D, lo=1e-300, hi=1.0):
    """Largest p (bisection in log space) for which check(p, D) holds."""
    if not check(lo, D):
        return 0.0
    a, b = np.log(lo), np.log(hi)
    for _ in range(200):
        m = (a + b) / 2
        if check(np.exp(m), D):
            a = m
        else:
            b = m
    return float(np.exp(a))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--chi", type=float, nargs="+", default=[2, 3, 4, 5, 8, 16, 1e3, 1e6])
    ap.add_argument("--D", type=int, default=10)
    args = ap.parse_args(argv)
    print("chi,zeta,pd_exponent,max_p_uniform,max_p_general")
    for chi in args.chi:
        uni = ""
        if float(chi).is_integer():
            q = int(chi)
            uni = largest_p(lambda p, D: check_theorem_uniform(q, p, D).satisfied, args.D)
        gen = largest_p(lambda p, D: check_theorem_general(chi, chi, p, D).satisfied, args.D)
        print(f"{chi:g},{zeta(chi):.6f},{pd_exponent(chi):.6f},{uni},{gen}")


if __name__ == "__main__":
    main()
