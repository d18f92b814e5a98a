"""Exact one-to-all influence of mu_n against the geometric lower bound, over a fugacity grid."""

import argparse
import csv
import sys

import numpy as np

from lll_lab.exact import ProbabilityEngine, influence_norms
from lll_lab.hardcore import (
    TreeInstance,
    build_mu_n_csp,
    fixed_point,
    influence_lower_bound,
    lambda_c,
    nonuniqueness_margin,
)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=int, default=3)
    ap.add_argument("--lambda", dest="lams", type=float, nargs="+",
                    default=list(np.round(np.linspace(4.5, 12, 16), 3)))
    ap.add_argument("--levels", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--out")
    args = ap.parse_args(argv)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(["lambda", "levels", "r_star", "margin", "inf_norm", "lower_bound", "slack"])
    print(f"lambda_c({args.delta}) = {lambda_c(args.delta):.6f}", file=sys.stderr)
    for lam in args.lams:
        fp = fixed_point(lam, args.delta)
        margin = nonuniqueness_margin(args.delta, fp)
        for n in args.levels:
            inst = TreeInstance(args.delta, n, lam, fp.q_star)
            _, norm = influence_norms(ProbabilityEngine(build_mu_n_csp(inst)).influence_matrix())
            lb = influence_lower_bound(args.delta, n, fp) if margin > 1 else float("nan")
            w.writerow([lam, n, fp.r_star, margin, norm, lb, norm - lb])
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
