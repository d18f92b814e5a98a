"""Command-line driver: lll-lab {params,influence,couple,gen,verify,hardcore}."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .conditions import (
    check_asymmetric_lll,
    check_coupling_condition,
    check_theorem_general,
    check_theorem_uniform,
    pd_exponent,
    symmetric_x,
    zeta,
)
from .coupling import Coupler, bound_rhs, pinned_state
from .csp import CspError, constraint_params, instance_params, load_instance, save_instance
from .exact import EnumerationLimitError, ProbabilityEngine, coupling_norm_bound, influence_norms, tv_distance
from .generate import UniformAtomicConfig, random_atomic_csp
from .hardcore import (
    TreeInstance,
    build_mu_n_csp,
    fixed_point,
    influence_lower_bound,
    lambda_c,
    nonuniqueness_margin,
    growth_instance,
)

SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    instance: str | None = None
    seed: int = 0
    trials: int = 10**5
    mode: str = "exact"
    out: str | None = None
    max_states: int = 2**22

    def __post_init__(self):
        if self.mode == "montecarlo" and self.trials < 1:
            raise UsageError("--trials must be at least 1")


def _num(x):
    if isinstance(x, Fraction):
        return {"value": float(x), "exact": f"{x.numerator}/{x.denominator}"}
    return x


def emit(obj: dict, out: str | None = None):
    obj = {"schema_version": SCHEMA_VERSION, **obj}
    text = json.dumps(obj, indent=1, sort_keys=True, default=_num)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load(path):
    if not path:
        raise UsageError("--instance is required")
    try:
        return load_instance(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def cmd_params(args) -> int:
    csp = _load(args.instance)
    prm = instance_params(csp)
    out = {"instance": args.instance, "n": csp.n, "m": len(csp.constraints), "params": prm.to_json(),
           "zeta": zeta(prm.chi_min), "pd_exponent": pd_exponent(prm.chi_min)}
    reports = []
    q = csp.variables[0].size
    if all(v.size == q and v.weights == tuple(1.0 / q for _ in range(q)) for v in csp.variables):
        reports.append(check_theorem_uniform(q, prm.p, prm.D).to_json())
    reports.append(check_theorem_general(prm.chi_max, prm.chi_min, prm.p, prm.D).to_json())
    delta = args.delta if args.delta is not None else prm.chi_max**2
    if prm.D >= 1:
        reports.append(check_coupling_condition(delta, prm.chi_min, prm.p, prm.D).to_json())
    x = symmetric_x(csp)
    if all(0 < val < 1 for val in x.values()):
        eng = ProbabilityEngine(csp, max_states=args.max_states)
        reports.append(check_asymmetric_lll(csp, x, eng).to_json())
    out["conditions"] = reports
    emit(out, args.out)
    return 0


def cmd_influence(args) -> int:
    csp = _load(args.instance)
    eng = ProbabilityEngine(csp, max_states=args.max_states)
    M = eng.influence_matrix()
    one, inf = influence_norms(M)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(M.to_csv())
    else:
        sys.stdout.write(M.to_csv())
    norms = {"instance": args.instance, "one_norm": one, "inf_norm": inf}
    if args.out:
        emit(norms, os.path.splitext(args.out)[0] + ".norms.json")
    else:
        emit(norms)
    return 0


def cmd_couple(args) -> int:
    cfg = ExperimentConfig("couple", args.instance, args.seed, args.trials, args.mode, args.out, args.max_states)
    if cfg.mode == "montecarlo" and cfg.trials > args.max_trials:
        raise UsageError(f"--trials {cfg.trials} exceeds --max-trials {args.max_trials}")
    csp = _load(cfg.instance)
    if not (0 <= args.u < csp.n):
        raise UsageError(f"variable {args.u} does not exist")
    size = csp.variables[args.u].size
    if not (0 <= args.i < size and 0 <= args.j < size):
        raise UsageError("pinned values outside the domain")
    eng = ProbabilityEngine(csp, exact=args.rational, max_states=cfg.max_states)
    C = csp.initial_constraints()
    for val in (args.i, args.j):
        if eng.prob(C, {args.u: val}) == 0:
            raise UsageError(f"pin {args.u}<-{val} has zero probability")
    st = pinned_state(csp, args.u, args.i, args.j)
    cp = Coupler(csp, engine=eng)
    est = cp.expected_hamming(st, cfg.mode, cfg.trials, cfg.seed)
    prm = instance_params(csp)
    out = {"instance": cfg.instance, "u": args.u, "i": args.i, "j": args.j, "mode": cfg.mode,
           "expected_hamming": est.value if est.exact else est.mean, "exact": est.exact,
           "half_width": est.half_width, "trials": est.trials, "seed": cfg.seed,
           "sym_diff": len(st.sym_diff)}
    both = st.S | st.T
    delta = prm.chi_max**2
    if both and st.sym_diff:
        pp = constraint_params(csp, both)
        D = max(pp.D, 1)
        rep = check_coupling_condition(delta, prm.chi_min, pp.p, D)
        out["coupling_condition"] = rep.to_json()
        out["bound_rhs"] = bound_rhs(pp.k, D, delta, len(st.sym_diff))
        out["bound_holds"] = est.mean <= out["bound_rhs"]
    tv = sum(float(tv_distance(eng.marginal(C, v, {args.u: args.i}), eng.marginal(C, v, {args.u: args.j})))
             for v in sorted(st.U))
    out["marginal_tv_sum"] = tv
    out["norm_bound_from_pair"] = coupling_norm_bound(est.mean, prm.chi_max)
    try:
        _, inf = influence_norms(ProbabilityEngine(csp, max_states=cfg.max_states).influence_matrix())
        out["exact_inf_norm"] = inf
    except EnumerationLimitError:
        out["exact_inf_norm"] = None
    if args.trace:
        outcome = cp.couple(st, cfg.seed)
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write(outcome.log.to_jsonl())
        out["trace"] = {"path": args.trace, "hamming": outcome.hamming, "bad": sorted(outcome.bad)}
    emit(out, cfg.out)
    return 0


def cmd_gen(args) -> int:
    if args.family == "uniform-atomic":
        for name in ("n", "q", "k", "m"):
            if getattr(args, name) is None:
                raise UsageError(f"--{name} is required for uniform-atomic")
        try:
            csp = random_atomic_csp(UniformAtomicConfig(args.n, args.q, args.k, args.m, args.seed, args.weights))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        if args.lam is None or args.levels is None:
            raise UsageError("--lambda and --levels are required for hardcore-tree")
        csp = build_mu_n_csp(TreeInstance.at_fixed_point(args.delta or 3, args.levels, args.lam))
    if args.out:
        save_instance(csp, args.out)
    else:
        print(csp.dumps())
    return 0


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LLL_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _verify_one(job):
    from .verify import Tally, verify_instance

    name, csp_json, seed = job
    from .csp import build_instance

    tally = Tally()
    rep = verify_instance(name, build_instance(csp_json), tally, seed)
    return name, tally.to_json(), {"n": rep.n, "m": rep.m, "inf_norm": rep.inf_norm,
                                   "max_expected_hamming": rep.max_expected_hamming,
                                   "theorem_condition": rep.theorem_condition}


def cmd_verify(args) -> int:
    from .suites import hardcore_suite, random_suite, regime_suite
    from .verify import Tally, check_hardcore, corrupt_log

    tally = Tally()
    out: dict = {"seed": args.seed}
    if args.instance:
        instances = [(args.instance, _load(args.instance))]
    elif args.suite == "hardcore":
        instances = []
    else:
        instances = []
        if args.suite in ("random", "all"):
            instances += random_suite(args.count, args.seed, max_vars=args.max_vars)
        if args.suite in ("regime", "all"):
            instances += regime_suite()
        if args.suite == "all":
            instances += hardcore_suite()
    jobs = [(name, csp.to_json(), args.seed) for name, csp in instances]
    threads = _threads()
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_verify_one, jobs))
    else:
        results = [_verify_one(j) for j in jobs]
    per_instance = []
    for name, tj, summary in results:   # assembled in instance order regardless of scheduling
        sub = Tally(tj)
        tally.merge(sub)
        per_instance.append({"name": name, "passed": sub.passed, **summary})
    out["instances"] = per_instance
    if args.suite in ("hardcore", "all") and not args.instance:
        lams = tuple(args.lam_list) if args.lam_list else (5, 6, 8)
        levels = tuple(args.levels_list) if args.levels_list else (2, 3)
        out["hardcore"] = check_hardcore(tally, lams, levels)
    if args.corrupt_log:
        from .coupling import LogError
        from .suites import pin_states

        csp = instances[0][1] if instances else build_mu_n_csp(TreeInstance.at_fixed_point(3, 2, 6))
        cp = Coupler(csp)
        pins = pin_states(csp)
        u, i, j, st = next(((u, i, j, st) for u, i, j, st in pins if st.S != st.T), pins[0])
        log = corrupt_log(cp.couple(st, args.seed).log)
        try:
            cp.validate_log(log, st.S, st.T, st.U)
            tally.record("negative-control.corrupted-log-rejected", True)
            tally.record("coupling.log-facts", True)
        except LogError as exc:
            tally.record("coupling.log-facts", False, f"corrupted log: {exc}")
    out["checks"] = tally.to_json()
    out["passed"] = tally.passed
    emit(out, args.out)
    return 0 if tally.passed else 1


def cmd_hardcore(args) -> int:
    out: dict = {}
    if args.p is not None or args.D is not None:
        if args.p is None or args.D is None:
            raise UsageError("--p and --D go together")
        try:
            _, rep = growth_instance(args.p, args.D, tuple(args.levels_list or (2, 3)))
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        out["construction"] = rep.to_json()
        emit(out, args.out)
        return 0
    delta = args.delta or 3
    lam = args.lam if args.lam is not None else 6.0
    fp = fixed_point(lam, delta)
    margin = nonuniqueness_margin(delta, fp)
    out.update({"delta": delta, "lambda": lam, "lambda_c": lambda_c(delta), "r_star": fp.r_star,
                "q_star": fp.q_star, "margin": margin, "delta_excess": margin - 1,
                "residual": abs(lam / (1 + fp.r_star) ** (delta - 1) - fp.r_star)})
    rows = []
    for n in args.levels_list or [args.levels or 2]:
        row = {"levels": n}
        if margin > 1:
            row["lower_bound"] = influence_lower_bound(delta, n, fp)
        inst = TreeInstance(delta, n, lam, fp.q_star)
        if inst.size <= math.log2(args.max_states):
            _, row["inf_norm"] = influence_norms(ProbabilityEngine(build_mu_n_csp(inst)).influence_matrix())
        rows.append(row)
    out["levels"] = rows
    emit(out, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lll-lab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, instance=True):
        if instance:
            p.add_argument("--instance", help="instance JSON file")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--max-states", type=int, default=2**22, help="enumeration guardrail")
        p.add_argument("--max-trials", type=int, default=10**7, help="Monte Carlo guardrail")

    p = sub.add_parser("params", help="instance parameters and condition reports")
    common(p)
    p.add_argument("--delta", type=float, help="delta for the coupling condition (default chi_max^2)")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("influence", help="exact influence matrix (CSV) and norms")
    common(p)
    p.set_defaults(func=cmd_influence)

    p = sub.add_parser("couple", help="couple the two pinned distributions of a variable")
    common(p)
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--mode", choices=["exact", "montecarlo"], default="exact")
    p.add_argument("--trials", type=int, default=10**5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rational", action="store_true", help="exact rational arithmetic")
    p.add_argument("--trace", help="write one seeded run's execution log as JSON lines")
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("gen", help="generate an instance")
    common(p, instance=False)
    p.add_argument("--family", choices=["uniform-atomic", "hardcore-tree"], required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--weights", choices=["uniform", "random"], default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", help="run the invariant suites")
    common(p)
    p.add_argument("--suite", choices=["random", "regime", "hardcore", "all"], default="random")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--max-vars", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam_list", type=float, nargs="+")
    p.add_argument("--levels", dest="levels_list", type=int, nargs="+")
    p.add_argument("--corrupt-log", action="store_true", help="negative control: inject a corrupted log")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("hardcore", help="fixed points, thresholds and lower bounds")
    common(p, instance=False)
    p.add_argument("--delta", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--levels", dest="levels_list", type=int, nargs="+")
    p.add_argument("--p", type=float, help="target violation probability (tree construction)")
    p.add_argument("--D", type=int, help="target dependency degree (tree construction)")
    p.set_defaults(func=cmd_hardcore, levels=None)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, CspError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
