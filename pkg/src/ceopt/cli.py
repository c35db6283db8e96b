"""Command-line interface.

Subcommands: ``run`` executes a config over seeded replications, ``compare``
runs several configs against a common evaluation budget, ``bench eval`` spot
checks a benchmark value, and ``oracle`` exposes the brute-force reference
computations.  Exit status is 0 whenever the requested work completed (a
recorded divergence is a result, not a failure) and nonzero for config or
I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, oracles
from .gaussian import GaussianParams, RngState
from .objectives import BENCHMARK_NAMES, make_objective


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ceopt", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run one experiment config")
    pr.add_argument("config")
    pr.add_argument("--seed", type=int, help="override the base seed")
    pr.add_argument("--reps", type=int, help="override the replication count")
    pr.add_argument("--out", help="override the output directory")
    pr.add_argument("--stride", type=int, help="override the trace stride")
    pr.add_argument("--budget", type=int, help="override max evaluations")

    pc = sub.add_parser("compare", help="run several configs on a common budget")
    pc.add_argument("configs", nargs="+")
    pc.add_argument("--budget", type=int, required=True, help="evaluation budget per run")
    pc.add_argument("--out", help="output directory for the comparison")
    pc.add_argument("--target", type=float, help="override the success target")

    pb = sub.add_parser("bench", help="benchmark utilities")
    bsub = pb.add_subparsers(dest="bench_command", required=True)
    pe = bsub.add_parser("eval", help="evaluate a benchmark at a point")
    pe.add_argument("name", help=f"one of {', '.join(BENCHMARK_NAMES)} or triangle")
    pe.add_argument("m", type=int)
    pe.add_argument("x", type=float, nargs="+")
    pe.add_argument("--delta", type=float, default=0.4, help="triangle half-width")

    po = sub.add_parser("oracle", help="brute-force reference computations")
    osub = po.add_subparsers(dest="oracle_command", required=True)

    def common(q):
        q.add_argument("--objective", required=True)
        q.add_argument("--m", type=int, default=1)
        q.add_argument("--delta", type=float, default=0.4)
        q.add_argument("--mu", type=float, required=True, help="current model mean")
        q.add_argument("--var", type=float, required=True, help="current model variance")
        q.add_argument("--rho", type=float, required=True)

    oq = osub.add_parser("quantile", help="grid quantile via pinball-loss minimization")
    common(oq)
    oq.add_argument("--nodes", type=int, default=20001)

    oi = osub.add_parser("ideal-ce", help="iterate the exact-expectation update")
    common(oi)
    oi.add_argument("--r", type=float, required=True)
    oi.add_argument("--steps", type=int, default=20)
    oi.add_argument("--lambda", dest="lam", type=float, default=0.0)
    oi.add_argument("--mu0", type=float, default=0.0)
    oi.add_argument("--q", type=float, default=1.0)
    oi.add_argument("--nodes", type=int, default=20001)

    of = osub.add_parser("fixed-point", help="Monte-Carlo tracker fixed points")
    common(of)
    of.add_argument("--gamma", type=float, required=True)
    of.add_argument("--r", type=float, required=True)
    of.add_argument("--lambda", dest="lam", type=float, default=0.0)
    of.add_argument("--mu0", type=float, default=0.0)
    of.add_argument("--q", type=float, default=1.0)
    of.add_argument("--samples", type=int, default=200_000)
    of.add_argument("--seed", type=int, default=0)
    return p


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.reps is not None:
        overrides["replications"] = args.reps
    if args.stride is not None:
        overrides["trace_stride"] = args.stride
    if args.budget is not None:
        overrides["max_evals"] = args.budget
    if overrides:
        cfg = replace(cfg, **overrides)
    out = args.out if args.out is not None else cfg.output_dir
    exp = harness.run_experiment(cfg, out_dir=out)
    agg = exp.aggregate()
    print(f"{cfg.algorithm} on {cfg.objective_name} (m={cfg.m}), {cfg.replications} replication(s)")
    print(f"  statuses: {agg['statuses']}")
    print(f"  median best H(mu): {agg['median_best_H_of_mu']}")
    if agg["target"] is not None:
        print(f"  success fraction vs target {agg['target']:.6g}: {agg['success_fraction']}")
    if out is not None:
        print(f"  traces written to {out}")
    return 0


def _cmd_compare(args) -> int:
    labeled = []
    seen = {}
    for path in args.configs:
        label = Path(path).stem
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            label = f"{label}#{seen[label]}"
        labeled.append((label, harness.load_config(path)))
    comp = harness.compare(labeled, budget=args.budget, out_dir=args.out, target=args.target)
    print(f"target: {comp.target}")
    for label in comp.report["ranking_by_evals_to_target"]:
        row = comp.report["configs"][label]
        med = row["median_evals_to_target"]
        print(
            f"  {label} [{row['algorithm']}]: reached {row['reached_target']}/{row['replications']}, "
            f"median evals-to-target {med if med is not None else 'not reached'}"
        )
    if args.out:
        print(f"comparison written to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    obj = make_objective(args.name, args.m, args.delta)
    value = obj.evaluate(np.asarray(args.x, dtype=float))
    print(repr(value))
    return 0


def _oracle_params(args) -> tuple:
    objective = make_objective(args.objective, args.m if args.objective != "triangle" else None, args.delta)
    params = GaussianParams([args.mu], [[args.var]])
    return objective, params


def _cmd_oracle(args) -> int:
    if args.oracle_command == "quantile":
        objective, params = _oracle_params(args)
        grid = oracles.Grid1D.for_params(params, n=args.nodes)
        gamma = oracles.quantile_by_minimization(objective, params, args.rho, grid)
        print(repr(gamma))
        return 0
    if args.oracle_command == "ideal-ce":
        objective, params = _oracle_params(args)
        theta0 = GaussianParams([args.mu0], [[args.q]]) if args.lam > 0 else None
        for k in range(args.steps):
            params, gamma = oracles.ideal_ce_step_1d(
                params, objective, args.rho, args.r, args.lam, theta0, n_nodes=args.nodes
            )
            print(
                f"step {k + 1}: gamma={gamma!r} mu={float(params.mu[0])!r} "
                f"var={float(params.sigma[0, 0])!r}"
            )
        return 0
    if args.oracle_command == "fixed-point":
        objective, params = _oracle_params(args)
        theta0 = GaussianParams([args.mu0], [[args.q]]) if args.lam > 0 else None
        est = oracles.fixed_point_oracle(
            objective,
            params,
            theta0,
            args.lam,
            args.gamma,
            args.r,
            RngState(args.seed),
            n_samples=args.samples,
        )
        print(f"xi0 = {est.xi0.tolist()}  se = {est.se_xi0.tolist()}")
        print(f"xi1 = {est.xi1.tolist()}  se = {est.se_xi1.tolist()}")
        print(f"elite fraction = {est.elite_fraction}")
        return 0
    raise AssertionError(f"unhandled oracle subcommand {args.oracle_command!r}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
    except (harness.ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
