"""Command-line interface.

Subcommands cover the full workflow: ``gen`` synthesizes a planted
point-matching problem, ``build`` turns point sets into a matching
instance file under one of the affinity models, ``solve`` runs the
solver on an instance, ``bench`` runs a sweep experiment from a config
file, and ``oracle`` exhaustively finds the discrete optimum of a small
instance.

Exit codes: 0 on success, 1 on usage or input errors, 2 when a request
is refused (oracle limits, unsupported constraints, bad solver
configuration).
"""

from __future__ import annotations

import argparse
import sys
import time
from math import pi
from pathlib import Path

import numpy as np

from .constraints import ConstraintSpec, SideMode
from .discretize import BruteForceLimits, brute_force_optimum
from .errors import ConfigurationError, OracleRefusalError, UnsupportedConstraintError
from .harness import Transform, generate_synthetic, read_experiment_config, run_experiment
from .io import (
    read_edges,
    read_instance,
    read_points,
    read_truth,
    read_unary,
    write_instance,
    write_points,
    write_solution,
    write_trace,
    write_truth,
)
from .models import (
    build_pairwise_a,
    build_pairwise_b,
    build_pairwise_c,
    build_third_order,
    delaunay_edges,
)
from .solver import SolverConfig, Variant, solve

_SIDE_CHOICES = ("exactly-one", "at-most-one", "unconstrained")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _cmd_gen(args):
    transform = Transform(rotation=args.rotation, scale=args.scale, tx=args.tx, ty=args.ty)
    points1, points2, truth = generate_synthetic(
        args.inliers, args.outliers, args.noise, transform, args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_points(out / "points1.txt", points1)
    write_points(out / "points2.txt", points2)
    write_truth(out / "truth.txt", truth, args.inliers, points2.shape[0])
    print(f"wrote {out / 'points1.txt'}")
    print(f"wrote {out / 'points2.txt'}")
    print(f"wrote {out / 'truth.txt'}")
    return 0


def _resolve_cli_spec(args, n1, n2):
    if args.rows is None and args.cols is None:
        return None  # builders default to an injective matching
    row_mode = SideMode.parse(args.rows or "exactly-one")
    col_mode = SideMode.parse(args.cols or "at-most-one")
    return ConstraintSpec(n1, n2, row_mode, col_mode)


def _cmd_build(args):
    points1 = read_points(args.points1)
    points2 = read_points(args.points2)
    n1, n2 = points1.shape[0], points2.shape[0]
    spec = _resolve_cli_spec(args, n1, n2)
    truth = read_truth(args.truth, n1, n2) if args.truth else None

    if args.model == "a":
        edges1 = read_edges(args.edges1) if args.edges1 else delaunay_edges(points1)
        edges2 = read_edges(args.edges2) if args.edges2 else delaunay_edges(points2)
        unary = read_unary(args.unary) if args.unary else np.zeros((n1, n2))
        instance = build_pairwise_a(
            points1,
            points2,
            edges1,
            edges2,
            unary,
            eta=args.eta,
            sigma_l=args.sigma_l,
            sigma_a=args.sigma_a,
            unary_offset=args.unary_offset,
            spec=spec,
            ground_truth=truth,
        )
    elif args.model == "b":
        instance = build_pairwise_b(
            points1, points2, args.sigma2, spec=spec, ground_truth=truth
        )
    elif args.model == "c":
        instance = build_pairwise_c(
            points1, points2, args.eta, spec=spec, ground_truth=truth
        )
    else:
        instance = build_third_order(
            points1,
            points2,
            knn=args.knn,
            triangle_budget=args.triangles,
            gamma=args.gamma,
            seed=args.seed,
            spec=spec,
            ground_truth=truth,
        )
    write_instance(args.out, instance)
    print(f"wrote {args.out}")
    return 0


def _solver_config(args):
    return SolverConfig(
        variant=Variant.parse(args.variant),
        rho0=args.rho0,
        t1=args.t1,
        t2=args.t2,
        beta=args.beta,
        eps=args.eps,
        max_iter=args.max_iter,
        seed=args.seed,
    )


def _cmd_solve(args):
    instance = read_instance(args.instance)
    config = _solver_config(args)
    start = time.perf_counter()
    result = solve(instance, config, collect_trace=args.trace is not None)
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    if args.trace:
        write_trace(args.trace, result.trace)
    if args.out:
        write_solution(
            args.out,
            result.discrete,
            instance.n1,
            instance.n2,
            metadata={
                "variant": args.variant,
                "iterations": result.iterations,
                "converged": "true" if result.converged else "false",
                "energy_discrete": repr(result.energy_discrete),
                "energy_continuous": repr(result.energy_continuous),
            },
        )
    print(f"variant {args.variant}")
    print(f"iterations {result.iterations}")
    print(f"converged {'true' if result.converged else 'false'}")
    print(f"energy_continuous {result.energy_continuous!r}")
    print(f"energy_discrete {result.energy_discrete!r}")
    print(f"matched {int(round(float(result.discrete.sum())))}")
    print(f"rho_final {result.rho_final!r}")
    print(f"rho_increases {len(result.rho_increases)}")
    print(f"time_ms {elapsed_ms:.3f}")
    return 0


def _cmd_bench(args):
    config = read_experiment_config(args.config)
    reports = run_experiment(config, out_dir=args.out)
    target = Path(args.out if args.out is not None else config.out_dir)
    print(f"ran {len(reports)} trials")
    for name in ("trials.csv", "summary.csv", "plot.py"):
        print(f"wrote {target / name}")
    return 0


def _cmd_oracle(args):
    instance = read_instance(args.instance)
    limits = BruteForceLimits(
        max_injective=args.max_injective, max_occluded=args.max_occluded
    )
    assignment, best = brute_force_optimum(instance, limits)
    if args.out:
        write_solution(
            args.out,
            assignment,
            instance.n1,
            instance.n2,
            metadata={"energy": repr(best)},
        )
        print(f"wrote {args.out}")
    print(f"energy {best!r}")
    print(f"matched {int(round(float(assignment.sum())))}")
    return 0


def _add_solver_flags(parser):
    parser.add_argument("--variant", choices=("adgm1", "adgm2"), default="adgm1")
    parser.add_argument("--rho0", type=float, default=None, help="initial penalty (default n/1000)")
    parser.add_argument("--t1", type=int, default=300)
    parser.add_argument("--t2", type=int, default=50)
    parser.add_argument("--beta", type=float, default=2.0)
    parser.add_argument("--eps", type=float, default=None, help="stop threshold (default 1e-6 * n)")
    parser.add_argument("--max-iter", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=None)


def build_parser():
    parser = _Parser(prog="adgm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a planted synthetic problem")
    gen.add_argument("--inliers", type=int, required=True)
    gen.add_argument("--outliers", type=int, default=0)
    gen.add_argument("--noise", type=float, default=0.0)
    gen.add_argument("--rotation", type=float, default=0.0)
    gen.add_argument("--scale", type=float, default=1.0)
    gen.add_argument("--tx", type=float, default=0.0)
    gen.add_argument("--ty", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=_cmd_gen)

    build = sub.add_parser("build", help="build an instance file from point sets")
    build.add_argument("--points1", required=True)
    build.add_argument("--points2", required=True)
    build.add_argument("--model", choices=("a", "b", "c", "third"), required=True)
    build.add_argument("--eta", type=float, default=0.5)
    build.add_argument("--sigma-l", type=float, default=0.5)
    build.add_argument("--sigma-a", type=float, default=pi / 2)
    build.add_argument("--sigma2", type=float, default=2500.0)
    build.add_argument("--knn", type=int, default=300)
    build.add_argument("--triangles", type=int, default=5000)
    build.add_argument("--gamma", type=float, default=None)
    build.add_argument("--unary", help="unary potential file (model a)")
    build.add_argument("--unary-offset", type=float, default=0.0)
    build.add_argument("--edges1", help="edge list for the first set (model a)")
    build.add_argument("--edges2", help="edge list for the second set (model a)")
    build.add_argument("--rows", choices=_SIDE_CHOICES, default=None)
    build.add_argument("--cols", choices=_SIDE_CHOICES, default=None)
    build.add_argument("--truth", help="ground-truth correspondence file")
    build.add_argument("--seed", type=int, default=None)
    build.add_argument("--out", required=True, help="output instance file")
    build.set_defaults(func=_cmd_build)

    solve_cmd = sub.add_parser("solve", help="solve an instance file")
    solve_cmd.add_argument("instance")
    _add_solver_flags(solve_cmd)
    solve_cmd.add_argument("--trace", help="write per-iteration trace CSV here")
    solve_cmd.add_argument("--out", help="write the discrete solution here")
    solve_cmd.set_defaults(func=_cmd_solve)

    bench = sub.add_parser("bench", help="run a sweep experiment from a config file")
    bench.add_argument("config")
    bench.add_argument("--out", default=None, help="output directory (overrides the config)")
    bench.set_defaults(func=_cmd_bench)

    oracle = sub.add_parser("oracle", help="exhaustive discrete optimum of a small instance")
    oracle.add_argument("instance")
    oracle.add_argument("--max-injective", type=int, default=7)
    oracle.add_argument("--max-occluded", type=int, default=5)
    oracle.add_argument("--out", help="write the optimal solution here")
    oracle.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (OracleRefusalError, UnsupportedConstraintError, ConfigurationError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
