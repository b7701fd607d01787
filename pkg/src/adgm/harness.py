"""Synthetic benchmark harness.

Generates planted point-matching problems, sweeps a difficulty variable
(outlier count or matched-subset size), runs one or more solver
configurations per trial, and reports per-trial metrics plus per-setting
means as CSV.  A small standalone plot script referencing the CSV is
written next to the reports.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from math import cos, sin
from pathlib import Path

import numpy as np

from .discretize import BruteForceLimits, brute_force_optimum
from .errors import OracleRefusalError
from .io import _data_lines
from .models import (
    build_pairwise_a,
    build_pairwise_b,
    build_pairwise_c,
    build_third_order,
    delaunay_edges,
)
from .solver import SolverConfig, Variant, energy, solve

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = [
    "instance_id",
    "method",
    "objective",
    "objective_ratio",
    "accuracy",
    "matched",
    "iterations",
    "converged",
    "time_ms",
]

SUMMARY_COLUMNS = [
    "sweep_value",
    "method",
    "mean_objective",
    "mean_objective_ratio",
    "mean_accuracy",
    "mean_matched",
    "mean_iterations",
    "converged_rate",
    "mean_time_ms",
    "global_opt_rate",
]

_MODELS = ("a", "b", "c", "third")
_SWEEPS = ("outliers", "subset")


@dataclass(frozen=True)
class Transform:
    """Similarity transform applied to the inlier points."""

    rotation: float = 0.0
    scale: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    def apply(self, points):
        points = np.asarray(points, dtype=np.float64)
        c, s = cos(self.rotation), sin(self.rotation)
        rotated = points @ np.array([[c, s], [-s, c]])  # row-vector convention
        return self.scale * rotated + np.array([self.tx, self.ty])


def generate_synthetic(n_inliers, n_outliers=0, noise_sigma=0.0, transform=None, seed=None):
    """Planted matching problem: inliers uniform in the unit square; the
    second set is their transform plus Gaussian noise, mixed with
    uniform outliers (drawn in the transformed inliers' bounding box)
    and randomly permuted.  Returns ``(points1, points2, truth)`` with
    truth the hard assignment vector mapping each inlier to its image.
    """
    if n_inliers < 1:
        raise ValueError(f"n_inliers must be >= 1, got {n_inliers}")
    if n_outliers < 0:
        raise ValueError(f"n_outliers must be >= 0, got {n_outliers}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if transform is None:
        transform = Transform()
    rng = np.random.default_rng(seed)
    points1 = rng.random((n_inliers, 2))
    mapped = transform.apply(points1) + rng.normal(0.0, noise_sigma, (n_inliers, 2))
    lo = mapped.min(axis=0)
    hi = mapped.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)  # degenerate box falls back to unit span
    outliers = lo + span * rng.random((n_outliers, 2))
    stacked = np.vstack([mapped, outliers])
    n2 = stacked.shape[0]
    slots = rng.permutation(n2)
    points2 = np.empty_like(stacked)
    points2[slots] = stacked
    truth = np.zeros(n_inliers * n2)
    truth[slots[:n_inliers] * n_inliers + np.arange(n_inliers)] = 1.0
    return points1, points2, truth


def accuracy(result, truth, n_inliers):
    """Fraction of inliers matched to their true correspondents; an
    unmatched or mismatched inlier counts as wrong."""
    result = np.asarray(result, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if result.shape != truth.shape:
        raise ValueError("result and truth must have the same shape")
    if n_inliers < 1:
        raise ValueError(f"n_inliers must be >= 1, got {n_inliers}")
    return float(np.minimum(result, truth).sum() / n_inliers)


@dataclass(frozen=True)
class TrialReport:
    instance_id: str
    method: str
    objective: float
    objective_ratio: float | None
    accuracy: float
    matched: int
    iterations: int
    converged: bool
    time_ms: float
    global_opt: bool | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark sweep: which model, which difficulty variable, how
    many trials per setting, and which solver configurations to compare."""

    model: str
    values: tuple
    sweep: str = "outliers"
    inliers: int = 10
    total: int = 30
    trials: int = 1
    noise_sigma: float = 0.0
    transform: Transform = Transform()
    methods: tuple = (("adgm1", SolverConfig()),)
    seed: int = 0
    eta: float = 0.5
    sigma2: float = 2500.0
    sigma_l: float = 0.5
    sigma_a: float = float(np.pi / 2)
    unary_offset: float = 0.0
    knn: int = 300
    triangles: int = 5000
    oracle_limits: BruteForceLimits = BruteForceLimits()
    out_dir: str | None = None

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ValueError(f"model must be one of {_MODELS}, got {self.model!r}")
        if self.sweep not in _SWEEPS:
            raise ValueError(f"sweep must be one of {_SWEEPS}, got {self.sweep!r}")
        if not self.values:
            raise ValueError("at least one sweep value is required")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.methods:
            raise ValueError("at least one solver method is required")
        for value in self.values:
            n_inliers, n_outliers = self.resolve_sizes(value)
            if n_inliers < 1 or n_outliers < 0:
                raise ValueError(
                    f"sweep value {value} gives invalid sizes "
                    f"({n_inliers} inliers, {n_outliers} outliers)"
                )

    def resolve_sizes(self, value):
        """(n_inliers, n_outliers) for one sweep value."""
        if self.sweep == "outliers":
            return self.inliers, int(value)
        return int(value), self.total - int(value)


def _build_instance(config, points1, points2, truth, model_seed):
    if config.model == "a":
        unary = np.zeros((points1.shape[0], points2.shape[0]))
        return build_pairwise_a(
            points1,
            points2,
            delaunay_edges(points1),
            delaunay_edges(points2),
            unary,
            eta=config.eta,
            sigma_l=config.sigma_l,
            sigma_a=config.sigma_a,
            unary_offset=config.unary_offset,
            ground_truth=truth,
        )
    if config.model == "b":
        return build_pairwise_b(points1, points2, config.sigma2, ground_truth=truth)
    if config.model == "c":
        return build_pairwise_c(points1, points2, config.eta, ground_truth=truth)
    return build_third_order(
        points1,
        points2,
        knn=config.knn,
        triangle_budget=config.triangles,
        seed=model_seed,
        ground_truth=truth,
    )


def run_experiment(config, out_dir=None):
    """Run the full sweep and write trials.csv, summary.csv, and plot.py
    into the output directory.  Returns the list of TrialReports."""
    target = out_dir if out_dir is not None else config.out_dir
    if target is None:
        raise ValueError("an output directory is required (config out / out_dir)")
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)

    prefix = "out" if config.sweep == "outliers" else "sub"
    reports = []
    for vi, value in enumerate(config.values):
        n_inliers, n_outliers = config.resolve_sizes(value)
        for trial in range(config.trials):
            instance_id = f"{prefix}{value}_t{trial}"
            seeds = np.random.SeedSequence((config.seed, vi, trial)).generate_state(2)
            points1, points2, truth = generate_synthetic(
                n_inliers, n_outliers, config.noise_sigma, config.transform, int(seeds[0])
            )
            instance = _build_instance(config, points1, points2, truth, int(seeds[1]))
            truth_energy = energy(instance, truth)
            oracle_energy = None
            try:
                _, oracle_energy = brute_force_optimum(instance, config.oracle_limits)
            except OracleRefusalError as exc:
                logger.info("oracle refused for %s: %s", instance_id, exc)
            for method_name, method_config in config.methods:
                start = time.perf_counter()
                result = solve(instance, method_config)
                elapsed_ms = (time.perf_counter() - start) * 1000.0
                ratio = None
                if abs(truth_energy) > 1e-15:
                    ratio = result.energy_discrete / truth_energy
                global_opt = None
                if oracle_energy is not None:
                    global_opt = bool(
                        abs(result.energy_discrete - oracle_energy)
                        <= 1e-9 * max(1.0, abs(oracle_energy))
                    )
                reports.append(
                    TrialReport(
                        instance_id=instance_id,
                        method=method_name,
                        objective=result.energy_discrete,
                        objective_ratio=ratio,
                        accuracy=accuracy(result.discrete, truth, n_inliers),
                        matched=int(round(float(result.discrete.sum()))),
                        iterations=result.iterations,
                        converged=result.converged,
                        time_ms=elapsed_ms,
                        global_opt=global_opt,
                    )
                )
    _write_trials_csv(target / "trials.csv", reports)
    _write_summary_csv(target / "summary.csv", config, reports)
    _write_plot_script(target / "plot.py")
    return reports


def _fmt(value):
    return repr(float(value))


def _write_trials_csv(path, reports):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRIAL_COLUMNS)
        for r in reports:
            writer.writerow(
                [
                    r.instance_id,
                    r.method,
                    _fmt(r.objective),
                    "" if r.objective_ratio is None else _fmt(r.objective_ratio),
                    _fmt(r.accuracy),
                    r.matched,
                    r.iterations,
                    "true" if r.converged else "false",
                    f"{r.time_ms:.3f}",
                ]
            )


def _mean(values):
    values = list(values)
    return sum(values) / len(values) if values else None


def _write_summary_csv(path, config, reports):
    prefix = "out" if config.sweep == "outliers" else "sub"
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_COLUMNS)
        for value in config.values:
            for method_name, _ in config.methods:
                group = [
                    r
                    for r in reports
                    if r.method == method_name
                    and r.instance_id.startswith(f"{prefix}{value}_")
                ]
                if not group:
                    continue
                ratios = [r.objective_ratio for r in group if r.objective_ratio is not None]
                opts = [r.global_opt for r in group if r.global_opt is not None]
                writer.writerow(
                    [
                        value,
                        method_name,
                        _fmt(_mean(r.objective for r in group)),
                        "" if not ratios else _fmt(_mean(ratios)),
                        _fmt(_mean(r.accuracy for r in group)),
                        _fmt(_mean(r.matched for r in group)),
                        _fmt(_mean(r.iterations for r in group)),
                        _fmt(_mean(1.0 if r.converged else 0.0 for r in group)),
                        f"{_mean(r.time_ms for r in group):.3f}",
                        "" if not opts else _fmt(_mean(1.0 if o else 0.0 for o in opts)),
                    ]
                )


_PLOT_SCRIPT = '''#!/usr/bin/env python3
"""Plot the summary.csv written next to this script."""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
with open(here / "summary.csv", newline="") as handle:
    rows = list(csv.DictReader(handle))

for metric, fname in (("mean_accuracy", "accuracy.png"), ("mean_objective", "objective.png")):
    series = defaultdict(list)
    for row in rows:
        if row[metric]:
            series[row["method"]].append((float(row["sweep_value"]), float(row[metric])))
    plt.figure(figsize=(6, 4))
    for method in sorted(series):
        points = sorted(series[method])
        plt.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=method)
    plt.xlabel("sweep value")
    plt.ylabel(metric.replace("_", " "))
    plt.grid(True, alpha=0.3)
    plt.legend()
    plt.savefig(here / fname, dpi=150, bbox_inches="tight")
    print("wrote", here / fname)
'''


def _write_plot_script(path):
    Path(path).write_text(_PLOT_SCRIPT)


# -- experiment config files ------------------------------------------

_CONFIG_KEYS = {
    "model",
    "sweep",
    "values",
    "inliers",
    "total",
    "trials",
    "noise_sigma",
    "rotation",
    "scale",
    "tx",
    "ty",
    "methods",
    "seed",
    "eta",
    "sigma2",
    "sigma_l",
    "sigma_a",
    "unary_offset",
    "knn",
    "triangles",
    "rho0",
    "t1",
    "t2",
    "beta",
    "eps",
    "max_iter",
    "out",
}


def read_experiment_config(path):
    """Parse a key = value experiment file into an ExperimentConfig."""
    entries = {}
    for line in _data_lines(Path(path).read_text()):
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}: expected 'key = value', got {line!r}")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}: unknown config key {key!r}")
        entries[key] = value.strip()

    if "model" not in entries:
        raise ValueError(f"{path}: missing required key 'model'")
    if "values" not in entries:
        raise ValueError(f"{path}: missing required key 'values'")

    def get_float(key, default):
        return float(entries[key]) if key in entries else default

    def get_int(key, default):
        return int(entries[key]) if key in entries else default

    transform = Transform(
        rotation=get_float("rotation", 0.0),
        scale=get_float("scale", 1.0),
        tx=get_float("tx", 0.0),
        ty=get_float("ty", 0.0),
    )
    solver_kwargs = dict(
        rho0=float(entries["rho0"]) if entries.get("rho0") else None,
        t1=get_int("t1", 300),
        t2=get_int("t2", 50),
        beta=get_float("beta", 2.0),
        eps=float(entries["eps"]) if entries.get("eps") else None,
        max_iter=get_int("max_iter", 10000),
    )
    method_names = [
        name.strip().lower()
        for name in entries.get("methods", "adgm1").split(",")
        if name.strip()
    ]
    methods = tuple(
        (name, SolverConfig(variant=Variant.parse(name), **solver_kwargs))
        for name in method_names
    )
    return ExperimentConfig(
        model=entries["model"].strip().lower(),
        values=tuple(int(v) for v in entries["values"].split(",") if v.strip()),
        sweep=entries.get("sweep", "outliers").strip().lower(),
        inliers=get_int("inliers", 10),
        total=get_int("total", 30),
        trials=get_int("trials", 1),
        noise_sigma=get_float("noise_sigma", 0.0),
        transform=transform,
        methods=methods,
        seed=get_int("seed", 0),
        eta=get_float("eta", 0.5),
        sigma2=get_float("sigma2", 2500.0),
        sigma_l=get_float("sigma_l", 0.5),
        sigma_a=get_float("sigma_a", float(np.pi / 2)),
        unary_offset=get_float("unary_offset", 0.0),
        knn=get_int("knn", 300),
        triangles=get_int("triangles", 5000),
        out_dir=entries.get("out"),
    )
