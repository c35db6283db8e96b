"""Experiment harness: JSON configs, replicated runs, traces, comparisons.

A config names one algorithm, one objective, the initial distribution and the
schedules, and the harness runs it over seeded replications: replication k
always uses stream k of the base seed, owns a private objective instance, and
writes one trace CSV.  All CSV output is byte-deterministic for a given
config and seed; wall-clock timings go to a separate JSON file so they never
perturb the deterministic artifacts.
"""

from __future__ import annotations

import json
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import MonteCarloConfig, run_batch
from .ce2nd import Schedule, Schedules, run as run_ce2nd
from .gaussian import GaussianParams, RngState
from .objectives import ObjectiveFunction, make_objective
from .trace import TraceRecord, write_csv

ALGORITHMS = ("ce2nd", "mcce", "gmcce")


class ConfigError(ValueError):
    """A config file failed to parse or validate; the message names the key."""


@dataclass
class RunConfig:
    algorithm: str
    objective_name: str
    m: int
    theta0_mu: np.ndarray
    q: float
    schedules: Optional[Schedules] = None
    mc: Optional[MonteCarloConfig] = None
    delta: float = 0.4
    replications: int = 1
    base_seed: int = 0
    max_evals: int = 10_000
    max_updates: Optional[int] = None
    trace_stride: int = 1
    output_dir: Optional[str] = None
    success_target: Optional[float] = None
    workers: int = 1

    def make_objective(self) -> ObjectiveFunction:
        return make_objective(self.objective_name, self.m, self.delta)

    def make_theta0(self) -> GaussianParams:
        m = self.m
        return GaussianParams(self.theta0_mu, self.q * np.eye(m))


def _need(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"missing required key '{key}' in {where}")
    return mapping[key]


def _parse_schedule(raw, where: str, default_initial: float = 0.1) -> Schedule:
    if isinstance(raw, (int, float)):
        return Schedule.constant(float(raw))
    if not isinstance(raw, dict):
        raise ConfigError(f"'{where}' must be a number or an object with a 'kind'")
    kind = _need(raw, "kind", where)
    try:
        if kind == "constant":
            return Schedule.constant(float(_need(raw, "value", where)))
        if kind == "power":
            return Schedule.power(
                float(_need(raw, "exponent", where)),
                float(raw.get("initial", default_initial)),
            )
    except ValueError as exc:
        raise ConfigError(f"invalid schedule at '{where}': {exc}") from None
    raise ConfigError(f"unknown schedule kind {kind!r} at '{where}'")


def parse_config(doc: dict, source: str = "<config>") -> RunConfig:
    """Validate a parsed JSON document into a RunConfig."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be an object")
    algorithm = _need(doc, "algorithm", source)
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")

    obj = _need(doc, "objective", source)
    name = _need(obj, "name", "objective")
    delta = float(obj.get("delta", 0.4))
    try:
        probe = make_objective(name, obj.get("m"), delta)
    except ValueError as exc:
        raise ConfigError(f"objective: {exc}") from None
    m = probe.m

    th = _need(doc, "theta0", source)
    q = float(_need(th, "q", "theta0"))
    if not q > 0:
        raise ConfigError(f"theta0.q must be positive, got {q}")
    mu_raw = _need(th, "mu", "theta0")
    mu = np.full(m, float(mu_raw)) if isinstance(mu_raw, (int, float)) else np.asarray(mu_raw, dtype=float)
    if mu.shape != (m,):
        raise ConfigError(f"theta0.mu must broadcast to length {m}, got shape {mu.shape}")

    schedules = None
    mc = None
    if algorithm == "ce2nd":
        sch = _need(doc, "schedules", source)
        beta_raw = _need(sch, "beta", "schedules")
        beta_index = beta_raw.get("index", "iteration") if isinstance(beta_raw, dict) else "iteration"
        try:
            schedules = Schedules(
                rho=float(_need(sch, "rho", "schedules")),
                eps1=float(_need(sch, "eps1", "schedules")),
                r=float(_need(sch, "r", "schedules")),
                beta=_parse_schedule(beta_raw, "schedules.beta"),
                c=_parse_schedule(_need(sch, "c", "schedules"), "schedules.c"),
                lam=_parse_schedule(_need(sch, "lambda", "schedules"), "schedules.lambda"),
                k_gamma=float(sch.get("k_gamma", 1.0)),
                q=q,
                projection=bool(sch.get("projection", True)),
                beta_index=beta_index,
            )
        except ValueError as exc:
            raise ConfigError(f"schedules: {exc}") from None
        schedules.validate()
    else:
        raw = _need(doc, "mc", source)
        alpha = _parse_schedule(raw["alpha"], "mc.alpha") if "alpha" in raw else None
        if algorithm == "gmcce" and alpha is None:
            raise ConfigError("missing required key 'alpha' in mc (gmcce needs a smoothing schedule)")
        try:
            mc = MonteCarloConfig(
                n0=int(_need(raw, "n0", "mc")),
                eta=float(_need(raw, "eta", "mc")),
                rho=float(_need(raw, "rho", "mc")),
                r=float(_need(raw, "r", "mc")),
                eps=float(raw.get("eps", 0.0)),
                alpha=alpha,
            )
        except ValueError as exc:
            raise ConfigError(f"mc: {exc}") from None

    budget = doc.get("budget", {})
    max_evals = int(budget.get("max_evals", 10_000))
    if max_evals < 0:
        raise ConfigError(f"budget.max_evals must be >= 0, got {max_evals}")
    max_updates = budget.get("max_updates")
    cfg = RunConfig(
        algorithm=algorithm,
        objective_name=name,
        m=m,
        theta0_mu=mu,
        q=q,
        schedules=schedules,
        mc=mc,
        delta=delta,
        replications=int(doc.get("replications", 1)),
        base_seed=int(doc.get("base_seed", 0)),
        max_evals=max_evals,
        max_updates=None if max_updates is None else int(max_updates),
        trace_stride=int(doc.get("trace_stride", 1)),
        output_dir=doc.get("output_dir"),
        success_target=None if doc.get("success_target") is None else float(doc["success_target"]),
        workers=int(doc.get("workers", 1)),
    )
    if cfg.replications < 1:
        raise ConfigError(f"replications must be >= 1, got {cfg.replications}")
    if cfg.trace_stride < 1:
        raise ConfigError(f"trace_stride must be >= 1, got {cfg.trace_stride}")
    return cfg


def load_config(path) -> RunConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error at line {exc.lineno}: {exc.msg}") from None
    return parse_config(doc, source=str(path))


# ---------------------------------------------------------------------------
# Replicated execution


@dataclass
class ReplicationResult:
    replication: int
    status: str  # run stop reason
    n_evals: int
    n_updates: int
    final_h_mu: float
    best_h_mu: float
    final_gamma: float
    final_sigma_trace: float
    records: list
    wall_seconds: float

    def summary_row(self, target: Optional[float]) -> dict:
        row = {
            "replication": self.replication,
            "status": self.status,
            "n_evals": self.n_evals,
            "n_updates": self.n_updates,
            "final_H_of_mu": self.final_h_mu,
            "best_H_of_mu": self.best_h_mu,
            "final_gamma": self.final_gamma,
            "final_sigma_trace": self.final_sigma_trace,
        }
        row["success"] = "" if target is None else int(not math.isnan(self.best_h_mu) and self.best_h_mu >= target)
        return row


def run_replication(config: RunConfig, replication: int) -> ReplicationResult:
    """Execute one seeded replication with a private objective and stream."""
    objective = config.make_objective()
    theta0 = config.make_theta0()
    rng = RngState(config.base_seed, stream=replication)
    start = time.perf_counter()
    if config.algorithm == "ce2nd":
        res = run_ce2nd(
            objective,
            config.schedules,
            theta0,
            rng,
            max_evals=config.max_evals,
            max_updates=config.max_updates,
            stride=config.trace_stride,
        )
        records = res.records
        reason = res.reason
        n_updates = res.state.n_updates
        final_gamma = res.state.gamma
        sigma_trace = float(np.trace(res.state.theta.sigma))
        mu = res.state.theta.mu
    else:
        res = run_batch(
            config.algorithm,
            objective,
            config.mc,
            theta0,
            rng,
            max_evals=config.max_evals,
            stride=config.trace_stride,
        )
        records = res.records
        reason = res.reason
        n_updates = records[-1].n_updates if records else 0
        final_gamma = records[-1].gamma if records else float("nan")
        sigma_trace = float(np.trace(res.theta.sigma))
        mu = res.theta.mu
    wall = time.perf_counter() - start
    final_h = objective.evaluate_unmetered(mu) if np.isfinite(mu).all() else float("nan")
    hs = [r.H_of_mu for r in records if not math.isnan(r.H_of_mu)]
    best_h = max(hs) if hs else final_h
    return ReplicationResult(
        replication=replication,
        status=reason,
        n_evals=objective.n_evals,
        n_updates=n_updates,
        final_h_mu=final_h,
        best_h_mu=best_h,
        final_gamma=final_gamma,
        final_sigma_trace=sigma_trace,
        records=records,
        wall_seconds=wall,
    )


def default_success_target(config: RunConfig) -> Optional[float]:
    """H* - 0.05 |H* - H(mu_0)| when the optimum is known; else None."""
    if config.success_target is not None:
        return config.success_target
    objective = config.make_objective()
    if objective.known_optimum is None:
        return None
    h_star = objective.known_optimum[1]
    h0 = objective.evaluate_unmetered(config.theta0_mu)
    return h_star - 0.05 * abs(h_star - h0)


@dataclass
class ExperimentResult:
    config: RunConfig
    replications: list
    target: Optional[float]
    out_dir: Optional[Path]

    @property
    def success_fraction(self) -> Optional[float]:
        if self.target is None:
            return None
        oks = [r.best_h_mu >= self.target for r in self.replications if not math.isnan(r.best_h_mu)]
        return sum(oks) / len(self.replications)

    def aggregate(self) -> dict:
        finals = [r.final_h_mu for r in self.replications]
        bests = [r.best_h_mu for r in self.replications]
        clean_f = [v for v in finals if not math.isnan(v)]
        clean_b = [v for v in bests if not math.isnan(v)]
        return {
            "algorithm": self.config.algorithm,
            "objective": self.config.objective_name,
            "m": self.config.m,
            "replications": len(self.replications),
            "target": self.target,
            "success_fraction": self.success_fraction,
            "mean_final_H_of_mu": statistics.fmean(clean_f) if clean_f else None,
            "median_final_H_of_mu": statistics.median(clean_f) if clean_f else None,
            "mean_best_H_of_mu": statistics.fmean(clean_b) if clean_b else None,
            "median_best_H_of_mu": statistics.median(clean_b) if clean_b else None,
            "total_evals": sum(r.n_evals for r in self.replications),
            "statuses": {s: sum(1 for r in self.replications if r.status == s) for s in
                         sorted({r.status for r in self.replications})},
        }


_SUMMARY_COLUMNS = (
    "replication",
    "status",
    "n_evals",
    "n_updates",
    "final_H_of_mu",
    "best_H_of_mu",
    "final_gamma",
    "final_sigma_trace",
    "success",
)


def _render_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def run_experiment(config: RunConfig, out_dir=None) -> ExperimentResult:
    """Run every replication, write traces and summary, return the results.

    A replication that diverges is recorded with its status; it does not
    abort the experiment.
    """
    target = default_success_target(config)
    out = Path(out_dir) if out_dir is not None else (
        Path(config.output_dir) if config.output_dir else None
    )
    reps = list(range(config.replications))
    if config.workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run_replication, [config] * len(reps), reps))
    else:
        results = [run_replication(config, k) for k in reps]

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        for res in results:
            write_csv(out / f"rep{res.replication:03d}.csv", res.records)
        with open(out / "summary.csv", "w", newline="\n") as fh:
            fh.write(",".join(_SUMMARY_COLUMNS) + "\n")
            for res in results:
                row = res.summary_row(target)
                fh.write(",".join(_render_cell(row[c]) for c in _SUMMARY_COLUMNS) + "\n")
        exp = ExperimentResult(config, results, target, out)
        with open(out / "aggregate.json", "w") as fh:
            json.dump(exp.aggregate(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(out / "timings.json", "w") as fh:
            json.dump(
                {f"rep{r.replication:03d}": r.wall_seconds for r in results}, fh, indent=2, sort_keys=True
            )
            fh.write("\n")
        return exp
    return ExperimentResult(config, results, target, None)


# ---------------------------------------------------------------------------
# Cross-algorithm comparison


def evals_to_target(records: Sequence[TraceRecord], target: float) -> Optional[int]:
    """Cumulative evaluations at the first trace row reaching the target."""
    for rec in records:
        if not math.isnan(rec.H_of_mu) and rec.H_of_mu >= target:
            return rec.n_evals
    return None


@dataclass
class ComparisonResult:
    labels: list
    experiments: list
    target: Optional[float]
    report: dict


def compare(
    labeled_configs: Sequence[tuple[str, RunConfig]],
    budget: Optional[int] = None,
    out_dir=None,
    target: Optional[float] = None,
) -> ComparisonResult:
    """Run several configs against a common budget and align their traces.

    All configs must target the same objective and dimension.  Emits a
    long-format CSV of (label, algorithm, replication, t, n_evals, H_of_mu),
    a cumulative-samples table, and a report ranking configs by the median
    evaluations needed to reach the target (unreached replications count as
    infinity; a missing median renders as null).
    """
    if not labeled_configs:
        raise ValueError("nothing to compare")
    names = {(cfg.objective_name, cfg.m) for _, cfg in labeled_configs}
    if len(names) > 1:
        raise ValueError(f"configs target different objectives: {sorted(names)}")
    labels = [label for label, _ in labeled_configs]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate comparison labels: {labels}")

    out = Path(out_dir) if out_dir is not None else None
    experiments = []
    for label, cfg in labeled_configs:
        if budget is not None:
            cfg = replace(cfg, max_evals=int(budget))
        sub = out / label if out is not None else None
        experiments.append(run_experiment(cfg, out_dir=sub))

    if target is None:
        targets = [e.target for e in experiments if e.target is not None]
        target = targets[0] if targets else None

    per_config = {}
    for label, exp in zip(labels, experiments):
        evals = [
            evals_to_target(r.records, target) if target is not None else None
            for r in exp.replications
        ]
        reached = [e for e in evals if e is not None]
        filled = [float(e) if e is not None else math.inf for e in evals]
        med = statistics.median(filled) if filled else math.inf
        per_config[label] = {
            "algorithm": exp.config.algorithm,
            "replications": len(exp.replications),
            "reached_target": len(reached),
            "median_evals_to_target": None if math.isinf(med) else med,
            "evals_to_target": evals,
            "median_best_H_of_mu": exp.aggregate()["median_best_H_of_mu"],
        }
    order = sorted(
        labels,
        key=lambda lb: (
            math.inf
            if per_config[lb]["median_evals_to_target"] is None
            else per_config[lb]["median_evals_to_target"]
        ),
    )
    report = {"target": target, "ranking_by_evals_to_target": order, "configs": per_config}

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "comparison.csv", "w", newline="\n") as fh:
            fh.write("label,algorithm,replication,t,n_evals,H_of_mu\n")
            for label, exp in zip(labels, experiments):
                for rep in exp.replications:
                    for rec in rep.records:
                        fh.write(
                            f"{label},{exp.config.algorithm},{rep.replication},"
                            f"{rec.t},{rec.n_evals},{_render_cell(rec.H_of_mu)}\n"
                        )
        with open(out / "cumulative_samples.csv", "w", newline="\n") as fh:
            fh.write("label,algorithm,replication,t,n_evals\n")
            for label, exp in zip(labels, experiments):
                for rep in exp.replications:
                    for rec in rep.records:
                        fh.write(f"{label},{exp.config.algorithm},{rep.replication},{rec.t},{rec.n_evals}\n")
        with open(out / "report.json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return ComparisonResult(labels=labels, experiments=experiments, target=target, report=report)
