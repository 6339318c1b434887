"""Ensemble orchestration, aggregation, and theory comparisons.

Replicas are independent trajectories; replica (g, r) of an experiment
with master seed S draws from the Philox stream keyed by SeedSequence
([S, g, r]), so results are reproducible bit for bit regardless of the
parallel schedule.  Aggregation is keyed by replica index, which makes
the summary invariant under completion order.

Outputs (under ``out.dir`` when set):
  summary.json    aggregate statistics and fitted bound scales
  replicas.jsonl  one line per replica (hits, censoring, event counts)
  series/*.csv    per-replica time series when enabled
  events/*.csv    per-replica event logs when enabled
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _core, bounds
from .config import ConfigError, ExperimentConfig
from .engine import RandomStream, StopCondition, run_trajectory
from .kernel import hypothesis_check
from .smoluchowski import OdeConfig, integrate
from .state import ClusterState


@dataclass
class StatRow:
    """Aggregate for one (N, stopping time) cell."""

    N: int
    label: str
    count_hit: int
    censor_rate: float
    mean: Optional[float]
    stderr: Optional[float]
    q10: Optional[float]
    q50: Optional[float]
    q90: Optional[float]

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "label": self.label,
            "count_hit": self.count_hit,
            "censor_rate": self.censor_rate,
            "mean": self.mean,
            "stderr": self.stderr,
            "q10": self.q10,
            "q50": self.q50,
            "q90": self.q90,
        }


@dataclass
class EnsembleSummary:
    seed: int
    kernel_label: str
    n_grid: List[int]
    replicas: int
    rows: List[StatRow] = field(default_factory=list)
    fits: Dict[str, dict] = field(default_factory=dict)
    failures: int = 0
    replicas_path: Optional[str] = None

    def mean_table(self, label: str) -> Dict[int, float]:
        return {
            row.N: row.mean
            for row in self.rows
            if row.label == label and row.mean is not None
        }

    def row(self, N: int, label: str) -> StatRow:
        for row in self.rows:
            if row.N == N and row.label == label:
                return row
        raise KeyError((N, label))

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "kernel": self.kernel_label,
            "n_grid": self.n_grid,
            "replicas": self.replicas,
            "failures": self.failures,
            "rows": [r.to_dict() for r in self.rows],
            "fits": self.fits,
            "replicas_path": self.replicas_path,
        }


# -- replica workers ---------------------------------------------------------

_WORKER_CONFIG: Optional[ExperimentConfig] = None


def _init_worker(config: ExperimentConfig):
    global _WORKER_CONFIG
    _WORKER_CONFIG = config


def _run_replica(task: Tuple[int, int, int]) -> dict:
    gidx, ridx, N = task
    config = _WORKER_CONFIG
    try:
        state = ClusterState(config.initial_counts(N))
        rng = RandomStream.from_entropy(config.seed, gidx, ridx)
        obs = config.observables_for(N)
        stop = StopCondition(
            t_max=config.t_max,
            max_events=config.max_events,
            all_hits=config.stop_all_hits and bool(obs.stopping_times),
        )
        final, record, events = run_trajectory(
            state, config.kernel, stop, rng, obs, collect_events=config.events_log
        )
        out = {
            "replica": ridx,
            "grid_index": gidx,
            "N": N,
            "t_end": record.t_end,
            "n_events": record.n_events,
            "truncated": record.truncated,
            "final_particle_count": final.particle_count,
            "largest": final.largest,
            "hits": record.hits_as_json_dict(),
        }
        if record.series_rows is not None:
            out["_series_header"] = record.series_header
            out["_series_rows"] = record.series_rows
        if record.snapshots:
            out["_snapshots"] = [
                (s.t, s.particle_count, s.largest, s.sol_mass, s.counts_head)
                for s in record.snapshots
            ]
        if events is not None:
            out["_events"] = [(e.time, e.m, e.n) for e in events]
        return out
    except Exception as exc:  # recorded, not fatal (unless >1% fail)
        return {"replica": ridx, "grid_index": gidx, "N": N, "error": repr(exc)}


def _execute_replicas(config: ExperimentConfig, tasks: List[Tuple[int, int, int]]) -> List[dict]:
    workers = config.parallelism or os.cpu_count() or 1
    if workers <= 1 or len(tasks) < 4:
        _init_worker(config)
        return [_run_replica(t) for t in tasks]
    _core.warmup()  # compile in the parent so forked workers inherit the JIT
    chunk = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(config,)
    ) as pool:
        return list(pool.map(_run_replica, tasks, chunksize=chunk))


# -- aggregation -------------------------------------------------------------


def _aggregate(config: ExperimentConfig, results: List[dict]) -> EnsembleSummary:
    summary = EnsembleSummary(
        seed=config.seed,
        kernel_label=config.kernel.label(),
        n_grid=list(config.n_grid),
        replicas=config.replicas,
    )
    failures = [r for r in results if "error" in r]
    summary.failures = len(failures)
    if failures and len(failures) > 0.01 * len(results):
        raise RuntimeError(
            f"{len(failures)} of {len(results)} replicas failed; first: "
            f"{failures[0]['error']}"
        )

    labels: List[str] = []
    for r in results:
        if "hits" in r:
            for label in r["hits"]:
                if label not in labels:
                    labels.append(label)

    for gidx, N in enumerate(config.n_grid):
        cell = [r for r in results if r.get("grid_index") == gidx and "hits" in r]
        for label in labels:
            hits = [
                r["hits"][label]["time"]
                for r in cell
                if label in r["hits"] and r["hits"][label]["hit"]
            ]
            n_total = sum(1 for r in cell if label in r["hits"])
            if n_total == 0:
                continue
            censor = 1.0 - len(hits) / n_total
            if hits:
                arr = np.asarray(hits)
                mean = float(arr.mean())
                sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
                stderr = sd / math.sqrt(len(arr))
                q10, q50, q90 = (float(q) for q in np.quantile(arr, [0.1, 0.5, 0.9]))
                summary.rows.append(
                    StatRow(N, label, len(hits), censor, mean, stderr, q10, q50, q90)
                )
            else:
                summary.rows.append(
                    StatRow(N, label, 0, censor, None, None, None, None, None)
                )
    return summary


def run_ensemble(config: ExperimentConfig) -> EnsembleSummary:
    """Run the full replica grid, aggregate, and write output files."""
    tasks = [
        (gidx, ridx, N)
        for gidx, N in enumerate(config.n_grid)
        for ridx in range(config.replicas)
    ]
    results = _execute_replicas(config, tasks)
    summary = _aggregate(config, results)

    if config.report_bound_kind:
        for label in sorted({row.label for row in summary.rows}):
            try:
                summary.fits[label] = fit_scaling(
                    summary, label, config.report_bound_kind, config.bounds_params
                )
            except (ValueError, ConfigError):
                continue

    if config.out_dir:
        _write_outputs(config, results, summary)
    return summary


def _json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, indent=2).encode() + b"\n"


def _write_outputs(config: ExperimentConfig, results: List[dict], summary: EnsembleSummary):
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        summary.replicas_path = "replicas.jsonl"
        with open(out / "replicas.jsonl", "wb") as fh:
            for r in results:
                public = {k: v for k, v in r.items() if not k.startswith("_")}
                fh.write(json.dumps(public, sort_keys=True).encode() + b"\n")
        with open(out / "summary.json", "wb") as fh:
            fh.write(_json_bytes(summary.to_json_dict()))
        _write_stats_csv(out / "summary.csv", summary)
        series_dir = out / "series"
        events_dir = out / "events"
        for r in results:
            if "_series_rows" in r:
                series_dir.mkdir(exist_ok=True)
                path = series_dir / f"N{r['N']}_r{r['replica']}.csv"
                with open(path, "w") as fh:
                    fh.write(r["_series_header"] + "\n")
                    for row in r["_series_rows"]:
                        fh.write(",".join(repr(float(x)) for x in row) + "\n")
            if "_events" in r:
                events_dir.mkdir(exist_ok=True)
                path = events_dir / f"N{r['N']}_r{r['replica']}.csv"
                with open(path, "w") as fh:
                    fh.write("event_index,t,m,n\n")
                    for i, (t, m, n) in enumerate(r["_events"]):
                        fh.write(f"{i},{t!r},{m},{n}\n")
    except OSError as exc:
        raise RuntimeError(f"cannot write outputs under {out}: {exc}") from exc


def _write_stats_csv(path, summary: EnsembleSummary):
    with open(path, "w") as fh:
        fh.write("N,stopping_time,count_hit,censor_rate,mean,stderr,q10,q50,q90\n")
        for row in summary.rows:
            vals = [
                str(row.N),
                row.label,
                str(row.count_hit),
                repr(row.censor_rate),
            ] + [
                "" if v is None else repr(v)
                for v in (row.mean, row.stderr, row.q10, row.q50, row.q90)
            ]
            fh.write(",".join(vals) + "\n")


# -- scaling fits ------------------------------------------------------------


def fit_scaling(
    summary: EnsembleSummary,
    label: str,
    bound_kind: str,
    params: Dict[str, float],
) -> dict:
    """Fit the free scale of a bound shape to the empirical means.

    scale = max over N of mean / shape(N), so ``scale * shape`` dominates
    every measured mean; the per-N ratio table shows how tight the shape
    is, and ``monotone`` reports whether means decrease with N.
    """
    means: Dict[int, float] = {}
    for row in summary.rows:
        if row.label != label:
            continue
        if row.mean is None or row.censor_rate > 0:
            warnings.warn(
                f"excluding N={row.N} from fit of {label}: "
                f"censor rate {row.censor_rate:.3f}"
            )
            continue
        means[row.N] = row.mean
    return fit_scaling_means(means, bound_kind, params)


def fit_scaling_means(
    means: Dict[int, float], bound_kind: str, params: Dict[str, float]
) -> dict:
    if len(means) < 3:
        raise ValueError("scaling fit needs at least 3 grid points")
    ns = sorted(means)
    shapes = {N: bounds.bound_shape(bound_kind, params, N) for N in ns}
    ratios = {N: means[N] / shapes[N] for N in ns}
    scale = max(ratios.values())
    vals = [means[N] for N in ns]
    monotone = all(b < a for a, b in zip(vals, vals[1:]))
    return {
        "bound_kind": bound_kind,
        "scale_constant": scale,
        "ratios": {str(N): ratios[N] for N in ns},
        "monotone_decreasing": monotone,
    }


# -- mean-field comparison ---------------------------------------------------


@dataclass
class MlpOdeReport:
    N: int
    replicas: int
    checkpoints: List[float]
    sup_density_deviation: float
    sup_sol_mass_deviation: float
    mlp_sol_mass: List[float]
    ode_sol_mass: List[float]

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "replicas": self.replicas,
            "checkpoints": self.checkpoints,
            "sup_density_deviation": self.sup_density_deviation,
            "sup_sol_mass_deviation": self.sup_sol_mass_deviation,
            "mlp_sol_mass": self.mlp_sol_mass,
            "ode_sol_mass": self.ode_sol_mass,
        }


def compare_mlp_ode(config: ExperimentConfig) -> MlpOdeReport:
    """Empirical mean densities and sol mass versus the mean-field ODE.

    Runs ``config.replicas`` trajectories at the largest grid mass,
    averages L_n(t)/N at the configured checkpoints, and integrates the
    matching ODE (classical or flory per ``ode.mode``).  The microscopic
    sol mass excludes clusters of size >= scale * N^b (the gel window,
    default b = 2/3, scale = 1).
    """
    if not config.checkpoints:
        raise ConfigError("compare_mlp_ode needs observe.checkpoints")
    N = config.n_grid[-1]
    if N < 1000:
        raise ConfigError("mean-field comparison needs N >= 1000")
    report_mode = config.ode_mode
    hyp = hypothesis_check(config.kernel)
    if report_mode == "classical" and not hyp.linear_growth:
        raise ConfigError(
            f"classical comparison needs a linearly bounded kernel; "
            f"{config.kernel.label()} is not"
        )
    if report_mode == "flory" and hyp.limit_ratio is None:
        raise ConfigError(
            f"flory comparison needs an existing limit ratio; "
            f"{config.kernel.label()} has none"
        )

    cps = sorted(config.checkpoints)
    run_cfg = ExperimentConfig(
        mode="ensemble",
        kernel=config.kernel,
        n_grid=[N],
        replicas=config.replicas,
        seed=config.seed,
        t_max=cps[-1],
        stop_all_hits=False,
        checkpoints=tuple(cps),
        gel_cutoff_exponent=config.gel_cutoff_exponent,
        gel_cutoff_scale=config.gel_cutoff_scale,
        n_report=config.n_report,
        parallelism=config.parallelism,
    )
    tasks = [(0, ridx, N) for ridx in range(config.replicas)]
    results = _execute_replicas(run_cfg, tasks)
    errors = [r for r in results if "error" in r]
    if errors:
        raise RuntimeError(f"replica failure: {errors[0]['error']}")

    n_rep = min(config.n_report, N)
    mean_counts = np.zeros((len(cps), n_rep + 1))
    mean_sol = np.zeros(len(cps))
    for r in results:
        for i, (t, K, largest, sol, head) in enumerate(r["_snapshots"]):
            mean_counts[i] += head
            mean_sol[i] += sol
    mean_counts /= len(results)
    mean_sol /= len(results)

    ode_cfg = OdeConfig(
        n_max=config.ode_n_max,
        mode=report_mode,
        rel_tol=config.ode_rel_tol,
        abs_tol=config.ode_abs_tol,
        t_end=cps[-1],
    )
    init_mass = {s: c / N for s, c in config.initial_counts(N).items()}
    ode = integrate(ode_cfg, config.kernel, init_mass, t_eval=cps)
    ode_states = ode.states[: len(cps)]

    sup_density = 0.0
    sup_sol = 0.0
    ode_sol = []
    for i, st in enumerate(ode_states):
        f_hat = mean_counts[i][1:] / N
        f_ode = st.f[1 : n_rep + 1]
        if len(f_ode) < n_rep:
            f_ode = np.concatenate([f_ode, np.zeros(n_rep - len(f_ode))])
        sup_density = max(sup_density, float(np.max(np.abs(f_hat - f_ode))))
        sol = st.sol_mass
        ode_sol.append(sol)
        sup_sol = max(sup_sol, abs(mean_sol[i] - sol))

    return MlpOdeReport(
        N=N,
        replicas=config.replicas,
        checkpoints=list(cps),
        sup_density_deviation=sup_density,
        sup_sol_mass_deviation=sup_sol,
        mlp_sol_mass=[float(x) for x in mean_sol],
        ode_sol_mass=[float(x) for x in ode_sol],
    )


# -- report emission ---------------------------------------------------------


def emit_report(summary_path, out_dir, bound_kind: Optional[str], params: Dict[str, float]):
    """Publication-style CSV (and gnuplot .dat) from a summary.json."""
    with open(summary_path) as fh:
        data = json.load(fh)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = data["rows"]
    with open(out / "table.csv", "w") as fh:
        fh.write("N,stopping_time,count_hit,censor_rate,mean,stderr,q10,q50,q90\n")
        for r in rows:
            fh.write(
                ",".join(
                    [
                        str(r["N"]),
                        r["label"],
                        str(r["count_hit"]),
                        repr(r["censor_rate"]),
                    ]
                    + ["" if r[k] is None else repr(r[k]) for k in ("mean", "stderr", "q10", "q50", "q90")]
                )
                + "\n"
            )
    with open(out / "table.dat", "w") as fh:
        fh.write("# N mean stderr label\n")
        for r in rows:
            if r["mean"] is not None:
                fh.write(f"{r['N']} {r['mean']!r} {r['stderr']!r} \"{r['label']}\"\n")
    fits = {}
    if bound_kind:
        by_label: Dict[str, Dict[int, float]] = {}
        for r in rows:
            if r["mean"] is not None and r["censor_rate"] == 0:
                by_label.setdefault(r["label"], {})[r["N"]] = r["mean"]
        for label, means in by_label.items():
            if len(means) >= 3:
                fits[label] = fit_scaling_means(means, bound_kind, params)
        with open(out / "fits.json", "wb") as fh:
            fh.write(_json_bytes(fits))
    return fits
