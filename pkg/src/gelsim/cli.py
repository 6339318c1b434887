"""Command line interface.

    gelsim simulate --config CFG [--seed S] [--out DIR]
    gelsim ensemble --config CFG [--seed S] [--out DIR]
    gelsim ode      --config CFG [--out DIR]
    gelsim bounds   --config CFG [--out DIR]
    gelsim oracle   --config CFG [--out DIR]
    gelsim report   --config CFG [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bounds as bounds_mod
from . import harness, oracle, smoluchowski
from .config import MODES, ConfigError, load_experiment
from .engine import RandomStream, StopCondition, run_trajectory
from .state import ClusterState


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gelsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in MODES:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", default=None, help="override out.dir")
    return parser


def _dump_json(obj, out_dir, filename):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / filename).write_text(text)


def _cmd_simulate(config):
    N = config.n_grid[0]
    state = ClusterState(config.initial_counts(N))
    rng = RandomStream.from_entropy(config.seed, 0, 0)
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
        "N": N,
        "t_end": record.t_end,
        "n_events": record.n_events,
        "truncated": record.truncated,
        "final_particle_count": final.particle_count,
        "largest": final.largest,
        "hits": record.hits_as_json_dict(),
        "final_state": json.loads(final.to_json(record.t_end)),
    }
    _dump_json(out, config.out_dir, "simulate.json")
    if config.out_dir and record.series_rows is not None:
        path = Path(config.out_dir) / "series.csv"
        with open(path, "w") as fh:
            fh.write(record.series_header + "\n")
            for row in record.series_rows:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
    if config.out_dir and events is not None:
        with open(Path(config.out_dir) / "events.csv", "w") as fh:
            fh.write("event_index,t,m,n\n")
            for i, e in enumerate(events):
                fh.write(f"{i},{e.time!r},{e.m},{e.n}\n")
    return 0


def _cmd_ensemble(config):
    summary = harness.run_ensemble(config)
    sys.stdout.write(json.dumps(summary.to_json_dict(), sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_ode(config):
    cfg = smoluchowski.OdeConfig(
        n_max=config.ode_n_max,
        mode=config.ode_mode,
        rel_tol=config.ode_rel_tol,
        abs_tol=config.ode_abs_tol,
        t_end=config.ode_t_end,
    )
    init = {1: 1.0}
    if config.init_profile is not None:
        N = sum(s * c for s, c in config.init_profile.items())
        init = {s: c / N for s, c in config.init_profile.items()}
    n_eval = 21
    t_eval = [config.ode_t_end * i / (n_eval - 1) for i in range(n_eval)]
    result = smoluchowski.integrate(cfg, config.kernel, init, t_eval=t_eval)
    out = {
        "t_gel_estimate": result.t_gel,
        "max_ledger_drift": result.max_ledger_drift,
        "n_steps": result.n_steps,
        "n_rejected": result.n_rejected,
        "final_sol_mass": result.states[-1].sol_mass,
        "final_g_inf": result.states[-1].g_inf,
        "final_flux_out": result.states[-1].flux_out,
    }
    _dump_json(out, config.out_dir, "ode.json")
    if config.out_dir:
        smoluchowski.write_csv(
            result, Path(config.out_dir) / "ode.csv", n_report=config.n_report
        )
    return 0


def _cmd_bounds(config):
    report = bounds_mod.bounds_report(config.bounds_params)
    _dump_json(report, config.out_dir, "bounds.json")
    return 0


def _cmd_oracle(config):
    chain = oracle.build_chain(config.oracle_n, config.kernel)
    start = tuple(
        s
        for s, c in sorted(config.initial_counts(config.oracle_n).items(), reverse=True)
        for _ in range(c)
    )
    out = {
        "N": config.oracle_n,
        "kernel": config.kernel.label(),
        "states": len(chain.states),
        "expected_tau_tilde": oracle.expected_hitting_time(chain, start, oracle.absorbed),
        "expected_sigma": oracle.expected_hitting_time(
            chain, start, oracle.largest_target((config.oracle_n + 1) // 2)
        ),
    }
    if config.oracle_include_states:
        out["state_table"] = [
            {"partition": list(part), "exit_rate": chain.exit_rate(i)}
            for i, part in enumerate(chain.states)
        ]
    _dump_json(out, config.out_dir, "oracle.json")
    return 0


def _cmd_report(config):
    if not config.out_dir:
        raise ConfigError("report mode needs out.dir (location of summary.json)")
    summary_path = Path(config.out_dir) / "summary.json"
    if not summary_path.exists():
        raise ConfigError(f"no summary.json under {config.out_dir}")
    fits = harness.emit_report(
        summary_path, config.out_dir, config.report_bound_kind, config.bounds_params
    )
    sys.stdout.write(json.dumps(fits, sort_keys=True, indent=2) + "\n")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "ensemble": _cmd_ensemble,
    "ode": _cmd_ode,
    "bounds": _cmd_bounds,
    "oracle": _cmd_oracle,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"mode": args.command}
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.out is not None:
        overrides["out.dir"] = args.out
    try:
        config = load_experiment(args.config, overrides)
        return _COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
