"""Experiment configuration: flat dotted-key files and the typed view.

File format: UTF-8 text, one ``section.key = value`` pair per line, ``#``
starts a comment, blank lines ignored.  Example::

    mode            = ensemble
    kernel.family   = product
    kernel.a        = 1.0
    run.n_grid      = 1000, 10000, 100000
    run.replicas    = 200
    run.seed        = 7
    observe.stopping_times = Tau(b=0.6667,c=0.5,delta=0.5); TauTilde
    out.dir         = results/simple_gel

Values keep their string form until a typed accessor asks for them, so
unknown keys are tolerated but typos in known keys fail loudly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import observables
from .kernel import (
    KernelSpec,
    additive_kernel,
    constant_kernel,
    load_table_csv,
    mixed_kernel,
    product_kernel,
    sum_kernel,
)
from .observables import ObservableSet, SeriesConfig, StoppingTimeSpec

MODES = ("simulate", "ensemble", "ode", "bounds", "oracle", "report")


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps this to exit code 2."""


def parse_config_text(text: str) -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def load_config_file(path) -> Dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def _get_float(pairs, key, default=None):
    if key not in pairs:
        if default is None:
            raise ConfigError(f"missing required key {key}")
        return default
    try:
        return float(pairs[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: {pairs[key]!r}") from exc


def _get_int(pairs, key, default=None):
    if key not in pairs:
        if default is None:
            raise ConfigError(f"missing required key {key}")
        return default
    try:
        return int(pairs[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer: {pairs[key]!r}") from exc


def _get_bool(pairs, key, default=False):
    if key not in pairs:
        return default
    val = pairs[key].lower()
    if val in ("true", "1", "yes", "on"):
        return True
    if val in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: not a boolean: {pairs[key]!r}")


def _get_int_list(pairs, key, default=()):
    if key not in pairs:
        return list(default)
    try:
        return [int(tok) for tok in pairs[key].replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer list: {pairs[key]!r}") from exc


def build_kernel(pairs: Dict[str, str]) -> KernelSpec:
    family = pairs.get("kernel.family")
    if family is None:
        raise ConfigError("missing required key kernel.family")
    family = family.lower()
    try:
        if family == "constant":
            return constant_kernel(_get_float(pairs, "kernel.c", 1.0))
        if family == "additive":
            return additive_kernel(_get_float(pairs, "kernel.scale", 1.0))
        if family == "product":
            return product_kernel(_get_float(pairs, "kernel.a"))
        if family == "sum":
            return sum_kernel(_get_float(pairs, "kernel.q"))
        if family == "mixed":
            return mixed_kernel(_get_float(pairs, "kernel.q"))
        if family == "table":
            path = pairs.get("kernel.table_path")
            if not path:
                raise ConfigError("table kernel needs kernel.table_path")
            return load_table_csv(path)
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError(f"invalid kernel: {exc}") from exc
    raise ConfigError(f"unknown kernel.family {family!r}")


_SPEC_RE = re.compile(r"^(\w+)\s*(?:\((.*)\))?$")


def parse_stopping_time(token: str) -> StoppingTimeSpec:
    """Parse one canonical spec string, e.g. ``Tk(k=12,delta=0.5)``."""
    m = _SPEC_RE.match(token.strip())
    if not m:
        raise ConfigError(f"malformed stopping time {token!r}")
    name, argstr = m.group(1), m.group(2) or ""
    args: Dict[str, str] = {}
    for part in filter(None, (p.strip() for p in argstr.split(","))):
        if "=" not in part:
            raise ConfigError(f"malformed stopping-time argument {part!r} in {token!r}")
        k, v = part.split("=", 1)
        args[k.strip()] = v.strip()
    try:
        if name == "Tau":
            return observables.tau(float(args["b"]), float(args["c"]), float(args["delta"]))
        if name == "Tk":
            return observables.tk(int(args["k"]), float(args["delta"]))
        if name == "ThatA":
            return observables.that_a(float(args["A"]), float(args["delta"]))
        if name == "Sigma":
            return observables.sigma()
        if name == "TauTilde":
            return observables.tau_tilde()
        if name == "Tpr":
            return observables.tpr(float(args["p"]), int(args["r"]), float(args["A"]))
        if name == "SigmaLadder":
            deltas = [float(x) for x in args["deltas"].split(";")]
            return observables.sigma_ladder(deltas)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid stopping time {token!r}: {exc}") from exc
    raise ConfigError(f"unknown stopping time kind {name!r}")


def parse_stopping_times(value: str) -> Tuple[StoppingTimeSpec, ...]:
    tokens = [tok for tok in (t.strip() for t in value.split(";")) if tok]
    return tuple(parse_stopping_time(tok) for tok in tokens)


@dataclass
class ExperimentConfig:
    """Typed experiment description shared by the CLI and the harness."""

    mode: str = "ensemble"
    kernel: KernelSpec = field(default_factory=lambda: constant_kernel(1.0))
    n_grid: List[int] = field(default_factory=lambda: [1000])
    replicas: int = 100
    seed: int = 0
    init_profile: Optional[Dict[int, int]] = None  # None: monodisperse
    t_max: float = math.inf
    max_events: Optional[int] = None
    stop_all_hits: bool = True
    stopping_times: Tuple[StoppingTimeSpec, ...] = ()
    series_enabled: bool = False
    series_stride: Optional[int] = None  # None: max(1, N // 1000)
    series_mass_tail_ks: Tuple[int, ...] = ()
    series_moments: Tuple[Tuple[float, int], ...] = ()
    checkpoints: Tuple[float, ...] = ()
    gel_cutoff_exponent: float = 2.0 / 3.0  # clusters >= N^b count as gel
    gel_cutoff_scale: float = 1.0
    n_report: int = 32
    events_log: bool = False
    parallelism: Optional[int] = None  # None: all available cores
    out_dir: Optional[str] = None
    # ode section
    ode_n_max: int = 256
    ode_mode: str = "classical"
    ode_rel_tol: float = 1e-8
    ode_abs_tol: float = 1e-12
    ode_t_end: float = 1.0
    # oracle section
    oracle_n: int = 8
    oracle_include_states: bool = False
    # bounds section: raw params forwarded to the bounds report
    bounds_params: Dict[str, float] = field(default_factory=dict)
    # report section
    report_bound_kind: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("run.n_grid must be strictly increasing")
        if not self.n_grid:
            raise ConfigError("run.n_grid must be nonempty")

    def observables_for(self, N: int) -> ObservableSet:
        series = None
        if self.series_enabled:
            stride = self.series_stride or max(1, N // 1000)
            series = SeriesConfig(
                stride=stride,
                mass_tail_ks=self.series_mass_tail_ks,
                moments=self.series_moments,
            )
        cutoff = 0
        if self.checkpoints:
            cutoff = max(2, math.ceil(self.gel_cutoff_scale * N**self.gel_cutoff_exponent))
        return ObservableSet(
            stopping_times=self.stopping_times,
            series=series,
            checkpoints=self.checkpoints,
            checkpoint_cutoff=cutoff,
            checkpoint_n_report=min(self.n_report, N),
        )

    def initial_counts(self, N: int) -> Dict[int, int]:
        if self.init_profile is None:
            return {1: N}
        mass = sum(s * c for s, c in self.init_profile.items())
        if mass != N:
            raise ConfigError(f"init profile mass {mass} != N={N}")
        return dict(self.init_profile)


def config_from_pairs(pairs: Dict[str, str]) -> ExperimentConfig:
    mode = pairs.get("mode", "ensemble").lower()
    kernel_spec = build_kernel(pairs) if mode != "bounds" else _kernel_or_default(pairs)

    stopping = ()
    if "observe.stopping_times" in pairs:
        stopping = parse_stopping_times(pairs["observe.stopping_times"])

    moments: List[Tuple[float, int]] = []
    if "observe.moments" in pairs:
        # "p:r" pairs separated by ';', e.g. "2:1; 2:4"
        for tok in filter(None, (t.strip() for t in pairs["observe.moments"].split(";"))):
            try:
                p_str, r_str = tok.split(":")
                moments.append((float(p_str), int(r_str)))
            except ValueError as exc:
                raise ConfigError(f"observe.moments entry {tok!r}: {exc}") from exc

    init_profile = None
    if "run.init_profile" in pairs:
        init_profile = {}
        for tok in filter(None, (t.strip() for t in pairs["run.init_profile"].split(";"))):
            try:
                s_str, c_str = tok.split(":")
                init_profile[int(s_str)] = int(c_str)
            except ValueError as exc:
                raise ConfigError(f"run.init_profile entry {tok!r}: {exc}") from exc

    checkpoints = tuple(
        float(tok)
        for tok in pairs.get("observe.checkpoints", "").replace(",", " ").split()
    )

    bounds_params = {}
    for key, val in pairs.items():
        if key.startswith("bounds."):
            try:
                bounds_params[key[len("bounds.") :]] = float(val)
            except ValueError as exc:
                raise ConfigError(f"{key}: not a number") from exc

    t_max = _get_float(pairs, "run.t_max", math.inf)
    max_events = _get_int(pairs, "run.max_events", 0) or None

    try:
        return ExperimentConfig(
            mode=mode,
            kernel=kernel_spec,
            n_grid=_get_int_list(pairs, "run.n_grid", [1000]),
            replicas=_get_int(pairs, "run.replicas", 100),
            seed=_get_int(pairs, "run.seed", 0),
            init_profile=init_profile,
            t_max=t_max,
            max_events=max_events,
            stop_all_hits=_get_bool(pairs, "run.stop_all_hits", True),
            stopping_times=stopping,
            series_enabled=_get_bool(pairs, "observe.series", False),
            series_stride=_get_int(pairs, "observe.series_stride", 0) or None,
            series_mass_tail_ks=tuple(_get_int_list(pairs, "observe.mass_tail_ks")),
            series_moments=tuple(moments),
            checkpoints=checkpoints,
            gel_cutoff_exponent=_get_float(pairs, "observe.gel_cutoff_exponent", 2.0 / 3.0),
            gel_cutoff_scale=_get_float(pairs, "observe.gel_cutoff_scale", 1.0),
            n_report=_get_int(pairs, "observe.n_report", 32),
            events_log=_get_bool(pairs, "events.log", False),
            parallelism=_get_int(pairs, "run.parallelism", 0) or None,
            out_dir=pairs.get("out.dir"),
            ode_n_max=_get_int(pairs, "ode.n_max", 256),
            ode_mode=pairs.get("ode.mode", "classical").lower(),
            ode_rel_tol=_get_float(pairs, "ode.rel_tol", 1e-8),
            ode_abs_tol=_get_float(pairs, "ode.abs_tol", 1e-12),
            ode_t_end=_get_float(pairs, "ode.t_end", 1.0),
            oracle_n=_get_int(pairs, "oracle.N", 8),
            oracle_include_states=_get_bool(pairs, "oracle.include_states", False),
            bounds_params=bounds_params,
            report_bound_kind=pairs.get("report.bound_kind"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _kernel_or_default(pairs):
    if "kernel.family" in pairs:
        return build_kernel(pairs)
    return constant_kernel(1.0)


def load_experiment(path, overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    pairs = load_config_file(path)
    if overrides:
        pairs.update(overrides)
    return config_from_pairs(pairs)
