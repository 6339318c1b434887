"""Stopping-time detectors and time-series sampling.

Stopping times measured on a trajectory (all are first-hitting times of
monotone conditions, so checking after each event is exhaustive):

  Tau(b, c, delta)    mass fraction in clusters of size >= ceil(c N^b)
                      reaches delta
  Tk(k, delta)        same with a fixed size threshold k
  ThatA(A, delta)     Tk with k tied to A log N / log log N (see ``that_a``)
  Sigma               some cluster reaches size >= ceil(N/2)
  TauTilde            a single cluster holds all the mass
  SigmaLadder         mass_tail(r) >= delta_r for all r <= level, per level
  Tpr(p, r, A)        weighted tail moment N^{-1} sum_{n>=r} n^p L_n >= A

Hit times are recorded as absolute trajectory times; a time of 0 is valid
(the infimum includes t = 0, e.g. when the initial state already satisfies
the condition).  Censored detectors report the trajectory end time instead
of a fictitious infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _core
from .state import ClusterState


@dataclass(frozen=True)
class StoppingTimeSpec:
    """One stopping-time definition; resolve() binds it to a system size N."""

    kind: str
    params: Tuple[float, ...] = ()

    def __post_init__(self):
        valid = {"Tau", "Tk", "ThatA", "Sigma", "TauTilde", "SigmaLadder", "Tpr"}
        if self.kind not in valid:
            raise ValueError(f"unknown stopping time kind {self.kind!r}")

    def label(self) -> str:
        k = self.kind
        p = self.params
        if k == "Tau":
            return f"Tau(b={p[0]!r},c={p[1]!r},delta={p[2]!r})"
        if k == "Tk":
            return f"Tk(k={int(p[0])},delta={p[1]!r})"
        if k == "ThatA":
            return f"ThatA(A={p[0]!r},delta={p[1]!r})"
        if k == "Sigma":
            return "Sigma"
        if k == "TauTilde":
            return "TauTilde"
        if k == "Tpr":
            return f"Tpr(p={p[0]!r},r={int(p[1])},A={p[2]!r})"
        return f"SigmaLadder(levels={len(p)})"

    def resolve(self, N: int) -> List[Tuple[str, int, int, float, float]]:
        """Expand into core detector rows (label, kind_code, thresh, level, p).

        SigmaLadder expands into one row per level; every other spec is a
        single row.
        """
        k = self.kind
        p = self.params
        if k == "Tau":
            b, c, delta = p
            _check_delta(delta)
            thresh = max(1, math.ceil(c * N**b))
            return [(self.label(), _core.ST_MASS_TAIL, thresh, delta * N, 1.0)]
        if k == "Tk":
            kk, delta = int(p[0]), p[1]
            _check_delta(delta)
            if kk < 1:
                raise ValueError("Tk requires k >= 1")
            return [(self.label(), _core.ST_MASS_TAIL, kk, delta * N, 1.0)]
        if k == "ThatA":
            A, delta = p
            _check_delta(delta)
            kk = that_a_threshold(A, N)
            return [(self.label(), _core.ST_MASS_TAIL, kk, delta * N, 1.0)]
        if k == "Sigma":
            # threshold ceil(N/2); odd N rounded up
            return [("Sigma", _core.ST_LARGEST, (N + 1) // 2, 0.0, 1.0)]
        if k == "TauTilde":
            return [("TauTilde", _core.ST_ABSORBED, N, 0.0, 1.0)]
        if k == "Tpr":
            pp, r, A = p[0], int(p[1]), p[2]
            if pp < 1 or r < 1 or A <= 0:
                raise ValueError("Tpr requires p >= 1, r >= 1, A > 0")
            return [(self.label(), _core.ST_MOMENT_TAIL, r, A * N, pp)]
        # SigmaLadder: level l hits when all thresholds r = 1..l hold; since
        # tails only grow, that is the max of the per-level hit times, taken
        # in the wrapper after the run.
        rows = []
        for lvl, delta in enumerate(p, start=1):
            _check_delta(delta)
            rows.append(
                (f"SigmaLadder(level={lvl},delta={delta!r})",
                 _core.ST_MASS_TAIL, lvl, delta * N, 1.0)
            )
        return rows


def _check_delta(delta: float):
    if not 0.0 < delta <= 1.0:
        raise ValueError("threshold delta must lie in (0, 1]")


def that_a_threshold(A: float, N: int) -> int:
    """Size threshold for the instantaneous-gelation stopping time.

    ceil(A ln N / ln ln N), clamped to at least 2: the unclamped value
    degenerates to 1 for any desk-scale N (it only exceeds 1 when
    ln N / ln ln N > 1/A), and a threshold of 1 is hit at t = 0 by the
    whole population.  Clamping keeps the detector meaningful and is
    conservative: a larger threshold can only delay the hit.  Natural
    logarithms; requires N >= 16 so that ln ln N > 1.
    """
    if A <= 0:
        raise ValueError("A must be positive")
    if N < 16:
        raise ValueError("threshold undefined for N < 16 (ln ln N <= 1)")
    return max(2, math.ceil(A * math.log(N) / math.log(math.log(N))))


def tau(b: float, c: float, delta: float) -> StoppingTimeSpec:
    _check_delta(delta)
    if c <= 0:
        raise ValueError("tau needs c > 0")
    return StoppingTimeSpec("Tau", (float(b), float(c), float(delta)))


def tk(k: int, delta: float) -> StoppingTimeSpec:
    _check_delta(delta)
    if k < 1:
        raise ValueError("Tk requires k >= 1")
    return StoppingTimeSpec("Tk", (float(k), float(delta)))


def that_a(A: float, delta: float) -> StoppingTimeSpec:
    _check_delta(delta)
    if A <= 0:
        raise ValueError("A must be positive")
    return StoppingTimeSpec("ThatA", (float(A), float(delta)))


def sigma() -> StoppingTimeSpec:
    return StoppingTimeSpec("Sigma")


def tau_tilde() -> StoppingTimeSpec:
    return StoppingTimeSpec("TauTilde")


def sigma_ladder(deltas: Sequence[float]) -> StoppingTimeSpec:
    deltas = tuple(float(d) for d in deltas)
    if not deltas or deltas[0] != 1.0:
        raise ValueError("ladder must start at delta_1 = 1")
    if any(b > a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("ladder deltas must be nonincreasing")
    return StoppingTimeSpec("SigmaLadder", deltas)


def tpr(p: float, r: int, threshold: float) -> StoppingTimeSpec:
    if p < 1 or r < 1 or threshold <= 0:
        raise ValueError("Tpr requires p >= 1, r >= 1, A > 0")
    return StoppingTimeSpec("Tpr", (float(p), float(r), float(threshold)))


def ladder_schedule(k: int, s: float) -> Tuple[float, ...]:
    """Geometric ladder delta_l = k^{-s(l-1)} for l = 1..k.

    Requires k >= 2, s > 0 and 2 k^{-s} <= 1 so the second rung is at
    most 1/2.
    """
    if k < 2:
        raise ValueError("ladder needs k >= 2")
    if s <= 0:
        raise ValueError("ladder needs s > 0")
    if 2.0 * k**-s > 1.0:
        raise ValueError(f"ladder constraint violated: 2*{k}^-{s} > 1")
    return tuple(float(k) ** (-s * (l - 1)) for l in range(1, k + 1))


def largest_cluster(state: ClusterState) -> int:
    """Largest size with a nonzero count."""
    return state.largest


def check_after_event(spec: StoppingTimeSpec, state: ClusterState, t: float) -> Optional[float]:
    """Return t if the stopping condition holds in ``state``, else None.

    Object-path detector used by tests and small-scale runs; the trajectory
    loop uses equivalent incremental accumulators.  For SigmaLadder the
    condition checked is the full ladder (all levels simultaneously).
    """
    rows = spec.resolve(state.N)
    for _, kind, thresh, level, p in rows:
        if kind == _core.ST_MASS_TAIL:
            ok = state.mass_tail(thresh) * state.N >= level
        elif kind == _core.ST_MOMENT_TAIL:
            ok = state.moment_tail(p, thresh) * state.N >= level
        elif kind == _core.ST_LARGEST:
            ok = state.largest >= thresh
        else:
            ok = state.particle_count == 1
        if not ok:
            return None
    return t


@dataclass
class SeriesConfig:
    """Event-stride sampling of (t, particle count, largest, tails, moments)."""

    stride: int = 0  # 0 disables; harness default is max(1, N // 1000)
    mass_tail_ks: Tuple[int, ...] = ()
    moments: Tuple[Tuple[float, int], ...] = ()  # (p, r) pairs

    def header(self) -> str:
        cols = ["t", "particle_count", "largest"]
        cols += [f"mass_tail_k{k}" for k in self.mass_tail_ks]
        cols += [f"moment_p{p:g}_r{r}" for p, r in self.moments]
        return ",".join(cols)


@dataclass
class ObservableSet:
    """Everything a trajectory should measure."""

    stopping_times: Tuple[StoppingTimeSpec, ...] = ()
    series: Optional[SeriesConfig] = None
    checkpoints: Tuple[float, ...] = ()
    checkpoint_cutoff: int = 0  # sizes >= cutoff count as gel (0: everything is sol)
    checkpoint_n_report: int = 0


@dataclass
class Snapshot:
    """State digest at a fixed wall-clock checkpoint."""

    t: float
    particle_count: int
    largest: int
    sol_mass: float  # mass fraction in clusters below the gel cutoff
    counts_head: np.ndarray  # L_1 .. L_{n_report}


@dataclass
class ObservableRecord:
    """Per-trajectory measurement results."""

    hit_times: Dict[str, Optional[float]] = field(default_factory=dict)
    censored: Dict[str, bool] = field(default_factory=dict)
    t_end: float = 0.0
    n_events: int = 0
    truncated: bool = False
    series_header: Optional[str] = None
    series_rows: Optional[np.ndarray] = None
    snapshots: List[Snapshot] = field(default_factory=list)

    def hits_as_json_dict(self) -> dict:
        out = {}
        for label, t in sorted(self.hit_times.items()):
            if t is None:
                out[label] = {"hit": False, "t_end": self.t_end}
            else:
                out[label] = {"hit": True, "time": t}
        return out
