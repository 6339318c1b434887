"""Exact stochastic simulation of the coagulation jump process.

Gillespie direct method: the waiting time is Exponential(R) with R the
exact total jump rate, and the merging pair is drawn from factorised
per-family marginals with a rejection step that corrects the diagonal
(L_n versus L_n - 1) exactly.  No leaping or other approximation: the
realized law is the generator's.

Replica streams come from a counter-based Philox generator keyed by
(master seed, grid index, replica index) through numpy's SeedSequence,
so ensembles are reproducible under any parallel schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import _core
from .kernel import KernelSpec, evaluate
from .observables import ObservableRecord, ObservableSet, Snapshot
from .state import ClusterState


class AbsorbedStateError(RuntimeError):
    """Raised when an event is requested from a fully coagulated state."""


class RandomStream:
    """A Philox4x32-10 uniform stream with an explicit (seedable) key."""

    __slots__ = ("rngs",)

    def __init__(self, key0: int, key1: int):
        self.rngs = np.zeros(6, np.uint64)
        self.rngs[0] = np.uint64(key0 & 0xFFFFFFFF)
        self.rngs[1] = np.uint64(key1 & 0xFFFFFFFF)

    @classmethod
    def from_entropy(cls, *entropy: int) -> "RandomStream":
        words = np.random.SeedSequence(list(entropy)).generate_state(2, np.uint32)
        return cls(int(words[0]), int(words[1]))

    def uniform(self) -> float:
        """Uniform on the open interval (0, 1)."""
        return float(_core._next_uniform(self.rngs))

    def exponential(self, rate: float) -> float:
        return -math.log(self.uniform()) / rate


@dataclass(frozen=True)
class EventRecord:
    time: float
    m: int
    n: int
    new_size: int
    pre_particle_count: int

    def __post_init__(self):
        if self.new_size != self.m + self.n:
            raise ValueError("merged size must equal m + n")


@dataclass(frozen=True)
class RateAccount:
    """Total jump rate with its per-family aggregate decomposition."""

    total_rate: float
    weight_total: float = 0.0
    diag_total: float = 0.0


@dataclass(frozen=True)
class StopCondition:
    """First satisfied condition ends the run; absorption always does."""

    t_max: float = math.inf
    max_events: Optional[int] = None
    all_hits: bool = False


def total_rate(state: ClusterState, spec: KernelSpec) -> float:
    """Exact total jump rate R(L) from the maintained aggregates.

    R = (1/2N) sum_{m,n} a(m,n) (L_m L_n - 1(m=n) L_m); zero iff a single
    cluster remains.
    """
    if state.kernel is None or state.kernel is not spec:
        state.attach_kernel(spec)
    return rate_account(state, spec).total_rate


def rate_account(state: ClusterState, spec: KernelSpec) -> RateAccount:
    if state.kernel is None or state.kernel is not spec:
        state.attach_kernel(spec)
    code = spec.family_code
    wtot = float(_core.fen_prefix(state.wtree, state.N)) if state.wtree is not None else 0.0
    lsdot = 0.0
    diag = 0.0
    if code == _core.FAMILY_TABLE:
        for s, c in state.counts.items():
            lsdot += c * state.stab[s]
            diag += spec.table[s, s] * c
    r = _core.total_rate_from_account(
        code, spec.core_param, state.N, state.particle_count, wtot, state.vacc, lsdot, diag
    )
    return RateAccount(float(r), wtot, diag)


def total_rate_direct(state: ClusterState, spec: KernelSpec) -> float:
    """O(K^2) evaluation straight from the generator; reference for tests."""
    sizes = sorted(state.counts)
    r = 0.0
    for i, m in enumerate(sizes):
        lm = state.counts[m]
        if lm >= 2:
            r += evaluate(spec, m, m) * lm * (lm - 1) / (2.0 * state.N)
        for n in sizes[i + 1 :]:
            r += evaluate(spec, m, n) * lm * state.counts[n] / state.N
    return r


def sample_event(
    state: ClusterState, spec: KernelSpec, rng: RandomStream
) -> Tuple[float, int, int]:
    """Draw (wait, m, n) for the next coagulation without applying it."""
    R = total_rate(state, spec)
    if R <= 0.0:
        raise AbsorbedStateError("no further coagulation is possible")
    wait = rng.exponential(R)
    wtree = state.wtree if state.wtree is not None else _EMPTY_F
    stab = state.stab if state.stab is not None else _EMPTY_F1
    m, n = _core.draw_pair(
        state.counts_arr,
        state.particle_count,
        state.N,
        state.largest,
        spec.family_code,
        spec.core_param,
        spec.core_table,
        stab,
        state.count_tree,
        state.mass_tree,
        wtree,
        state.topbit,
        rng.rngs,
    )
    if m < 1:
        raise AbsorbedStateError("no further coagulation is possible")
    return wait, int(m), int(n)


_EMPTY_F = np.zeros(1, np.float64)
_EMPTY_F1 = np.zeros(1, np.float64)
_EMPTY_I = np.empty(0, np.int64)
_EMPTY_F0 = np.empty(0, np.float64)


def run_trajectory(
    init: ClusterState,
    spec: KernelSpec,
    stop: StopCondition,
    rng: RandomStream,
    observers: Optional[ObservableSet] = None,
    collect_events: bool = False,
) -> Tuple[ClusterState, ObservableRecord, Optional[List[EventRecord]]]:
    """Simulate from ``init`` (mutated in place and returned) to the stop.

    Observers are evaluated after every event; since the state is
    piecewise constant between events this is exhaustive.  The run ends at
    the first satisfied stop condition, at absorption, or when the event
    budget runs out (reported via ``record.truncated``).
    """
    obs = observers or ObservableSet()
    N = init.N
    K0 = init.particle_count

    rows = []
    for st_spec in obs.stopping_times:
        rows.extend(st_spec.resolve(N))
    labels = [r[0] for r in rows]
    st_kind = np.array([r[1] for r in rows], np.int64)
    st_thresh = np.array([r[2] for r in rows], np.int64)
    st_level = np.array([r[3] for r in rows], np.float64)
    st_p = np.array([r[4] for r in rows], np.float64)
    hit_times = np.empty(len(rows), np.float64)

    series = obs.series
    stride = series.stride if series else 0
    if stride:
        n_rows = (K0 - 1) // stride + 2
        ser_ks = np.array(series.mass_tail_ks, np.int64)
        ser_mp = np.array([p for p, _ in series.moments], np.float64)
        ser_mr = np.array([r for _, r in series.moments], np.int64)
        ser_t = np.zeros(n_rows)
        ser_K = np.zeros(n_rows, np.int64)
        ser_largest = np.zeros(n_rows, np.int64)
        ser_tails = np.zeros((n_rows, len(ser_ks)))
        ser_moms = np.zeros((n_rows, len(ser_mp)))
    else:
        ser_ks, ser_mp, ser_mr = _EMPTY_I, _EMPTY_F0, _EMPTY_I
        ser_t = _EMPTY_F0
        ser_K = ser_largest = _EMPTY_I
        ser_tails = np.zeros((0, 0))
        ser_moms = np.zeros((0, 0))

    cps = np.asarray(sorted(obs.checkpoints), np.float64)
    if len(cps) and stop.t_max < math.inf and cps[-1] > stop.t_max:
        raise ValueError("checkpoints beyond t_max are unreachable")
    n_rep = min(obs.checkpoint_n_report, N) if len(cps) else 0
    cp_counts = np.zeros((len(cps), n_rep + 1), np.int64)
    cp_solmass = np.zeros(len(cps))
    cp_K = np.zeros(len(cps), np.int64)
    cp_largest = np.zeros(len(cps), np.int64)

    if collect_events:
        ev_t = np.zeros(K0 - 1 if K0 > 1 else 1)
        ev_m = np.zeros(K0 - 1 if K0 > 1 else 1, np.int64)
        ev_n = np.zeros_like(ev_m)
    else:
        ev_t, ev_m, ev_n = _EMPTY_F0, _EMPTY_I, _EMPTY_I

    max_events = stop.max_events if stop.max_events is not None else (1 << 62)

    t_end, K, largest, n_events, status, n_ser = _core.run_trajectory_core(
        init.counts_arr,
        N,
        0.0,
        spec.family_code,
        spec.core_param,
        spec.core_table,
        stop.t_max,
        max_events,
        1 if stop.all_hits else 0,
        st_kind,
        st_thresh,
        st_level,
        st_p,
        hit_times,
        stride,
        ser_ks,
        ser_mp,
        ser_mr,
        ser_t,
        ser_K,
        ser_largest,
        ser_tails,
        ser_moms,
        cps,
        obs.checkpoint_cutoff,
        n_rep,
        cp_counts,
        cp_solmass,
        cp_K,
        cp_largest,
        1 if collect_events else 0,
        ev_t,
        ev_m,
        ev_n,
        rng.rngs,
    )
    init.refresh_from_array()

    record = ObservableRecord(t_end=float(t_end), n_events=int(n_events))
    record.truncated = status == _core.STOP_EVENT_BUDGET

    # SigmaLadder level l = max of per-level hits over r <= l (tails only grow)
    running_max: dict = {}
    for label, ht in zip(labels, hit_times):
        hit = None if ht < 0 else float(ht)
        if label.startswith("SigmaLadder(level="):
            key = label.split("level=")[1]
            lvl = int(key.split(",")[0])
            prev = running_max.get(lvl - 1, 0.0)
            hit = None if (hit is None or prev is None) else max(hit, prev)
            running_max[lvl] = hit
        record.hit_times[label] = hit
        record.censored[label] = hit is None

    if stride:
        cols = [ser_t[:n_ser], ser_K[:n_ser], ser_largest[:n_ser]]
        for j in range(ser_tails.shape[1]):
            cols.append(ser_tails[:n_ser, j])
        for j in range(ser_moms.shape[1]):
            cols.append(ser_moms[:n_ser, j])
        record.series_header = series.header()
        record.series_rows = np.column_stack(cols)

    for i, tcp in enumerate(cps):
        record.snapshots.append(
            Snapshot(
                t=float(tcp),
                particle_count=int(cp_K[i]),
                largest=int(cp_largest[i]),
                sol_mass=float(cp_solmass[i]),
                counts_head=cp_counts[i].copy(),
            )
        )

    events = None
    if collect_events:
        events = [
            EventRecord(float(ev_t[i]), int(ev_m[i]), int(ev_n[i]),
                        int(ev_m[i] + ev_n[i]), K0 - i)
            for i in range(n_events)
        ]
    return init, record, events
