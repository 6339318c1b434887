"""Exact small-N analysis of the coagulation Markov chain.

States are integer partitions of N; the chain moves from a partition to
the one obtained by merging two parts.  Rates follow the generator
directly (enumerated pair by pair, independently of the simulator's
factorised sampler), which makes this module the ground truth that the
Monte Carlo engine is tested against.

The chain is a DAG in the particle count (each jump merges exactly two
clusters), so expected hitting times come from one backward substitution
pass, with no linear solver.  Transient marginals use uniformization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from .kernel import KernelSpec, evaluate
from .state import ClusterState

Partition = Tuple[int, ...]  # sizes in nonincreasing order

MAX_ORACLE_N = 30


def partition_count(N: int) -> int:
    """p(N), the number of integer partitions."""
    p = [1] + [0] * N
    for part in range(1, N + 1):
        for total in range(part, N + 1):
            p[total] += p[total - part]
    return p[N]


def enumerate_partitions(N: int) -> List[Partition]:
    """All partitions of N in nonincreasing part order."""
    out: List[Partition] = []

    def rec(remaining: int, cap: int, acc: List[int]):
        if remaining == 0:
            out.append(tuple(acc))
            return
        for part in range(min(cap, remaining), 0, -1):
            acc.append(part)
            rec(remaining - part, part, acc)
            acc.pop()

    rec(N, N, [])
    return out


def partition_to_counts(part: Partition) -> Dict[int, int]:
    counts: Dict[int, int] = {}
    for s in part:
        counts[s] = counts.get(s, 0) + 1
    return counts


def state_to_partition(state: ClusterState) -> Partition:
    sizes: List[int] = []
    for s in sorted(state.counts, reverse=True):
        sizes.extend([s] * state.counts[s])
    return tuple(sizes)


def merge_partition(part: Partition, m: int, n: int) -> Partition:
    """The partition after one (m, n) coagulation."""
    rest = list(part)
    rest.remove(m)
    rest.remove(n)
    rest.append(m + n)
    rest.sort(reverse=True)
    return tuple(rest)


@dataclass
class PartitionChain:
    """Rate-labelled transition graph over the partitions of N."""

    N: int
    spec: KernelSpec
    states: List[Partition]
    index: Dict[Partition, int]
    transitions: List[List[Tuple[int, float]]]  # per state: (target, rate)

    @property
    def absorbing_index(self) -> int:
        return self.index[(self.N,)]

    def exit_rate(self, i: int) -> float:
        return sum(r for _, r in self.transitions[i])


def jump_rates(counts: Dict[int, int], N: int, spec: KernelSpec) -> List[Tuple[int, int, float]]:
    """Unordered-pair jump rates from a configuration, straight from the
    generator: a(m,n) L_m L_n / N off the diagonal, a(n,n) L_n (L_n-1) / (2N)
    on it."""
    sizes = sorted(counts)
    out = []
    for i, m in enumerate(sizes):
        lm = counts[m]
        if lm >= 2:
            r = evaluate(spec, m, m) * lm * (lm - 1) / (2.0 * N)
            out.append((m, m, r))
        for n in sizes[i + 1 :]:
            r = evaluate(spec, m, n) * lm * counts[n] / N
            out.append((m, n, r))
    return out


def build_chain(N: int, spec: KernelSpec) -> PartitionChain:
    """Complete transition graph; refuses N beyond the exact-analysis range."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > MAX_ORACLE_N:
        raise ValueError(
            f"N={N} too large for exact analysis: p({N}) = {partition_count(N)} states"
        )
    states = enumerate_partitions(N)
    index = {p: i for i, p in enumerate(states)}
    transitions: List[List[Tuple[int, float]]] = []
    for part in states:
        counts = partition_to_counts(part)
        rows = []
        for m, n, r in jump_rates(counts, N, spec):
            rows.append((index[merge_partition(part, m, n)], r))
        transitions.append(rows)
    return PartitionChain(N, spec, states, index, transitions)


def _start_index(chain: PartitionChain, start) -> int:
    if isinstance(start, ClusterState):
        part = state_to_partition(start)
    else:
        part = tuple(sorted(start, reverse=True))
    if part not in chain.index:
        raise ValueError(f"start {part} is not a partition of {chain.N}")
    return chain.index[part]


def expected_hitting_time(
    chain: PartitionChain,
    start,
    target: Callable[[Partition], bool],
) -> float:
    """E[first time the trajectory from ``start`` satisfies ``target``].

    Solved by backward substitution in particle-count order: h(x) = 0 on
    the target set, else h(x) = 1/R(x) + sum_y P(x -> y) h(y).
    """
    order = sorted(range(len(chain.states)), key=lambda i: len(chain.states[i]))
    h = np.zeros(len(chain.states))
    for i in order:  # ascending particle count: successors already solved
        part = chain.states[i]
        if target(part):
            h[i] = 0.0
            continue
        rate = chain.exit_rate(i)
        if rate <= 0.0:
            raise ValueError(f"target unreachable from absorbing state {part}")
        h[i] = (1.0 + sum(r * h[j] for j, r in chain.transitions[i])) / rate
    return float(h[_start_index(chain, start)])


def absorbed(part: Partition) -> bool:
    """Target predicate for the complete-coagulation time."""
    return len(part) == 1


def mass_tail_target(k: int, delta: float) -> Callable[[Partition], bool]:
    def pred(part: Partition) -> bool:
        N = sum(part)
        return sum(s for s in part if s >= k) >= delta * N

    return pred


def largest_target(threshold: int) -> Callable[[Partition], bool]:
    def pred(part: Partition) -> bool:
        return part[0] >= threshold

    return pred


def marginal_at_time(chain: PartitionChain, start, t: float) -> np.ndarray:
    """Transient distribution over partitions at time t via uniformization."""
    if chain.N > 20:
        raise ValueError("marginal_at_time limited to N <= 20")
    if t < 0:
        raise ValueError("t must be >= 0")
    n = len(chain.states)
    p0 = np.zeros(n)
    p0[_start_index(chain, start)] = 1.0
    if t == 0.0:
        return p0
    lam = max(chain.exit_rate(i) for i in range(n))
    if lam <= 0.0:
        return p0
    # uniformized one-step matrix (dense; p(30) is still tiny)
    P = np.zeros((n, n))
    for i in range(n):
        out = chain.exit_rate(i)
        P[i, i] = 1.0 - out / lam
        for j, r in chain.transitions[i]:
            P[i, j] += r / lam
    # Poisson-weighted series, truncated when the remaining tail < 1e-12
    result = np.zeros(n)
    v = p0.copy()
    log_term = -lam * t  # log of e^{-lam t} (lam t)^k / k!
    covered = 0.0
    k = 0
    while covered < 1.0 - 1e-12:
        w = math.exp(log_term)
        result += w * v
        covered += w
        k += 1
        log_term += math.log(lam * t) - math.log(k)
        v = v @ P
        if k > 1000 + 100 * lam * t:  # hard stop; unreachable in practice
            break
    return result / covered  # renormalise the truncated series


def pair_distribution(state: ClusterState, spec: KernelSpec) -> Dict[Tuple[int, int], float]:
    """Normalised one-step law over unordered merging pairs {m, n}."""
    rates = jump_rates(state.counts, state.N, spec)
    total = sum(r for _, _, r in rates)
    if total <= 0:
        raise ValueError("absorbed state has no one-step law")
    return {(m, n): r / total for m, n, r in rates}
