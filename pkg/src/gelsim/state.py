"""Cluster-size configuration of the finite coagulation process.

The state tracks L_n, the number of clusters of size n, for a system of
total mass N.  Mass is conserved exactly in integer arithmetic: every
coagulation replaces two clusters of sizes m and n by one of size m + n.

Alongside the sparse ``counts`` map the state keeps Fenwick trees over the
size domain 1..N (mass, cluster counts, and an optional kernel-weight tree)
so that tail sums and weighted class selection cost O(log N).  The trees
are plain numpy arrays laid out exactly as the jitted event loop expects,
which lets the single-step sampler and the trajectory runner share one
implementation.
"""

from __future__ import annotations

import json
from typing import Dict, Iterable, Optional

import numpy as np

from . import _core
from .kernel import KernelSpec

# weight-tree rebuild cadence, mirrored from the core loop
REBUILD_INTERVAL = _core.REBUILD_INTERVAL


class ClusterState:
    """Mutable size-class configuration with total mass N.

    Owned by exactly one trajectory at a time; never share mutably.
    """

    __slots__ = (
        "N",
        "counts",
        "particle_count",
        "largest",
        "counts_arr",
        "mass_tree",
        "count_tree",
        "topbit",
        "kernel",
        "wtree",
        "vacc",
        "stab",
        "_updates",
    )

    def __init__(self, counts: Dict[int, int], N: Optional[int] = None):
        clean = {int(s): int(c) for s, c in counts.items() if c}
        if not clean:
            raise ValueError("state must contain at least one cluster")
        for s, c in clean.items():
            if s < 1 or c < 0:
                raise ValueError(f"invalid size class {s}:{c}")
        mass = sum(s * c for s, c in clean.items())
        if N is not None and N != mass:
            raise ValueError(f"declared mass {N} != actual mass {mass}")
        self.N = mass
        self.counts = clean
        self.particle_count = sum(clean.values())
        self.largest = max(clean)
        self.counts_arr = np.zeros(self.N + 1, np.int64)
        for s, c in clean.items():
            self.counts_arr[s] = c
        self._rebuild_trees()
        self.kernel = None
        self.wtree = None
        self.vacc = 0.0
        self.stab = None
        self._updates = 0

    # -- construction -------------------------------------------------------

    def _rebuild_trees(self):
        n = self.N
        self.count_tree = self.counts_arr.copy()
        self.mass_tree = self.counts_arr * np.arange(n + 1, dtype=np.int64)
        _core.fen_build(self.count_tree)
        _core.fen_build(self.mass_tree)
        self.topbit = 1 << (n.bit_length() - 1)

    def attach_kernel(self, spec: KernelSpec):
        """Bind the family-specific weight index used by the event sampler."""
        self.kernel = spec
        code = spec.family_code
        if code in (_core.FAMILY_PRODUCT, _core.FAMILY_SUM, _core.FAMILY_MIXED):
            sizes = np.arange(self.N + 1, dtype=float)
            w = sizes**spec.core_param
            w[0] = 0.0
            self.wtree = w * self.counts_arr
            if code == _core.FAMILY_PRODUCT:
                v = sizes ** (2.0 * spec.core_param)
            elif code == _core.FAMILY_MIXED:
                v = sizes ** (spec.core_param + 1.0)
            else:
                v = np.zeros_like(sizes)
            v[0] = 0.0
            self.vacc = float(np.dot(v, self.counts_arr))
            _core.fen_build(self.wtree)
        else:
            self.wtree = None
            self.vacc = 0.0
        if code == _core.FAMILY_TABLE:
            if self.largest > spec.table_max:
                raise ValueError(
                    f"state holds size {self.largest} beyond table_max={spec.table_max}"
                )
            t = spec.table
            padded = np.zeros(t.shape[0])
            upto = min(t.shape[0], self.N + 1)
            padded[:upto] = self.counts_arr[:upto]
            self.stab = t @ padded
            self.stab[0] = 0.0
        else:
            self.stab = None
        self._updates = 0
        return self

    def copy(self) -> "ClusterState":
        dup = ClusterState(dict(self.counts), self.N)
        if self.kernel is not None:
            dup.attach_kernel(self.kernel)
        return dup

    # -- the transition -----------------------------------------------------

    def apply_coagulation(self, m: int, n: int) -> "ClusterState":
        """Merge one (m, n) pair into a cluster of size m + n, in place.

        Raises RuntimeError on a precondition violation: that means the
        caller (the sampler) proposed an impossible pair.
        """
        if m < 1 or n < 1 or m + n > self.N:
            raise RuntimeError(f"impossible pair ({m},{n}) for mass {self.N}")
        if m == n:
            if self.counts.get(m, 0) < 2:
                raise RuntimeError(f"pair ({m},{m}) needs L_{m} >= 2")
        elif self.counts.get(m, 0) < 1 or self.counts.get(n, 0) < 1:
            raise RuntimeError(f"pair ({m},{n}) needs clusters of both sizes")

        mn = m + n
        for s in (m, n):
            left = self.counts[s] - 1
            if left:
                self.counts[s] = left
            else:
                del self.counts[s]
        self.counts[mn] = self.counts.get(mn, 0) + 1
        self.particle_count -= 1
        if mn > self.largest:
            self.largest = mn
        arr = self.counts_arr
        arr[m] -= 1
        arr[n] -= 1
        arr[mn] += 1
        _core.fen_add(self.count_tree, m, -1)
        _core.fen_add(self.count_tree, n, -1)
        _core.fen_add(self.count_tree, mn, 1)
        _core.fen_add(self.mass_tree, m, -m)
        _core.fen_add(self.mass_tree, n, -n)
        _core.fen_add(self.mass_tree, mn, mn)
        if self.wtree is not None:
            spec = self.kernel
            code = spec.family_code
            p1 = spec.core_param
            _core.fen_add(self.wtree, m, -_core.weight_of(code, p1, m))
            _core.fen_add(self.wtree, n, -_core.weight_of(code, p1, n))
            _core.fen_add(self.wtree, mn, _core.weight_of(code, p1, mn))
            self.vacc += (
                _core.diag_weight_of(code, p1, mn)
                - _core.diag_weight_of(code, p1, m)
                - _core.diag_weight_of(code, p1, n)
            )
            self._updates += 3
            if self._updates >= REBUILD_INTERVAL:
                self.attach_kernel(spec)
        if self.stab is not None:
            t = self.kernel.table
            if mn > self.kernel.table_max:
                raise RuntimeError(
                    f"merged size {mn} exceeds table_max={self.kernel.table_max}"
                )
            self.stab += t[:, mn] - t[:, m] - t[:, n]
        return self

    # -- observables --------------------------------------------------------

    def mass_tail(self, k: int) -> float:
        """Fraction of mass in clusters of size >= k (exact integer numerator)."""
        if k < 1:
            raise ValueError("threshold must be >= 1")
        if k > self.N:
            return 0.0
        head = int(_core.fen_prefix(self.mass_tree, k - 1))
        return (self.N - head) / self.N

    def moment_tail(self, p: float, r: int) -> float:
        """N^{-1} sum_{n >= r} n^p L_n."""
        if p < 1 or r < 1:
            raise ValueError("require p >= 1 and r >= 1")
        total = 0.0
        for s, c in self.counts.items():
            if s >= r:
                total += float(s) ** p * c
        return total / self.N

    def weight_total(self) -> float:
        """Current weight-index total (requires an attached kernel)."""
        if self.wtree is None:
            raise ValueError("no weight index attached")
        return float(_core.fen_prefix(self.wtree, self.N))

    def refresh_from_array(self):
        """Resynchronise the sparse map and trees after the core loop ran."""
        arr = self.counts_arr
        nz = np.nonzero(arr[1:])[0] + 1
        self.counts = {int(s): int(arr[s]) for s in nz}
        self.particle_count = int(arr[1:].sum())
        self.largest = int(nz[-1]) if len(nz) else 0
        self._rebuild_trees()
        if self.kernel is not None:
            self.attach_kernel(self.kernel)

    # -- serialization ------------------------------------------------------

    def to_csv_rows(self, t: float) -> Iterable[str]:
        for s in sorted(self.counts):
            yield f"{t!r},{s},{self.counts[s]}"

    def to_json(self, t: float) -> str:
        return json.dumps(
            {"t": t, "counts": {str(s): self.counts[s] for s in sorted(self.counts)}},
            sort_keys=True,
        )


def init_monodisperse(N: int) -> ClusterState:
    """All mass in size-1 clusters: L_1 = N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return ClusterState({1: N})


def init_from_profile(profile: Dict[int, int]) -> ClusterState:
    """State from an explicit size -> count map; N is the implied total mass."""
    return ClusterState(profile)
