"""Coagulation kernels a(m, n) and their analytic regime classification.

Supported families (all symmetric and strictly positive on sizes >= 1):

  constant   a(m,n) = c
  additive   a(m,n) = scale * (m + n)
  product    a(m,n) = (m n)^a
  sum        a(m,n) = m^q + n^q
  mixed      a(m,n) = m^q n + n^q m
  table      explicit symmetric matrix for sizes <= table_max

A spec is immutable after construction and safe to share across replicas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _core

FAMILIES = ("constant", "additive", "product", "sum", "mixed", "table")

_FAMILY_CODES = {
    "constant": _core.FAMILY_CONSTANT,
    "additive": _core.FAMILY_ADDITIVE,
    "product": _core.FAMILY_PRODUCT,
    "sum": _core.FAMILY_SUM,
    "mixed": _core.FAMILY_MIXED,
    "table": _core.FAMILY_TABLE,
}

_DUMMY_TABLE = np.ones((1, 1))


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A coagulation rate family plus its parameters."""

    family: str
    c: float = 1.0
    scale: float = 1.0
    a: float = 1.0
    q: float = 1.5
    table: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "constant" and not self.c > 0:
            raise ValueError("constant kernel requires c > 0")
        if self.family == "additive" and not self.scale > 0:
            raise ValueError("additive kernel requires scale > 0")
        for name in ("c", "scale", "a", "q"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"kernel parameter {name} must be finite")
        if self.family == "table":
            t = self.table
            if t is None:
                raise ValueError("table kernel requires an explicit table")
            t = np.asarray(t, dtype=float)
            if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 2:
                raise ValueError("table must be square with table_max >= 1")
            body = t[1:, 1:]
            if not np.all(body > 0):
                raise ValueError("table rates must be strictly positive")
            # asymmetric input is a user error; refuse rather than symmetrise
            if not np.array_equal(body, body.T):
                raise ValueError("table must be exactly symmetric")
            object.__setattr__(self, "table", t)
        elif self.table is not None:
            raise ValueError("table only valid for the table family")

    @property
    def table_max(self) -> int:
        if self.family != "table":
            raise ValueError("table_max only defined for the table family")
        return self.table.shape[0] - 1

    @property
    def family_code(self) -> int:
        return _FAMILY_CODES[self.family]

    @property
    def core_param(self) -> float:
        """The single scalar parameter consumed by the jitted core."""
        if self.family == "constant":
            return float(self.c)
        if self.family == "additive":
            return float(self.scale)
        if self.family == "product":
            return float(self.a)
        if self.family in ("sum", "mixed"):
            return float(self.q)
        return 0.0

    @property
    def core_table(self) -> np.ndarray:
        return self.table if self.family == "table" else _DUMMY_TABLE

    def label(self) -> str:
        if self.family == "constant":
            return f"constant(c={self.c!r})"
        if self.family == "additive":
            return f"additive(scale={self.scale!r})"
        if self.family == "product":
            return f"product(a={self.a!r})"
        if self.family == "sum":
            return f"sum(q={self.q!r})"
        if self.family == "mixed":
            return f"mixed(q={self.q!r})"
        return f"table(max={self.table_max})"


def constant_kernel(c: float = 1.0) -> KernelSpec:
    return KernelSpec("constant", c=c)


def additive_kernel(scale: float = 1.0) -> KernelSpec:
    return KernelSpec("additive", scale=scale)


def product_kernel(a: float) -> KernelSpec:
    return KernelSpec("product", a=a)


def sum_kernel(q: float) -> KernelSpec:
    return KernelSpec("sum", q=q)


def mixed_kernel(q: float) -> KernelSpec:
    return KernelSpec("mixed", q=q)


def table_kernel(table) -> KernelSpec:
    return KernelSpec("table", table=np.asarray(table, dtype=float))


def load_table_csv(path) -> KernelSpec:
    """Load a dense rate table from CSV, row i / column j holding a(i, j)."""
    raw = np.loadtxt(path, delimiter=",", ndmin=2)
    t = np.zeros((raw.shape[0] + 1, raw.shape[1] + 1))
    t[1:, 1:] = raw
    return table_kernel(t)


def evaluate(spec: KernelSpec, m: int, n: int) -> float:
    """The rate a(m, n) for one (unordered) pair of sizes."""
    if m < 1 or n < 1:
        raise ValueError("cluster sizes must be >= 1")
    if spec.family == "table":
        if m > spec.table_max or n > spec.table_max:
            raise ValueError(
                f"size out of table range: ({m},{n}) with table_max={spec.table_max}"
            )
        return float(spec.table[m, n])
    return float(
        _core.alpha_eval(spec.family_code, spec.core_param, m, n, spec.core_table)
    )


@dataclass(frozen=True)
class LimitRatio:
    """Closed form of abar(n) = lim_m a(m, n)/m, when the limit exists.

    Represented as abar(n) = coefficient * n^exponent.  The gel interaction
    coefficient beta_inf(n) = abar(n)/n follows directly.
    """

    coefficient: float
    exponent: float

    def __call__(self, n) -> float:
        return self.coefficient * np.asarray(n, dtype=float) ** self.exponent

    def beta_inf(self, n) -> float:
        """Sol-gel interaction rate abar(n)/n."""
        return self.coefficient * np.asarray(n, dtype=float) ** (self.exponent - 1.0)

    def describe(self) -> str:
        if self.coefficient == 0.0:
            return "0"
        if self.exponent == 0.0:
            return f"{self.coefficient:g}"
        if self.coefficient == 1.0:
            return f"n^{self.exponent:g}"
        return f"{self.coefficient:g}*n^{self.exponent:g}"


@dataclass(frozen=True)
class HypothesisReport:
    """Which gelation-theorem hypotheses a kernel family satisfies.

    ``simple_gel`` is an exponent a > 1/2 with a(m,n) >= (mn)^a,
    ``instantaneous_gel`` a q in (1,2) with a(m,n) >= m^q + n^q, and
    ``complete_gel`` a q > 1 with a(m,n) >= m^q n + n^q m, each None when
    the family does not analytically dominate the required shape.
    """

    linear_growth: bool
    simple_gel: Optional[float]
    instantaneous_gel: Optional[float]
    complete_gel: Optional[float]
    limit_ratio: Optional[LimitRatio]

    def to_dict(self) -> dict:
        return {
            "linear_growth": self.linear_growth,
            "simple_gel": self.simple_gel,
            "instantaneous_gel": self.instantaneous_gel,
            "complete_gel": self.complete_gel,
            "limit_ratio": None if self.limit_ratio is None else self.limit_ratio.describe(),
        }


def hypothesis_check(spec: KernelSpec) -> HypothesisReport:
    """Classify the kernel analytically (no numeric search over grids).

    The classification is conservative: a regime is reported only when the
    family provably dominates the theorem's rate shape for all sizes.
    """
    fam = spec.family
    if fam == "constant":
        return HypothesisReport(True, None, None, None, LimitRatio(0.0, 0.0))
    if fam == "additive":
        # (m+n)/m -> 1, so abar(n) = scale
        return HypothesisReport(True, None, None, None, LimitRatio(spec.scale, 0.0))
    if fam == "product":
        a = spec.a
        linear = a <= 0.5
        simple = a if a > 0.5 else None
        if a < 1.0:
            lr = LimitRatio(0.0, 0.0)  # n^a m^{a-1} -> 0
        elif a == 1.0:
            lr = LimitRatio(1.0, 1.0)  # abar(n) = n
        else:
            lr = None  # diverges
        return HypothesisReport(linear, simple, None, None, lr)
    if fam == "sum":
        q = spec.q
        linear = q <= 1.0
        # m^q + n^q >= 2 (mn)^{q/2}
        simple = q / 2.0 if q > 1.0 else None
        inst = q if 1.0 < q < 2.0 else None
        if q < 1.0:
            lr = LimitRatio(0.0, 0.0)
        elif q == 1.0:
            lr = LimitRatio(1.0, 0.0)  # (m+n)/m -> 1
        else:
            lr = None  # m^{q-1} diverges
        return HypothesisReport(linear, simple, inst, None, lr)
    if fam == "mixed":
        q = spec.q
        linear = q <= 0.0
        # m^q n + n^q m >= 2 (mn)^{(q+1)/2}
        simple = (q + 1.0) / 2.0 if q > 0.0 else None
        inst = q if 1.0 < q < 2.0 else None
        comp = q if q > 1.0 else None
        if q < 1.0:
            lr = LimitRatio(1.0, q)  # m^{q-1} n -> 0, n^q remains
        elif q == 1.0:
            lr = LimitRatio(2.0, 1.0)  # a = 2mn
        else:
            lr = None
        return HypothesisReport(linear, simple, inst, comp, lr)
    # table: finite range, sup over it is finite; no large-m behaviour exists
    return HypothesisReport(True, None, None, None, None)
