"""Closed-form constants and bound shapes from the gelation theorems.

Three groups:

  * the simple-gelation constants C(c, a, beta), C'(c, a, beta) and their
    (a, b, delta) parametrisation C_0, C_0';
  * the instantaneous-gelation exponents s_bar(q, A) and
    eta_bar = min((q-1)/4, s_bar + q - 2) with the admissibility window
    A < q / ((2-q)(6-q));
  * bound shapes versus N for fitting empirical means against theory
    (free multiplicative constants are reported as fitted scales by the
    harness, never invented here).

The exponent notation x^- in the simple-gelation constants is read as the
negative-part convention x^- = max(-x, 0) applied to a - 1, which makes
2^{(a-1)^-} >= 1 for a < 1 (the enlarging direction).  The alternative
signed reading is available behind the ``negative_part`` flag for audit.
"""

from __future__ import annotations

import math
from typing import Dict, List, Sequence, Tuple


def _neg_part(x: float, convention: str) -> float:
    if convention == "magnitude":
        return max(-x, 0.0)
    if convention == "signed":
        return min(x, 0.0)
    raise ValueError(f"unknown negative-part convention {convention!r}")


def jeon_constants(
    c: float, a: float, beta: float, negative_part: str = "magnitude"
) -> Tuple[float, float]:
    """The pair (C, C') controlling the simple-gelation stopping time.

        C  = (1/2) (c^2 (1-2^-beta)^2 2^-(a-1)^- 2^{-2a-1})^{1/(1+2beta)}
        C' = 2 c^-2 (1-2^-beta)^-2 2^{(a-1)^-} (1 - 2^{-(2a-1-2beta)})^-1

    Admissible for c in (0, 1], a > 1/2 and beta in (0, a - 1/2); at
    beta = a - 1/2 the last factor of C' has a pole.
    """
    if not 0.0 < c <= 1.0:
        raise ValueError("c must lie in (0, 1]")
    if not a > 0.5:
        raise ValueError("a must exceed 1/2")
    if not 0.0 < beta < a - 0.5:
        raise ValueError("beta must lie in (0, a - 1/2)")
    neg = _neg_part(a - 1.0, negative_part)
    one_m = 1.0 - 2.0**-beta
    body = c * c * one_m * one_m * 2.0**-neg * 2.0 ** (-2.0 * a - 1.0)
    C = 0.5 * body ** (1.0 / (1.0 + 2.0 * beta))
    Cp = (
        2.0
        * c**-2.0
        * one_m**-2.0
        * 2.0**neg
        / (1.0 - 2.0 ** (-(2.0 * a - 1.0 - 2.0 * beta)))
    )
    return C, Cp


def theorem13_bound(
    a: float, b: float, delta: float, negative_part: str = "magnitude"
) -> Tuple[float, float]:
    """(C_0, C_0') = (C, C')(1 - delta, a, (1/b - 1)/2).

    b must lie in (1/(2a), 1); delta in [0, 1).
    """
    if not a > 0.5:
        raise ValueError("a must exceed 1/2")
    if not 1.0 / (2.0 * a) < b < 1.0:
        raise ValueError(f"b must lie in (1/(2a), 1) = ({1/(2*a)!r}, 1)")
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must lie in [0, 1)")
    beta = (1.0 / b - 1.0) / 2.0
    return jeon_constants(1.0 - delta, a, beta, negative_part)


def sbar_etabar(q: float, A: float) -> Tuple[float, float, bool]:
    """(s_bar, eta_bar, admissible) for the instantaneous-gelation bound.

        s_bar  = (sqrt((1 + q/2)^2 + 2q/A) - 1 - q/2) / 2
        eta_bar = min((q-1)/4, s_bar + q - 2)

    admissible iff A < q / ((2-q)(6-q)); within that window s_bar > 2 - q
    and eta_bar > 0.
    """
    if not 1.0 < q < 2.0:
        raise ValueError("q must lie in (1, 2)")
    if not A > 0.0:
        raise ValueError("A must be positive")
    half_q = 1.0 + q / 2.0
    sbar = (math.sqrt(half_q * half_q + 2.0 * q / A) - half_q) / 2.0
    etabar = min((q - 1.0) / 4.0, sbar + q - 2.0)
    admissible = A < q / ((2.0 - q) * (6.0 - q))
    return sbar, etabar, admissible


BOUND_KINDS = ("Thm16", "Thm17", "Lem41")


def bound_shape(kind: str, params: Dict[str, float], N: float) -> float:
    """The N-dependent shape of a bound (free constants excluded).

    Thm16: (1-delta)^-1 (ln N)^-theta        requires theta < eta_bar(q, A)
    Thm17: (ln ln N / ln N)^{q-1}            requires q > 1, N >= 3
    Lem41: 4 delta^-1 k^{1-q}                fully explicit, N-free
    """
    if kind == "Thm16":
        q, A, theta, delta = params["q"], params["A"], params["theta"], params["delta"]
        sbar, etabar, admissible = sbar_etabar(q, A)
        if not admissible:
            raise ValueError(
                f"A={A!r} violates A < q/((2-q)(6-q)) = {q/((2-q)*(6-q))!r}"
            )
        if not theta < etabar:
            raise ValueError(f"theta={theta!r} violates theta < eta_bar={etabar!r}")
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        return (1.0 - delta) ** -1.0 * math.log(N) ** -theta
    if kind == "Thm17":
        q = params["q"]
        if not q > 1.0:
            raise ValueError("Thm17 requires q > 1")
        if N < 3:
            raise ValueError("Thm17 shape needs N >= 3 (ln ln N > 0)")
        return (math.log(math.log(N)) / math.log(N)) ** (q - 1.0)
    if kind == "Lem41":
        q, delta, k = params["q"], params["delta"], params["k"]
        if k < 1:
            raise ValueError("Lem41 requires k >= 1")
        if not 0.0 < delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        return 4.0 / delta * k ** (1.0 - q)
    raise ValueError(f"unknown bound kind {kind!r}; choose from {BOUND_KINDS}")


def bound_curves(
    kind: str, params: Dict[str, float], N_grid: Sequence[int]
) -> List[Tuple[int, float]]:
    """Tabulate the bound shape over an N grid."""
    return [(int(N), bound_shape(kind, params, N)) for N in N_grid]


def bounds_report(params: Dict[str, float]) -> dict:
    """JSON-friendly digest of every constant the given parameters allow."""
    out: dict = {"params": dict(params)}
    if all(k in params for k in ("c", "a", "beta")):
        C, Cp = jeon_constants(params["c"], params["a"], params["beta"])
        out["jeon_C"] = C
        out["jeon_C_prime"] = Cp
    if all(k in params for k in ("a", "b", "delta")):
        C0, C0p = theorem13_bound(params["a"], params["b"], params["delta"])
        out["C0"] = C0
        out["C0_prime"] = C0p
    if all(k in params for k in ("q", "A")):
        sbar, etabar, admissible = sbar_etabar(params["q"], params["A"])
        out["sbar"] = sbar
        out["etabar"] = etabar
        out["admissible"] = admissible
    if all(k in params for k in ("q", "delta", "k")):
        out["lemma41_bound"] = bound_shape("Lem41", params, 1)
    return out
