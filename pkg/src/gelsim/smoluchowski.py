"""Truncated mean-field coagulation ODE system with gel-mass accounting.

The density vector f_1..f_{n_max} evolves by binary coagulation:

    df_n/dt = (1/2) sum_{m<n} a(m, n-m) f_m f_{n-m}  -  f_n sum_m a(n,m) f_m

Two closures for mass crossing the truncation boundary:

  classical  mass produced above n_max accumulates in ``flux_out`` and no
             longer interacts (the zero-interaction gel limit);
  flory      that mass joins the gel g_inf, which eats sol mass at rate
             beta(n, inf) g_n g_inf with beta(n, inf) = abar(n)/n, where
             abar(n) = lim_m a(m,n)/m must exist for the kernel.

The extended state (f, g_inf, flux_out) conserves total mass exactly at
the level of the vector field, so the mass ledger drifts only by the
integrator's local error.

Integration uses an embedded Cash-Karp 5(4) pair with standard error
control plus a negativity guard: a component below -1e-12 rejects the
step, anything in (-1e-12, 0) is snapped to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .kernel import KernelSpec, LimitRatio, hypothesis_check

# Cash-Karp tableau
_A = [
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
]
_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
_B4 = np.array(
    [2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4]
)
_ERR = _B5 - _B4

NEG_SNAP = 1e-12  # f_n above -this is snapped to 0; below rejects the step


class StiffnessError(RuntimeError):
    """Step size underflowed; carries the failing time."""

    def __init__(self, t: float):
        super().__init__(f"step size underflow at t={t!r}")
        self.t = t


@dataclass
class OdeConfig:
    n_max: int
    mode: str = "classical"  # or "flory"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    t_end: float = 1.0
    n_report: int = 16

    def __post_init__(self):
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")
        if self.mode not in ("classical", "flory"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class OdeState:
    t: float
    f: np.ndarray  # index 0 unused; f[1..n_max]
    g_inf: float
    flux_out: float

    @property
    def sol_mass(self) -> float:
        n = np.arange(len(self.f))
        return float(np.dot(n, self.f))

    @property
    def number(self) -> float:
        return float(self.f[1:].sum())

    def ledger_total(self) -> float:
        return self.sol_mass + self.g_inf + self.flux_out


@dataclass
class OdeResult:
    states: List[OdeState]
    t_gel: Optional[float]
    mass_curve: np.ndarray  # rows (t, sol_mass, g_inf, flux_out)
    max_ledger_drift: float
    n_steps: int
    n_rejected: int


class _Rhs:
    """Vector field over y = (f_1..f_{n_max}, g_inf, flux_out)."""

    def __init__(self, config: OdeConfig, spec: KernelSpec):
        self.config = config
        self.spec = spec
        n_max = config.n_max
        sizes = np.arange(n_max + 1, dtype=float)
        self.sizes = sizes
        fam = spec.family
        self.fam = fam
        if fam == "table":
            if spec.table_max < n_max:
                raise ValueError("table smaller than ODE truncation size")
            self.A = spec.table[: n_max + 1, : n_max + 1]
        else:
            self.A = None
        # separable-gain factors: Q+_n = conv of u and v (see rhs)
        if fam == "constant":
            self.u_exp, self.v_exp, self.gain_scale = 0.0, 0.0, spec.c
        elif fam == "additive":
            # sum_m (m + (n-m)) f f = n (f * f)_n
            self.u_exp, self.v_exp, self.gain_scale = 0.0, 0.0, spec.scale
        elif fam == "product":
            self.u_exp, self.v_exp, self.gain_scale = spec.a, spec.a, 1.0
        elif fam == "sum":
            self.u_exp, self.v_exp, self.gain_scale = spec.q, 0.0, 2.0
        elif fam == "mixed":
            self.u_exp, self.v_exp, self.gain_scale = spec.q, 1.0, 2.0
        self.abar: Optional[LimitRatio] = None
        if config.mode == "flory":
            lr = hypothesis_check(spec).limit_ratio
            if lr is None:
                raise ValueError(
                    "flory mode needs an existing limit ratio abar(n); "
                    f"{spec.label()} has none"
                )
            self.abar = lr
            self.beta_inf = lr.beta_inf(np.arange(n_max + 1, dtype=float))
            self.beta_inf[0] = 0.0

    def loss_rate(self, f: np.ndarray) -> np.ndarray:
        """sum_m a(n, m) f_m, for n = 0..n_max (index 0 junk)."""
        s = self.sizes
        fam = self.fam
        if fam == "constant":
            return np.full_like(s, self.spec.c * f[1:].sum())
        if fam == "additive":
            m0 = f[1:].sum()
            m1 = np.dot(s, f)
            return self.spec.scale * (s * m0 + m1)
        if fam == "product":
            ma = np.dot(s**self.spec.a, f)
            return s**self.spec.a * ma
        if fam == "sum":
            m0 = f[1:].sum()
            mq = np.dot(s**self.spec.q, f)
            return s**self.spec.q * m0 + mq
        if fam == "mixed":
            m1 = np.dot(s, f)
            mq = np.dot(s**self.spec.q, f)
            return s**self.spec.q * m1 + s * mq
        return self.A @ f

    def gains(self, f: np.ndarray) -> np.ndarray:
        """Q+_n = (1/2) sum_{m<n} a(m, n-m) f_m f_{n-m}, n = 0..n_max."""
        n_max = self.config.n_max
        fam = self.fam
        if fam == "table":
            g = np.zeros(n_max + 1)
            for n in range(2, n_max + 1):
                m = np.arange(1, n)
                g[n] = 0.5 * np.dot(self.A[m, n - m] * f[m], f[n - m])
            return g
        u = f * self.sizes**self.u_exp
        v = f if self.v_exp == 0.0 else f * self.sizes**self.v_exp
        # conv[k] = sum_{i+j=k} u[i] v[j]; with index 0 zeroed this is the
        # coagulation convolution, truncated to what we keep
        conv = np.convolve(u[1:n_max], v[1:n_max])  # lengths n_max-1 each
        g = np.zeros(n_max + 1)
        upto = min(n_max - 1, len(conv))
        g[2 : 2 + upto] = conv[:upto]
        if fam == "additive":
            g[2:] *= self.sizes[2:]
        return 0.5 * self.gain_scale * g

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        n_max = self.config.n_max
        f = np.empty(n_max + 1)
        f[0] = 0.0
        f[1:] = y[:n_max]
        g_inf = y[n_max]

        gains = self.gains(f)
        losses = f * self.loss_rate(f)
        # mass produced beyond n_max: pairwise mass balance of kept terms
        s = self.sizes
        phi = float(np.dot(s, losses) - np.dot(s, gains))
        if phi < 0.0:
            phi = 0.0  # roundoff guard; analytically nonnegative

        dy = np.empty_like(y)
        dy[:n_max] = gains[1:] - losses[1:]
        if self.config.mode == "flory":
            gel_eat = self.beta_inf[1:] * (s[1:] * f[1:]) * g_inf
            dy[:n_max] -= gel_eat
            dy[n_max] = phi + float(np.dot(s[1:], gel_eat))
            dy[n_max + 1] = 0.0
        else:
            dy[n_max] = 0.0
            dy[n_max + 1] = phi
        return dy


def rhs(state: OdeState, config: OdeConfig, spec: KernelSpec) -> np.ndarray:
    """Time derivative of (f_1..f_{n_max}, g_inf, flux_out) at ``state``."""
    fn = _Rhs(config, spec)
    y = np.concatenate([state.f[1:], [state.g_inf, state.flux_out]])
    return fn(state.t, y)


def profile_to_vector(profile: Dict[int, float], n_max: int) -> np.ndarray:
    f = np.zeros(n_max + 1)
    for s, val in profile.items():
        if s < 1:
            raise ValueError("profile sizes must be >= 1")
        if s <= n_max:
            f[s] = val
    return f


def integrate(
    config: OdeConfig,
    spec: KernelSpec,
    init: Dict[int, float],
    t_eval: Optional[Sequence[float]] = None,
) -> OdeResult:
    """Adaptive Cash-Karp 5(4) integration of the truncated system.

    ``init`` maps size to initial density (monodisperse unit mass is
    {1: 1.0}).  Returns states at ``t_eval`` (plus the endpoint), the gel
    time estimate, and the (t, mass, g_inf, flux_out) curve at accepted
    steps.
    """
    n_max = config.n_max
    f0 = profile_to_vector(init, n_max)
    mass0 = float(np.dot(np.arange(n_max + 1), f0))
    if not mass0 > 0:
        raise ValueError("initial profile needs positive mass")
    fn = _Rhs(config, spec)

    y = np.concatenate([f0[1:], [0.0, 0.0]])
    t = 0.0
    t_end = config.t_end
    eval_times = sorted(t_eval) if t_eval else []
    if eval_times and (eval_times[0] < 0 or eval_times[-1] > t_end):
        raise ValueError("t_eval outside [0, t_end]")

    # gel detection: leaked mass exceeding 10x the mass-error budget
    gel_threshold = 10.0 * max(config.rel_tol * mass0, config.abs_tol)
    t_gel = None

    states: List[OdeState] = []
    curve = [(t, mass0, 0.0, 0.0)]
    max_drift = 0.0
    n_steps = 0
    n_rejected = 0

    def snapshot() -> OdeState:
        f = np.zeros(n_max + 1)
        f[1:] = y[:n_max]
        return OdeState(t, f, float(y[n_max]), float(y[n_max + 1]))

    eval_idx = 0
    while eval_idx < len(eval_times) and eval_times[eval_idx] <= t:
        states.append(snapshot())
        eval_idx += 1

    h = min(1e-3, t_end) or t_end
    k = [np.empty_like(y) for _ in range(6)]
    prev_leak = 0.0

    while t < t_end:
        h = min(h, t_end - t)
        # never step over a requested output time
        while eval_idx < len(eval_times) and eval_times[eval_idx] - t <= 1e-14:
            states.append(snapshot())
            eval_idx += 1
        if eval_idx < len(eval_times):
            h = min(h, eval_times[eval_idx] - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise StiffnessError(t)

        k[0] = fn(t, y)
        for i in range(1, 6):
            yi = y + h * sum(a * k[j] for j, a in enumerate(_A[i]))
            k[i] = fn(t + h * sum(_A[i]), yi)
        y5 = y + h * sum(b * ki for b, ki in zip(_B5, k))
        err = h * sum(e * ki for e, ki in zip(_ERR, k))

        scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y5))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))

        worst_neg = float(y5.min())
        if err_norm > 1.0 or worst_neg < -NEG_SNAP:
            n_rejected += 1
            shrink = 0.5 if worst_neg < -NEG_SNAP else max(
                0.2, 0.9 * err_norm ** (-0.2)
            )
            h *= shrink
            continue

        np.clip(y5, 0.0, None, out=y5)
        t += h
        y = y5
        n_steps += 1
        if err_norm > 0:
            h *= min(5.0, max(0.2, 0.9 * err_norm ** (-0.2)))
        else:
            h *= 5.0

        sol = float(np.dot(np.arange(1, n_max + 1), y[:n_max]))
        g_inf = float(y[n_max])
        flux = float(y[n_max + 1])
        curve.append((t, sol, g_inf, flux))
        max_drift = max(max_drift, abs(sol + g_inf + flux - mass0))

        leak = g_inf if config.mode == "flory" else flux
        if t_gel is None and leak > gel_threshold:
            # linear interpolation of the crossing inside this step
            if leak > prev_leak:
                frac = (gel_threshold - prev_leak) / (leak - prev_leak)
                t_gel = t - h + frac * h
            else:
                t_gel = t
        prev_leak = leak

        while eval_idx < len(eval_times) and eval_times[eval_idx] <= t + 1e-15:
            states.append(snapshot())
            eval_idx += 1

    states.append(snapshot())
    return OdeResult(
        states=states,
        t_gel=t_gel,
        mass_curve=np.array(curve),
        max_ledger_drift=max_drift,
        n_steps=n_steps,
        n_rejected=n_rejected,
    )


def gel_time_extrapolation(
    spec: KernelSpec,
    n_max_grid: Sequence[int],
    rel_tol: float = 1e-6,
    t_end: float = 1.5,
    init: Optional[Dict[int, float]] = None,
) -> Tuple[float, Dict[int, float]]:
    """Estimate the untruncated gel time from a truncation-size sweep.

    The truncated system leaks mass early; the detected gel time obeys
    T(n_max) ~ T_inf - C n_max^{-1/2} near the critical point, so a linear
    fit in n_max^{-1/2} gives the extrapolated intercept.
    """
    init = init or {1: 1.0}
    times: Dict[int, float] = {}
    for n_max in n_max_grid:
        cfg = OdeConfig(n_max=n_max, mode="classical", rel_tol=rel_tol,
                        abs_tol=1e-14, t_end=t_end)
        res = integrate(cfg, spec, init)
        if res.t_gel is None:
            raise RuntimeError(f"no gel detected up to t={t_end} at n_max={n_max}")
        times[n_max] = res.t_gel
    xs = np.array([n ** (-0.5) for n in times])
    ys = np.array([times[n] for n in times])
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(intercept), times


def write_csv(result: OdeResult, path, n_report: int = 16):
    """Rows t, M, g_inf, flux_out, f_1..f_{n_report} at the stored states."""
    with open(path, "w") as fh:
        cols = ["t", "M", "g_inf", "flux_out"] + [f"f_{i}" for i in range(1, n_report + 1)]
        fh.write(",".join(cols) + "\n")
        for st in result.states:
            row = [repr(st.t), repr(st.sol_mass), repr(st.g_inf), repr(st.flux_out)]
            row += [repr(float(st.f[i])) if i < len(st.f) else "0.0" for i in range(1, n_report + 1)]
            fh.write(",".join(row) + "\n")
