"""ODE and variational-equation integration along trajectories and reference curves.

Fixed-step RK4 throughout (default 4000 steps per period, no adaptivity, so
runs are bit-reproducible).  The transition matrix is integrated jointly with
the state; the trace of the Jacobian is accumulated on the same grid and
integrated by composite Simpson, so the Liouville residual
|ln det Psi - integral of the trace| doubles as an accuracy check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import numerics
from .errors import DimensionError, DivergenceError, DomainError

DEFAULT_STEPS = 4000


@dataclass(frozen=True)
class VectorField:
    """An autonomous vector field with an analytic Jacobian."""

    dim: int
    f: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FloquetResult:
    """Transition matrix over one period plus its spectral diagnostics.

    ``log_det`` is NaN when the determinant is not positive (a signed
    failure of the Liouville identity at the integrator's accuracy).
    ``window`` is the multiplier band (e^{-cT}, e^{+cT}) and is attached
    only once a certified Jacobian bound c is known.
    """

    period_T: float
    transition_matrix: np.ndarray
    det_transition: float
    log_det: float
    trace_integral: float
    multipliers: np.ndarray
    exponents: tuple[float, ...]
    window: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "period_T": self.period_T,
            "transition_matrix": self.transition_matrix.tolist(),
            "det_transition": self.det_transition,
            "log_det": self.log_det,
            "trace_integral": self.trace_integral,
            "multipliers": [[mu.real, mu.imag] for mu in self.multipliers],
            "multiplier_moduli": [abs(mu) for mu in self.multipliers],
            "exponents": list(self.exponents),
            "window": list(self.window) if self.window is not None else None,
        }


@dataclass(frozen=True)
class BoundCheck:
    """Floquet obstruction checks for one transition matrix and one bound."""

    c_of_u: float
    c_tilde_of_u: float
    det_bound_d: float
    det_bound_r: float
    det_ok: bool
    window: tuple[float, float]
    window_refined: tuple[float, float]
    per_multiplier_ok: tuple[bool, ...]
    per_multiplier_ok_refined: tuple[bool, ...]
    exponent_bound: float
    exponents_ok: tuple[bool, ...]

    @property
    def all_ok(self) -> bool:
        return self.det_ok and all(self.per_multiplier_ok) and all(self.exponents_ok)


def safe_exp(x: float) -> float:
    """exp that saturates to inf instead of raising on overflow."""
    try:
        return math.exp(x)
    except OverflowError:
        return float("inf")


def _check_state(x: np.ndarray, t: float, t_prev: float) -> None:
    if not np.all(np.isfinite(x)):
        raise DivergenceError(
            f"integration diverged at t={t:.6g} (last valid t={t_prev:.6g})", t_last=t_prev
        )


def integrate(vf: VectorField, x0, t_span: tuple[float, float], steps: int):
    """Fixed-step RK4 trajectory; returns (ts, xs) with xs of shape (steps+1, d)."""
    if steps < 1:
        raise DomainError("steps must be >= 1")
    x = np.asarray(x0, dtype=float)
    if x.shape != (vf.dim,):
        raise DimensionError(f"initial state has shape {x.shape}, expected ({vf.dim},)")
    t0, t1 = float(t_span[0]), float(t_span[1])
    h = (t1 - t0) / steps
    ts = t0 + h * np.arange(steps + 1)
    xs = np.empty((steps + 1, vf.dim))
    xs[0] = x
    for i in range(steps):
        t = ts[i]
        k1 = vf.f(x)
        k2 = vf.f(x + 0.5 * h * k1)
        k3 = vf.f(x + 0.5 * h * k2)
        k4 = vf.f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_state(x, ts[i + 1], t)
        xs[i + 1] = x
    return ts, xs


def _simpson(values: np.ndarray, h: float) -> float:
    """Composite Simpson on a uniform grid; 3/8 rule absorbs an odd tail."""
    n = len(values) - 1
    if n == 0:
        return 0.0
    if n == 1:
        return float(0.5 * h * (values[0] + values[1]))
    total = 0.0
    start = 0
    if n % 2 == 1:
        # Simpson 3/8 on the first three intervals keeps 4th order
        total += 3.0 * h / 8.0 * (values[0] + 3.0 * values[1] + 3.0 * values[2] + values[3])
        start = 3
    v = values[start:]
    total += h / 3.0 * (v[0] + v[-1] + 4.0 * np.sum(v[1:-1:2]) + 2.0 * np.sum(v[2:-1:2]))
    return float(total)


def transition_matrix(
    vf: VectorField, x0, T: float, steps: int = DEFAULT_STEPS
) -> FloquetResult:
    """Integrate the variational equation jointly with the state over [0, T].

    Psi(0) = I and dPsi/dt = Df(h(t)) Psi(t).  Also accumulates the trace
    integral of Df along the trajectory and the spectrum of Psi(T).
    """
    if steps < 1:
        raise DomainError("steps must be >= 1")
    x = np.asarray(x0, dtype=float)
    if x.shape != (vf.dim,):
        raise DimensionError(f"initial state has shape {x.shape}, expected ({vf.dim},)")
    d = vf.dim
    psi = np.eye(d)
    h = float(T) / steps
    traces = np.empty(steps + 1)
    t_prev = 0.0
    for i in range(steps):
        j1 = vf.jac(x)
        traces[i] = np.trace(j1)
        k1x = vf.f(x)
        k1p = j1 @ psi

        x2 = x + 0.5 * h * k1x
        j2 = vf.jac(x2)
        k2x = vf.f(x2)
        k2p = j2 @ (psi + 0.5 * h * k1p)

        x3 = x + 0.5 * h * k2x
        j3 = vf.jac(x3)
        k3x = vf.f(x3)
        k3p = j3 @ (psi + 0.5 * h * k2p)

        x4 = x + h * k3x
        j4 = vf.jac(x4)
        k4x = vf.f(x4)
        k4p = j4 @ (psi + h * k3p)

        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        psi = psi + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        t_new = h * (i + 1)
        _check_state(x, t_new, t_prev)
        if not np.all(np.isfinite(psi)):
            raise DivergenceError(
                f"variational solve diverged at t={t_new:.6g}", t_last=t_prev
            )
        t_prev = t_new
    traces[steps] = np.trace(vf.jac(x))

    det = numerics.determinant(psi)
    log_det = math.log(det) if det > 0.0 else float("nan")
    trace_integral = _simpson(traces, h)
    multipliers = numerics.eigenvalues(psi)
    exponents = tuple(
        float(np.log(abs(mu)) / T) if abs(mu) > 0.0 else float("-inf") for mu in multipliers
    )
    return FloquetResult(
        period_T=float(T),
        transition_matrix=psi,
        det_transition=det,
        log_det=log_det,
        trace_integral=trace_integral,
        multipliers=multipliers,
        exponents=exponents,
    )


def reverse_transition(vf: VectorField, x0, T: float, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """Transition matrix of the time-reversed system over [0, T].

    For a closed orbit this is the inverse of the forward transition matrix.
    """
    reversed_vf = VectorField(vf.dim, lambda x: -vf.f(x), lambda x: -vf.jac(x))
    return transition_matrix(reversed_vf, x0, T, steps).transition_matrix


def attach_window(fr: FloquetResult, c_of_u: float) -> FloquetResult:
    """Attach the multiplier band (e^{-cT}, e^{+cT}) implied by a Jacobian bound."""
    w = (safe_exp(-c_of_u * fr.period_T), safe_exp(c_of_u * fr.period_T))
    return replace(fr, window=w)


def check_floquet_bounds(fr: FloquetResult, sr, d_or_r: int) -> BoundCheck:
    """Check the determinant and per-multiplier obstructions against a report.

    ``sr`` is a saturation report for the same network and region (anything
    with ``c_of_u`` and ``c_tilde_of_u`` attributes); ``d_or_r`` is the rank
    bound used for the second determinant inequality (state dimension, or the
    bottleneck width when smaller).
    """
    d = fr.transition_matrix.shape[0]
    if d_or_r < 1:
        raise DimensionError("rank bound must be >= 1")
    c = float(sr.c_of_u)
    c_t = float(sr.c_tilde_of_u)
    T = fr.period_T
    rel = 1e-9

    det_bound_d = d * c * T
    det_bound_r = d_or_r * c * T
    det_ok = bool(
        not math.isnan(fr.log_det) and abs(fr.log_det) <= det_bound_d * (1.0 + rel) + 1e-12
    )
    window = (safe_exp(-c * T), safe_exp(c * T))
    window_refined = (safe_exp(-c_t * T), safe_exp(c_t * T))

    def contained(mu: complex, w: tuple[float, float]) -> bool:
        m = abs(mu)
        return w[0] * (1.0 - rel) - 1e-15 <= m <= w[1] * (1.0 + rel) + 1e-15

    per_ok = tuple(contained(mu, window) for mu in fr.multipliers)
    per_ok_refined = tuple(contained(mu, window_refined) for mu in fr.multipliers)
    exponents_ok = tuple(abs(lam) <= c * (1.0 + rel) + 1e-15 for lam in fr.exponents)
    return BoundCheck(
        c_of_u=c,
        c_tilde_of_u=c_t,
        det_bound_d=det_bound_d,
        det_bound_r=det_bound_r,
        det_ok=det_ok,
        window=window,
        window_refined=window_refined,
        per_multiplier_ok=per_ok,
        per_multiplier_ok_refined=per_ok_refined,
        exponent_bound=c,
        exponents_ok=exponents_ok,
    )


def flow_sensitivity_bound(c: float, t: float, dx0: float) -> float:
    """Gronwall envelope e^{c t} |dx0| for the separation of two trajectories."""
    if t < 0:
        raise DomainError("elapsed time must be nonnegative")
    return math.exp(c * t) * dx0


def amplification_ratio(c_of_u: float, c_tilde_of_u: float, T: float) -> float:
    """Ratio of the plain to the refined flow bound over horizon T."""
    if T < 0:
        raise DomainError("horizon must be nonnegative")
    return math.exp((c_of_u - c_tilde_of_u) * T)
