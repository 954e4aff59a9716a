"""Certified Jacobian-norm bounds over sampled regions.

All suprema are maxima over the finite sample set representing the region U,
so every certificate is "on the sampled set"; dense orbit discretisations
(1000 points per period in the experiments) keep the gap to the true
supremum negligible for smooth activations.

Scale convention: the per-layer diagonal Jacobian factors carry one factor of
the pre-activation scale s each (see the network module), so the layer
maxima reported here are maxima of |s * sigma'(a)| and the weight constant
``c_w`` is the bare product of spectral norms of the W_l.  The classification
threshold delta is compared against the s-scaled layer maxima, which is what
makes ``c_of_u <= c_w * delta^q`` a theorem whenever lambda_sigma * s <= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .activations import Activation
from .errors import DimensionError, DomainError, InvalidInputError
from .network import Mlp, forward, jacobian


@dataclass(frozen=True)
class RegionSamples:
    """A finite sample of a convex region of state space."""

    points: np.ndarray
    descriptor: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidInputError("region must be a nonempty (n, d) array of points")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("region samples must be finite")
        object.__setattr__(self, "points", pts)

    @classmethod
    def unit_circle(cls, n: int = 1000) -> "RegionSamples":
        theta = 2.0 * math.pi * np.arange(n) / n
        pts = np.column_stack([np.cos(theta), np.sin(theta)])
        return cls(pts, descriptor=f"unit circle, {n} points")

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class SaturationReport:
    """Layer saturation maxima and the resulting uniform Jacobian bounds.

    ``per_layer_max_deriv[k-1]`` is the maximum of |s * sigma'(a_k)| over the
    sampled region; hidden layers whose maximum is at most
    ``delta_threshold`` form the saturated set (1-based indices).
    ``c_tilde_of_u`` is the square-root-regrouped refinement and equals
    ``c_of_u`` when the refinement is unavailable (some sigma' <= 0 on the
    samples).
    """

    per_layer_max_deriv: tuple[float, ...]
    saturated_set: tuple[int, ...]
    delta_threshold: float
    c_w: float
    c_of_u: float
    c_tilde_of_u: float
    rho: float
    bottleneck_r: int
    descriptor: str = ""

    @property
    def q(self) -> int:
        return len(self.saturated_set)

    def to_dict(self) -> dict:
        return {
            "per_layer_max_deriv": list(self.per_layer_max_deriv),
            "saturated_set": list(self.saturated_set),
            "q": self.q,
            "delta_threshold": self.delta_threshold,
            "c_w": self.c_w,
            "c_of_u": self.c_of_u,
            "c_tilde_of_u": self.c_tilde_of_u,
            "rho": self.rho,
            "bottleneck_r": self.bottleneck_r,
            "descriptor": self.descriptor,
        }


def _diag_values(m: Mlp, x: np.ndarray) -> list[np.ndarray]:
    """Per hidden layer, the diagonal Jacobian factor values s * sigma'(a_k)."""
    tr = forward(m, x)
    return [m.scale_s * m.activation.deriv(a) for a in tr.pre_activations]


def _grouped_product(m: Mlp, diags: list[np.ndarray]) -> float:
    """Product of grouped norms with the diagonal square roots redistributed."""
    sq = [np.sqrt(v) for v in diags]
    total = numerics.spectral_norm(m.weights[-1] * sq[-1])
    for k in range(len(m.weights) - 2, 0, -1):
        total *= numerics.spectral_norm(sq[k][:, None] * m.weights[k] * sq[k - 1])
    total *= numerics.spectral_norm(sq[0][:, None] * m.weights[0])
    return total


def weight_norm_product(m: Mlp) -> float:
    """Product of the spectral norms of all weight matrices (no scale factors)."""
    return float(np.prod([numerics.spectral_norm(w) for w in m.weights]))


def analyze_saturation(m: Mlp, u: RegionSamples, delta_threshold: float) -> SaturationReport:
    """Per-layer saturation maxima and the uniform bounds C(U), C-tilde(U)."""
    if u.dim != m.state_dim:
        raise DimensionError(f"region dimension {u.dim} != state dimension {m.state_dim}")
    cap = m.activation.lambda_sigma * m.scale_s
    if not (0.0 < delta_threshold <= cap):
        raise DomainError(
            f"delta threshold must lie in (0, {cap}] (lambda_sigma * s), got {delta_threshold}"
        )

    n_hidden = m.depth - 1
    layer_max = np.zeros(n_hidden)
    refined_max = 0.0
    refined_valid = True
    for x in u.points:
        diags = _diag_values(m, x)
        for k, v in enumerate(diags):
            layer_max[k] = max(layer_max[k], float(np.max(np.abs(v))))
        if refined_valid:
            if any(np.any(v <= 0.0) for v in diags):
                refined_valid = False
            else:
                refined_max = max(refined_max, _grouped_product(m, diags))

    saturated = tuple(k + 1 for k in range(n_hidden) if layer_max[k] <= delta_threshold)
    q = len(saturated)
    c_w = weight_norm_product(m)
    unsat_product = float(
        np.prod([layer_max[k] for k in range(n_hidden) if (k + 1) not in saturated])
    )
    c_of_u = c_w * delta_threshold**q * unsat_product
    c_tilde = refined_max if refined_valid else c_of_u
    c_tilde = min(c_tilde, c_of_u)
    if c_tilde > 0.0:
        rho = c_of_u / c_tilde
    else:
        rho = 1.0 if c_of_u == 0.0 else float("inf")
    return SaturationReport(
        per_layer_max_deriv=tuple(float(v) for v in layer_max),
        saturated_set=saturated,
        delta_threshold=float(delta_threshold),
        c_w=c_w,
        c_of_u=float(c_of_u),
        c_tilde_of_u=float(c_tilde),
        rho=float(rho),
        bottleneck_r=min(m.hidden_widths),
        descriptor=u.descriptor,
    )


def pointwise_jacobian_bound(m: Mlp, x) -> tuple[float, float, float]:
    """(actual, refined, original) Jacobian norm and bounds at a single point.

    ``actual <= refined <= original`` always; the refinement needs strictly
    positive activation derivatives at every hidden unit.
    """
    if m.activation.kind == "relu":
        raise DomainError("refined bound requires sigma' > 0; relu is not supported")
    factors, jac = jacobian(m, x)
    diags = list(factors.diag_factors)
    for k, v in enumerate(diags, start=1):
        if np.any(v <= 0.0):
            unit = int(np.argmin(v))
            raise DomainError(
                f"sigma' <= 0 at hidden layer {k}, unit {unit}: refined bound undefined"
            )
    actual = numerics.spectral_norm(jac)
    refined = _grouped_product(m, diags)
    original = weight_norm_product(m) * float(np.prod([np.max(v) for v in diags]))
    return actual, refined, original


@dataclass(frozen=True)
class ComparisonResult:
    """Both sides of the activation comparison inequality along a trajectory."""

    lhs: float
    rhs: float
    hypothesis_holds: bool
    violations: int


def _unpack_trajectory(trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Accept either (ts, xs) arrays or a sequence of (t, state) pairs."""
    if isinstance(trajectory, tuple) and len(trajectory) == 2 and np.ndim(trajectory[0]) == 1:
        return np.asarray(trajectory[0], dtype=float), np.asarray(trajectory[1], dtype=float)
    pairs = list(trajectory)
    if not pairs:
        return np.zeros(0), np.zeros((0, 0))
    ts = np.array([float(t) for t, _ in pairs])
    xs = np.array([np.asarray(x, dtype=float) for _, x in pairs])
    return ts, xs


def comparison_integral(m1: Mlp, sigma2: Activation, trajectory) -> ComparisonResult:
    """Trapezoid integrals of |Df| and of the sigma2-substituted factored bound.

    The trajectory comes from the sigma1 system, either as (ts, xs) arrays or
    as a sequence of (t, state) pairs; the hypothesis max|sigma1'| <=
    max|sigma2'| is checked per layer at every sample and a violation flags
    the result instead of raising.
    """
    ts, xs = _unpack_trajectory(trajectory)
    if len(ts) < 2:
        return ComparisonResult(0.0, 0.0, True, 0)
    c_w = weight_norm_product(m1)
    s = m1.scale_s
    norms = np.empty(len(ts))
    sub_products = np.empty(len(ts))
    violations = 0
    for i, x in enumerate(xs):
        factors, jac = jacobian(m1, x)
        norms[i] = numerics.spectral_norm(jac)
        tr = forward(m1, x)
        prod = 1.0
        for a, v1 in zip(tr.pre_activations, factors.diag_factors):
            m1_layer = float(np.max(np.abs(v1))) / s
            m2_layer = float(np.max(np.abs(sigma2.deriv(a))))
            if m1_layer > m2_layer + 1e-12:
                violations += 1
            prod *= s * m2_layer
        sub_products[i] = prod
    lhs = float(np.trapezoid(norms, ts))
    rhs = c_w * float(np.trapezoid(sub_products, ts))
    return ComparisonResult(lhs, rhs, violations == 0, violations)


def contraction_threshold(eta: float, d: int, c_w: float, T: float, q: int) -> float:
    """Minimum saturation level compatible with net contraction e^{-eta}."""
    if q < 1:
        raise DomainError("saturation depth q must be >= 1")
    if eta <= 0 or d < 1 or c_w <= 0 or T <= 0:
        raise DomainError("eta, d, c_w, T must all be positive")
    return (eta / (d * c_w * T)) ** (1.0 / q)


def global_lipschitz(m: Mlp) -> float:
    """Global Lipschitz constant prod ||W_l|| * (lambda_sigma * s)^{L-1}."""
    return weight_norm_product(m) * (m.activation.lambda_sigma * m.scale_s) ** (m.depth - 1)


def stiffness_proxy(c_of_u: float, t0: float, t: float) -> float:
    """Upper bound c_of_u * (t - t0) on the accumulated Jacobian norm."""
    if t < t0:
        raise DomainError("t must be >= t0")
    return c_of_u * (t - t0)


def sharp_construction(diag_values, v, state_dim: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Weight pair (W_1, W_2) attaining equality in the single-layer refined bound.

    W_1 = D^{-1/2} v e_1^T and W_2 = e_1 v^T D^{-1/2} for a unit vector v, so
    ||W_2 D W_1|| = ||W_2 D^{1/2}|| * ||D^{1/2} W_1|| = 1.
    """
    d_vals = np.asarray(diag_values, dtype=float)
    vv = np.asarray(v, dtype=float)
    if np.any(d_vals <= 0.0):
        raise DomainError("diagonal values must be strictly positive")
    if vv.shape != d_vals.shape:
        raise DimensionError("v must have the same length as the diagonal")
    if abs(float(vv @ vv) - 1.0) > 1e-8:
        raise DomainError("v must be a unit vector")
    inv_sqrt = 1.0 / np.sqrt(d_vals)
    e1 = np.zeros(state_dim)
    e1[0] = 1.0
    w1 = np.outer(inv_sqrt * vv, e1)
    w2 = np.outer(e1, vv * inv_sqrt)
    return w1, w2
