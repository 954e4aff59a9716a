"""Scalar activation functions with exact derivatives and global derivative bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# sup of d/dx [x * sigmoid(x)], attained near x = 2.3994 (frozen high-precision value)
_SILU_DERIV_SUP = 1.0998393201288669

_DERIV_SUP = {
    "tanh": 1.0,
    "sigmoid": 0.25,
    "silu": _SILU_DERIV_SUP,
    "relu": 1.0,
    "identity": 1.0,
}

KINDS = tuple(_DERIV_SUP)


def _sigmoid(x):
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class Activation:
    """A scalar nonlinearity applied componentwise.

    ``lambda_sigma`` is the global bound sup |sigma'|.  The relu subgradient
    at 0 is fixed to 0 so evaluation is deterministic.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in _DERIV_SUP:
            raise DomainError(f"unknown activation kind {self.kind!r}, expected one of {KINDS}")

    @property
    def lambda_sigma(self) -> float:
        return _DERIV_SUP[self.kind]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "tanh":
            return np.tanh(x)
        if self.kind == "sigmoid":
            return _sigmoid(x)
        if self.kind == "silu":
            return x * _sigmoid(x)
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        return x.copy()

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "tanh":
            # sech^2 in a form that stays positive far into saturation,
            # where 1 - tanh(x)^2 would underflow to exactly 0
            e = np.exp(-2.0 * np.abs(x))
            return 4.0 * e / (1.0 + e) ** 2
        if self.kind == "sigmoid":
            s = _sigmoid(x)
            return s * (1.0 - s)
        if self.kind == "silu":
            s = _sigmoid(x)
            return s * (1.0 + x * (1.0 - s))
        if self.kind == "relu":
            return (x > 0.0).astype(float)
        return np.ones_like(x)


def activation(kind: str) -> Activation:
    return Activation(kind)


def saturation_radius_delta(a: Activation, r: float) -> float:
    """sech^2(r): the tanh derivative bound when all pre-activations exceed r."""
    if a.kind != "tanh":
        raise DomainError(f"saturation radius is defined for tanh only, got {a.kind!r}")
    if r < 0:
        raise DomainError("radius must be nonnegative")
    return float(1.0 / np.cosh(r) ** 2)
