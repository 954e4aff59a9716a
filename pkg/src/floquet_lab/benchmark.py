"""Exact Stuart-Landau oscillator and its closed-form reference values.

The system has an asymptotically stable limit cycle on the unit circle with
period 2*pi; the Jacobian trace there is identically -2, so the monodromy
determinant is exactly e^{-4*pi}.
"""

from __future__ import annotations

import math

import numpy as np

from .flow import VectorField

PERIOD = 2.0 * math.pi
LN_DET = -4.0 * math.pi
DET = math.exp(LN_DET)


def sl_field(x: float, y: float) -> tuple[float, float]:
    r2 = x * x + y * y
    return (x - y - x * r2, x + y - y * r2)


def sl_jacobian(x: float, y: float) -> np.ndarray:
    return np.array(
        [
            [1.0 - 3.0 * x * x - y * y, -1.0 - 2.0 * x * y],
            [1.0 - 2.0 * x * y, 1.0 - x * x - 3.0 * y * y],
        ]
    )


def sl_reference() -> dict[str, float]:
    """Exact constants of the unit-circle limit cycle."""
    return {"period": PERIOD, "ln_det": LN_DET, "det": DET}


def sl_vector_field() -> VectorField:
    return VectorField(
        dim=2,
        f=lambda p: np.asarray(sl_field(p[0], p[1])),
        jac=lambda p: sl_jacobian(p[0], p[1]),
    )


def sl_orbit_points(n: int) -> np.ndarray:
    """n equispaced points on the unit-circle orbit, starting at (1, 0)."""
    theta = 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([np.cos(theta), np.sin(theta)])


def sl_orbit_state(t: float) -> np.ndarray:
    """The exact orbit parametrisation gamma(t) = (cos t, sin t)."""
    return np.array([math.cos(t), math.sin(t)])
