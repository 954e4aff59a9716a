"""The MLP vector field: forward pass, analytic input Jacobian, divergence.

Convention for the pre-activation scale s and the bias offset c: every hidden
layer computes a_k = s * (W_k z_{k-1} + b_k + c), z_k = sigma(a_k); the output
layer is plain affine, W_L z_{L-1} + b_L.  The chain rule therefore puts one
factor of s into each hidden layer's diagonal Jacobian factor, so the stored
diagonal values are s * sigma'(a_k).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .activations import Activation, activation
from .errors import DimensionError, InvalidInputError
from .flow import VectorField


@dataclass(frozen=True)
class Mlp:
    """A fully connected vector field with equal input and output dimension."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: Activation
    scale_s: float = 1.0
    offset_c: float = 0.0

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionError("weights and biases must be nonempty and of equal length")
        ws = tuple(np.asarray(w, dtype=float) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=float) for b in self.biases)
        for idx, (w, b) in enumerate(zip(ws, bs), start=1):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise DimensionError(f"layer {idx}: W has shape {w.shape}, b has shape {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidInputError(f"layer {idx} has non-finite parameters")
        for idx in range(1, len(ws)):
            if ws[idx].shape[1] != ws[idx - 1].shape[0]:
                raise DimensionError(
                    f"layer {idx + 1} expects input dim {ws[idx].shape[1]}, "
                    f"previous layer outputs {ws[idx - 1].shape[0]}"
                )
        if ws[0].shape[1] != ws[-1].shape[0]:
            raise DimensionError("state dimension must match: d_0 == d_L")
        if not (self.scale_s > 0.0 and np.isfinite(self.scale_s)):
            raise InvalidInputError("scale_s must be positive and finite")
        if not (self.offset_c >= 0.0 and np.isfinite(self.offset_c)):
            raise InvalidInputError("offset_c must be nonnegative and finite")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def state_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.state_dim,) + tuple(w.shape[0] for w in self.weights)

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights[:-1])

    def with_scale(self, s: float) -> "Mlp":
        return replace(self, scale_s=float(s))


@dataclass(frozen=True)
class ForwardTrace:
    """All intermediate vectors of one forward pass."""

    pre_activations: tuple[np.ndarray, ...]
    post_activations: tuple[np.ndarray, ...]
    output: np.ndarray


@dataclass(frozen=True)
class JacobianFactors:
    """The factor sequence W_L, D_{L-1}, ..., D_1, W_1 at a point.

    ``diag_factors[k]`` holds the diagonal of D_{k+1}, i.e. the values
    s * sigma'(a_{k+1, i}); reassembling the alternating product reproduces
    the analytic Jacobian.
    """

    weight_factors: tuple[np.ndarray, ...]
    diag_factors: tuple[np.ndarray, ...]

    def assemble(self) -> np.ndarray:
        out = self.weight_factors[-1]
        for k in range(len(self.diag_factors) - 1, -1, -1):
            out = (out * self.diag_factors[k]) @ self.weight_factors[k]
        return out


def _check_point(m: Mlp, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (m.state_dim,):
        raise DimensionError(f"point has shape {arr.shape}, expected ({m.state_dim},)")
    return arr


def forward(m: Mlp, x) -> ForwardTrace:
    """Evaluate the network, recording pre- and post-activations per hidden layer."""
    z = _check_point(m, x)
    pres: list[np.ndarray] = []
    posts: list[np.ndarray] = []
    for w, b in zip(m.weights[:-1], m.biases[:-1]):
        a = m.scale_s * (w @ z + b + m.offset_c)
        z = m.activation.value(a)
        pres.append(a)
        posts.append(z)
    out = m.weights[-1] @ z + m.biases[-1]
    return ForwardTrace(tuple(pres), tuple(posts), out)


def jacobian(m: Mlp, x) -> tuple[JacobianFactors, np.ndarray]:
    """Analytic input Jacobian as factors and as the assembled d x d matrix."""
    trace = forward(m, x)
    diags = tuple(m.scale_s * m.activation.deriv(a) for a in trace.pre_activations)
    factors = JacobianFactors(weight_factors=m.weights, diag_factors=diags)
    return factors, factors.assemble()


def trace_divergence(m: Mlp, x) -> float:
    """Divergence of the vector field, i.e. the trace of the input Jacobian."""
    _, jac = jacobian(m, x)
    return float(np.trace(jac))


def absorb_offset(m: Mlp) -> Mlp:
    """Fold the fixed offset c into the hidden biases; outputs are unchanged."""
    if m.offset_c == 0.0:
        return m
    biases = tuple(b + m.offset_c for b in m.biases[:-1]) + (m.biases[-1],)
    return replace(m, biases=biases, offset_c=0.0)


def vector_field(m: Mlp) -> VectorField:
    """Adapt the network to the integrator interface."""
    return VectorField(
        dim=m.state_dim,
        f=lambda x: forward(m, x).output,
        jac=lambda x: jacobian(m, x)[1],
    )


def to_dict(m: Mlp) -> dict:
    return {
        "dims": list(m.dims),
        "activation": m.activation.kind,
        "scale_s": m.scale_s,
        "offset_c": m.offset_c,
        "layers": [
            {"W": w.tolist(), "b": b.tolist()} for w, b in zip(m.weights, m.biases)
        ],
    }


def from_dict(doc: dict) -> Mlp:
    try:
        layers = doc["layers"]
        m = Mlp(
            weights=tuple(np.asarray(layer["W"], dtype=float) for layer in layers),
            biases=tuple(np.asarray(layer["b"], dtype=float) for layer in layers),
            activation=activation(doc["activation"]),
            scale_s=float(doc["scale_s"]),
            offset_c=float(doc["offset_c"]),
        )
    except KeyError as exc:
        raise InvalidInputError(f"weight document is missing field {exc}") from exc
    if list(m.dims) != list(doc["dims"]):
        raise DimensionError(f"declared dims {doc['dims']} do not match layers {list(m.dims)}")
    return m


def save_weights(m: Mlp, path) -> None:
    payload = json.dumps(to_dict(m), indent=2)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(payload + "\n")
    os.replace(tmp, path)


def load_weights(path) -> Mlp:
    with open(path) as fh:
        return from_dict(json.load(fh))
