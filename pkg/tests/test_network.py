import json
import math

import numpy as np
import pytest

from floquet_lab import network
from floquet_lab.activations import activation
from floquet_lab.errors import DimensionError
from floquet_lab.network import Mlp, absorb_offset, forward, jacobian, trace_divergence


def random_mlp(rng, dims, kind="tanh", scale_s=1.0, offset_c=0.0):
    weights, biases = [], []
    for din, dout in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(din)
        weights.append(rng.uniform(-bound, bound, size=(dout, din)))
        biases.append(rng.uniform(-bound, bound, size=dout))
    return Mlp(tuple(weights), tuple(biases), activation(kind), scale_s, offset_c)


def fd_jacobian(m, x, h=1e-5):
    d = m.state_dim
    out = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        out[:, j] = (forward(m, x + e).output - forward(m, x - e).output) / (2.0 * h)
    return out


def straight_line_forward(m, x):
    """Independent reimplementation with plain loops and math.tanh."""
    z = list(x)
    for layer in range(m.depth - 1):
        w, b = m.weights[layer], m.biases[layer]
        a = [
            m.scale_s * (sum(w[i][j] * z[j] for j in range(len(z))) + b[i] + m.offset_c)
            for i in range(w.shape[0])
        ]
        z = [math.tanh(v) for v in a]
    w, b = m.weights[-1], m.biases[-1]
    return np.array(
        [sum(w[i][j] * z[j] for j in range(len(z))) + b[i] for i in range(w.shape[0])]
    )


class TestForward:
    def test_identity_weights_tanh_at_zero(self):
        m = Mlp((np.eye(2), np.eye(2)), (np.zeros(2), np.zeros(2)), activation("tanh"))
        tr = forward(m, np.zeros(2))
        assert np.allclose(tr.output, 0.0)
        assert np.allclose(tr.pre_activations[0], 0.0)

    def test_identity_activation_is_affine(self):
        rng = np.random.default_rng(0)
        m = random_mlp(rng, (2, 5, 2), kind="identity", scale_s=1.7, offset_c=0.4)
        x = rng.normal(size=2)
        w1, b1 = m.weights[0], m.biases[0]
        w2, b2 = m.weights[1], m.biases[1]
        expected = w2 @ (m.scale_s * (w1 @ x + b1 + m.offset_c)) + b2
        assert np.allclose(forward(m, x).output, expected, atol=1e-14)

    def test_matches_straight_line_reimplementation(self):
        rng = np.random.default_rng(1)
        m = random_mlp(rng, (2, 16, 2), kind="tanh", scale_s=1.3, offset_c=0.2)
        x = np.array([0.8, 0.4])
        assert np.max(np.abs(forward(m, x).output - straight_line_forward(m, x))) <= 1e-12

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(2)
        m = random_mlp(rng, (2, 4, 2))
        with pytest.raises(DimensionError):
            forward(m, np.zeros(3))


class TestJacobian:
    def test_tanh_at_zero_gives_output_weights(self):
        rng = np.random.default_rng(3)
        w2 = rng.normal(size=(2, 2))
        m = Mlp((np.eye(2), w2), (np.zeros(2), np.zeros(2)), activation("tanh"))
        _, jac = jacobian(m, np.zeros(2))
        assert np.allclose(jac, w2, atol=1e-14)

    def test_identity_activation_weight_product(self):
        rng = np.random.default_rng(4)
        m = random_mlp(rng, (3, 6, 4, 3), kind="identity")
        for _ in range(3):
            x = rng.normal(size=3)
            _, jac = jacobian(m, x)
            assert np.allclose(jac, m.weights[2] @ m.weights[1] @ m.weights[0], atol=1e-13)

    def test_scale_enters_once_per_hidden_layer(self):
        rng = np.random.default_rng(5)
        m = random_mlp(rng, (2, 4, 2), kind="identity", scale_s=2.0)
        _, jac = jacobian(m, rng.normal(size=2))
        assert np.allclose(jac, 2.0 * m.weights[1] @ m.weights[0], atol=1e-13)

    def test_matches_finite_differences_2_32_2(self):
        rng = np.random.default_rng(6)
        m = random_mlp(rng, (2, 32, 2), kind="tanh")
        _, jac = jacobian(m, np.array([0.8, 0.4]))
        assert np.max(np.abs(jac - fd_jacobian(m, np.array([0.8, 0.4])))) <= 1e-6

    def test_fd_sweep_100_nets_10_points(self):
        rng = np.random.default_rng(7)
        kinds = ("tanh", "sigmoid", "silu", "identity")
        for i in range(100):
            depth = int(rng.integers(2, 5))
            dims = [2] + [int(rng.integers(2, 17)) for _ in range(depth - 1)] + [2]
            m = random_mlp(
                rng,
                tuple(dims),
                kind=kinds[i % len(kinds)],
                scale_s=float(rng.uniform(0.5, 2.0)),
                offset_c=float(rng.uniform(0.0, 1.0)),
            )
            for _ in range(10):
                x = rng.normal(size=2)
                _, jac = jacobian(m, x)
                assert np.max(np.abs(jac - fd_jacobian(m, x))) <= 1e-6

    def test_factor_reassembly_bit_exact(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            m = random_mlp(rng, (2, 8, 5, 2), kind="tanh", scale_s=1.4)
            x = rng.normal(size=2)
            factors, jac = jacobian(m, x)
            manual = factors.weight_factors[-1]
            for k in range(len(factors.diag_factors) - 1, -1, -1):
                manual = (manual * factors.diag_factors[k]) @ factors.weight_factors[k]
            assert np.max(np.abs(manual - jac)) <= 1e-14

    def test_diag_factors_bounded(self):
        rng = np.random.default_rng(9)
        m = random_mlp(rng, (2, 8, 2), kind="tanh", scale_s=3.0)
        factors, _ = jacobian(m, rng.normal(size=2))
        bound = m.activation.lambda_sigma * m.scale_s
        for v in factors.diag_factors:
            assert np.all(np.abs(v) <= bound + 1e-12)


class TestTraceDivergence:
    def test_identity_diag_minus_one(self):
        w1 = np.array([[1.0, 0.0], [0.0, 1.0]])
        w2 = np.array([[-1.0, 0.0], [0.0, -1.0]])
        m = Mlp((w1, w2), (np.zeros(2), np.zeros(2)), activation("identity"))
        assert trace_divergence(m, np.array([0.3, -0.4])) == pytest.approx(-2.0)

    def test_zero_weights(self):
        m = Mlp(
            (np.zeros((4, 2)), np.zeros((2, 4))),
            (np.zeros(4), np.zeros(2)),
            activation("tanh"),
        )
        assert trace_divergence(m, np.zeros(2)) == 0.0

    def test_matches_fd_partial_sum(self):
        rng = np.random.default_rng(10)
        m = random_mlp(rng, (2, 12, 2), kind="tanh", scale_s=1.2)
        x = rng.normal(size=2)
        fd = fd_jacobian(m, x)
        assert trace_divergence(m, x) == pytest.approx(fd[0, 0] + fd[1, 1], abs=1e-6)


class TestScaleCovariance:
    def test_first_layer_pre_activations_scale_linearly(self):
        rng = np.random.default_rng(11)
        base = random_mlp(rng, (2, 16, 2), kind="tanh", scale_s=1.0, offset_c=0.5)
        x = rng.normal(size=2)
        a1 = forward(base, x).pre_activations[0]
        for t in (0.5, 2.0, 7.0):
            at = forward(base.with_scale(t), x).pre_activations[0]
            assert np.allclose(at, t * a1, rtol=1e-14)


class TestAbsorbOffset:
    def test_zero_offset_untouched(self):
        rng = np.random.default_rng(12)
        m = random_mlp(rng, (2, 4, 2))
        assert absorb_offset(m) is m

    def test_outputs_identical(self):
        rng = np.random.default_rng(13)
        m = random_mlp(rng, (2, 8, 2), kind="tanh", scale_s=1.5, offset_c=2.5)
        absorbed = absorb_offset(m)
        assert absorbed.offset_c == 0.0
        for _ in range(100):
            x = rng.normal(size=2)
            assert np.max(np.abs(forward(m, x).output - forward(absorbed, x).output)) <= 1e-13

    def test_idempotent(self):
        rng = np.random.default_rng(14)
        m = random_mlp(rng, (2, 4, 2), offset_c=1.0)
        once = absorb_offset(m)
        twice = absorb_offset(once)
        assert twice is once


class TestWeightFile:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(15)
        m = random_mlp(rng, (2, 32, 2), kind="tanh", scale_s=1.0, offset_c=2.5)
        p1 = tmp_path / "m1.json"
        p2 = tmp_path / "m2.json"
        network.save_weights(m, p1)
        loaded = network.load_weights(p1)
        network.save_weights(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        x = rng.normal(size=2)
        assert np.array_equal(forward(m, x).output, forward(loaded, x).output)

    def test_declared_dims_checked(self, tmp_path):
        rng = np.random.default_rng(16)
        m = random_mlp(rng, (2, 4, 2))
        doc = network.to_dict(m)
        doc["dims"] = [2, 5, 2]
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(DimensionError):
            network.load_weights(p)


class TestVectorFieldAdapter:
    def test_field_and_jacobian_agree_with_module_ops(self):
        rng = np.random.default_rng(17)
        m = random_mlp(rng, (2, 8, 2))
        vf = network.vector_field(m)
        x = rng.normal(size=2)
        assert np.array_equal(vf.f(x), forward(m, x).output)
        assert np.array_equal(vf.jac(x), jacobian(m, x)[1])
