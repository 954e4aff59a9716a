import numpy as np
import pytest

from floquet_lab.bounds import RegionSamples
from floquet_lab.errors import DomainError, TrainingDivergedError
from floquet_lab.network import forward
from floquet_lab.training import (
    TrainConfig,
    batch_mse,
    parameter_gradients,
    sample_dataset,
    train,
)

from test_network import random_mlp


def quick_cfg(**kw):
    base = dict(hidden_width=8, n_samples=128, epochs=50, seed=0, learning_rate=3e-3)
    base.update(kw)
    return TrainConfig(**base)


class TestSampleDataset:
    def test_empty(self):
        xs, ys = sample_dataset(quick_cfg(n_samples=0))
        assert xs.shape == (0, 2) and ys.shape == (0, 2)

    def test_radii_in_annulus(self):
        xs, _ = sample_dataset(quick_cfg(n_samples=2000))
        radii = np.sqrt((xs**2).sum(axis=1))
        assert radii.min() >= 0.1 and radii.max() <= 2.0

    def test_deterministic(self):
        a = sample_dataset(quick_cfg())
        b = sample_dataset(quick_cfg())
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_targets_are_field_values(self):
        from floquet_lab.benchmark import sl_field

        xs, ys = sample_dataset(quick_cfg(n_samples=16))
        for x, y in zip(xs, ys):
            assert np.allclose(y, sl_field(x[0], x[1]))


class TestParameterGradients:
    def test_zero_residual_zero_gradients(self):
        rng = np.random.default_rng(0)
        m = random_mlp(rng, (2, 4, 2))
        xs = rng.normal(size=(10, 2))
        ys = np.array([forward(m, x).output for x in xs])
        for gw, gb in parameter_gradients(m, (xs, ys)):
            assert np.allclose(gw, 0.0, atol=1e-14)
            assert np.allclose(gb, 0.0, atol=1e-14)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        m = random_mlp(rng, (2, 4, 2), kind="tanh", scale_s=1.3, offset_c=0.7)
        xs = rng.normal(size=(8, 2))
        ys = rng.normal(size=(8, 2))
        grads = parameter_gradients(m, (xs, ys))
        h = 1e-6
        for layer in range(m.depth):
            w = m.weights[layer]
            for i in range(w.shape[0]):
                for j in range(w.shape[1]):
                    wp = [wl.copy() for wl in m.weights]
                    wm = [wl.copy() for wl in m.weights]
                    wp[layer][i, j] += h
                    wm[layer][i, j] -= h
                    mp = type(m)(tuple(wp), m.biases, m.activation, m.scale_s, m.offset_c)
                    mm = type(m)(tuple(wm), m.biases, m.activation, m.scale_s, m.offset_c)
                    fd = (batch_mse(mp, xs, ys) - batch_mse(mm, xs, ys)) / (2 * h)
                    got = grads[layer][0][i, j]
                    assert got == pytest.approx(fd, rel=1e-5, abs=1e-8)
            b = m.biases[layer]
            for i in range(b.shape[0]):
                bp = [bl.copy() for bl in m.biases]
                bm = [bl.copy() for bl in m.biases]
                bp[layer][i] += h
                bm[layer][i] -= h
                mp = type(m)(m.weights, tuple(bp), m.activation, m.scale_s, m.offset_c)
                mm = type(m)(m.weights, tuple(bm), m.activation, m.scale_s, m.offset_c)
                fd = (batch_mse(mp, xs, ys) - batch_mse(mm, xs, ys)) / (2 * h)
                assert grads[layer][1][i] == pytest.approx(fd, rel=1e-5, abs=1e-8)

    def test_freeze_b1_zeroes_first_bias_gradient(self):
        rng = np.random.default_rng(2)
        m = random_mlp(rng, (2, 4, 2))
        xs = rng.normal(size=(10, 2))
        ys = rng.normal(size=(10, 2))
        grads = parameter_gradients(m, (xs, ys), freeze_b1=True)
        assert np.array_equal(grads[0][1], np.zeros(4))
        assert not np.allclose(grads[1][1], 0.0)


class TestTrain:
    def test_already_fit_stays_at_zero(self):
        from floquet_lab.flow import VectorField
        from floquet_lab.training import _batch_forward

        init_model = train(quick_cfg(epochs=0)).trained_model
        xs, _ = sample_dataset(quick_cfg())
        # target values computed through the same batched forward pass the
        # trainer uses, so the residual is exactly zero bitwise and Adam
        # never takes a step
        outs = _batch_forward(init_model, xs)[2]
        table = {x.tobytes(): y for x, y in zip(xs, outs)}
        target = VectorField(dim=2, f=lambda x: table[x.tobytes()], jac=None)
        rep = train(quick_cfg(epochs=30), target=target)
        assert all(v == 0.0 for v in rep.loss_history)
        assert rep.final_mse == 0.0
        for w_init, w_final in zip(init_model.weights, rep.trained_model.weights):
            assert np.array_equal(w_init, w_final)

    def test_loss_decreases(self):
        rep = train(quick_cfg(epochs=200))
        assert rep.final_mse < rep.loss_history[0] * 0.5

    def test_determinism(self):
        r1 = train(quick_cfg(epochs=40))
        r2 = train(quick_cfg(epochs=40))
        assert r1.loss_history == r2.loss_history
        for w1, w2 in zip(r1.trained_model.weights, r2.trained_model.weights):
            assert np.array_equal(w1, w2)
        for b1, b2 in zip(r1.trained_model.biases, r2.trained_model.biases):
            assert np.array_equal(b1, b2)

    def test_protocol_constraints(self):
        cfg = quick_cfg(
            hidden_width=16,
            offset_c=2.5,
            row_norm_cap=2.0,
            freeze_b1=True,
            epochs=120,
            n_samples=256,
        )
        rep = train(cfg)
        m = rep.trained_model
        assert rep.constraint_violations_after_projection == 0
        # offset absorbed into b_1 (which was frozen at zero)
        assert m.offset_c == 0.0
        assert np.allclose(m.biases[0], 2.5)
        row_norms = np.sqrt((m.weights[0] ** 2).sum(axis=1))
        assert row_norms.max() <= 2.0 + 1e-12
        circle = RegionSamples.unit_circle(1000)
        min_pre = min(float(np.min(forward(m, x).pre_activations[0])) for x in circle.points)
        assert min_pre >= 0.5 * cfg.scale_s - 1e-9

    def test_row_cap_invariant_every_epoch(self):
        # cap enforced after each step, so it also holds at the end of short runs
        for epochs in (1, 3, 7):
            cfg = quick_cfg(
                hidden_width=8, offset_c=1.0, row_norm_cap=0.5, freeze_b1=True, epochs=epochs
            )
            rep = train(cfg)
            # absorb_offset only touches biases
            row_norms = np.sqrt((rep.trained_model.weights[0] ** 2).sum(axis=1))
            assert row_norms.max() <= 0.5 + 1e-12

    def test_divergence_raises_with_epoch(self):
        # absurd rate: Adam moves each weight by +-lr per step, so the output
        # layer overflows within a couple of epochs
        cfg = quick_cfg(learning_rate=1e200, epochs=20)
        with np.errstate(all="ignore"):
            with pytest.raises(TrainingDivergedError) as err:
                train(cfg)
        assert err.value.epoch >= 1


class TestConfigValidation:
    def test_bad_annulus(self):
        with pytest.raises(DomainError):
            TrainConfig(annulus=(2.0, 0.1))

    def test_protocol_cap_must_undershoot_offset(self):
        with pytest.raises(DomainError):
            TrainConfig(offset_c=2.5, row_norm_cap=2.5)

    def test_cap_without_offset_allowed(self):
        cfg = TrainConfig(row_norm_cap=1.0)
        assert cfg.row_norm_cap == 1.0
