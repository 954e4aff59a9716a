"""Runners for the desk-scale experiments: attenuation sweeps, obstruction
sweeps, phase portraits, the Liouville identity table, refined-bound tables,
and multiplier-window tables.

Every runner is deterministic given (config, seed), writes CSV files plus a
manifest.json recording the configuration and a content hash of its inputs,
and overwrites outputs atomically.  Floats are serialised with 9 significant
digits.  Sweep points are independent jobs; FLOQUET_LAB_THREADS > 1 runs them
on a thread pool with results assembled in grid order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import numerics
from .benchmark import sl_vector_field
from .bounds import RegionSamples, analyze_saturation, pointwise_jacobian_bound
from .errors import ConfigError
from .flow import VectorField, integrate, safe_exp, transition_matrix
from .network import Mlp, forward, jacobian, load_weights, save_weights, to_dict
from .training import TrainConfig, train

DEFAULT_SEED = 0
PERIOD = 2.0 * math.pi

AB_S_GRID = tuple(float(s) for s in np.geomspace(1.0, 30.0, 30))
C_S_GRID = (1.0, 4.0, 15.0)
E_S_GRID = (1.0, 4.2, 7.4, 10.7, 13.9, 17.1, 20.3, 23.6, 26.8, 30.0)
F_S_GRID = (1.0, 2.0, 4.0, 7.0)
C_OFFSET_MULTIPLES = (0.0, 1.5, 3.0, 6.0)

# trained-model defaults; the learning rate is tuned so the 32-unit fit
# lands in the low-1e-3 MSE range
BASE_TRAIN = TrainConfig(hidden_width=32, learning_rate=3e-3, epochs=5000, seed=DEFAULT_SEED)
# higher rates push the first-layer rows onto the norm cap and fit worse;
# 1e-3 keeps the rows near 1.4, which is what drives delta(s=7) below 1e-4
PROTOCOL_TRAIN = TrainConfig(
    hidden_width=256,
    offset_c=2.5,
    row_norm_cap=2.0,
    freeze_b1=True,
    learning_rate=1e-3,
    epochs=5000,
    seed=DEFAULT_SEED,
)


@dataclass(frozen=True)
class SweepSpec:
    """Grids and shared settings for the illustration runners."""

    s_values: tuple[float, ...]
    c_offsets: tuple[float, ...] = C_OFFSET_MULTIPLES
    eval_point: tuple[float, ...] = (0.8, 0.4)
    orbit_points: int = 1000
    steps: int = 4000
    output_dir: str = "out"
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not self.s_values or any(s <= 0 for s in self.s_values):
            raise ConfigError("s_values must be nonempty and positive")

    def to_dict(self) -> dict:
        return {
            "s_values": list(self.s_values),
            "c_offsets": list(self.c_offsets),
            "eval_point": list(self.eval_point),
            "orbit_points": self.orbit_points,
            "steps": self.steps,
        }


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FLOQUET_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _map_jobs(fn, items):
    n = _thread_count()
    items = list(items)
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    os.replace(tmp, path)


def _content_hash(payload: str) -> str:
    return hashlib.sha256(payload.encode()).hexdigest()


def _write_manifest(out_dir: Path, name: str, config: dict, seed: int, inputs: dict, files: list[str]):
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "experiment": name,
        "seed": seed,
        "config": config,
        "inputs": inputs,
        "outputs": sorted(files),
    }
    tmp = out_dir / "manifest.json.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, out_dir / "manifest.json")


def _model_inputs(m: Mlp) -> dict:
    return {"weights_sha256": _content_hash(json.dumps(to_dict(m)))}


def reference_orbit_field(m: Mlp) -> VectorField:
    """State driven by the exact Stuart-Landau flow, Jacobian from the network.

    The resulting transition matrix is the linearised flow of the network
    along the reference unit-circle orbit (not a monodromy matrix of the
    learned field, which need not have that orbit).
    """
    sl = sl_vector_field()
    return VectorField(dim=2, f=sl.f, jac=lambda x: jacobian(m, x)[1])


def _tiny_threshold(m: Mlp) -> float:
    # below any attainable layer maximum: classifies nothing as saturated, so
    # c_of_u is the bare product bound over the sampled region
    return m.activation.lambda_sigma * m.scale_s * 1e-15


def orbit_bound(m: Mlp, orbit_points: int) -> tuple[float, float]:
    """(C(U), delta) over the sampled unit-circle orbit.

    delta is the scale-free derivative maximum sup |sigma'(a)|; C(U) carries
    the scale factors.
    """
    u = RegionSamples.unit_circle(orbit_points)
    rep = analyze_saturation(m, u, _tiny_threshold(m))
    delta = rep.per_layer_max_deriv[0] / m.scale_s if m.depth == 2 else float("nan")
    return rep.c_of_u, delta


def run_illustration_a(model: Mlp, spec: SweepSpec) -> list[tuple]:
    """Jacobian attenuation sweep at a fixed evaluation point.

    CSV columns: s, actual_norm, bound, c_w_factor, delta_factor, where
    bound = c_w_factor * delta_factor, the weight factor grows linearly in s
    and the saturation factor is the plain derivative maximum at the point.
    """
    h0 = np.asarray(spec.eval_point, dtype=float)
    base_cw = float(
        np.prod([numerics.spectral_norm(w) for w in model.weights])
    )

    def job(s: float):
        ms = model.with_scale(s)
        _, jac = jacobian(ms, h0)
        actual = numerics.spectral_norm(jac)
        a = forward(ms, h0).pre_activations[0]
        delta_factor = float(np.max(np.abs(ms.activation.deriv(a))))
        c_w_factor = s ** (model.depth - 1) * base_cw
        return (s, actual, c_w_factor * delta_factor, c_w_factor, delta_factor)

    rows = _map_jobs(job, spec.s_values)
    out = Path(spec.output_dir) / "illustration_a"
    _write_csv(out / "attenuation.csv", ["s", "actual_norm", "bound", "c_w_factor", "delta_factor"], rows)
    _write_manifest(out, "illustration-a", spec.to_dict(), spec.seed, _model_inputs(model), ["attenuation.csv"])
    return rows


def c_min_of(model: Mlp) -> float:
    """Largest first-layer row norm; offsets beyond this kill zero crossings."""
    return float(np.max(np.sqrt(np.sum(model.weights[0] ** 2, axis=1))))


def run_illustration_b(model: Mlp, spec: SweepSpec) -> list[tuple]:
    """Obstruction bound d*C(U)*T on the unit circle vs scale, per bias offset.

    CSV columns: s, c_multiple, obstruction_bound, reference_4pi.
    """
    c_min = c_min_of(model)
    d = model.state_dim
    shifted = {
        mult: replace(
            model, biases=(model.biases[0] + mult * c_min,) + model.biases[1:]
        )
        for mult in spec.c_offsets
    }

    def job(arg):
        mult, s = arg
        ms = shifted[mult].with_scale(s)
        c_of_u, _ = orbit_bound(ms, spec.orbit_points)
        return (s, mult, d * c_of_u * PERIOD, 4.0 * math.pi)

    jobs = [(mult, s) for mult in spec.c_offsets for s in spec.s_values]
    rows = _map_jobs(job, jobs)
    out = Path(spec.output_dir) / "illustration_b"
    _write_csv(out / "obstruction.csv", ["s", "c_multiple", "obstruction_bound", "reference_4pi"], rows)
    _write_manifest(
        out,
        "illustration-b",
        {**spec.to_dict(), "c_min": c_min},
        spec.seed,
        _model_inputs(model),
        ["obstruction.csv"],
    )
    return rows


def _phase_portrait_starts() -> list[np.ndarray]:
    starts = []
    for r in (0.3, 1.7):
        for k in range(6):
            theta = 2.0 * math.pi * k / 6.0
            starts.append(np.array([r * math.cos(theta), r * math.sin(theta)]))
    return starts


def run_illustration_c(model: Mlp, spec: SweepSpec) -> list[tuple]:
    """Phase portraits plus per-scale volume diagnostics for the protocol net.

    Writes trajectories for the exact system and for each s, and a summary
    CSV with columns s, delta, ln_det, det evaluated along the reference
    orbit.  The exact panel's reference values go to exact_panel.csv.
    """
    out = Path(spec.output_dir) / "illustration_c"
    starts = _phase_portrait_starts()
    horizon = 2.0 * PERIOD
    traj_steps = 1800
    files = []

    def write_trajectories(tag: str, vf: VectorField):
        for i, x0 in enumerate(starts):
            ts, xs = integrate(vf, x0, (0.0, horizon), traj_steps)
            name = f"trajectory_{tag}_{i:02d}.csv"
            _write_csv(out / name, ["t", "x_1", "x_2"], list(zip(ts, xs[:, 0], xs[:, 1])))
            files.append(name)

    write_trajectories("exact", sl_vector_field())
    exact_fr = transition_matrix(sl_vector_field(), np.array([1.0, 0.0]), PERIOD, spec.steps)
    _write_csv(
        out / "exact_panel.csv",
        ["ln_det", "det"],
        [(exact_fr.log_det, exact_fr.det_transition)],
    )
    files.append("exact_panel.csv")

    summary = []
    for s in spec.s_values:
        ms = model.with_scale(s)
        write_trajectories(f"s{_fmt(float(s))}",
                           VectorField(2, f=lambda x, _m=ms: forward(_m, x).output,
                                       jac=lambda x, _m=ms: jacobian(_m, x)[1]))
        _, delta = orbit_bound(ms, spec.orbit_points)
        fr = transition_matrix(reference_orbit_field(ms), np.array([1.0, 0.0]), PERIOD, spec.steps)
        summary.append((s, delta, fr.log_det, fr.det_transition))
    _write_csv(out / "summary.csv", ["s", "delta", "ln_det", "det"], summary)
    files.append("summary.csv")
    _write_manifest(out, "illustration-c", spec.to_dict(), spec.seed, _model_inputs(model), files)
    return summary


def run_table_d(output_dir: str, steps: int = 4000, orbit_points: int = 1000) -> list[tuple]:
    """Liouville identity table for the exact oscillator.

    Quadrature of the analytic trace over the orbit and the determinant of
    the integrated transition matrix are computed independently.
    """
    from .benchmark import sl_jacobian

    pts = RegionSamples.unit_circle(orbit_points).points
    traces = np.array([np.trace(sl_jacobian(x, y)) for x, y in pts])
    # closed orbit: trapezoid over the periodic grid is exact to rounding
    integral = float(np.sum(traces) * (PERIOD / orbit_points))
    fr = transition_matrix(sl_vector_field(), np.array([1.0, 0.0]), PERIOD, steps)
    c_of_u = max(numerics.spectral_norm(sl_jacobian(x, y)) for x, y in pts)
    d = 2
    rows = [
        ("trace_on_orbit", float(np.mean(traces)), -2.0),
        ("trace_integral", integral, -4.0 * math.pi),
        ("det_monodromy", fr.det_transition, math.exp(-4.0 * math.pi)),
        ("abs_ln_det", abs(fr.log_det), 4.0 * math.pi),
        ("obstruction_bound_dCT", d * c_of_u * PERIOD, 4.0 * math.pi),
    ]
    out = Path(output_dir) / "table_d"
    _write_csv(out / "laj_identity.csv", ["quantity", "numerical", "exact_or_floor"], rows)
    _write_manifest(
        out,
        "table-d",
        {"steps": steps, "orbit_points": orbit_points},
        DEFAULT_SEED,
        {},
        ["laj_identity.csv"],
    )
    return rows


def run_illustration_e(model: Mlp, spec: SweepSpec) -> list[tuple]:
    """Refined-bound comparison at the evaluation point, weights frozen, s swept.

    CSV columns: s, actual, refined, original, ratio, delta.
    """
    h = np.asarray(spec.eval_point, dtype=float)

    def job(s: float):
        ms = model.with_scale(s)
        actual, refined, original = pointwise_jacobian_bound(ms, h)
        a = forward(ms, h).pre_activations[0]
        delta = float(np.max(np.abs(ms.activation.deriv(a))))
        return (s, actual, refined, original, original / refined, delta)

    rows = _map_jobs(job, spec.s_values)
    out = Path(spec.output_dir) / "illustration_e"
    _write_csv(out / "refined_comparison.csv", ["s", "actual", "refined", "original", "ratio", "delta"], rows)
    _write_manifest(out, "illustration-e", spec.to_dict(), spec.seed, _model_inputs(model), ["refined_comparison.csv"])
    return rows


def run_illustration_f(model: Mlp, spec: SweepSpec) -> list[tuple]:
    """Eigenvalue moduli of the transition matrix along the reference orbit
    against the certified window.

    CSV columns: s, delta, c_of_u, mu1_abs, mu2_abs, window_lo, window_hi.
    """

    def job(s: float):
        ms = model.with_scale(s)
        c_of_u, delta = orbit_bound(ms, spec.orbit_points)
        fr = transition_matrix(reference_orbit_field(ms), np.array([1.0, 0.0]), PERIOD, spec.steps)
        mods = sorted(abs(mu) for mu in fr.multipliers)
        return (
            s,
            delta,
            c_of_u,
            mods[-1],
            mods[0],
            safe_exp(-c_of_u * PERIOD),
            safe_exp(c_of_u * PERIOD),
        )

    rows = _map_jobs(job, spec.s_values)
    out = Path(spec.output_dir) / "illustration_f"
    _write_csv(
        out / "multiplier_windows.csv",
        ["s", "delta", "c_of_u", "mu1_abs", "mu2_abs", "window_lo", "window_hi"],
        rows,
    )
    _write_manifest(out, "illustration-f", spec.to_dict(), spec.seed, _model_inputs(model), ["multiplier_windows.csv"])
    return rows


def get_model(cfg: TrainConfig, cache_dir: str | None = None) -> Mlp:
    """Train a model, or reuse a cached weight file for identical configs."""
    if cache_dir is None:
        return train(cfg).trained_model
    cache = Path(cache_dir)
    cache.mkdir(parents=True, exist_ok=True)
    key = _content_hash(json.dumps(cfg.__dict__, sort_keys=True, default=str))[:16]
    path = cache / f"model_w{cfg.hidden_width}_seed{cfg.seed}_{key}.json"
    if path.exists():
        return load_weights(path)
    model = train(cfg).trained_model
    save_weights(model, path)
    return model


EXPERIMENT_NAMES = (
    "illustration-a",
    "illustration-b",
    "illustration-c",
    "illustration-e",
    "illustration-f",
    "table-d",
)


def run_experiment(
    name: str,
    output_dir: str,
    seed: int = DEFAULT_SEED,
    steps: int = 4000,
    overrides: dict | None = None,
) -> list[tuple]:
    """Train whatever the named experiment needs (cached) and run it."""
    if name not in EXPERIMENT_NAMES:
        raise ConfigError(f"unknown experiment {name!r}, expected one of {EXPERIMENT_NAMES}")
    overrides = overrides or {}
    if name == "table-d":
        return run_table_d(output_dir, steps=steps, orbit_points=overrides.get("orbit_points", 1000))

    train_overrides = dict(overrides.get("train", {}))
    base_cfg = PROTOCOL_TRAIN if name in ("illustration-c", "illustration-f") else BASE_TRAIN
    cfg = replace(base_cfg, seed=seed, **train_overrides)
    model = get_model(cfg, cache_dir=str(Path(output_dir) / "models"))

    grids = {
        "illustration-a": AB_S_GRID,
        "illustration-b": AB_S_GRID,
        "illustration-c": C_S_GRID,
        "illustration-e": E_S_GRID,
        "illustration-f": F_S_GRID,
    }
    spec = SweepSpec(
        s_values=tuple(overrides.get("s_values", grids[name])),
        c_offsets=tuple(overrides.get("c_offsets", C_OFFSET_MULTIPLES)),
        eval_point=tuple(overrides.get("eval_point", (0.8, 0.4))),
        orbit_points=int(overrides.get("orbit_points", 1000)),
        steps=steps,
        output_dir=output_dir,
        seed=seed,
    )
    runner = {
        "illustration-a": run_illustration_a,
        "illustration-b": run_illustration_b,
        "illustration-c": run_illustration_c,
        "illustration-e": run_illustration_e,
        "illustration-f": run_illustration_f,
    }[name]
    return runner(model, spec)
