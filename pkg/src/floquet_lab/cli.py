"""Command-line surface: train, analyze, floquet, sweep, experiment, table.

Each config-driven subcommand validates its JSON config (carrying a
"schema" field) before any computation.  Exit codes: 0 success, 1 validation
or usage error, 2 numerical failure (with a machine-readable error JSON on
standard error).  All outputs land under --output-dir; input files are never
modified.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bounds import RegionSamples, analyze_saturation
from .errors import ConfigError, FloquetLabError, NumericalError
from .experiments import (
    DEFAULT_SEED,
    EXPERIMENT_NAMES,
    F_S_GRID,
    SweepSpec,
    reference_orbit_field,
    run_experiment,
    run_illustration_f,
)
from .flow import transition_matrix
from .network import load_weights, save_weights
from .training import DEFAULT_EPOCHS, DEFAULT_LR, TrainConfig, train

SCHEMAS = {
    "train": "floquet-lab/train-v1",
    "analyze": "floquet-lab/analyze-v1",
    "sweep": "floquet-lab/sweep-v1",
    "experiment": "floquet-lab/experiment-v1",
}


def _load_config(path: str, subcommand: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    expected = SCHEMAS[subcommand]
    if doc.get("schema") != expected:
        raise ConfigError(
            f"config file {p} declares schema {doc.get('schema')!r}, expected {expected!r}"
        )
    return doc


def _require(doc: dict, key: str, types, where: str):
    if key not in doc:
        raise ConfigError(f"{where}: missing required field {key!r}")
    if not isinstance(doc[key], types):
        raise ConfigError(f"{where}: field {key!r} has wrong type {type(doc[key]).__name__}")
    return doc[key]


def _train_config_from(doc: dict, seed_override: int | None) -> TrainConfig:
    opt = doc.get("optimizer", {})
    if not isinstance(opt, dict):
        raise ConfigError("train config: 'optimizer' must be an object")
    kwargs = dict(
        hidden_width=int(_require(doc, "hidden_width", int, "train config")),
        scale_s=float(doc.get("scale_s", 1.0)),
        offset_c=float(doc.get("offset_c", 0.0)),
        n_samples=int(doc.get("n_samples", 4096)),
        seed=int(doc.get("seed", DEFAULT_SEED)),
        freeze_b1=bool(doc.get("freeze_b1", False)),
        activation=str(doc.get("activation", "tanh")),
        learning_rate=float(opt.get("learning_rate", DEFAULT_LR)),
        beta1=float(opt.get("beta1", 0.9)),
        beta2=float(opt.get("beta2", 0.999)),
        epsilon=float(opt.get("epsilon", 1e-8)),
        epochs=int(opt.get("epochs", DEFAULT_EPOCHS)),
    )
    if doc.get("row_norm_cap") is not None:
        kwargs["row_norm_cap"] = float(doc["row_norm_cap"])
    if doc.get("annulus") is not None:
        annulus = doc["annulus"]
        if not (isinstance(annulus, list) and len(annulus) == 2):
            raise ConfigError("train config: 'annulus' must be [r_min, r_max]")
        kwargs["annulus"] = (float(annulus[0]), float(annulus[1]))
    if seed_override is not None:
        kwargs["seed"] = seed_override
    try:
        return TrainConfig(**kwargs)
    except FloquetLabError as exc:
        raise ConfigError(f"train config: {exc}") from exc


def _region_from(doc: dict) -> RegionSamples:
    kind = _require(doc, "kind", str, "analyze config region")
    n = int(doc.get("points", 1000))
    if kind == "unit-circle":
        return RegionSamples.unit_circle(n)
    if kind == "annulus":
        r_min = float(doc.get("r_min", 0.1))
        r_max = float(doc.get("r_max", 2.0))
        rng = np.random.default_rng(int(doc.get("seed", DEFAULT_SEED)))
        radii = np.sqrt(rng.random(n) * (r_max**2 - r_min**2) + r_min**2)
        angles = rng.uniform(0.0, 2.0 * math.pi, size=n)
        pts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
        return RegionSamples(pts, descriptor=f"annulus {r_min}-{r_max}, {n} samples")
    raise ConfigError(f"analyze config: unknown region kind {kind!r}")


def _cmd_train(args) -> int:
    doc = _load_config(args.config, "train")
    cfg = _train_config_from(doc, args.seed)
    report = train(cfg)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    weights_path = out_dir / str(doc.get("weights_out", "model.json"))
    save_weights(report.trained_model, weights_path)
    report_doc = {
        "final_mse": report.final_mse,
        "epochs": cfg.epochs,
        "constraint_violations_after_projection": report.constraint_violations_after_projection,
        "loss_first": report.loss_history[0] if report.loss_history else None,
        "loss_last": report.loss_history[-1] if report.loss_history else None,
        "weights_file": weights_path.name,
    }
    (out_dir / "train_report.json").write_text(json.dumps(report_doc, indent=2) + "\n")
    if not args.quiet:
        print(f"trained: final MSE {report.final_mse:.6g} -> {weights_path}")
    return 0


def _cmd_analyze(args) -> int:
    doc = _load_config(args.config, "analyze")
    weights = _require(doc, "weights", str, "analyze config")
    model = load_weights(weights)
    if doc.get("scale_s") is not None:
        model = model.with_scale(float(doc["scale_s"]))
    region = _region_from(_require(doc, "region", dict, "analyze config"))
    threshold = float(_require(doc, "delta_threshold", (int, float), "analyze config"))
    report = analyze_saturation(model, region, threshold)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / str(doc.get("report_out", "saturation.json"))
    out_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    if not args.quiet:
        print(f"saturation report -> {out_path}")
    return 0


def _cmd_floquet(args) -> int:
    T = args.T
    steps = args.steps
    if args.orbit != "unit-circle":
        raise ConfigError(f"unsupported orbit {args.orbit!r}; only 'unit-circle' is available")
    if args.weights is None:
        from .benchmark import sl_vector_field

        vf = sl_vector_field()
    else:
        model = load_weights(args.weights)
        if args.scale_s is not None:
            model = model.with_scale(args.scale_s)
        vf = reference_orbit_field(model)
    fr = transition_matrix(vf, np.array([1.0, 0.0]), T, steps)
    payload = json.dumps(fr.to_dict(), indent=2)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "floquet.json").write_text(payload + "\n")
    if not args.quiet:
        print(payload)
    return 0


def _cmd_sweep(args) -> int:
    doc = _load_config(args.config, "sweep")
    weights = _require(doc, "weights", str, "sweep config")
    model = load_weights(weights)
    spec = SweepSpec(
        s_values=tuple(float(s) for s in doc.get("s_values", F_S_GRID)),
        orbit_points=int(doc.get("orbit_points", 1000)),
        steps=args.steps,
        output_dir=args.output_dir,
        seed=args.seed if args.seed is not None else DEFAULT_SEED,
    )
    rows = run_illustration_f(model, spec)
    if not args.quiet:
        for row in rows:
            print(
                f"s={row[0]:g}  delta={row[1]:.3g}  C={row[2]:.3g}  "
                f"|mu| in [{row[4]:.4g}, {row[3]:.4g}]  window [{row[5]:.4g}, {row[6]:.4g}]"
            )
    return 0


def _cmd_experiment(args) -> int:
    overrides = None
    if args.config is not None:
        doc = _load_config(args.config, "experiment")
        overrides = doc.get("overrides", {})
        if not isinstance(overrides, dict):
            raise ConfigError("experiment config: 'overrides' must be an object")
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    rows = run_experiment(
        args.name, args.output_dir, seed=seed, steps=args.steps, overrides=overrides
    )
    if not args.quiet:
        print(f"{args.name}: wrote {len(rows)} rows under {args.output_dir}")
    return 0


def _cmd_table(args) -> int:
    rows = run_experiment("table-d", args.output_dir, steps=args.steps)
    if not args.quiet:
        for name, numerical, exact in rows:
            print(f"{name:24s} {numerical:.9g}   (reference {exact:.9g})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floquet-lab",
        description="Saturation bounds and Floquet diagnostics for MLP vector fields",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, config_required=None):
        if config_required is not None:
            p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--output-dir", default="out", help="directory for all outputs")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--steps", type=int, default=4000, help="RK4 steps per period")
        p.add_argument("--quiet", action="store_true")

    common(sub.add_parser("train", help="fit a vector field"), config_required=True)
    common(sub.add_parser("analyze", help="saturation report for a weight file"), config_required=True)

    p_floquet = sub.add_parser("floquet", help="transition matrix along the reference orbit")
    p_floquet.add_argument("--weights", default=None, help="weight file (omit for the exact system)")
    p_floquet.add_argument("--orbit", default="unit-circle")
    p_floquet.add_argument("--T", type=float, default=2.0 * math.pi)
    p_floquet.add_argument("--scale-s", type=float, default=None)
    common(p_floquet)

    common(sub.add_parser("sweep", help="multiplier windows across scales"), config_required=True)

    p_exp = sub.add_parser("experiment", help="run a named experiment end to end")
    p_exp.add_argument("--name", required=True, choices=EXPERIMENT_NAMES)
    common(p_exp, config_required=False)

    common(sub.add_parser("table", help="Liouville identity table"))
    return parser


_HANDLERS = {
    "train": _cmd_train,
    "analyze": _cmd_analyze,
    "floquet": _cmd_floquet,
    "sweep": _cmd_sweep,
    "experiment": _cmd_experiment,
    "table": _cmd_table,
}


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; fold into the validation exit code
        return 0 if exc.code in (0, None) else 1
    try:
        return _HANDLERS[args.subcommand](args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        doc = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        for attr in ("iterations", "t_last", "epoch"):
            if getattr(exc, attr, None) is not None:
                doc["error"][attr] = getattr(exc, attr)
        print(json.dumps(doc), file=sys.stderr)
        return 2
    except FloquetLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
