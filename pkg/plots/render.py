#!/usr/bin/env python3
"""Render figures from the experiment CSV artifacts.

Standalone: knows the CSV schemas only, never imports the core package.

    render.py --kind jacobian-attenuation --csv out/illustration_a/attenuation.csv --out fig_a.png
    render.py --kind phase-portraits --csv 'out/illustration_c/trajectory_s1_*.csv' --out fig_c1.png

Kinds and their expected columns:
    jacobian-attenuation  s, actual_norm, bound, c_w_factor, delta_factor
    obstruction-sweep     s, c_multiple, obstruction_bound, reference_4pi
    phase-portraits       t, x_1, x_2          (csv may be a glob over trajectories)
    refined-comparison    s, actual, refined, original, ratio, delta
    multiplier-window     s, delta, c_of_u, mu1_abs, mu2_abs, window_lo, window_hi
    laj-table             quantity, numerical, exact_or_floor

Exit codes: 0 rendered, 1 usage error, 2 schema mismatch (column diff on stderr).
"""

from __future__ import annotations

import argparse
import csv
import glob
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

SCHEMAS = {
    "jacobian-attenuation": ["s", "actual_norm", "bound", "c_w_factor", "delta_factor"],
    "obstruction-sweep": ["s", "c_multiple", "obstruction_bound", "reference_4pi"],
    "phase-portraits": ["t", "x_1", "x_2"],
    "refined-comparison": ["s", "actual", "refined", "original", "ratio", "delta"],
    "multiplier-window": ["s", "delta", "c_of_u", "mu1_abs", "mu2_abs", "window_lo", "window_hi"],
    "laj-table": ["quantity", "numerical", "exact_or_floor"],
}


class SchemaMismatch(Exception):
    def __init__(self, path, expected, got):
        super().__init__(f"{path}: expected columns {expected}, got {got}")
        self.expected = expected
        self.got = got


def read_rows(path: str, kind: str) -> list[dict]:
    expected = SCHEMAS[kind]
    with open(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(path, expected, []) from None
        if header != expected:
            raise SchemaMismatch(path, expected, header)
        rows = []
        for raw in reader:
            rows.append(dict(zip(header, raw)))
        return rows


def _floats(rows, key):
    return [float(r[key]) for r in rows]


def render_jacobian_attenuation(paths, ax_pair):
    rows = read_rows(paths[0], "jacobian-attenuation")
    ax, ax2 = ax_pair
    if rows:
        s = _floats(rows, "s")
        ax.plot(s, _floats(rows, "actual_norm"), "b-", label="Jacobian norm")
        ax.plot(s, _floats(rows, "bound"), "r--", label="bound")
        ax.fill_between(s, _floats(rows, "actual_norm"), _floats(rows, "bound"), alpha=0.2)
        ax.set_yscale("log")
        ax2.plot(s, _floats(rows, "c_w_factor"), label="weight factor")
        ax2.plot(s, _floats(rows, "delta_factor"), label="saturation factor")
        ax2.set_yscale("log")
        ax2.legend(fontsize=8)
        ax.legend(fontsize=8)
    ax.set_xlabel("s")
    ax.set_title("Jacobian attenuation")
    ax2.set_xlabel("s")
    ax2.set_title("bound decomposition")


def render_obstruction_sweep(paths, ax):
    rows = read_rows(paths[0], "obstruction-sweep")
    series: dict[float, list[tuple[float, float]]] = {}
    ref = None
    for r in rows:
        series.setdefault(float(r["c_multiple"]), []).append(
            (float(r["s"]), float(r["obstruction_bound"]))
        )
        ref = float(r["reference_4pi"])
    for mult in sorted(series):
        pts = sorted(series[mult])
        ax.plot([p[0] for p in pts], [max(p[1], 1e-300) for p in pts], label=f"c = {mult:g} c_min")
    if ref is not None:
        ax.axhline(ref, color="k", linestyle=":", label="exact |ln det|")
    if series:
        ax.set_yscale("log")
        ax.legend(fontsize=8)
    ax.set_xlabel("s")
    ax.set_ylabel("obstruction bound")
    ax.set_title("determinant obstruction vs scale")


def render_phase_portraits(paths, ax):
    for path in paths:
        rows = read_rows(path, "phase-portraits")
        if rows:
            ax.plot(_floats(rows, "x_1"), _floats(rows, "x_2"), lw=0.8)
    theta = [2.0 * math.pi * k / 256.0 for k in range(257)]
    ax.plot([math.cos(t) for t in theta], [math.sin(t) for t in theta], "k--", lw=1.0)
    ax.set_aspect("equal")
    ax.set_xlabel("x_1")
    ax.set_ylabel("x_2")
    ax.set_title("phase portrait (dashed: reference limit cycle)")


def render_refined_comparison(paths, ax_pair):
    rows = read_rows(paths[0], "refined-comparison")
    ax, ax2 = ax_pair
    if rows:
        s = _floats(rows, "s")
        ax.plot(s, _floats(rows, "actual"), "o-", label="actual")
        ax.plot(s, _floats(rows, "refined"), "s-", label="refined")
        ax.plot(s, _floats(rows, "original"), "^-", label="original")
        ax.set_yscale("log")
        ax.legend(fontsize=8)
        ax2.plot(s, _floats(rows, "ratio"), "k.-")
    ax.set_xlabel("s")
    ax.set_title("norm and bounds")
    ax2.set_xlabel("s")
    ax2.set_title("ratio original / refined")


def render_multiplier_window(paths, ax):
    rows = read_rows(paths[0], "multiplier-window")
    if rows:
        s = _floats(rows, "s")
        ax.fill_between(
            s, _floats(rows, "window_lo"), _floats(rows, "window_hi"),
            color="0.8", label="allowed window",
        )
        ax.plot(s, _floats(rows, "mu1_abs"), "bo-", label="|mu_1|")
        ax.plot(s, _floats(rows, "mu2_abs"), "rs-", label="|mu_2|")
        ax.set_yscale("log")
        ax.legend(fontsize=8)
    ax.set_xlabel("s")
    ax.set_ylabel("multiplier modulus")
    ax.set_title("multiplier window collapse")


def render_laj_table(paths, ax):
    rows = read_rows(paths[0], "laj-table")
    ax.axis("off")
    cells = [[r["quantity"], r["numerical"], r["exact_or_floor"]] for r in rows]
    if cells:
        table = ax.table(
            cellText=cells,
            colLabels=["quantity", "numerical", "reference"],
            loc="center",
        )
        table.scale(1.0, 1.4)
    ax.set_title("Liouville identity check")


def render(kind: str, csv_arg: str, out_path: str) -> None:
    if kind not in SCHEMAS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {sorted(SCHEMAS)}")
    paths = sorted(glob.glob(csv_arg)) if any(ch in csv_arg for ch in "*?[") else [csv_arg]
    if not paths:
        raise FileNotFoundError(f"no CSV matches {csv_arg!r}")
    for p in paths:
        if not Path(p).exists():
            raise FileNotFoundError(f"csv not found: {p}")

    two_panel = kind in ("jacobian-attenuation", "refined-comparison")
    if two_panel:
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    else:
        fig, axes = plt.subplots(figsize=(5.2, 4.2))
    try:
        {
            "jacobian-attenuation": render_jacobian_attenuation,
            "obstruction-sweep": render_obstruction_sweep,
            "phase-portraits": render_phase_portraits,
            "refined-comparison": render_refined_comparison,
            "multiplier-window": render_multiplier_window,
            "laj-table": render_laj_table,
        }[kind](paths, axes)
        fig.tight_layout()
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out_path, dpi=120)
    finally:
        plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--kind", required=True, choices=sorted(SCHEMAS))
    parser.add_argument("--csv", required=True, help="CSV path (or glob for phase-portraits)")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        render(args.kind, args.csv, args.out)
    except SchemaMismatch as exc:
        expected, got = exc.expected, exc.got
        print(f"schema mismatch: {exc}", file=sys.stderr)
        print(f"  missing columns: {[c for c in expected if c not in got]}", file=sys.stderr)
        print(f"  unexpected columns: {[c for c in got if c not in expected]}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
