import csv
import json
import math

import numpy as np
import pytest

from floquet_lab import experiments
from floquet_lab.errors import ConfigError
from floquet_lab.experiments import (
    SweepSpec,
    run_illustration_a,
    run_illustration_b,
    run_illustration_c,
    run_illustration_e,
    run_illustration_f,
    run_table_d,
)


def read_csv(path):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return header, rows


def spec_for(tmp_path, **kw):
    base = dict(s_values=(1.0, 3.0, 9.0), orbit_points=100, steps=300, output_dir=str(tmp_path))
    base.update(kw)
    return SweepSpec(**base)


class TestIllustrationA:
    def test_schema_and_bound_dominates(self, quick_base_model, tmp_path):
        spec = spec_for(tmp_path)
        rows = run_illustration_a(quick_base_model, spec)
        header, file_rows = read_csv(tmp_path / "illustration_a" / "attenuation.csv")
        assert header == ["s", "actual_norm", "bound", "c_w_factor", "delta_factor"]
        assert len(file_rows) == len(spec.s_values)
        for s, actual, bound, cw, delta in rows:
            assert bound >= actual - 1e-12
            assert bound == pytest.approx(cw * delta, rel=1e-12)

    def test_c_w_factor_linear_in_s(self, quick_base_model, tmp_path):
        rows = run_illustration_a(quick_base_model, spec_for(tmp_path))
        base = rows[0][3] / rows[0][0]
        for s, _, _, cw, _ in rows:
            assert cw == pytest.approx(base * s, rel=1e-12)

    def test_manifest_written(self, quick_base_model, tmp_path):
        run_illustration_a(quick_base_model, spec_for(tmp_path))
        doc = json.loads((tmp_path / "illustration_a" / "manifest.json").read_text())
        assert doc["experiment"] == "illustration-a"
        assert "weights_sha256" in doc["inputs"]
        assert doc["outputs"] == ["attenuation.csv"]

    def test_deterministic_rerun_overwrites(self, quick_base_model, tmp_path):
        spec = spec_for(tmp_path)
        run_illustration_a(quick_base_model, spec)
        first = (tmp_path / "illustration_a" / "attenuation.csv").read_bytes()
        run_illustration_a(quick_base_model, spec)
        assert (tmp_path / "illustration_a" / "attenuation.csv").read_bytes() == first


class TestIllustrationB:
    def test_schema_and_reference_line(self, quick_base_model, tmp_path):
        spec = spec_for(tmp_path, s_values=tuple(float(s) for s in np.geomspace(1, 30, 8)))
        rows = run_illustration_b(quick_base_model, spec)
        header, _ = read_csv(tmp_path / "illustration_b" / "obstruction.csv")
        assert header == ["s", "c_multiple", "obstruction_bound", "reference_4pi"]
        assert all(row[3] == pytest.approx(4 * math.pi) for row in rows)
        assert len(rows) == 8 * len(spec.c_offsets)

    def test_zero_offset_grows_large_offset_collapses(self, quick_base_model, tmp_path):
        spec = spec_for(tmp_path, s_values=tuple(float(s) for s in np.geomspace(1, 30, 10)))
        rows = run_illustration_b(quick_base_model, spec)
        by_mult = {}
        for s, mult, bound, _ in rows:
            by_mult.setdefault(mult, []).append((s, bound))
        top = [b for _, b in sorted(by_mult[0.0])]
        upper = top[len(top) // 2 :]
        assert all(upper[i + 1] >= upper[i] - 1e-9 for i in range(len(upper) - 1))
        assert min(b for _, b in by_mult[6.0]) < 1e-2


class TestIllustrationC:
    def test_summary_and_trajectories(self, quick_protocol_model, tmp_path):
        spec = spec_for(tmp_path, s_values=(1.0, 15.0))
        summary = run_illustration_c(quick_protocol_model, spec)
        out = tmp_path / "illustration_c"
        header, rows = read_csv(out / "summary.csv")
        assert header == ["s", "delta", "ln_det", "det"]
        assert len(rows) == 2
        # det -> 1 as delta -> 0
        assert abs(summary[1][3] - 1.0) < abs(summary[0][3] - 1.0) + 1e-9
        assert summary[1][1] < summary[0][1]
        exact_header, exact_rows = read_csv(out / "exact_panel.csv")
        assert exact_header == ["ln_det", "det"]
        assert float(exact_rows[0][0]) == pytest.approx(-4 * math.pi, abs=1e-3)
        trajs = sorted(out.glob("trajectory_exact_*.csv"))
        assert len(trajs) == 12
        header, rows = read_csv(trajs[0])
        assert header == ["t", "x_1", "x_2"]


class TestTableD:
    def test_values_match_references(self, tmp_path):
        rows = run_table_d(str(tmp_path), steps=4000)
        vals = {name: (num, exact) for name, num, exact in rows}
        assert vals["trace_on_orbit"][0] == pytest.approx(-2.0, abs=1e-5)
        assert vals["trace_integral"][0] == pytest.approx(-12.56637, abs=1e-3)
        assert vals["det_monodromy"][0] == pytest.approx(3.4873e-6, rel=1e-2)
        assert vals["abs_ln_det"][0] == pytest.approx(4 * math.pi, abs=1e-3)
        assert vals["obstruction_bound_dCT"][0] == pytest.approx(30.34, abs=5e-3)
        assert vals["obstruction_bound_dCT"][0] >= 4 * math.pi
        header, _ = read_csv(tmp_path / "table_d" / "laj_identity.csv")
        assert header == ["quantity", "numerical", "exact_or_floor"]


class TestIllustrationE:
    def test_schema_and_chain(self, quick_base_model, tmp_path):
        spec = spec_for(tmp_path, s_values=(1.0, 10.0, 30.0))
        rows = run_illustration_e(quick_base_model, spec)
        header, _ = read_csv(tmp_path / "illustration_e" / "refined_comparison.csv")
        assert header == ["s", "actual", "refined", "original", "ratio", "delta"]
        for s, actual, refined, original, ratio, delta in rows:
            assert actual <= refined + 1e-12 * max(1.0, refined)
            assert refined <= original + 1e-12 * max(1.0, original)
            assert ratio == pytest.approx(original / refined, rel=1e-12)
            assert 0.0 <= delta <= 1.0


class TestIllustrationF:
    def test_schema_and_containment(self, quick_protocol_model, tmp_path):
        spec = spec_for(tmp_path, s_values=(1.0, 4.0))
        rows = run_illustration_f(quick_protocol_model, spec)
        header, _ = read_csv(tmp_path / "illustration_f" / "multiplier_windows.csv")
        assert header == ["s", "delta", "c_of_u", "mu1_abs", "mu2_abs", "window_lo", "window_hi"]
        for s, delta, c, mu1, mu2, lo, hi in rows:
            assert lo == pytest.approx(math.exp(-c * 2 * math.pi), rel=1e-12)
            assert hi == pytest.approx(math.exp(c * 2 * math.pi), rel=1e-12)
            assert lo * (1 - 1e-9) <= mu2 <= mu1 <= hi * (1 + 1e-9)


class TestRunExperiment:
    def test_unknown_name_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            experiments.run_experiment("illustration-z", str(tmp_path))

    def test_table_d_via_dispatcher(self, tmp_path):
        rows = experiments.run_experiment("table-d", str(tmp_path), steps=500)
        assert len(rows) == 5

    def test_overrides_and_model_cache(self, tmp_path):
        overrides = {
            "train": {"hidden_width": 8, "epochs": 30, "n_samples": 64},
            "s_values": [1.0, 2.0],
            "orbit_points": 32,
        }
        experiments.run_experiment(
            "illustration-e", str(tmp_path), steps=100, overrides=overrides
        )
        models = list((tmp_path / "models").glob("*.json"))
        assert len(models) == 1
        # second run reuses the cached weight file
        experiments.run_experiment(
            "illustration-e", str(tmp_path), steps=100, overrides=overrides
        )
        assert len(list((tmp_path / "models").glob("*.json"))) == 1

    def test_float_formatting_nine_significant_digits(self, tmp_path):
        experiments.run_table_d(str(tmp_path), steps=200)
        _, rows = read_csv(tmp_path / "table_d" / "laj_identity.csv")
        for row in rows:
            for cell in row[1:]:
                mantissa = cell.replace("-", "").replace(".", "").split("e")[0].lstrip("0")
                assert len(mantissa) <= 9

    def test_thread_cap_keeps_output_identical(self, quick_base_model, tmp_path, monkeypatch):
        serial_dir = tmp_path / "serial"
        threaded_dir = tmp_path / "threaded"
        spec = dict(s_values=(1.0, 3.0, 9.0, 27.0), orbit_points=64, steps=100)
        run_illustration_e(quick_base_model, SweepSpec(output_dir=str(serial_dir), **spec))
        monkeypatch.setenv("FLOQUET_LAB_THREADS", "4")
        run_illustration_e(quick_base_model, SweepSpec(output_dir=str(threaded_dir), **spec))
        a = (serial_dir / "illustration_e" / "refined_comparison.csv").read_bytes()
        b = (threaded_dir / "illustration_e" / "refined_comparison.csv").read_bytes()
        assert a == b
