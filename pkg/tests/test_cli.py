"""End-to-end command checks: schemas, determinism, exit codes."""

import json

import numpy as np
import pytest

from paraotoc.cli import main

OTOC_CFG = dict(n_spins=3, j=2, k=5, t_max=0.2, dt=0.02, stride=0.1, chi=16)


def write_config(path, section, **keys):
    lines = [f"[{section}]"]
    for key, value in keys.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(x) for x in value)
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_meta(out_dir, command):
    stem = command.replace("-", "_")
    with open(out_dir / f"{stem}_meta.json", encoding="utf-8") as fh:
        return json.load(fh)


def strip_volatile(meta):
    return {k: v for k, v in meta.items() if k != "wall_time_seconds"}


class TestOtocCommand:
    def test_schema_and_meta(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "otoc", **OTOC_CFG)
        out = tmp_path / "run"
        assert main(["otoc", "--config", str(cfg), "--out", str(out)]) == 0
        lines = (out / "otoc.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "t,re_f,im_f,c,trunc_weight"
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert abs(float(first[1]) - 1.0) < 1e-12
        meta = read_meta(out, "otoc")
        assert meta["status"] == "ok"
        assert meta["config"]["chi"] == 16
        assert meta["config"]["model"] == "hopping"
        assert "wall_time_seconds" in meta
        script = (out / "plot_otoc.py").read_text(encoding="utf-8")
        compile(script, "plot_otoc.py", "exec")

    def test_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "otoc", **OTOC_CFG)
        out = tmp_path / "run"
        assert main(["otoc", "--config", str(cfg), "--out", str(out),
                     "--chi", "8", "--method", "ed"]) == 0
        meta = read_meta(out, "otoc")
        assert meta["config"]["chi"] == 8
        assert meta["config"]["method"] == "ed"

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "otoc", **OTOC_CFG)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["otoc", "--config", str(cfg), "--out", str(out)]) == 0
            outs.append(out)
        csv_a = (outs[0] / "otoc.csv").read_bytes()
        csv_b = (outs[1] / "otoc.csv").read_bytes()
        assert csv_a == csv_b
        assert strip_volatile(read_meta(outs[0], "otoc")) == strip_volatile(
            read_meta(outs[1], "otoc"))

    def test_meta_config_round_trips(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "otoc", **OTOC_CFG)
        first = tmp_path / "first"
        assert main(["otoc", "--config", str(cfg), "--out", str(first)]) == 0
        echoed = read_meta(first, "otoc")["config"]
        cfg2 = tmp_path / "echo.ini"
        write_config(cfg2, "otoc", **echoed)
        second = tmp_path / "second"
        assert main(["otoc", "--config", str(cfg2), "--out", str(second)]) == 0
        assert (first / "otoc.csv").read_bytes() == (
            second / "otoc.csv").read_bytes()


class TestOtherCommands:
    def test_lightcone_outputs(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "lightcone", n_spins=3, j=3, ks=[1, 5], t_max=0.2,
                     dt=0.02, stride=0.1, chi=16, interpolation="nearest")
        out = tmp_path / "run"
        assert main(["lightcone", "--config", str(cfg), "--out", str(out)]) == 0
        lines = (out / "lightcone.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "t,k,re_f,c"
        # 3 record times x 2 probes
        assert len(lines) == 1 + 3 * 2
        script = (out / "plot_lightcone.py").read_text(encoding="utf-8")
        assert 'interpolation="nearest"' in script
        compile(script, "plot_lightcone.py", "exec")

    def test_levels_outputs(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "levels", n_spins=5, t2=0.5)
        out = tmp_path / "run"
        assert main(["levels", "--config", str(cfg), "--out", str(out)]) == 0
        spacing_lines = (out / "levels_spacings.csv").read_text(
            encoding="utf-8").splitlines()
        assert spacing_lines[0] == "s"
        assert len(spacing_lines) > 50
        hist_lines = (out / "levels_histogram.csv").read_text(
            encoding="utf-8").splitlines()
        assert hist_lines[0] == "bin_left,bin_right,density"
        assert len(hist_lines) == 1 + 40
        meta = read_meta(out, "levels")
        assert 0.3 < meta["results"]["r_mean"] < 0.7
        compile((out / "plot_levels.py").read_text(encoding="utf-8"),
                "plot_levels.py", "exec")

    def test_zeromode_outputs(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "zeromode", n_spins=3, j2=0.2, t_max=0.4, dt=0.02,
                     stride=0.2, chi=16, sizes=[4, 6], horizon=50)
        out = tmp_path / "run"
        assert main(["zeromode", "--config", str(cfg), "--out", str(out)]) == 0
        grid_lines = (out / "zeromode_grid.csv").read_text(
            encoding="utf-8").splitlines()
        assert grid_lines[0] == "t,k,re_f"
        time_lines = (out / "zeromode_times.csv").read_text(
            encoding="utf-8").splitlines()
        assert time_lines[0] == "L,t_star"
        stars = [float(line.split(",")[1]) for line in time_lines[1:]]
        assert stars[1] > stars[0] > 0
        meta = read_meta(out, "zeromode")
        assert meta["results"]["far_mode"] == 6
        assert meta["results"]["far_min_re_f"] > 0.8
        compile((out / "plot_zeromode.py").read_text(encoding="utf-8"),
                "plot_zeromode.py", "exec")

    def test_butterfly_worker_pool_is_order_insensitive(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        base = dict(n_spins=6, j=6, ks=[1, 2, 3, 9, 10, 11], t_max=4.0,
                    dt=0.05, stride=0.25, chi=16, sweep_values=[0.3, 0.5])
        write_config(cfg, "butterfly", **base, workers=1)
        serial = tmp_path / "serial"
        assert main(["butterfly", "--config", str(cfg),
                     "--out", str(serial)]) == 0
        parallel = tmp_path / "parallel"
        assert main(["butterfly", "--config", str(cfg), "--out", str(parallel),
                     "--workers", "2"]) == 0
        assert (serial / "butterfly.csv").read_bytes() == (
            parallel / "butterfly.csv").read_bytes()
        lines = (serial / "butterfly.csv").read_text(
            encoding="utf-8").splitlines()
        assert lines[0] == "sweep_value,v_left,v_right,ratio,stderr_l,stderr_r"
        assert len(lines) == 3

    def test_bench_ed_runs(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "bench-ed", sizes=[2, 3], t_max=0.5)
        out = tmp_path / "run"
        assert main(["bench-ed", "--config", str(cfg), "--out", str(out)]) == 0
        lines = (out / "bench_ed.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == ("n_spins,hilbert_dim,max_err_direct,"
                            "max_err_timesplit")
        dims = [int(line.split(",")[1]) for line in lines[1:]]
        assert dims == [9, 27]
        worst = max(float(x) for line in lines[1:]
                    for x in line.split(",")[2:])
        assert worst < 1e-2
        timing_lines = (out / "bench_ed_timings.csv").read_text(
            encoding="utf-8").splitlines()
        assert timing_lines[0] == "n_spins,t_ed_s,t_mpo_s"
        assert len(timing_lines) == 3
        meta = read_meta(out, "bench_ed")
        assert meta["results"]["max_err"] == pytest.approx(worst, rel=1e-10)


class TestFailureModes:
    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "otoc", chl=16)
        assert main(["otoc", "--config", str(cfg),
                     "--out", str(tmp_path / "x")]) == 2

    def test_missing_config_file_exits_2(self, tmp_path):
        assert main(["otoc", "--config", str(tmp_path / "nope.ini"),
                     "--out", str(tmp_path / "x")]) == 2

    def test_bad_model_value_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "otoc", model="ising")
        assert main(["otoc", "--config", str(cfg),
                     "--out", str(tmp_path / "x")]) == 2

    def test_inapplicable_flag_exits_2(self, tmp_path):
        assert main(["levels", "--chi", "8",
                     "--out", str(tmp_path / "x")]) == 2

    def test_numerical_failure_marks_meta_and_exits_3(self, tmp_path):
        # too few levels in a sector for spacing statistics
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "levels", n_spins=4)
        out = tmp_path / "run"
        assert main(["levels", "--config", str(cfg), "--out", str(out)]) == 3
        meta = read_meta(out, "levels")
        assert meta["status"] == "FAILED"
        assert "error" in meta

    def test_butterfly_failure_preserves_partial_output(self, tmp_path):
        # nothing crosses the wavefront threshold in so short a window
        cfg = tmp_path / "cfg.ini"
        write_config(cfg, "butterfly", n_spins=4, j=4, ks=[1, 2, 3, 5, 6, 7],
                     t_max=0.1, dt=0.05, stride=0.05, chi=8,
                     sweep_values=[0.5])
        out = tmp_path / "run"
        assert main(["butterfly", "--config", str(cfg),
                     "--out", str(out)]) == 3
        lines = (out / "butterfly.csv").read_text(
            encoding="utf-8").splitlines()
        assert lines[0].startswith("sweep_value")
        meta = read_meta(out, "butterfly")
        assert meta["status"] == "FAILED"
        assert "wavefront" in meta["error"] or "arrivals" in meta["error"]

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as info:
            main(["warp"])
        assert info.value.code == 2
