"""Config parsing, file formats, CLI commands and exit codes."""

import math
import os

import numpy as np
import pytest

from stripwave import cli
from stripwave.continuation import (BranchKind, SolverOptions, continue_branch,
                                    switch_branch, track_eigenvalue,
                                    trivial_branch)
from stripwave.errors import ConfigError
from stripwave.fileio import (RunConfig, config_lines, parse_config_text,
                              read_branch, read_field, read_stagnation,
                              write_branch, write_field, write_stagnation)
from stripwave.residual import PhysicalParams


class TestConfigParsing:
    def test_defaults(self):
        cfg = parse_config_text("")
        assert cfg.g == 9.8 and cfg.N == 64 and cfg.M == 512
        assert cfg.sign == 1 and cfg.kind == "one-mode"

    def test_values_and_comments(self):
        cfg = parse_config_text(
            "# a comment\n"
            "beta = 10.0\n"
            "n = 2\n"
            "sign = -  # trailing comment\n"
            "M = 128\nN = 16\n")
        assert cfg.beta == 10.0 and cfg.n == 2 and cfg.sign == -1
        assert cfg.M == 128 and cfg.N == 16

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config_text("newton_tolerance = 1e-10\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("n = 1\nn = 2\n")

    def test_bad_number(self):
        with pytest.raises(ConfigError, match="needs a number"):
            parse_config_text("g = fast\n")

    def test_bad_sign(self):
        with pytest.raises(ConfigError, match="sign"):
            parse_config_text("sign = up\n")

    def test_tolerances_positive(self):
        with pytest.raises(ConfigError):
            parse_config_text("newton_tol = 0\n")

    def test_truncation_state(self):
        with pytest.raises(ConfigError, match="N <= M/2"):
            parse_config_text("M = 64\nN = 64\n")
        with pytest.raises(ConfigError, match="power of two"):
            parse_config_text("M = 100\n")

    def test_direction_normalization(self):
        near = 1.0 / math.sqrt(2.0) * (1.0 + 1e-8)
        with pytest.warns(UserWarning, match="normalizing"):
            cfg = parse_config_text(f"a = {near!r}\nb = {near!r}\n")
        assert cfg.a ** 2 + cfg.b ** 2 == pytest.approx(1.0, abs=1e-15)

    def test_direction_error_when_far_off(self):
        with pytest.raises(ConfigError, match="a\\^2 \\+ b\\^2"):
            parse_config_text("a = 1.0\nb = 1.0\n")

    def test_physical_validation(self):
        with pytest.raises(ConfigError):
            parse_config_text("B = -1\n")


SMALL = "M = 128\nN = 16\nL = 33\n"


def small_config(extra=""):
    return parse_config_text(SMALL + extra)


class TestBranchFiles:
    def make_branch(self, cfg):
        params = cfg.params()
        opts = cfg.options()
        branch = trivial_branch(cfg.n, cfg.sign, cfg.beta, 0.2, 4, params, opts)
        return track_eigenvalue(branch, params, opts)

    def test_round_trip(self, tmp_path):
        cfg = small_config()
        branch = self.make_branch(cfg)
        path = tmp_path / "branch.csv"
        write_branch(path, branch, cfg, cfg.N)
        loaded = read_branch(path)
        assert loaded.n_rows == 5
        assert loaded.coeffs.shape == (5, cfg.N)
        np.testing.assert_array_equal(
            loaded.column("lambda"),
            [p.state.lam for p in branch.points])
        np.testing.assert_array_equal(
            loaded.column("leading_eig"),
            [p.leading_eig for p in branch.points])
        assert loaded.column("stability") == [p.stability for p in branch.points]
        assert loaded.config["M"] == "128"
        assert "kind" in loaded.meta

    def test_header_embeds_full_config(self, tmp_path):
        cfg = small_config()
        path = tmp_path / "branch.csv"
        write_branch(path, self.make_branch(cfg), cfg, cfg.N)
        text = path.read_text()
        for line in config_lines(cfg):
            assert f"# config: {line}" in text
        assert "# version = " in text

    def test_failure_footer(self, tmp_path):
        cfg = small_config()
        branch = self.make_branch(cfg)
        branch.failure = "step floor reached"
        path = tmp_path / "branch.csv"
        write_branch(path, branch, cfg, cfg.N)
        loaded = read_branch(path)
        assert "step floor reached" in loaded.failure


class TestFieldFiles:
    def test_round_trip(self, tmp_path):
        from stripwave.flowfield import harmonic_extension
        from stripwave.spectral import PeriodicField
        cfg = small_config()
        boundary = PeriodicField.from_callable(
            lambda x: 1.0 + 0.1 * np.cos(x), cfg.M)
        field = harmonic_extension(boundary, 1.0, cfg.L)
        path = tmp_path / "field.csv"
        write_field(path, field, "V", cfg)
        meta, values = read_field(path)
        assert meta["field"] == "V"
        np.testing.assert_array_equal(values, field.values)

    def test_stagnation_round_trip(self, tmp_path):
        from stripwave.flowfield import StagnationPoint
        cfg = small_config()
        pts = [StagnationPoint(0.0, -0.85, 0.0, 0.15, 1e-14, -2.5, True,
                               "interior")]
        path = tmp_path / "stag.csv"
        write_stagnation(path, pts, cfg)
        rows = read_stagnation(path)
        assert rows[0]["Y"] == 0.15 and rows[0]["refined"] is True
        assert rows[0]["kind"] == "interior"


class TestCli:
    def test_dispersion_command(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(SMALL + "n_max = 3\n")
        out = tmp_path / "out"
        assert cli.main(["dispersion", "--config", str(cfg_path),
                         "--out", str(out)]) == 0
        text = (out / "dispersion.csv").read_text()
        rows = [l for l in text.splitlines()
                if l and not l.startswith("#")][1:]
        assert len(rows) == 3
        for row in rows:
            fields = row.split(",")
            assert float(fields[2]) > 0     # lambda_plus
            assert float(fields[3]) < 0     # lambda_minus

    def test_dispersion_empty_range(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(SMALL + "n_max = 0\n")
        out = tmp_path / "out"
        assert cli.main(["dispersion", "--config", str(cfg_path),
                         "--out", str(out)]) == 0
        rows = [l for l in (out / "dispersion.csv").read_text().splitlines()
                if l and not l.startswith("#")]
        assert len(rows) == 1  # header row only

    def test_resonance_command_and_symmetry(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(SMALL + "n_max = 3\n")
        out = tmp_path / "out"
        assert cli.main(["resonance", "--config", str(cfg_path),
                         "--out", str(out)]) == 0
        rows = [l.split(",") for l in
                (out / "resonance.csv").read_text().splitlines()
                if l and not l.startswith("#")][1:]
        table = {(int(r[0]), int(r[1])): float(r[2]) for r in rows}
        assert len(table) == 6
        for (n, m), value in table.items():
            assert value > 0
            assert value == pytest.approx(table[(m, n)], rel=1e-13)

    def test_resonance_requires_surface_tension(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(SMALL + "sigma = 0.0\n")
        assert cli.main(["resonance", "--config", str(cfg_path),
                         "--out", str(tmp_path / "o")]) == 2

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text("frobnicate = 1\n")
        assert cli.main(["dispersion", "--config", str(cfg_path),
                         "--out", str(tmp_path / "o")]) == 2

    def test_numerical_failure_exits_3(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(SMALL + "newton_tol = 1e-30\n")
        assert cli.main(["trace", "--config", str(cfg_path),
                         "--out", str(tmp_path / "o")]) == 3

    def test_io_failure_exits_4(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        assert cli.main(["dispersion", "--out", str(blocker / "sub")]) == 4

    def test_trace_trivial_kind_records_exchange(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(SMALL + "kind = trivial\nK = 8\nwindow = 0.3\n")
        out = tmp_path / "out"
        assert cli.main(["trace", "--config", str(cfg_path),
                         "--out", str(out)]) == 0
        loaded = read_branch(out / "trace.csv")
        labels = loaded.column("stability")
        assert "unstable" in labels and "stable" in labels
        eigs = loaded.column("leading_eig")
        assert eigs[0] > 0 > eigs[-1]

    def test_trace_out_of_range_exits_2(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(SMALL + "lambda_min = 8.0\nlambda_max = 9.0\n")
        assert cli.main(["trace", "--config", str(cfg_path),
                         "--out", str(tmp_path / "o")]) == 2

    def test_trace_flow_pipeline(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(SMALL + "beta = 10.0\ns0 = 0.005\nK = 2\n")
        out = tmp_path / "out"
        assert cli.main(["trace", "--config", str(cfg_path),
                         "--out", str(out)]) == 0
        branch_path = out / "trace.csv"
        assert cli.main(["flow", "--config", str(cfg_path),
                         "--out", str(out), "--branch", str(branch_path),
                         "--index", "2"]) == 0
        for name in ("U", "V", "psi", "psiX", "psiY"):
            assert (out / f"flow_{name}.csv").exists()
        meta, psi = read_field(out / "flow_psi.csv")
        assert np.max(np.abs(psi[-1, :])) < 1e-10  # surface trace
        rows = read_stagnation(out / "stagnation.csv")
        assert rows, "expected interior stagnation points at beta = 10"
        assert (out / "critical_layers.csv").exists()

    def test_flow_needs_branch_and_index(self, tmp_path):
        assert cli.main(["flow", "--out", str(tmp_path / "o")]) == 2
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(SMALL + "kind = trivial\nK = 2\n")
        out = tmp_path / "out"
        assert cli.main(["trace", "--config", str(cfg_path),
                         "--out", str(out)]) == 0
        assert cli.main(["flow", "--out", str(out), "--branch",
                         str(out / "trace.csv"), "--index", "99"]) == 2

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(SMALL + "kind = trivial\nK = 4\n")
        outputs = []
        for name in ("one", "two"):
            out = tmp_path / name
            assert cli.main(["trace", "--config", str(cfg_path),
                             "--out", str(out)]) == 0
            assert cli.main(["dispersion", "--config", str(cfg_path),
                             "--out", str(out)]) == 0
            outputs.append(out)
        for fname in ("trace.csv", "dispersion.csv"):
            a = (outputs[0] / fname).read_bytes()
            b = (outputs[1] / fname).read_bytes()
            assert a == b
