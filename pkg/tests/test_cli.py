"""Tests for the command line interface."""

import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from lorp import __version__
from lorp.cli import (
    dump_json,
    format_float,
    main,
    parse_bounds,
    parse_grid,
    parse_values,
    read_dataset,
)
from lorp.exceptions import ValidationError


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def two_point_csv(tmp_path):
    path = tmp_path / "two.csv"
    path.write_text("x,y\n1,1\n2,2\n")
    return str(path)


@pytest.fixture
def smooth_csv(tmp_path):
    rng = np.random.default_rng(0)
    x = np.sort(rng.uniform(size=25))
    y = np.sin(6.0 * x) + 0.2 * rng.standard_normal(25)
    lines = ["x,y"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(x, y)]
    path = tmp_path / "smooth.csv"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestParsers:
    def test_integer_range(self):
        assert parse_grid("2:5") == (2, 3, 4, 5)

    def test_log_spaced(self):
        grid = parse_grid("1e-4:1:5")
        assert len(grid) == 5
        np.testing.assert_allclose(grid, np.geomspace(1e-4, 1.0, 5))

    def test_literal_list_keeps_integer_types(self):
        grid = parse_grid("1, 2.5 ,7")
        assert grid == (1, 2.5, 7)
        assert isinstance(grid[0], int) and isinstance(grid[1], float)

    @pytest.mark.parametrize("bad", ["", "5:2", "a,b", "1:2:3:4", "0:1:3", ","])
    def test_bad_grids(self, bad):
        with pytest.raises(ValidationError):
            parse_grid(bad)

    def test_bounds(self):
        assert parse_bounds("0:2, -1:1") == [(0.0, 2.0), (-1.0, 1.0)]
        for bad in ["1", "a:b", ""]:
            with pytest.raises(ValidationError):
                parse_bounds(bad)

    def test_values(self):
        assert parse_values("1, 2", "v") == [1.0, 2.0]
        with pytest.raises(ValidationError):
            parse_values("x", "v")
        with pytest.raises(ValidationError):
            parse_values("", "v")


class TestSerialisation:
    def test_floats_round_trip(self):
        payload = {"a": 0.1, "b": [1.0 / 3.0, 2], "c": {"d": None, "e": True}}
        text = dump_json(payload)
        back = json.loads(text)
        assert back["a"] == 0.1 and back["b"][0] == 1.0 / 3.0
        assert back["b"][1] == 2 and back["c"] == {"d": None, "e": True}

    def test_deterministic_output(self):
        payload = {"z": 1.5, "a": [3, 2]}
        assert dump_json(payload) == dump_json({"z": 1.5, "a": [3, 2]})

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            format_float(math.nan)
        with pytest.raises(ValidationError):
            dump_json({"v": math.inf})

    def test_unsupported_type_rejected(self):
        with pytest.raises(ValidationError):
            dump_json({"v": object()})


class TestReadDataset:
    def test_reads_covariates_then_response(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b,y\n1,2,3\n4,5,6\n\n7,8,9\n")
        data = read_dataset(str(path))
        assert data.x.shape == (3, 2)
        np.testing.assert_array_equal(data.y, [3.0, 6.0, 9.0])

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        with pytest.raises(ValidationError, match="empty"):
            read_dataset(str(path))

    def test_single_column(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("y\n1\n2\n")
        with pytest.raises(ValidationError):
            read_dataset(str(path))

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("x,y\n1,2\n3\n")
        with pytest.raises(ValidationError, match="expected 2 fields"):
            read_dataset(str(path))

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "n.csv"
        path.write_text("x,y\n1,two\n3,4\n")
        with pytest.raises(ValidationError, match="non-numeric"):
            read_dataset(str(path))

    def test_too_few_rows(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("x,y\n1,2\n")
        with pytest.raises(ValidationError, match="two data rows"):
            read_dataset(str(path))


class TestSelectCommand:
    def test_knn_selection(self, runner, smooth_csv):
        res = runner.invoke(main, ["select", smooth_csv, "--family", "knn",
                                   "--grid", "2:6"])
        assert res.exit_code == 0
        assert "candidate 2: score" in res.output
        assert "selected knn complexity" in res.output

    def test_report_file(self, runner, smooth_csv, tmp_path):
        out = tmp_path / "report.json"
        res = runner.invoke(main, ["select", smooth_csv, "--family", "knn",
                                   "--grid", "2:6", "--out", str(out)])
        assert res.exit_code == 0
        report = json.loads(out.read_text())
        assert report["manifest"]["command"] == "select"
        assert report["manifest"]["package_version"] == __version__
        assert report["manifest"]["format_version"] == 1
        assert report["n"] == 25 and report["p"] == 1
        assert report["best"]["complexity"] in range(2, 7)
        assert len(report["fitted_values"]) == 25
        assert len(report["candidates"]) == 5

    def test_reports_are_byte_identical(self, runner, smooth_csv, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            res = runner.invoke(main, ["select", smooth_csv, "--family", "spline",
                                       "--grid", "1e-4:1e-1:4", "--out", str(out)])
            assert res.exit_code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_extra_criteria_columns(self, runner, smooth_csv, tmp_path):
        out = tmp_path / "crit.json"
        res = runner.invoke(main, ["select", smooth_csv, "--grid", "3,5",
                                   "--criteria", "gcv,aic,bic", "--out", str(out)])
        assert res.exit_code == 0
        report = json.loads(out.read_text())
        for entry in report["candidates"]:
            assert {"gcv", "aic", "bic"} <= set(entry)

    def test_unknown_criterion(self, runner, smooth_csv):
        res = runner.invoke(main, ["select", smooth_csv, "--criteria", "mdl"])
        assert res.exit_code == 2

    def test_discrete_domain_ranks(self, runner, two_point_csv):
        res = runner.invoke(main, ["select", two_point_csv, "--family", "poly",
                                   "--grid", "0,1,2", "--y-domain", "0,1,2"])
        assert res.exit_code == 0
        assert "candidate 0: score 8" in res.output
        assert "candidate 1: score 7" in res.output
        assert "candidate 2: score 9" in res.output
        assert "selected poly complexity 1" in res.output

    def test_seed_from_environment(self, runner, smooth_csv, tmp_path):
        out = tmp_path / "seeded.json"
        res = runner.invoke(main, ["select", smooth_csv, "--grid", "3",
                                   "--out", str(out)], env={"LORP_SEED": "42"})
        assert res.exit_code == 0
        assert json.loads(out.read_text())["manifest"]["seed"] == 42

    def test_seed_flag_beats_environment(self, runner, smooth_csv, tmp_path):
        out = tmp_path / "seeded.json"
        res = runner.invoke(main, ["select", smooth_csv, "--grid", "3",
                                   "--seed", "7", "--out", str(out)],
                            env={"LORP_SEED": "42"})
        assert res.exit_code == 0
        assert json.loads(out.read_text())["manifest"]["seed"] == 7

    def test_missing_file_is_usage_error(self, runner):
        res = runner.invoke(main, ["select", "/nonexistent.csv"])
        assert res.exit_code == 2

    def test_malformed_csv_exits_2(self, runner, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1,zebra\n2,3\n")
        res = runner.invoke(main, ["select", str(path)])
        assert res.exit_code == 2
        assert "non-numeric" in res.stderr

    def test_degenerate_grid_exits_3(self, runner, tmp_path):
        path = tmp_path / "line.csv"
        path.write_text("x,y\n0,1\n1,2\n2,5\n")
        res = runner.invoke(main, ["select", str(path), "--family", "poly",
                                   "--grid", "0", "--alpha-mode", "projective"])
        assert res.exit_code == 3

    def test_fixed_mode_without_alpha_exits_2(self, runner, smooth_csv):
        res = runner.invoke(main, ["select", smooth_csv, "--grid", "3",
                                   "--alpha-mode", "fixed"])
        assert res.exit_code == 2


class TestBenchCommand:
    def test_figure_protocol_csv(self, runner):
        args = ["bench", "figure1-knn", "--n", "30", "--reps", "2",
                "--grid", "2,4", "--seed", "5"]
        res = runner.invoke(main, args)
        assert res.exit_code == 0
        lines = res.output.strip().splitlines()
        assert lines[0] == "protocol,replication,complexity,lorp,gcv,epe"
        assert len(lines) == 1 + 2 * 2
        again = runner.invoke(main, args)
        assert again.output == res.output

    def test_table1_summary(self, runner):
        res = runner.invoke(main, ["bench", "table1", "--n", "40", "--d", "2",
                                   "--snr", "5", "--reps", "4"])
        assert res.exit_code == 0
        lines = res.output.strip().splitlines()
        assert len(lines) == 4
        assert {line.split(",")[6] for line in lines[1:]} == {"lorp", "aic", "bic"}

    def test_table1_needs_d(self, runner):
        res = runner.invoke(main, ["bench", "table1", "--n", "40", "--snr", "5",
                                   "--reps", "2"])
        assert res.exit_code == 2

    def test_output_files(self, runner, tmp_path):
        prefix = tmp_path / "cell"
        res = runner.invoke(main, ["bench", "figure1-knn", "--n", "30", "--reps",
                                   "2", "--grid", "2,4", "--out", str(prefix)])
        assert res.exit_code == 0
        csv_text = (tmp_path / "cell.csv").read_text()
        assert csv_text == res.output
        report = json.loads((tmp_path / "cell.json").read_text())
        assert report["manifest"]["command"] == "bench"
        assert report["manifest"]["parameters"]["protocol"] == "figure1_knn"
        assert "median_selected_lorp" in report["result"]["metrics"]

    def test_seed_from_environment(self, runner, tmp_path):
        prefix = tmp_path / "seeded"
        res = runner.invoke(main, ["bench", "figure1-knn", "--n", "30",
                                   "--reps", "2", "--grid", "2,4",
                                   "--out", str(prefix)], env={"LORP_SEED": "9"})
        assert res.exit_code == 0
        report = json.loads((tmp_path / "seeded.json").read_text())
        assert report["manifest"]["seed"] == 9
        assert report["manifest"]["parameters"]["seed"] == 9


class TestGridConstantsCommand:
    def test_finite_constant(self, runner):
        res = runner.invoke(main, ["grid-constants", "--n1", "15", "--k1", "3"])
        assert res.exit_code == 0
        lines = res.output.strip().splitlines()
        assert lines[0] == "quantity,n1,k1,dim,value"
        name, n1, k1, dim, value = lines[1].split(",")
        assert name == "c_exact" and (n1, k1, dim) == ("15", "3", "1")
        assert float(value) == pytest.approx(1.9928943278298252, rel=1e-12)

    def test_torus_with_taylor(self, runner):
        res = runner.invoke(main, ["grid-constants", "--n1", "15", "--k1", "3",
                                   "--dim", "2", "--s-max", "50"])
        assert res.exit_code == 0
        lines = res.output.strip().splitlines()
        assert lines[1].startswith("c_torus") and lines[2].startswith("c_taylor")
        torus = float(lines[1].split(",")[4])
        taylor = float(lines[2].split(",")[4])
        assert taylor == pytest.approx(torus, abs=1e-4)

    def test_limits(self, runner):
        res = runner.invoke(main, ["grid-constants", "--limit", "--k1", "3",
                                   "--limit-inf", "--dim-inf"])
        assert res.exit_code == 0
        lines = res.output.strip().splitlines()
        values = {line.split(",")[0]: float(line.split(",")[4]) for line in lines[1:]}
        assert values["c_limit_k"] == pytest.approx(3.0 * math.log(3.0), abs=1e-10)
        assert values["c_limit"] == pytest.approx(3.2030757304897302, abs=1e-9)
        assert values["c_dim_inf"] == 1.5

    def test_no_work_requested(self, runner):
        res = runner.invoke(main, ["grid-constants"])
        assert res.exit_code == 2

    def test_limit_needs_k1(self, runner):
        res = runner.invoke(main, ["grid-constants", "--limit"])
        assert res.exit_code == 2

    def test_even_k1_rejected(self, runner):
        res = runner.invoke(main, ["grid-constants", "--limit", "--k1", "4"])
        assert res.exit_code == 2


class TestOracleCommand:
    def test_rank_mode_reproduces_enumeration(self, runner, two_point_csv):
        res = runner.invoke(main, ["oracle", "rank", two_point_csv, "--family",
                                   "poly", "--grid", "0,1,2",
                                   "--y-domain", "0,1,2"])
        assert res.exit_code == 0
        lines = res.output.strip().splitlines()
        assert lines[0] == "complexity,rank"
        assert [line.split(",")[1] for line in lines[1:]] == ["8", "7", "9"]

    def test_volume_mode(self, runner, two_point_csv):
        res = runner.invoke(main, ["oracle", "volume", two_point_csv, "--family",
                                   "poly", "--grid", "1", "--bounds", "0:2,0:2",
                                   "--eps", "0.02"])
        assert res.exit_code == 0
        line = res.output.strip().splitlines()[1]
        _, level, volume = line.split(",")
        assert float(level) == pytest.approx(0.5, abs=1e-12)
        assert float(volume) == pytest.approx(3.0, abs=0.05)

    def test_rank_mode_needs_domain(self, runner, two_point_csv):
        res = runner.invoke(main, ["oracle", "rank", two_point_csv])
        assert res.exit_code == 2

    def test_volume_mode_needs_bounds_and_eps(self, runner, two_point_csv):
        res = runner.invoke(main, ["oracle", "volume", two_point_csv,
                                   "--grid", "1", "--eps", "0.1"])
        assert res.exit_code == 2

    def test_bounds_must_cover_every_response(self, runner, two_point_csv):
        res = runner.invoke(main, ["oracle", "volume", two_point_csv,
                                   "--grid", "1", "--bounds", "0:2",
                                   "--eps", "0.1"])
        assert res.exit_code == 2

    def test_budget_exhaustion_exits_4(self, runner, two_point_csv):
        res = runner.invoke(main, ["oracle", "volume", two_point_csv, "--family",
                                   "poly", "--grid", "1", "--bounds", "0:2,0:2",
                                   "--eps", "0.0004"])
        assert res.exit_code == 4
        assert "budget" in res.stderr

    def test_report_file(self, runner, two_point_csv, tmp_path):
        out = tmp_path / "oracle.json"
        res = runner.invoke(main, ["oracle", "rank", two_point_csv, "--family",
                                   "poly", "--grid", "0,1,2",
                                   "--y-domain", "0,1,2", "--out", str(out)])
        assert res.exit_code == 0
        report = json.loads(out.read_text())
        assert report["manifest"]["command"] == "oracle"
        assert [row["rank"] for row in report["rows"]] == [8, 7, 9]
