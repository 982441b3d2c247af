"""End-to-end tests for the command-line interface."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner
from pytest_mock import MockerFixture

from expected_operator import __version__
from expected_operator.cli import main
from expected_operator.io import load_vector, read_rows

pytestmark = pytest.mark.integration

SMALL = ["-d", "1", "-J", "5", "-E", "3", "-M", "2", "--seed", "3"]


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def operator_dir(runner: CliRunner, tmp_path: Path) -> Path:
    out = tmp_path / "op"
    result = runner.invoke(main, ["compress", *SMALL, "-L", "2", "-o", str(out)])
    assert result.exit_code == 0, result.output
    return out


class TestCli:
    """Tests for the click commands."""

    def test_version(self, runner: CliRunner) -> None:
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_compress_writes_operator(self, operator_dir: Path) -> None:
        assert (operator_dir / "operator.mtx").exists()
        meta = json.loads((operator_dir / "operator.json").read_text())
        assert meta["L"] == 2
        assert meta["samples"] == 2

    def test_compress_deterministic_uses_one_sample(
        self, runner: CliRunner, tmp_path: Path
    ) -> None:
        out = tmp_path / "op"
        args = [*SMALL, "--gamma-min", "1", "--gamma-max", "1", "-L", "2"]
        result = runner.invoke(main, ["compress", *args, "-o", str(out)])
        assert result.exit_code == 0, result.output
        meta = json.loads((out / "operator.json").read_text())
        assert meta["samples"] == 1

    def test_apply_builtin_rhs(
        self, runner: CliRunner, operator_dir: Path, tmp_path: Path
    ) -> None:
        out = tmp_path / "u.csv"
        result = runner.invoke(
            main,
            ["apply", "--operator", str(operator_dir), "--rhs", "one", "-o", str(out)],
        )
        assert result.exit_code == 0, result.output
        values = load_vector(out)
        assert values.shape == (4,)
        assert (values > 0).all()

    def test_apply_input_file(
        self, runner: CliRunner, operator_dir: Path, tmp_path: Path
    ) -> None:
        f = tmp_path / "f.csv"
        f.write_text("value\n0\n1\n")
        out = tmp_path / "u.csv"
        args = ["apply", "--operator", str(operator_dir), "--input", str(f)]
        result = runner.invoke(main, [*args, "-o", str(out)])
        assert result.exit_code == 0, result.output
        assert load_vector(out).shape == (4,)

    @pytest.mark.parametrize("extra", [[], ["--rhs", "one", "--input", "f.csv"]])
    def test_apply_needs_exactly_one_source(
        self, runner: CliRunner, operator_dir: Path, tmp_path: Path, extra: list[str]
    ) -> None:
        (tmp_path / "f.csv").write_text("value\n1\n")
        extra = [str(tmp_path / e) if e == "f.csv" else e for e in extra]
        result = runner.invoke(
            main,
            ["apply", "--operator", str(operator_dir), *extra, "-o", "u.csv"],
        )
        assert result.exit_code == 2

    def test_experiment_and_report(self, runner: CliRunner, tmp_path: Path) -> None:
        csv_path = tmp_path / "rows.csv"
        result = runner.invoke(
            main,
            [
                "experiment",
                *SMALL,
                "-L",
                "1",
                "-L",
                "2",
                "--reference-samples",
                "4",
                "--no-timing",
                "-o",
                str(csv_path),
            ],
        )
        assert result.exit_code == 0, result.output
        rows = read_rows(csv_path)
        assert [row.L for row in rows] == [1, 2]
        assert all(row.seconds is None for row in rows)

        result = runner.invoke(main, ["report", str(csv_path)])
        assert result.exit_code == 0, result.output
        assert "fitted slope" in result.output

    def test_bad_config(self, runner: CliRunner, tmp_path: Path) -> None:
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"d": 1, "fine_level": 2}))
        result = runner.invoke(
            main, ["compress", "-c", str(config), "-L", "1", "-o", str(tmp_path)]
        )
        assert result.exit_code == 1
        assert "Error:" in result.output

    def test_interrupt(
        self, runner: CliRunner, tmp_path: Path, mocker: MockerFixture
    ) -> None:
        csv_path = tmp_path / "rows.csv"
        csv_path.write_text("L,nnz,l2_error,h1_error,seconds,M\n")
        mocker.patch("expected_operator.cli.read_rows", side_effect=KeyboardInterrupt)
        result = runner.invoke(main, ["report", str(csv_path)])
        assert result.exit_code == 130
        assert "Exiting..." in result.output


@pytest.mark.slow
class TestSweeps:
    """Larger sweeps through the command line."""

    def test_deterministic_sweep_improves(self, tmp_path: Path) -> None:
        csv_path = tmp_path / "rows.csv"
        result = CliRunner().invoke(
            main,
            [
                "experiment",
                "-d",
                "1",
                "-J",
                "9",
                "-E",
                "5",
                "--gamma-min",
                "1",
                "--gamma-max",
                "1",
                *[arg for L in (1, 2, 3, 4) for arg in ("-L", str(L))],
                "--no-timing",
                "-o",
                str(csv_path),
            ],
        )
        assert result.exit_code == 0, result.output
        rows = read_rows(csv_path)
        assert rows[-1].l2_error < rows[0].l2_error
        assert all(row.M == 1 for row in rows)

    def test_random_sweep_2d(self, tmp_path: Path) -> None:
        csv_path = tmp_path / "rows.csv"
        result = CliRunner().invoke(
            main,
            [
                "experiment",
                "-d",
                "2",
                "-J",
                "5",
                "-E",
                "3",
                "--generator",
                "sobol",
                "-L",
                "1",
                "-L",
                "2",
                "-L",
                "3",
                "--reference-samples",
                "16",
                "-o",
                str(csv_path),
            ],
        )
        assert result.exit_code == 0, result.output
        rows = read_rows(csv_path)
        assert [row.M for row in rows] == [2, 4, 8]
        assert rows[-1].nnz > rows[0].nnz
