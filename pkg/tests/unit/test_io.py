"""Unit tests for operator, sample and table files."""

import json
from pathlib import Path

import numpy as np
import pytest

from expected_operator.adapted.corrector import build_localized_basis
from expected_operator.compress import build_operator
from expected_operator.core.errors import DimensionMismatch, OperatorFormatError
from expected_operator.core.models import CoeffSample, ErrorRow, SamplePlan
from expected_operator.io import (
    OPERATOR_SIDECAR,
    dump_basis,
    load_operator,
    load_piecewise_constant,
    load_sample,
    load_vector,
    read_rows,
    save_operator,
    save_sample,
    save_vector,
    write_rows,
)
from expected_operator.mesh.grid import FineGrid, HierGrid
from expected_operator.mesh.haar import build_haar

ROWS = [
    ErrorRow(1, 4, 0.25, None, 1.5, 2),
    ErrorRow(2, 12, 0.125, 0.5, 3.25, 4),
]


class TestOperatorFiles:
    """Tests for save_operator and load_operator."""

    def test_round_trip(self, plan_1d: SamplePlan, tmp_path: Path) -> None:
        op = build_operator(plan_1d, 2, 5)
        save_operator(op, tmp_path / "op")
        loaded = load_operator(tmp_path / "op")
        assert np.array_equal(loaded.matrix().toarray(), op.matrix().toarray())
        assert loaded.info == op.info
        assert loaded.cutoff is op.cutoff
        assert loaded.kept() == op.kept()
        assert loaded.samples == op.samples

    def test_missing_sidecar(self, tmp_path: Path) -> None:
        with pytest.raises(OperatorFormatError):
            load_operator(tmp_path)

    def test_malformed_sidecar(self, plan_1d: SamplePlan, tmp_path: Path) -> None:
        save_operator(build_operator(plan_1d, 1, 4), tmp_path)
        meta = json.loads((tmp_path / OPERATOR_SIDECAR).read_text())
        del meta["sizes"]
        (tmp_path / OPERATOR_SIDECAR).write_text(json.dumps(meta))
        with pytest.raises(OperatorFormatError):
            load_operator(tmp_path)

    def test_entries_outside_kept_blocks(
        self, plan_1d: SamplePlan, tmp_path: Path
    ) -> None:
        save_operator(build_operator(plan_1d, 2, 5), tmp_path)
        meta = json.loads((tmp_path / OPERATOR_SIDECAR).read_text())
        meta["blocks"] = [[0, 0]]
        (tmp_path / OPERATOR_SIDECAR).write_text(json.dumps(meta))
        with pytest.raises(OperatorFormatError):
            load_operator(tmp_path)


class TestSampleFiles:
    """Tests for coefficient samples and cell-value vectors."""

    def test_sample_round_trip(self, sample_2d: CoeffSample, tmp_path: Path) -> None:
        path = tmp_path / "sample.csv"
        save_sample(sample_2d, path, (0.5, 2.0))
        loaded = load_sample(path)
        assert np.array_equal(loaded.values, sample_2d.values)
        assert loaded.d == sample_2d.d
        assert loaded.eps_level == sample_2d.eps_level
        assert loaded.index == sample_2d.index

    def test_sample_without_metadata(self, tmp_path: Path) -> None:
        path = tmp_path / "sample.csv"
        path.write_text("cell,value\n0,1.0\n")
        with pytest.raises(OperatorFormatError):
            load_sample(path)

    def test_piecewise_constant_level(self, tmp_path: Path) -> None:
        path = tmp_path / "f.csv"
        save_vector(np.arange(16.0), path)
        assert load_piecewise_constant(path, 2).level == 2
        assert load_piecewise_constant(path, 1).level == 4

    def test_piecewise_constant_bad_length(self, tmp_path: Path) -> None:
        path = tmp_path / "f.csv"
        save_vector(np.ones(3), path)
        with pytest.raises(DimensionMismatch):
            load_piecewise_constant(path, 1)

    def test_bad_vector(self, tmp_path: Path) -> None:
        path = tmp_path / "f.csv"
        path.write_text("value\nabc\n")
        with pytest.raises(OperatorFormatError):
            load_vector(path)

    def test_dump_basis(
        self,
        sample_1d: CoeffSample,
        grid_1d: HierGrid,
        fine_1d: FineGrid,
        tmp_path: Path,
    ) -> None:
        lbasis = build_localized_basis(
            sample_1d, grid_1d, fine_1d, build_haar(grid_1d), 1
        )
        paths = dump_basis(lbasis, tmp_path / "basis")
        assert len(paths) == 4
        assert paths[0].read_text().startswith("dof,value\n")


class TestRows:
    """Tests for the error table."""

    def test_round_trip(self, tmp_path: Path) -> None:
        path = tmp_path / "rows.csv"
        write_rows(ROWS, path)
        assert path.read_text().splitlines()[0] == "L,nnz,l2_error,h1_error,seconds,M"
        assert read_rows(path) == ROWS

    def test_without_timing(self, tmp_path: Path) -> None:
        path = tmp_path / "rows.csv"
        write_rows(ROWS, path, record_timing=False)
        assert all(row.seconds is None for row in read_rows(path))
        assert path.read_text().splitlines()[1] == "1,4,0.25,,,2"

    def test_wrong_columns(self, tmp_path: Path) -> None:
        path = tmp_path / "rows.csv"
        path.write_text("L,nnz\n1,2\n")
        with pytest.raises(OperatorFormatError):
            read_rows(path)
