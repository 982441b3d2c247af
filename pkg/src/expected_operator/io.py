"""File formats: Matrix Market operators with a JSON sidecar, and CSV tables."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .adapted.corrector import LocalizedBasis
from .adapted.operator import BlockMat
from .compress import CompressedOperator, OperatorInfo
from .core.errors import DimensionMismatch, OperatorFormatError
from .core.models import (
    CoeffSample,
    CutoffMode,
    ErrorRow,
    FloatArray,
    Generator,
    PiecewiseConstant,
)

log = logging.getLogger(__name__)

OPERATOR_MATRIX = "operator.mtx"
OPERATOR_SIDECAR = "operator.json"
ROW_COLUMNS = ("L", "nnz", "l2_error", "h1_error", "seconds", "M")


def save_matrix(
    matrix: sp.spmatrix | FloatArray, path: Path, comment: str = ""
) -> None:
    """Matrix Market coordinate file with round-trip precision."""
    scipy.io.mmwrite(
        str(path),
        sp.coo_matrix(matrix),
        comment=comment,
        field="real",
        precision=17,
        symmetry="general",
    )


def load_matrix(path: Path) -> sp.csr_matrix:
    try:
        return sp.csr_matrix(scipy.io.mmread(str(path)))
    except (OSError, ValueError) as exc:
        raise OperatorFormatError(f"cannot read matrix {path}: {exc}") from exc


def save_operator(op: CompressedOperator, directory: Path) -> Path:
    """Write the operator as ``operator.mtx`` plus ``operator.json``."""
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(
        op.matrix(),
        directory / OPERATOR_MATRIX,
        comment=f"compressed expected operator, L={op.info.L}, d={op.info.d}",
    )
    sidecar = directory / OPERATOR_SIDECAR
    sidecar.write_text(json.dumps(op.metadata(), indent=2, sort_keys=True) + "\n")
    log.info("wrote operator with %d nonzeros to %s", op.nnz, directory)
    return directory


def load_operator(directory: Path) -> CompressedOperator:
    sidecar = directory / OPERATOR_SIDECAR
    try:
        meta = json.loads(sidecar.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise OperatorFormatError(f"cannot read {sidecar}: {exc}") from exc
    matrix = load_matrix(directory / OPERATOR_MATRIX)
    try:
        info = OperatorInfo(
            d=int(meta["d"]),
            L=int(meta["L"]),
            fine_level=int(meta["fine_level"]),
            eps_level=int(meta["eps_level"]),
            iterations=int(meta["iterations"]),
            gamma_min=float(meta["gamma_min"]),
            gamma_max=float(meta["gamma_max"]),
            generator=Generator(meta["generator"]),
            seed=int(meta["seed"]),
            skip=int(meta["skip"]),
            scrambled=bool(meta["scrambled"]),
        )
        cutoff = CutoffMode(meta["cutoff"])
        sizes = tuple(int(s) for s in meta["sizes"])
        kept = {(int(k), int(m)) for k, m in meta["blocks"]}
        blocks = BlockMat.from_matrix(matrix, sizes, lambda k, m: (k, m) in kept)
        diagnostics = {str(k): float(v) for k, v in meta.get("diagnostics", {}).items()}
        op = CompressedOperator(blocks, info, cutoff, int(meta["samples"]), diagnostics)
    except (KeyError, TypeError, ValueError, DimensionMismatch) as exc:
        raise OperatorFormatError(f"malformed operator in {directory}: {exc}") from exc
    outside = matrix.nnz - sum(int(b.nnz) for _, b in blocks)
    if outside:
        raise OperatorFormatError(f"{outside} entries lie outside the kept blocks")
    return op


def save_sample(sample: CoeffSample, path: Path, gamma: tuple[float, float]) -> None:
    """Cell values of one coefficient realization with a metadata comment."""
    with path.open("w", newline="") as handle:
        handle.write(
            f"# d={sample.d} E={sample.eps_level} gamma_min={gamma[0]!r} "
            f"gamma_max={gamma[1]!r} k={sample.index} "
            f"generator={sample.generator.value}\n"
        )
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["cell", "value"])
        for cell, value in enumerate(sample.values):
            writer.writerow([cell, repr(float(value))])


def load_sample(path: Path) -> CoeffSample:
    try:
        with path.open(newline="") as handle:
            header = handle.readline()
            if not header.startswith("#"):
                raise ValueError("missing metadata line")
            meta = dict(item.split("=", 1) for item in header[1:].split())
            values = [float(row["value"]) for row in csv.DictReader(handle)]
        return CoeffSample(
            d=int(meta["d"]),
            eps_level=int(meta["E"]),
            values=np.array(values),
            index=int(meta["k"]),
            generator=Generator(meta["generator"]),
        )
    except (OSError, KeyError, ValueError) as exc:
        raise OperatorFormatError(f"cannot read sample {path}: {exc}") from exc


def save_vector(values: FloatArray, path: Path) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["value"])
        writer.writerows([repr(float(v))] for v in values)


def load_vector(path: Path) -> FloatArray:
    try:
        with path.open(newline="") as handle:
            return np.array([float(row["value"]) for row in csv.DictReader(handle)])
    except (OSError, KeyError, ValueError) as exc:
        raise OperatorFormatError(f"cannot read vector {path}: {exc}") from exc


def load_piecewise_constant(path: Path, d: int) -> PiecewiseConstant:
    """A cell-value vector whose level follows from its length ``2**(d*level)``."""
    values = load_vector(path)
    level = round(math.log2(max(len(values), 1)) / d)
    if 2 ** (d * level) != len(values):
        raise DimensionMismatch(
            f"{len(values)} values are not the cells of a {d}-d dyadic level"
        )
    return PiecewiseConstant(d, level, values)


def dump_basis(lbasis: LocalizedBasis, directory: Path) -> list[Path]:
    """One CSV per basis vector holding its nonzero dof values."""
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    matrix = lbasis.matrix()
    for j in range(matrix.shape[1]):
        column = matrix[:, j].tocoo()
        path = directory / f"sample{lbasis.sample_index:04d}_b{j:05d}.csv"
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["dof", "value"])
            order = np.argsort(column.row)
            for dof, value in zip(column.row[order], column.data[order], strict=True):
                writer.writerow([int(dof), repr(float(value))])
        paths.append(path)
    return paths


def _cell(value: float | None) -> str:
    return "" if value is None else format(value, ".17g")


def write_rows(
    rows: Iterable[ErrorRow], path: Path, *, record_timing: bool = True
) -> None:
    """Error table with the columns L,nnz,l2_error,h1_error,seconds,M."""
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=ROW_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    "L": row.L,
                    "nnz": row.nnz,
                    "l2_error": _cell(row.l2_error),
                    "h1_error": _cell(row.h1_error),
                    "seconds": _cell(row.seconds if record_timing else None),
                    "M": row.M,
                }
            )


def read_rows(path: Path) -> list[ErrorRow]:
    try:
        with path.open(newline="") as handle:
            reader = csv.DictReader(handle)
            if tuple(reader.fieldnames or ()) != ROW_COLUMNS:
                raise ValueError(f"columns {reader.fieldnames} != {list(ROW_COLUMNS)}")
            return [
                ErrorRow(
                    L=int(record["L"]),
                    nnz=int(record["nnz"]),
                    l2_error=float(record["l2_error"]),
                    h1_error=float(record["h1_error"]) if record["h1_error"] else None,
                    seconds=float(record["seconds"]) if record["seconds"] else None,
                    M=int(record["M"]),
                )
                for record in reader
            ]
    except (OSError, KeyError, ValueError) as exc:
        raise OperatorFormatError(f"cannot read rows from {path}: {exc}") from exc
