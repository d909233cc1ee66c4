"""Matrix Market reader for real coordinate/array files.

Reading is done by hand so parse failures can name the offending line;
writing defers to :func:`scipy.io.mmwrite`.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .linalg import as_csr, to_dense


class MatrixMarketError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)


_SYMMETRIES = ("general", "symmetric", "skew-symmetric")


def _data_lines(lines, start):
    for lineno, line in enumerate(lines[start:], start=start + 1):
        s = line.strip()
        if s and not s.startswith("%"):
            yield lineno, s


def read_matrix_market(path):
    """Read a real Matrix Market file.

    Coordinate files come back as CSR arrays, array files as dense ndarrays.
    Symmetric and skew-symmetric storage is expanded to the full matrix.
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket" or header[1].lower() != "matrix":
        raise MatrixMarketError("missing '%%MatrixMarket matrix' header", 1)
    fmt, field, symmetry = (h.lower() for h in header[2:])
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(f"unknown format {fmt!r}", 1)
    if field in ("complex", "pattern"):
        raise MatrixMarketError(f"unsupported field type {field!r}", 1)
    if field not in ("real", "double", "integer"):
        raise MatrixMarketError(f"unknown field type {field!r}", 1)
    if symmetry not in _SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}", 1)

    body = _data_lines(lines, 1)
    try:
        size_lineno, size_line = next(body)
    except StopIteration:
        raise MatrixMarketError("missing size line", len(lines)) from None
    try:
        dims = [int(t) for t in size_line.split()]
    except ValueError:
        raise MatrixMarketError(f"malformed size line {size_line!r}", size_lineno) from None

    if fmt == "coordinate":
        if len(dims) != 3:
            raise MatrixMarketError("coordinate size line needs rows cols nnz", size_lineno)
        nrows, ncols, nnz = dims
        rows, cols, vals = [], [], []
        last = size_lineno
        for lineno, s in body:
            last = lineno
            parts = s.split()
            if len(parts) != 3:
                raise MatrixMarketError(f"expected 'row col value', got {s!r}", lineno)
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise MatrixMarketError(f"malformed entry {s!r}", lineno) from None
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise MatrixMarketError(f"index ({i}, {j}) out of range", lineno)
            if not np.isfinite(v):
                raise MatrixMarketError("non-finite value", lineno)
            if symmetry != "general" and j > i:
                raise MatrixMarketError("upper-triangle entry in symmetric storage", lineno)
            if symmetry == "skew-symmetric" and i == j:
                raise MatrixMarketError("diagonal entry in skew-symmetric storage", lineno)
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(v)
            if len(vals) > nnz:
                raise MatrixMarketError(f"more than {nnz} entries", lineno)
        if len(vals) != nnz:
            raise MatrixMarketError(f"expected {nnz} entries, found {len(vals)}", last)
        rows, cols, vals = np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(vals)
        if symmetry != "general":
            off = rows != cols
            sign = -1.0 if symmetry == "skew-symmetric" else 1.0
            rows, cols, vals = (
                np.concatenate([rows, cols[off]]),
                np.concatenate([cols, rows[off]]),
                np.concatenate([vals, sign * vals[off]]),
            )
        return as_csr(sp.coo_array((vals, (rows, cols)), shape=(nrows, ncols)))

    if len(dims) != 2:
        raise MatrixMarketError("array size line needs rows cols", size_lineno)
    nrows, ncols = dims
    if symmetry != "general" and nrows != ncols:
        raise MatrixMarketError("symmetric storage requires a square matrix", size_lineno)
    # column-major; symmetric storage lists the lower triangle only
    positions = [
        (i, j)
        for j in range(ncols)
        for i in range(nrows)
        if symmetry == "general"
        or (symmetry == "symmetric" and i >= j)
        or (symmetry == "skew-symmetric" and i > j)
    ]
    A = np.zeros((nrows, ncols))
    count = 0
    last = size_lineno
    for lineno, s in body:
        last = lineno
        if count >= len(positions):
            raise MatrixMarketError(f"more than {len(positions)} values", lineno)
        try:
            v = float(s)
        except ValueError:
            raise MatrixMarketError(f"malformed value {s!r}", lineno) from None
        if not np.isfinite(v):
            raise MatrixMarketError("non-finite value", lineno)
        i, j = positions[count]
        A[i, j] = v
        if symmetry == "symmetric":
            A[j, i] = v
        elif symmetry == "skew-symmetric":
            A[j, i] = -v
        count += 1
    if count != len(positions):
        raise MatrixMarketError(f"expected {len(positions)} values, found {count}", last)
    return A


def write_matrix_market(path, A, comment: str = "") -> None:
    target = sp.coo_array(A) if sp.issparse(A) else to_dense(A)
    scipy.io.mmwrite(str(path), target, comment=comment, precision=17)
