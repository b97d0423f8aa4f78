"""Sparse storage of high-band outliers in compressed sparse row form.

Rows are ``(level, lat)`` pairs flattened level-major; columns are longitude.
Binary layout (little-endian)::

    u32 n_rows, u32 n_cols, u64 nnz,
    u64 row_ptr[n_rows + 1], u32 col_idx[nnz], f32 values[nnz]

The grid's level/lat split is not part of the section; the caller supplies it
on decode (the archive header carries the shape).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import GridField

HEADER = struct.Struct("<IIQ")
DEFAULT_QUANTILE = 0.999


class MalformedSparseError(ValueError):
    pass


@dataclass(eq=False)
class SparseHighBand:
    shape: tuple[int, int, int]
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    threshold_used: float = dc_field(default=0.0)

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.shape))

    @property
    def kept_fraction(self) -> float:
        return self.nnz / self.n_voxels if self.n_voxels else 0.0

    @property
    def nbytes(self) -> int:
        return HEADER.size + 8 * self.row_ptr.size + 4 * self.col_idx.size + 4 * self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseHighBand):
            return NotImplemented
        return (
            tuple(self.shape) == tuple(other.shape)
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
            and self.values.tobytes() == other.values.tobytes()
        )


def _keep_mask(flat_abs: np.ndarray, tau: float | None, quantile: float | None) -> tuple[np.ndarray, float]:
    nonzero = flat_abs > 0
    if tau is not None:
        if tau < 0:
            raise ValueError(f"tau must be nonnegative, got {tau}")
        return nonzero & (flat_abs >= tau), float(tau)
    q = DEFAULT_QUANTILE if quantile is None else float(quantile)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile must lie in [0, 1], got {q}")
    k = int(round((1.0 - q) * flat_abs.size))
    k = min(k, int(nonzero.sum()))
    mask = np.zeros(flat_abs.size, dtype=bool)
    if k <= 0:
        return mask, float(flat_abs.max()) if flat_abs.size else 0.0
    # stable sort on -|v| breaks ties by flat index
    order = np.argsort(-flat_abs, kind="stable")[:k]
    mask[order] = True
    return mask, float(flat_abs[order[-1]])


def sparsify(high, tau: float | None = None, quantile: float | None = None) -> SparseHighBand:
    """Keep high-band voxels whose magnitude reaches the threshold.

    ``tau`` gives an absolute threshold. Otherwise the largest
    ``round((1 - quantile) * n)`` magnitudes are kept (default quantile 0.999).
    Exact zeros are never stored.
    """
    values = high.values if isinstance(high, GridField) else np.asarray(high, dtype=np.float32)
    values = values.astype(np.float32, copy=False)
    shape = tuple(int(s) for s in values.shape)
    n_rows, n_cols = shape[0] * shape[1], shape[2]
    flat = values.reshape(-1)
    mask, thr = _keep_mask(np.abs(flat), tau, quantile)
    idx = np.flatnonzero(mask)
    rows = idx // n_cols
    counts = np.bincount(rows, minlength=n_rows) if idx.size else np.zeros(n_rows, dtype=np.int64)
    row_ptr = np.zeros(n_rows + 1, dtype=np.uint64)
    np.cumsum(counts, out=row_ptr[1:])
    return SparseHighBand(
        shape,  # type: ignore[arg-type]
        row_ptr,
        (idx % n_cols).astype(np.uint32),
        flat[idx].copy(),
        thr,
    )


def validate(s: SparseHighBand) -> None:
    n_rows = s.shape[0] * s.shape[1]
    n_cols = s.shape[2]
    rp = np.asarray(s.row_ptr)
    if rp.shape != (n_rows + 1,):
        raise MalformedSparseError(f"row_ptr has length {rp.size}, expected {n_rows + 1}")
    if s.col_idx.shape != s.values.shape:
        raise MalformedSparseError(f"col_idx length {s.col_idx.size} != values length {s.values.size}")
    if rp.size and int(rp[0]) != 0:
        raise MalformedSparseError(f"row_ptr[0] = {int(rp[0])}, expected 0")
    steps = np.diff(rp.astype(np.int64))
    if np.any(steps < 0):
        bad = int(np.flatnonzero(steps < 0)[0])
        raise MalformedSparseError(f"row_ptr decreases at index {bad + 1}")
    if int(rp[-1]) != s.nnz:
        raise MalformedSparseError(f"row_ptr[-1] = {int(rp[-1])} but nnz = {s.nnz}")
    if not np.all(np.isfinite(s.values)):
        bad = int(np.flatnonzero(~np.isfinite(s.values))[0])
        raise MalformedSparseError(f"values[{bad}] is not finite")
    col = s.col_idx.astype(np.int64)
    if col.size and int(col.max()) >= n_cols:
        bad = int(np.argmax(col >= n_cols))
        raise MalformedSparseError(f"col_idx[{bad}] = {col[bad]} outside [0, {n_cols})")
    if col.size > 1:
        rows = np.repeat(np.arange(n_rows), steps)
        same_row = rows[1:] == rows[:-1]
        bad = np.flatnonzero(same_row & (col[1:] <= col[:-1]))
        if bad.size:
            raise MalformedSparseError(f"col_idx not strictly increasing within row {rows[bad[0]]} at entry {bad[0] + 1}")


def densify_array(s: SparseHighBand) -> np.ndarray:
    validate(s)
    n_rows = s.shape[0] * s.shape[1]
    out = np.zeros(s.n_voxels, dtype=np.float32)
    rows = np.repeat(np.arange(n_rows), np.diff(s.row_ptr.astype(np.int64)))
    out[rows * s.shape[2] + s.col_idx.astype(np.int64)] = s.values
    return out.reshape(s.shape)


def densify(s: SparseHighBand, template: GridField | None = None) -> GridField:
    values = densify_array(s)
    if template is None:
        return GridField(values)
    return template.with_values(values)


def to_bytes(s: SparseHighBand) -> bytes:
    n_rows = s.shape[0] * s.shape[1]
    return b"".join(
        [
            HEADER.pack(n_rows, s.shape[2], s.nnz),
            np.asarray(s.row_ptr, dtype="<u8").tobytes(),
            np.asarray(s.col_idx, dtype="<u4").tobytes(),
            np.asarray(s.values, dtype="<f4").tobytes(),
        ]
    )


def from_bytes(data: bytes, shape) -> tuple[SparseHighBand, int]:
    """Parse one CSR section from the start of ``data``; returns it and bytes used."""
    shape = tuple(int(v) for v in shape)
    if len(data) < HEADER.size:
        raise MalformedSparseError(f"sparse header needs {HEADER.size} bytes, have {len(data)}")
    n_rows, n_cols, nnz = HEADER.unpack_from(data, 0)
    if n_rows != shape[0] * shape[1] or n_cols != shape[2]:
        raise MalformedSparseError(f"sparse dims ({n_rows}, {n_cols}) do not match grid shape {shape}")
    need = HEADER.size + 8 * (n_rows + 1) + 8 * nnz
    if nnz > shape[0] * shape[1] * shape[2] or len(data) < need:
        raise MalformedSparseError(f"sparse section needs {need} bytes, have {len(data)}")
    off = HEADER.size
    row_ptr = np.frombuffer(data, "<u8", n_rows + 1, off).astype(np.uint64)
    off += 8 * (n_rows + 1)
    col_idx = np.frombuffer(data, "<u4", nnz, off).astype(np.uint32)
    off += 4 * nnz
    values = np.frombuffer(data, "<f4", nnz, off).astype(np.float32)
    off += 4 * nnz
    s = SparseHighBand(shape, row_ptr, col_idx, values)  # type: ignore[arg-type]
    validate(s)
    s.threshold_used = float(np.abs(values).min()) if nnz else 0.0
    return s, off


def empty(shape) -> SparseHighBand:
    shape = tuple(int(v) for v in shape)
    return SparseHighBand(
        shape,  # type: ignore[arg-type]
        np.zeros(shape[0] * shape[1] + 1, dtype=np.uint64),
        np.zeros(0, dtype=np.uint32),
        np.zeros(0, dtype=np.float32),
    )
