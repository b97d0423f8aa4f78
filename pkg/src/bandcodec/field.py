"""Grid data model, coordinate embedding, climatology removal and normalisation.

Fields are 3D float32 arrays indexed ``(level, lat, lon)``. Latitude row ``i``
of ``n`` sits at ``-pi/2 + pi*(i + 0.5)/n`` and longitude column ``j`` of ``m``
at ``2*pi*j/m``; levels map affinely onto ``[-1, 1]``. On disk a field is
a flat little-endian float32 file in C order plus a sidecar JSON header at
``<path>.json`` holding ``shape``, ``variable_name``, ``units`` and
``frame_index``.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field as dc_field, replace

import numpy as np


@dataclass(frozen=True, eq=False)
class GridField:
    values: np.ndarray
    variable_name: str = "var"
    units: str = ""
    frame_index: int = 0
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3:
            raise ValueError(f"field must be 3D (level, lat, lon), got shape {v.shape}")
        if v.dtype != np.float32:
            v = v.astype(np.float32)
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be nonnegative, got {self.frame_index}")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.values.shape)  # type: ignore[return-value]

    def with_values(self, values: np.ndarray, **meta) -> "GridField":
        return replace(self, values=values, meta={**self.meta, **meta})

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridField):
            return NotImplemented
        return (
            self.variable_name == other.variable_name
            and self.units == other.units
            and self.frame_index == other.frame_index
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class NormalizationParams:
    v_min: float
    v_max: float
    climatology_id: str | None = None

    @property
    def degenerate(self) -> bool:
        return not self.v_max > self.v_min

    @property
    def half_range(self) -> float:
        return 0.5 * (self.v_max - self.v_min)


@dataclass(frozen=True, eq=False)
class Climatology:
    values: np.ndarray
    epoch_label: str = ""


def subtract_climatology(f: GridField, clim: Climatology | None) -> GridField:
    """Remove the climatological mean state.

    Without a climatology the scalar field mean is removed instead and kept in
    ``meta["climatology_mean"]`` so the step can be undone.
    """
    if clim is None:
        mean = float(np.mean(f.values, dtype=np.float64))
        out = (f.values - np.float32(mean)).astype(np.float32)
        return f.with_values(out, climatology_mean=np.float32(mean).item(), climatology_id=None)
    c = np.asarray(clim.values, dtype=np.float32)
    if c.shape != f.shape:
        diff = [ax for ax, (a, b) in enumerate(zip(c.shape, f.shape)) if a != b] if c.ndim == 3 else "ndim"
        raise ValueError(f"climatology shape {c.shape} does not match field shape {f.shape} (axes {diff})")
    return f.with_values(f.values - c, climatology_id=clim.epoch_label)


def add_climatology(f: GridField, clim: Climatology | None) -> GridField:
    if clim is None:
        mean = np.float32(f.meta.get("climatology_mean", 0.0))
        return f.with_values(f.values + mean)
    return f.with_values(f.values + np.asarray(clim.values, np.float32))


def normalize(f: GridField) -> tuple[GridField, NormalizationParams]:
    """Per-field min-max map onto ``[-1, 1]``. A constant field maps to zeros."""
    v = f.values
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot normalise non-finite field")
    lo, hi = float(v.min()), float(v.max())
    params = NormalizationParams(lo, hi, f.meta.get("climatology_id"))
    if params.degenerate:
        return f.with_values(np.zeros_like(v), normalized=True, degenerate=True), params
    out = 2.0 * (v.astype(np.float64) - lo) / (hi - lo) - 1.0
    return f.with_values(np.clip(out, -1.0, 1.0).astype(np.float32), normalized=True, degenerate=False), params


def denormalize_array(values: np.ndarray, params: NormalizationParams) -> np.ndarray:
    if params.degenerate:
        return np.full(np.shape(values), params.v_min, dtype=np.float32)
    v = np.asarray(values, dtype=np.float64)
    return ((v + 1.0) * 0.5 * (params.v_max - params.v_min) + params.v_min).astype(np.float32)


def normalize_array(values: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """Apply stored params to arbitrary data (no clipping)."""
    if params.degenerate:
        return np.zeros(np.shape(values), dtype=np.float32)
    v = np.asarray(values, dtype=np.float64)
    return (2.0 * (v - params.v_min) / (params.v_max - params.v_min) - 1.0).astype(np.float32)


def denormalize(f: GridField, params: NormalizationParams) -> GridField:
    return f.with_values(denormalize_array(f.values, params), normalized=False)


def latitudes(n_lat: int) -> np.ndarray:
    """Cell-centred latitudes; the poles themselves are never grid rows."""
    return -0.5 * math.pi + math.pi * (np.arange(n_lat) + 0.5) / n_lat


def longitudes(n_lon: int) -> np.ndarray:
    return 2.0 * math.pi * np.arange(n_lon) / n_lon


def level_coordinate(n_lev: int) -> np.ndarray:
    if n_lev == 1:
        return np.zeros(1)
    return -1.0 + 2.0 * np.arange(n_lev) / (n_lev - 1)


def embed(theta, phi) -> np.ndarray:
    """Unit-sphere point for latitude ``theta`` and longitude ``phi`` (radians)."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, np.float64), np.asarray(phi, np.float64))
    return np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), np.sin(theta)], axis=-1)


def build_coordinates(shape) -> np.ndarray:
    """Per-voxel ``(x, y, z, p)`` with ``(x, y, z)`` on the unit sphere.

    Returns a float32 array of shape ``(n_p, n_lat, n_lon, 4)``.
    """
    n_p, n_t, n_f = (int(s) for s in shape)
    if min(n_p, n_t, n_f) < 1:
        raise ValueError(f"all extents must be >= 1, got {shape}")
    return coordinates_at(np.arange(n_p), np.arange(n_t), np.arange(n_f), shape)


def coordinates_at(level_idx, lat_idx, lon_idx, shape) -> np.ndarray:
    """Coordinates at (possibly fractional) grid indices of a grid of ``shape``."""
    n_p, n_t, n_f = (int(s) for s in shape)
    k = np.asarray(level_idx, dtype=np.float64)
    i = np.asarray(lat_idx, dtype=np.float64)
    j = np.asarray(lon_idx, dtype=np.float64)
    th = -0.5 * math.pi + math.pi * (i + 0.5) / n_t
    ph = 2.0 * math.pi * j / n_f
    p = np.zeros_like(k) if n_p == 1 else -1.0 + 2.0 * k / (n_p - 1)
    out = np.empty((k.size, i.size, j.size, 4), dtype=np.float64)
    out[..., :3] = embed(th[:, None], ph[None, :])[None]
    out[..., 3] = p[:, None, None]
    return out.astype(np.float32)


def write_field(path: str | os.PathLike, f: GridField) -> None:
    path = os.fspath(path)
    f.values.astype("<f4").tofile(path)
    header = {
        "shape": list(f.shape),
        "variable_name": f.variable_name,
        "units": f.units,
        "frame_index": f.frame_index,
    }
    with open(path + ".json", "w") as fh:
        json.dump(header, fh)


def read_field(path: str | os.PathLike) -> GridField:
    path = os.fspath(path)
    with open(path + ".json") as fh:
        header = json.load(fh)
    shape = tuple(int(s) for s in header["shape"])
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != int(np.prod(shape)):
        raise ValueError(f"{path}: expected {int(np.prod(shape))} values for shape {shape}, found {raw.size}")
    return GridField(
        raw.reshape(shape).astype(np.float32),
        header.get("variable_name", "var"),
        header.get("units", ""),
        int(header.get("frame_index", 0)),
    )


def read_climatology(path: str | os.PathLike) -> Climatology:
    f = read_field(path)
    return Climatology(f.values, os.path.basename(os.fspath(path)))
