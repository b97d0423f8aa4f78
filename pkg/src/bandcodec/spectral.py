"""Harmonic band split of a 3D field with hard FFT masks.

Each FFT mode is assigned by its radial frequency to exactly one of three
bands: low (``rho < f0``), mid (``f0 <= rho < 3 f0``) and high (the rest),
where ``f0 = omega * sqrt(6 / n_c)`` is the base frequency. The band fields
are the inverse transforms of the masked spectra, so they sum back to the
input up to FFT round-off.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import GridField

FREQ_UNITS = ("mode-index", "angular")
MIN_LEVELS_FOR_3D = 4


def base_frequency(omega: float, n_c: int) -> float:
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if int(n_c) < 1:
        raise ValueError(f"n_c must be >= 1, got {n_c}")
    return float(omega) * math.sqrt(6.0 / int(n_c))


@dataclass(frozen=True)
class BandThresholds:
    omega: float = 14.0
    n_c: int = 256
    freq_unit: str = "mode-index"

    def __post_init__(self):
        if self.freq_unit not in FREQ_UNITS:
            raise ValueError(f"freq_unit must be one of {FREQ_UNITS}, got {self.freq_unit!r}")
        base_frequency(self.omega, self.n_c)

    @property
    def base_freq(self) -> float:
        return base_frequency(self.omega, self.n_c)

    @property
    def mid_upper(self) -> float:
        return 3.0 * self.base_freq


INIT_THRESHOLDS = BandThresholds(14.0, 256)
REDECOMPOSE_THRESHOLDS = BandThresholds(22.0, 128)


@dataclass(eq=False)
class SpectralBands:
    low: GridField
    mid: GridField
    high: GridField
    thresholds: BandThresholds
    notes: list[str] = dc_field(default_factory=list)


def transform_axes(shape) -> tuple[int, ...]:
    """Axes that take part in the transform: level only when it has >= 4 entries."""
    return (0, 1, 2) if shape[0] >= MIN_LEVELS_FOR_3D else (1, 2)


def _signed_modes(n: int) -> np.ndarray:
    return np.rint(np.fft.fftfreq(n) * n)


def mode_radius(shape, freq_unit: str = "mode-index") -> np.ndarray:
    """Radial frequency of every mode of the ``rfftn`` half-spectrum.

    Returned array has the half-spectrum shape (last axis ``n // 2 + 1``).
    Axes outside ``transform_axes`` or of extent 1 contribute zero.
    """
    shape = tuple(int(s) for s in shape)
    axes = transform_axes(shape)
    grids = []
    for ax, n in enumerate(shape):
        if ax == 2:
            m = np.arange(n // 2 + 1, dtype=np.float64)
        else:
            m = _signed_modes(n)
        if ax not in axes or n == 1:
            m = np.zeros(1 if ax not in axes else m.shape[0])
        shp = [1, 1, 1]
        shp[ax] = m.shape[0]
        grids.append(m.reshape(shp))
    rho = np.sqrt(grids[0] ** 2 + grids[1] ** 2 + grids[2] ** 2)
    if freq_unit == "angular":
        rho = math.pi * rho
    elif freq_unit != "mode-index":
        raise ValueError(f"unknown freq_unit {freq_unit!r}")
    return rho


def band_masks(shape, t: BandThresholds) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rho = mode_radius(shape, t.freq_unit)
    low = rho < t.base_freq
    mid = (rho >= t.base_freq) & (rho < t.mid_upper)
    high = ~(low | mid)
    return low, mid, high


def _spectrum(values: np.ndarray):
    axes = transform_axes(values.shape)
    return np.fft.rfftn(values.astype(np.float64), axes=axes), axes


def _inverse(spec: np.ndarray, shape, axes) -> np.ndarray:
    s = [shape[a] for a in axes]
    return np.fft.irfftn(spec, s=s, axes=axes)


def decompose_array(values: np.ndarray, t: BandThresholds) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Band split of a plain array; returns float64 ``(low, mid, high)``."""
    values = np.asarray(values)
    spec, axes = _spectrum(values)
    low_m, mid_m, high_m = band_masks(values.shape, t)
    if len(axes) == 2:
        # level axis untouched: masks broadcast over it
        low_m, mid_m, high_m = low_m[:1], mid_m[:1], high_m[:1]
    return tuple(_inverse(spec * m, values.shape, axes) for m in (low_m, mid_m, high_m))  # type: ignore[return-value]


def degenerate_axis_notes(shape) -> list[str]:
    """One message per transformed axis of extent 1."""
    return [
        f"axis {ax} has extent 1 and contributes nothing to the radial frequency"
        for ax in transform_axes(shape)
        if shape[ax] == 1
    ]


def decompose(f: GridField, t: BandThresholds = INIT_THRESHOLDS) -> SpectralBands:
    notes = degenerate_axis_notes(f.shape)
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    low, mid, high = decompose_array(f.values, t)
    return SpectralBands(
        f.with_values(low.astype(np.float32), band="low"),
        f.with_values(mid.astype(np.float32), band="mid"),
        f.with_values(high.astype(np.float32), band="high"),
        t,
        notes,
    )


def recombine(bands: SpectralBands) -> GridField:
    shapes = {bands.low.shape, bands.mid.shape, bands.high.shape}
    if len(shapes) != 1:
        raise ValueError(f"band shapes disagree: {sorted(shapes)}")
    total = bands.low.values.astype(np.float64) + bands.mid.values + bands.high.values
    return bands.low.with_values(total.astype(np.float32), band=None)


def band_energies(bands: SpectralBands) -> tuple[float, float, float]:
    return tuple(float(np.sum(b.values.astype(np.float64) ** 2)) for b in (bands.low, bands.mid, bands.high))  # type: ignore[return-value]
