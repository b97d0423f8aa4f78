"""Synthetic ground truth: superposed grid harmonics, spikes and a constant.

A harmonic with integer mode indices ``(m_p, m_lat, m_lon)`` is evaluated on
the grid phase coordinates ``2*pi*index/extent`` of each axis, which makes it
a combination of FFT modes that all share one mode radius. Its band under any
``BandThresholds`` is therefore known exactly.

Two forms exist. A *wave* is ``a*sin(m . phi + beta)``. A *separable*
harmonic is a product of one sinusoid per axis. When it varies in longitude
its latitude factor is ``sin(m_lat * 2*pi*(i + 1/2)/n_lat)``, which vanishes
exactly at both poles of the cell-centred latitude grid. Such a field is
single-valued on the sphere, so a network of ``(x, y, z, p)`` can represent
it. A longitude-varying wave is not: it takes different values at the same
polar point.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field as dc_field, replace

import numpy as np

from .field import GridField
from .spectral import BandThresholds, INIT_THRESHOLDS, transform_axes


@dataclass
class Harmonic:
    amplitude: float
    modes: tuple[int, int, int]
    phase: float = 0.0
    separable: bool = False


@dataclass
class Spike:
    voxel: tuple[int, int, int]
    magnitude: float


@dataclass
class HarmonicSpec:
    harmonics: list[Harmonic] = dc_field(default_factory=list)
    spikes: list[Spike] = dc_field(default_factory=list)
    constant: float = 0.0
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "HarmonicSpec":
        d = json.loads(text)
        return cls(
            [
                Harmonic(h["amplitude"], tuple(h["modes"]), h.get("phase", 0.0), bool(h.get("separable", False)))
                for h in d.get("harmonics", [])
            ],
            [Spike(tuple(s["voxel"]), s["magnitude"]) for s in d.get("spikes", [])],
            d.get("constant", 0.0),
            d.get("seed", 0),
        )


def mode_radius_of(modes, shape, freq_unit: str = "mode-index") -> float:
    axes = transform_axes(shape)
    r = math.sqrt(sum(m * m for ax, m in enumerate(modes) if ax in axes))
    return math.pi * r if freq_unit == "angular" else r


def _check(shape, spec: HarmonicSpec) -> None:
    for h in spec.harmonics:
        if not math.isfinite(h.amplitude):
            raise ValueError(f"non-finite amplitude {h.amplitude}")
        for ax, (m, n) in enumerate(zip(h.modes, shape)):
            if abs(int(m)) > n // 2:
                raise ValueError(f"mode {m} on axis {ax} exceeds Nyquist limit {n // 2} for extent {n}")
    for s in spec.spikes:
        if any(not 0 <= v < n for v, n in zip(s.voxel, shape)):
            raise ValueError(f"spike voxel {s.voxel} outside grid {shape}")


def _separable(shape, h: Harmonic) -> np.ndarray:
    m_p, m_t, m_f = (int(m) for m in h.modes)
    n_p, n_t, n_f = shape
    # the phase goes to the innermost varying axis
    if m_f:
        lat = np.sin(m_t * 2.0 * math.pi * (np.arange(n_t) + 0.5) / n_t)
        lon = np.sin(m_f * 2.0 * math.pi * np.arange(n_f) / n_f + h.phase)
        lev = np.cos(m_p * 2.0 * math.pi * np.arange(n_p) / n_p)
    elif m_t:
        lat = np.sin(m_t * 2.0 * math.pi * np.arange(n_t) / n_t + h.phase)
        lon = np.ones(n_f)
        lev = np.cos(m_p * 2.0 * math.pi * np.arange(n_p) / n_p)
    else:
        lat, lon = np.ones(n_t), np.ones(n_f)
        lev = np.sin(m_p * 2.0 * math.pi * np.arange(n_p) / n_p + h.phase)
    return h.amplitude * lev[:, None, None] * lat[None, :, None] * lon[None, None, :]


def harmonic_values(shape, spec: HarmonicSpec) -> np.ndarray:
    shape = tuple(int(s) for s in shape)
    _check(shape, spec)
    phases = [2.0 * math.pi * np.arange(n) / n for n in shape]
    out = np.full(shape, spec.constant, dtype=np.float64)
    for h in spec.harmonics:
        if h.separable:
            out += _separable(shape, h)
            continue
        arg = (
            h.modes[0] * phases[0][:, None, None]
            + h.modes[1] * phases[1][None, :, None]
            + h.modes[2] * phases[2][None, None, :]
        )
        out += h.amplitude * np.sin(arg + h.phase)
    return out


def gen_field(shape, spec: HarmonicSpec, variable_name: str = "synthetic", frame_index: int = 0) -> GridField:
    out = harmonic_values(shape, spec)
    for s in spec.spikes:
        out[tuple(s.voxel)] += s.magnitude
    return GridField(out.astype(np.float32), variable_name, "1", frame_index)


def _modes_in_band(shape, lo: float, hi: float, rng, count: int, freq_unit: str):
    # nonnegative modes only: a separable harmonic covers all sign flips
    axes = transform_axes(shape)
    ranges = [range(0, n // 2) if ax in axes else range(1) for ax, n in enumerate(shape)]
    pool = []
    for a in ranges[0]:
        for b in ranges[1]:
            for c in ranges[2]:
                if (a, b, c) == (0, 0, 0) or (c and not b):
                    continue
                r = mode_radius_of((a, b, c), shape, freq_unit)
                if lo <= r < hi:
                    pool.append((a, b, c))
    if len(pool) < count:
        raise ValueError(f"only {len(pool)} modes with radius in [{lo}, {hi}) for shape {shape}")
    pick = rng.choice(len(pool), count, replace=False)
    return [pool[i] for i in sorted(pick)]


def random_spec(
    shape,
    n_low: int = 4,
    n_mid: int = 4,
    n_high: int = 2,
    n_spikes: int = 20,
    amplitudes: tuple[float, float, float] = (1.0, 0.05, 0.002),
    spike_scale: float = 10.0,
    thresholds: BandThresholds = INIT_THRESHOLDS,
    constant: float = 0.0,
    seed: int = 0,
) -> HarmonicSpec:
    """Draw a spec with a chosen number of harmonics per band.

    Harmonics are separable, so the field is single-valued at the poles.
    Longitude-varying modes always carry a nonzero latitude index for the
    same reason. Amplitudes per band are jittered by a factor in ``[0.5, 1]``. Spike
    magnitudes are ``spike_scale`` times the std of the harmonic part, with
    random signs.
    """
    shape = tuple(int(s) for s in shape)
    rng = np.random.default_rng(seed)
    f0, f1 = thresholds.base_freq, thresholds.mid_upper
    harmonics = []
    for count, lo, hi, amp in ((n_low, 0.0, f0, amplitudes[0]), (n_mid, f0, f1, amplitudes[1]), (n_high, f1, math.inf, amplitudes[2])):
        if count == 0:
            continue
        lo_eff = max(lo, 1e-9)
        for modes in _modes_in_band(shape, lo_eff, hi, rng, count, thresholds.freq_unit):
            harmonics.append(
                Harmonic(float(amp * rng.uniform(0.5, 1.0)), tuple(int(m) for m in modes), float(rng.uniform(0, 2 * math.pi)), True)
            )
    spec = HarmonicSpec(harmonics, [], constant, seed)
    if n_spikes:
        std = float(np.std(harmonic_values(shape, spec))) or 1.0
        spec.spikes = _draw_spikes(shape, n_spikes, spike_scale * std, rng)
    return spec


def _draw_spikes(shape, count: int, magnitude: float, rng) -> list[Spike]:
    n = int(np.prod(shape))
    flat = rng.choice(n, count, replace=False)
    signs = rng.choice([-1.0, 1.0], count)
    return [Spike(tuple(int(v) for v in np.unravel_index(i, shape)), float(s * magnitude)) for i, s in zip(flat, signs)]


def gen_series(shape, spec: HarmonicSpec, n_frames: int, drift=0.0, resample_spikes: bool = True) -> list[GridField]:
    """Frames whose harmonic phases advance by ``drift`` (scalar or per harmonic) per frame.

    Spike positions are redrawn each frame (magnitudes kept) unless
    ``resample_spikes`` is false or the drift is zero.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    shape = tuple(int(s) for s in shape)
    drift = np.broadcast_to(np.asarray(drift, dtype=np.float64), (len(spec.harmonics),))
    still = not np.any(drift)
    rng = np.random.default_rng(spec.seed + 7919)
    frames = []
    for t in range(n_frames):
        hs = [replace(h, phase=h.phase + t * float(d)) for h, d in zip(spec.harmonics, drift)]
        spikes = spec.spikes
        if t > 0 and resample_spikes and not still and spikes:
            n = int(np.prod(shape))
            flat = rng.choice(n, len(spikes), replace=False)
            spikes = [Spike(tuple(int(v) for v in np.unravel_index(i, shape)), s.magnitude) for i, s in zip(flat, spec.spikes)]
        frames.append(gen_field(shape, HarmonicSpec(hs, spikes, spec.constant, spec.seed), frame_index=t))
    return frames
