"""Fidelity and size metrics. All accumulations are done in float64."""
from __future__ import annotations

import json
import math
import time
from contextlib import contextmanager

import numpy as np

from .field import GridField, NormalizationParams

PSNR_IDENTICAL = math.inf


def _vals(a) -> np.ndarray:
    return (a.values if isinstance(a, GridField) else np.asarray(a)).astype(np.float64)


def rmse(a, b) -> float:
    x, y = _vals(a), _vals(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.size == 0:
        return 0.0
    d = x - y
    return float(np.sqrt(np.mean(d * d)))


def normalized_rmse(a, b, norm: NormalizationParams) -> float:
    """RMSE expressed in the ``[-1, 1]`` space defined by ``norm``.

    A degenerate (constant) normalisation has no scale; plain RMSE is returned.
    """
    r = rmse(a, b)
    if norm.degenerate:
        return r
    return r * 2.0 / (norm.v_max - norm.v_min)


def psnr(truth, approx) -> float:
    """``20 log10(range(truth) / rmse)``; ``inf`` for an exact match."""
    t = _vals(truth)
    rng = float(t.max() - t.min()) if t.size else 0.0
    if not rng > 0:
        raise ValueError("PSNR undefined for a constant ground truth")
    r = rmse(truth, approx)
    if r == 0:
        return PSNR_IDENTICAL
    return 20.0 * math.log10(rng / r)


def compression_ratio(archive_bytes: int, n_frames: int, voxels_per_frame: int) -> float:
    """Raw float32 payload size over archive size."""
    if archive_bytes <= 0:
        raise ValueError("archive is empty")
    return n_frames * voxels_per_frame * 4 / archive_bytes


class Stopwatch:
    def __init__(self):
        self.elapsed = 0.0

    @contextmanager
    def running(self):
        t0 = time.perf_counter()
        try:
            yield self
        finally:
            self.elapsed += time.perf_counter() - t0


def format_report(values: dict) -> str:
    """Line-oriented ``key=value`` text followed by one JSON line."""

    def fmt(v):
        if isinstance(v, float):
            return "inf" if math.isinf(v) else f"{v:.6g}"
        return str(v)

    lines = [f"{k}={fmt(v)}" for k, v in values.items()]
    safe = {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in values.items()}
    lines.append("json=" + json.dumps(safe, sort_keys=True))
    return "\n".join(lines)
