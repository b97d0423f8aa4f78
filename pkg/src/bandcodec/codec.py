"""Single-frame compression: sparse high band, pyramid low band, octree mid band.

The frame is pre-processed (climatology removed, min-max normalised to
``[-1, 1]``) and split into three FFT bands. The high band keeps only its
largest magnitudes in a sparse store. The low band is fitted by the pyramid
module. The octree module then fits whatever the low and high reconstructions
leave unexplained, block by block, which is mostly the mid band.

Each stage can be switched off. A disabled stage falls back to one global
network fitted to that band at full resolution, which is what the ablation
comparisons measure.
"""
from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import metrics, octree, pyramid, siren, sparse
from .field import Climatology, GridField, NormalizationParams, build_coordinates, denormalize_array, normalize, subtract_climatology
from .octree import OctreeArtifact
from .pyramid import NetSpec, PyramidArtifact
from .siren import SirenNetwork, TrainConfig
from .sparse import SparseHighBand
from .spectral import INIT_THRESHOLDS, REDECOMPOSE_THRESHOLDS, BandThresholds, decompose_array, degenerate_axis_notes

FALLBACK_BANDS = ("high", "low", "mid")


@dataclass(frozen=True)
class CodecConfig:
    """Every knob of the codec. Defaults are tuned for desk-scale grids.

    Network widths are far below the 128/256 used on reanalysis-scale data:
    at ``8 x 96 x 192`` a single 256-wide network already outweighs the raw
    field. The learning rate is raised to match the smaller networks.
    """

    eps: float = 1e-3
    eps_retrain: float | None = None
    thresholds: BandThresholds = INIT_THRESHOLDS
    redecompose: BandThresholds = REDECOMPOSE_THRESHOLDS
    quantile: float = sparse.DEFAULT_QUANTILE
    thumb: NetSpec = NetSpec(2, 24, 14.0)
    low_residual: NetSpec = NetSpec(1, 8, 15.0)
    mid_block: NetSpec = NetSpec(2, 16, 22.0)
    trc_thumb: NetSpec = NetSpec(3, 16, 15.0)
    trc_residual: NetSpec = NetSpec(2, 8, 16.0)
    lr: float = 3e-3
    thumb_steps: int = 3000
    block_steps: int = 3000
    idm_budget: int = 2000
    max_depth: int = 3
    warm_steps: int = 500
    warm_lr: float = 1e-4
    trc_steps: int = 1500
    upscale: str = "query"
    use_ssm: bool = True
    use_mim: bool = True
    use_idm: bool = True
    use_trc: bool = True
    quant16: bool = False
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not (isinstance(self.eps, (int, float)) and math.isfinite(self.eps) and self.eps > 0):
            raise ValueError(f"eps must be a positive finite tolerance, got {self.eps!r} (0 can never be reached)")
        if self.eps_retrain is not None and not self.eps_retrain > 0:
            raise ValueError(f"eps_retrain must be positive, got {self.eps_retrain!r}")
        if not 0.0 <= self.quantile <= 1.0:
            raise ValueError(f"quantile must lie in [0, 1], got {self.quantile}")
        if self.upscale not in pyramid.UPSCALE_MODES:
            raise ValueError(f"upscale must be one of {pyramid.UPSCALE_MODES}, got {self.upscale!r}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        for name in ("thumb_steps", "block_steps", "idm_budget", "max_depth", "warm_steps", "trc_steps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def retrain_eps(self) -> float:
        return self.eps if self.eps_retrain is None else float(self.eps_retrain)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "CodecConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        kw = {}
        for k, v in d.items():
            if k in ("thresholds", "redecompose") and isinstance(v, dict):
                v = BandThresholds(float(v["omega"]), int(v["n_c"]), v.get("freq_unit", "mode-index"))
            elif k in ("thumb", "low_residual", "mid_block", "trc_thumb", "trc_residual") and isinstance(v, (dict, list)):
                v = NetSpec(**v) if isinstance(v, dict) else NetSpec(*v)
            kw[k] = v
        return cls(**kw)

    def replace(self, **kw) -> "CodecConfig":
        return dataclasses.replace(self, **kw)


@dataclass(eq=False)
class FrameArtifact:
    """Everything needed to rebuild one frame without any other frame."""

    shape: tuple[int, int, int]
    frame_index: int
    norm: NormalizationParams
    clim_mean: float | None
    thresholds: BandThresholds
    sparse: SparseHighBand | None = None
    mim: PyramidArtifact | None = None
    idm: OctreeArtifact | None = None
    fallback: dict[str, SirenNetwork] = dc_field(default_factory=dict)
    norm_rmse: float = math.nan
    stats: dict = dc_field(default_factory=dict)

    def nets(self) -> list[SirenNetwork]:
        out = list(self.mim.nets) if self.mim is not None else []
        out += self.idm.nets if self.idm is not None else []
        return out + [self.fallback[k] for k in FALLBACK_BANDS if k in self.fallback]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameArtifact):
            return NotImplemented
        return (
            tuple(self.shape) == tuple(other.shape)
            and self.frame_index == other.frame_index
            and self.norm == other.norm
            and self.clim_mean == other.clim_mean
            and self.thresholds == other.thresholds
            and self.sparse == other.sparse
            and self.mim == other.mim
            and self.idm == other.idm
            and self.fallback == other.fallback
            and _same_float(self.norm_rmse, other.norm_rmse)
        )


def _same_float(a: float, b: float) -> bool:
    return a == b or (math.isnan(a) and math.isnan(b))


@dataclass
class Components:
    """Normalised-space pieces of a reconstruction."""

    high: np.ndarray
    low: np.ndarray
    mid: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.high + self.low + self.mid


def preprocess(f: GridField, clim: Climatology | None = None) -> tuple[np.ndarray, NormalizationParams, float | None]:
    """Anomaly, normalised to ``[-1, 1]``; also returns the params needed to undo it."""
    anom = subtract_climatology(f, clim)
    normed, params = normalize(anom)
    if clim is not None:
        params = dataclasses.replace(params, climatology_id=clim.epoch_label)
    mean = anom.meta.get("climatology_mean") if clim is None else None
    return normed.values.astype(np.float64), params, mean


def postprocess(recon: np.ndarray, norm: NormalizationParams, clim_mean: float | None, clim: Climatology | None = None) -> np.ndarray:
    """Inverse of :func:`preprocess` for a normalised-space reconstruction."""
    out = denormalize_array(recon, norm)
    if clim is not None:
        return out + np.asarray(clim.values, dtype=np.float32)
    if clim_mean is not None:
        return out + np.float32(clim_mean)
    return out


def _train_cfg(cfg: CodecConfig, steps: int, seed_offset: int, target: float = 0.0) -> TrainConfig:
    return TrainConfig(max_steps=steps, lr_init=cfg.lr, target_rmse=target, seed=cfg.seed + seed_offset)


def _global_fit(target: np.ndarray, coords: np.ndarray, spec: NetSpec, cfg: TrainConfig) -> tuple[SirenNetwork, np.ndarray, dict]:
    net, rep = siren.fit(coords.reshape(-1, 4), target.reshape(-1), spec.widths(), spec.omega, cfg)
    pred = siren.forward(net, coords.reshape(-1, 4)).reshape(target.shape).astype(np.float64)
    return net, pred, {"steps": rep.steps_run, "rmse": rep.final_rmse, "diverged": rep.diverged}


def reconstruct_components(art: FrameArtifact, coords: np.ndarray | None = None) -> Components:
    shape = tuple(art.shape)
    if coords is None:
        coords = build_coordinates(shape)
    zero = np.zeros(shape, dtype=np.float64)
    high, low, mid = zero.copy(), zero.copy(), zero.copy()
    if art.sparse is not None:
        high += sparse.densify_array(art.sparse)
    if "high" in art.fallback:
        high += siren.forward(art.fallback["high"], coords.reshape(-1, 4)).reshape(shape)
    if art.mim is not None:
        low += pyramid.reconstruct(art.mim, coords, shape)
    if "low" in art.fallback:
        low += siren.forward(art.fallback["low"], coords.reshape(-1, 4)).reshape(shape)
    if art.idm is not None:
        mid += octree.reconstruct(art.idm, coords)
    if "mid" in art.fallback:
        mid += siren.forward(art.fallback["mid"], coords.reshape(-1, 4)).reshape(shape)
    return Components(high, low, mid)


def reconstruct_frame(art: FrameArtifact, coords: np.ndarray | None = None, clim: Climatology | None = None) -> GridField:
    recon = reconstruct_components(art, coords).total
    values = postprocess(recon, art.norm, art.clim_mean, clim)
    return GridField(values, frame_index=art.frame_index)


def _net_slots(art) -> list[tuple[object, object]]:
    """``(owner, key)`` pairs addressing every network inside an artifact."""
    slots: list[tuple[object, object]] = []
    pyrs = [getattr(art, "mim", None), getattr(art, "mid_residual", None)]
    for p in pyrs:
        if p is None:
            continue
        if p.thumbnail_net is not None:
            slots.append((p, "thumbnail_net"))
        slots += [(p.residual_blocks, k) for k in sorted(p.residual_blocks)]
    idm = getattr(art, "idm", None)
    if idm is not None:
        slots += [(n, "net") for n in idm.root.walk() if n.net is not None]
    fb = getattr(art, "fallback", None) or {}
    slots += [(fb, k) for k in FALLBACK_BANDS if k in fb]
    if getattr(art, "low_net", None) is not None:
        slots.append((art, "low_net"))
    return slots


def _get(owner, key):
    return owner[key] if isinstance(owner, dict) else getattr(owner, key)


def _set(owner, key, value) -> None:
    if isinstance(owner, dict):
        owner[key] = value
    else:
        setattr(owner, key, value)


def quantize_half(art, measure, eps: float) -> tuple[int, int]:
    """Switch networks to 16-bit storage one at a time, keeping each only if
    ``measure()`` (the frame's normalised RMSE) stays within ``eps`` or does
    not get worse. Returns ``(kept_half, fell_back)``."""
    base = measure()
    limit = max(eps, base)
    kept = back = 0
    for owner, key in _net_slots(art):
        full = _get(owner, key)
        _set(owner, key, siren.to_half(full))
        r = measure()
        if r <= limit:
            kept += 1
        else:
            _set(owner, key, full)
            back += 1
    return kept, back


def compress_frame(
    f: GridField,
    cfg: CodecConfig = CodecConfig(),
    clim: Climatology | None = None,
    coords: np.ndarray | None = None,
) -> FrameArtifact:
    """Compress one frame to a :class:`FrameArtifact` at tolerance ``cfg.eps``."""
    t0 = time.perf_counter()
    shape = f.shape
    coords = build_coordinates(shape) if coords is None else coords
    Y, norm, clim_mean = preprocess(f, clim)
    art = FrameArtifact(shape, f.frame_index, norm, clim_mean, cfg.thresholds)
    stats: dict = {"notes": []}
    if not norm.degenerate:
        _fit_bands(art, Y, coords, cfg, stats)
    if cfg.quant16 and art.nets():
        stats["half"] = quantize_half(art, lambda: _frame_rmse(art, f, coords, clim), cfg.eps)
    art.norm_rmse = _frame_rmse(art, f, coords, clim)
    stats["time"] = time.perf_counter() - t0
    art.stats = stats
    return art


def _frame_rmse(art: FrameArtifact, f: GridField, coords, clim) -> float:
    decoded = reconstruct_frame(art, coords, clim)
    return metrics.normalized_rmse(f.values, decoded.values, art.norm)


def _fit_bands(art: FrameArtifact, Y: np.ndarray, coords: np.ndarray, cfg: CodecConfig, stats: dict) -> None:
    eps = cfg.eps
    stats["notes"] += degenerate_axis_notes(Y.shape)
    low, mid, high = decompose_array(Y, cfg.thresholds)

    t = time.perf_counter()
    if cfg.use_ssm:
        art.sparse = sparse.sparsify(high, quantile=cfg.quantile)
        high_hat = sparse.densify_array(art.sparse).astype(np.float64)
        stats["ssm"] = {"nnz": art.sparse.nnz}
    else:
        net, high_hat, st = _global_fit(high, coords, cfg.thumb, _train_cfg(cfg, cfg.thumb_steps, 3001, eps))
        art.fallback["high"] = net
        stats["ssm"] = {"fallback": st}
    stats["ssm"]["time"] = time.perf_counter() - t

    t = time.perf_counter()
    if cfg.use_mim:
        art.mim = pyramid.compress(
            low, coords, eps, cfg.thumb, cfg.low_residual,
            _train_cfg(cfg, cfg.thumb_steps, 0, 0.5 * eps),
            _train_cfg(cfg, cfg.block_steps, 1000),
            upscale=cfg.upscale, workers=cfg.threads,
        )
        low_hat = pyramid.reconstruct(art.mim, coords, art.shape)
        stats["mim"] = dict(art.mim.stats, blocks=len(art.mim.residual_blocks), unmet=list(art.mim.unmet_blocks))
    else:
        net, low_hat, st = _global_fit(low, coords, cfg.thumb, _train_cfg(cfg, cfg.thumb_steps, 3002, 0.5 * eps))
        art.fallback["low"] = net
        stats["mim"] = {"fallback": st}
    stats["mim"]["time"] = time.perf_counter() - t

    t = time.perf_counter()
    context = low_hat + high_hat
    if cfg.use_idm:
        art.idm = octree.compress(
            mid, context, Y, coords, eps, cfg.mid_block,
            _train_cfg(cfg, cfg.idm_budget, 2000),
            budget=cfg.idm_budget, max_depth=cfg.max_depth,
            thresholds=cfg.redecompose, quantile=cfg.quantile, workers=cfg.threads,
        )
        leaves = art.idm.leaves()
        stats["idm"] = dict(
            art.idm.stats,
            nets=len(art.idm.nets),
            unmet=sum(n.unmet for n in leaves),
            states=[int(n.state) for n in art.idm.root.children],
        )
    else:
        target = Y - context
        net, _, st = _global_fit(target, coords, cfg.mid_block, _train_cfg(cfg, cfg.idm_budget, 3003, eps))
        art.fallback["mid"] = net
        stats["idm"] = {"fallback": st}
    stats["idm"]["time"] = time.perf_counter() - t
