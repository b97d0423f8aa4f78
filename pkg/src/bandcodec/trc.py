"""Temporal residual coding of frame series.

Frame 0 is compressed on its own. Each later frame reuses the previous one:

* its high band is stored sparsely, as for a standalone frame;
* the previous low-band network is trained further on the new low band for a
  short budget (a warm start rather than a fresh fit);
* the previous frame's *mid part* (everything in its reconstruction except
  the sparse values and the low network) is carried over, and only the
  residual against it is fitted, by a one-level pyramid.

After assembling the candidate reconstruction, the retraining judgment
compares its normalised RMSE against ``eps_retrain``. Above it, the candidate
is rejected and the frame is compressed from scratch; the chain records a
retrain marker there.

Each frame is normalised on its own. Carried-over parts have no mean, so
moving them into the next frame's normalised space only needs the ratio of
the two half-ranges.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from . import metrics, pyramid, siren, sparse
from .codec import CodecConfig, FrameArtifact, compress_frame, postprocess, preprocess, quantize_half, reconstruct_components
from .field import Climatology, GridField, NormalizationParams, build_coordinates
from .pyramid import PyramidArtifact
from .siren import SirenNetwork, TrainConfig
from .sparse import SparseHighBand
from .spectral import decompose_array


@dataclass(eq=False)
class TrcFrameArtifact:
    shape: tuple[int, int, int]
    frame_index: int
    norm: NormalizationParams
    clim_mean: float | None
    sparse: SparseHighBand | None
    low_net: SirenNetwork
    low_factors: tuple[int, int, int]
    low_upscale: str
    mid_residual: PyramidArtifact
    norm_rmse: float = math.nan
    stats: dict = dc_field(default_factory=dict)

    def nets(self) -> list[SirenNetwork]:
        return [self.low_net] + self.mid_residual.nets

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrcFrameArtifact):
            return NotImplemented
        return (
            tuple(self.shape) == tuple(other.shape)
            and self.frame_index == other.frame_index
            and self.norm == other.norm
            and self.clim_mean == other.clim_mean
            and self.sparse == other.sparse
            and self.low_net == other.low_net
            and tuple(self.low_factors) == tuple(other.low_factors)
            and self.low_upscale == other.low_upscale
            and self.mid_residual == other.mid_residual
            and (self.norm_rmse == other.norm_rmse or (math.isnan(self.norm_rmse) and math.isnan(other.norm_rmse)))
        )


class NonFiniteFrameError(ValueError):
    """A stored frame decodes to NaN or infinite values."""


@dataclass
class RetrainSignal:
    """Returned instead of an artifact when the judgment rejects a delta frame."""

    frame_index: int
    norm_rmse: float
    reason: str
    candidate: TrcFrameArtifact | None = None


@dataclass(eq=False)
class TemporalChain:
    frames: list  # FrameArtifact | TrcFrameArtifact, in frame order
    retrain_markers: set[int] = dc_field(default_factory=set)
    stats: dict = dc_field(default_factory=dict)

    @property
    def base(self) -> FrameArtifact:
        return self.frames[0]

    @property
    def deltas(self) -> list[TrcFrameArtifact]:
        return [f for f in self.frames if isinstance(f, TrcFrameArtifact)]

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.frames[0].shape)  # type: ignore[return-value]

    def __len__(self) -> int:
        return len(self.frames)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TemporalChain):
            return NotImplemented
        return self.frames == other.frames and set(self.retrain_markers) == set(other.retrain_markers)


@dataclass
class ChainState:
    """What the next frame needs from the previous reconstruction."""

    norm: NormalizationParams
    low_net: SirenNetwork
    low_factors: tuple[int, int, int]
    low_upscale: str
    carry: np.ndarray  # mid part, in the previous frame's normalised space
    recon: np.ndarray  # full normalised reconstruction
    clim_mean: float | None = None


def _low_prediction(net, coords, shape, factors, mode) -> np.ndarray:
    return pyramid.upscale_net(net, coords, shape, factors, mode)


def state_from_frame(art: FrameArtifact, coords: np.ndarray) -> ChainState:
    comps = reconstruct_components(art, coords)
    shape = tuple(art.shape)
    if art.mim is not None and art.mim.thumbnail_net is not None:
        net, factors, mode = art.mim.thumbnail_net, tuple(art.mim.scale_per_axis), art.mim.upscale
    elif "low" in art.fallback:
        net, factors, mode = art.fallback["low"], (1, 1, 1), "query"
    else:
        # degenerate frame: nothing was fitted, start a fresh network next time
        net, factors, mode = None, pyramid.default_factors(shape), "query"
    low = _low_prediction(net, coords, shape, factors, mode) if net is not None else np.zeros(shape)
    total = comps.total
    return ChainState(art.norm, net, factors, mode, total - comps.high - low, total, art.clim_mean)


def _scale(prev: NormalizationParams, new: NormalizationParams) -> float:
    if prev.degenerate or new.degenerate:
        return 0.0
    return prev.half_range / new.half_range


def _offset(prev: NormalizationParams, prev_mean, new: NormalizationParams, new_mean) -> float:
    """Constant that, with :func:`_scale`, maps old normalised values into the new space."""
    if new.degenerate:
        return 0.0
    centre = lambda n, m: 0.5 * (n.v_min + n.v_max) + (m or 0.0)
    return (centre(prev, prev_mean) - centre(new, new_mean)) / new.half_range


def rebase(net: SirenNetwork, scale: float, offset: float) -> SirenNetwork:
    """``scale * net + offset`` as a network, by adjusting the linear head.

    A network without a linear head (a single sine layer) is returned unchanged.
    """
    out = net.astype(np.float32)
    out.storage = "f32"
    if len(out.weights) < 2:
        return out
    out.weights[-1] = (out.weights[-1] * np.float32(scale)).astype(np.float32)
    out.biases[-1] = (out.biases[-1] * np.float32(scale) + np.float32(offset)).astype(np.float32)
    return out


def assemble_delta(art: TrcFrameArtifact, state: ChainState, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalised reconstruction of a delta frame, its low part and its carried mid part."""
    shape = tuple(art.shape)
    high = sparse.densify_array(art.sparse).astype(np.float64) if art.sparse is not None else np.zeros(shape)
    low = _low_prediction(art.low_net, coords, shape, art.low_factors, art.low_upscale)
    carry = _scale(state.norm, art.norm) * state.carry + pyramid.reconstruct(art.mid_residual, coords, shape)
    return high + low + carry, low, carry


def advance(art, state: ChainState | None, coords: np.ndarray) -> ChainState:
    """State after decoding ``art`` on top of ``state``."""
    if isinstance(art, FrameArtifact):
        return state_from_frame(art, coords)
    if state is None:
        raise ValueError(f"delta frame {art.frame_index} has no preceding frame")
    recon, _, carry = assemble_delta(art, state, coords)
    return ChainState(art.norm, art.low_net, tuple(art.low_factors), art.low_upscale, carry, recon, art.clim_mean)


def _delta_rmse(art: TrcFrameArtifact, state: ChainState, f: GridField, coords, clim) -> float:
    recon, _, _ = assemble_delta(art, state, coords)
    decoded = postprocess(recon, art.norm, art.clim_mean, clim)
    return metrics.normalized_rmse(f.values, decoded, art.norm)


def compress_next_frame(
    state: ChainState,
    f: GridField,
    cfg: CodecConfig = CodecConfig(),
    coords: np.ndarray | None = None,
    clim: Climatology | None = None,
) -> TrcFrameArtifact | RetrainSignal:
    t0 = time.perf_counter()
    shape = f.shape
    coords = build_coordinates(shape) if coords is None else coords
    if state.low_net is None:
        return RetrainSignal(f.frame_index, math.inf, "previous frame carries no low-band network")
    Y, norm, clim_mean = preprocess(f, clim)
    if norm.degenerate:
        return RetrainSignal(f.frame_index, math.inf, "constant frame")
    low, _, high = decompose_array(Y, cfg.thresholds)
    sp = sparse.sparsify(high, quantile=cfg.quantile) if cfg.use_ssm else None
    high_hat = sparse.densify_array(sp).astype(np.float64) if sp is not None else np.zeros(shape)

    factors = state.low_factors
    t_coords = pyramid.thumbnail_coords(shape, factors).reshape(-1, 4)
    # move the previous network into this frame's normalised space first, so
    # the warm start only has to follow the actual change of the low band
    start = rebase(state.low_net, _scale(state.norm, norm), _offset(state.norm, state.clim_mean, norm, clim_mean))
    warm_cfg = TrainConfig(max_steps=cfg.warm_steps, lr_init=cfg.warm_lr, target_rmse=0.5 * cfg.eps, seed=cfg.seed + 4000)
    low_net, warm = siren.train(start, t_coords, pyramid.downscale(low, factors).reshape(-1), warm_cfg)
    low_hat = _low_prediction(low_net, coords, shape, factors, state.low_upscale)

    carried = _scale(state.norm, norm) * state.carry
    resid = Y - high_hat - low_hat - carried
    thumb_cfg = TrainConfig(max_steps=cfg.trc_steps, lr_init=cfg.lr, target_rmse=0.5 * cfg.eps, seed=cfg.seed + 5000)
    block_cfg = TrainConfig(max_steps=cfg.block_steps, lr_init=cfg.lr, seed=cfg.seed + 6000)
    pyr = pyramid.compress(
        resid, coords, cfg.eps, cfg.trc_thumb, cfg.trc_residual, thumb_cfg, block_cfg,
        upscale=cfg.upscale, workers=cfg.threads,
    )
    art = TrcFrameArtifact(shape, f.frame_index, norm, clim_mean, sp, low_net, factors, state.low_upscale, pyr)
    stats = {"warm_steps": warm.steps_run, "warm_rmse": warm.final_rmse, "residual_rms": float(np.sqrt(np.mean(resid**2)))}
    stats.update({f"residual_{k}": v for k, v in pyr.stats.items()})
    if cfg.quant16:
        stats["half"] = quantize_half(art, lambda: _delta_rmse(art, state, f, coords, clim), cfg.eps)
    art.norm_rmse = _delta_rmse(art, state, f, coords, clim)
    stats["time"] = time.perf_counter() - t0
    art.stats = stats
    if warm.diverged or pyr.stats.get("diverged"):
        return RetrainSignal(f.frame_index, art.norm_rmse, "a fit diverged", art)
    if not art.norm_rmse <= cfg.retrain_eps:
        return RetrainSignal(f.frame_index, art.norm_rmse, f"norm-RMSE {art.norm_rmse:.3g} > {cfg.retrain_eps:.3g}", art)
    return art


def compress_series(
    frames: list[GridField],
    cfg: CodecConfig = CodecConfig(),
    clim: Climatology | None = None,
) -> TemporalChain:
    """Compress frames in order; frame 0 (and every retrained frame) from scratch."""
    if not frames:
        raise ValueError("cannot compress an empty series")
    shape = frames[0].shape
    for f in frames[1:]:
        if f.shape != shape:
            raise ValueError(f"frame {f.frame_index} has shape {f.shape}, expected {shape}")
        if f.variable_name != frames[0].variable_name:
            raise ValueError(f"frame {f.frame_index} holds {f.variable_name!r}, expected {frames[0].variable_name!r}")
    t0 = time.perf_counter()
    coords = build_coordinates(shape)
    chain = TemporalChain([], set(), {"judgments": [], "frame_times": []})
    state: ChainState | None = None
    for t, f in enumerate(frames):
        f = f if f.frame_index == t else replace(f, frame_index=t)
        t1 = time.perf_counter()
        art = None
        if t > 0 and cfg.use_trc:
            res = compress_next_frame(state, f, cfg, coords, clim)
            chain.stats["judgments"].append(
                {"frame": t, "norm_rmse": res.norm_rmse, "accepted": not isinstance(res, RetrainSignal)}
            )
            if isinstance(res, RetrainSignal):
                chain.retrain_markers.add(t)
                chain.stats.setdefault("rejected", {})[t] = res
            else:
                art = res
        if art is None:
            art = compress_frame(f, cfg, clim, coords)
        chain.frames.append(art)
        chain.stats["frame_times"].append(time.perf_counter() - t1)
        state = advance(art, state, coords)
    chain.stats["time"] = time.perf_counter() - t0
    return chain


def reconstruct_series(
    chain: TemporalChain,
    coords: np.ndarray | None = None,
    clim: Climatology | None = None,
    n_frames: int | None = None,
) -> list[GridField]:
    """Decode frames ``0 .. n_frames-1`` in order (all frames by default)."""
    if not chain.frames:
        raise ValueError("empty chain")
    coords = build_coordinates(chain.shape) if coords is None else coords
    n = len(chain.frames) if n_frames is None else int(n_frames)
    if not 0 < n <= len(chain.frames):
        raise ValueError(f"can decode 1..{len(chain.frames)} frames, asked for {n}")
    out: list[GridField] = []
    state: ChainState | None = None
    for t, art in enumerate(chain.frames[:n]):
        if art.frame_index != t:
            raise ValueError(f"chain link broken: position {t} holds frame {art.frame_index}")
        state = advance(art, state, coords)
        values = postprocess(state.recon, art.norm, art.clim_mean, clim)
        if not np.all(np.isfinite(values)):
            raise NonFiniteFrameError(f"frame {t} decodes to non-finite values")
        out.append(GridField(values, frame_index=t))
    return out
