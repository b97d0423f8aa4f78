"""One-level Laplacian pyramid of sine networks for smooth bands.

A thumbnail of the target (box means over ``3x3x3`` cells) is fitted by one
network, its prediction is brought back to full resolution, and the remaining
residual is checked block by block. Blocks still above tolerance get their
own small residual network.

Two upscale operators stand in for a variational-assimilation upscale, which
needs background-error statistics that a self-contained codec lacks:

``"interp"``
    separable linear (trilinear) interpolation of the thumbnail prediction,
    periodic in longitude and clamped in latitude/level.
``"query"``
    the thumbnail network evaluated directly at the full-resolution
    coordinates. The network is a continuous function of position, so this
    needs no interpolation at all and avoids the cell-periodic error pattern
    that linear interpolation leaves behind. This is the default.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from . import siren
from .field import coordinates_at
from .siren import SirenNetwork, TrainConfig

MAX_BLOCKS = 27
UPSCALE_MODES = ("query", "interp")


@dataclass(frozen=True)
class NetSpec:
    hidden_layers: int
    width: int
    omega: float

    def widths(self, n_in: int = 4) -> list[int]:
        return [n_in] + [self.width] * self.hidden_layers + [1]


@dataclass(eq=False)
class PyramidArtifact:
    thumbnail_net: SirenNetwork | None
    scale_per_axis: tuple[int, int, int]
    block_grid: tuple[int, int, int]
    residual_blocks: dict[int, SirenNetwork] = dc_field(default_factory=dict)
    target_rmse: float = 0.0
    unmet_blocks: list[int] = dc_field(default_factory=list)
    upscale: str = "query"
    stats: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.upscale not in UPSCALE_MODES:
            raise ValueError(f"unknown upscale mode {self.upscale!r}")
        if int(np.prod(self.block_grid)) > MAX_BLOCKS:
            raise ValueError(f"block grid {self.block_grid} exceeds {MAX_BLOCKS} blocks")
        n = int(np.prod(self.block_grid))
        bad = [b for b in self.residual_blocks if not 0 <= b < n]
        if bad:
            raise ValueError(f"block ids {bad} outside grid {self.block_grid}")

    @property
    def nets(self) -> list[SirenNetwork]:
        head = [self.thumbnail_net] if self.thumbnail_net is not None else []
        return head + [self.residual_blocks[k] for k in sorted(self.residual_blocks)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PyramidArtifact):
            return NotImplemented
        return (
            self.thumbnail_net == other.thumbnail_net
            and tuple(self.scale_per_axis) == tuple(other.scale_per_axis)
            and tuple(self.block_grid) == tuple(other.block_grid)
            and sorted(self.residual_blocks) == sorted(other.residual_blocks)
            and all(self.residual_blocks[k] == other.residual_blocks[k] for k in self.residual_blocks)
            and sorted(self.unmet_blocks) == sorted(other.unmet_blocks)
            and self.upscale == other.upscale
        )


MimArtifact = PyramidArtifact


def default_factors(shape) -> tuple[int, int, int]:
    return tuple(3 if n >= 9 else 1 for n in shape)  # type: ignore[return-value]


def default_block_grid(shape) -> tuple[int, int, int]:
    return tuple(3 if n >= 9 else 1 for n in shape)  # type: ignore[return-value]


def _cells(n: int, s: int) -> list[tuple[int, int]]:
    return [(a, min(a + s, n)) for a in range(0, n, s)]


def downscale(values: np.ndarray, factors) -> np.ndarray:
    """Box-mean pooling; a trailing partial cell averages what it covers."""
    out = np.asarray(values, dtype=np.float64)
    for ax, s in enumerate(factors):
        if s == 1:
            continue
        n = out.shape[ax]
        starts = np.arange(0, n, s)
        sums = np.add.reduceat(out, starts, axis=ax)
        counts = np.diff(np.append(starts, n)).astype(np.float64)
        shp = [1, 1, 1]
        shp[ax] = counts.size
        out = sums / counts.reshape(shp)
    return out


def cell_centers(n: int, s: int) -> np.ndarray:
    return np.array([(a + b - 1) / 2.0 for a, b in _cells(n, s)])


def interp_matrix(n_fine: int, centers: np.ndarray, periodic: bool) -> np.ndarray:
    """Linear interpolation weights from coarse samples at ``centers`` to ``0..n_fine-1``."""
    m = centers.size
    w = np.zeros((n_fine, m))
    if m == 1:
        w[:, 0] = 1.0
        return w
    x = np.arange(n_fine, dtype=np.float64)
    if periodic:
        ext = np.concatenate([centers[-1:] - n_fine, centers, centers[:1] + n_fine])
        idx = np.concatenate([[m - 1], np.arange(m), [0]])
    else:
        ext, idx = centers, np.arange(m)
    x_c = np.clip(x, ext[0], ext[-1])
    hi = np.clip(np.searchsorted(ext, x_c, side="right"), 1, ext.size - 1)
    lo = hi - 1
    t = (x_c - ext[lo]) / (ext[hi] - ext[lo])
    np.add.at(w, (np.arange(n_fine), idx[lo]), 1.0 - t)
    np.add.at(w, (np.arange(n_fine), idx[hi]), t)
    return w


def upscale_interp(thumb: np.ndarray, target_shape, factors=None) -> np.ndarray:
    target_shape = tuple(int(n) for n in target_shape)
    factors = default_factors(target_shape) if factors is None else tuple(factors)
    out = np.asarray(thumb, dtype=np.float64)
    for ax, (n, s) in enumerate(zip(target_shape, factors)):
        c = cell_centers(n, s)
        if c.size != out.shape[ax]:
            raise ValueError(f"thumbnail extent {out.shape[ax]} on axis {ax} does not match {n} / {s}")
        if s == 1:
            continue
        w = interp_matrix(n, c, periodic=(ax == 2))
        out = np.moveaxis(np.tensordot(w, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    return out


def thumbnail_coords(shape, factors) -> np.ndarray:
    centers = [cell_centers(n, s) for n, s in zip(shape, factors)]
    return coordinates_at(*centers, shape)


def axis_splits(n: int, k: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, n, k + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def block_slices(shape, grid) -> list[tuple[slice, slice, slice]]:
    """C-ordered list of block index ranges covering ``shape`` exactly once."""
    per_axis = [axis_splits(n, k) for n, k in zip(shape, grid)]
    out = []
    for a in per_axis[0]:
        for b in per_axis[1]:
            for c in per_axis[2]:
                out.append((slice(*a), slice(*b), slice(*c)))
    return out


def _block_rmse(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x, dtype=np.float64)))) if x.size else 0.0


def upscale_net(net: SirenNetwork, coords: np.ndarray, shape, factors, mode: str = "query") -> np.ndarray:
    """Full-resolution prediction of a thumbnail network."""
    if mode == "query":
        return siren.forward(net, coords.reshape(-1, 4)).reshape(shape).astype(np.float64)
    t_coords = thumbnail_coords(shape, factors)
    pred = siren.forward(net, t_coords.reshape(-1, 4)).reshape(t_coords.shape[:3])
    return upscale_interp(pred, shape, factors)


def compress(
    target: np.ndarray,
    coords: np.ndarray,
    eps: float,
    thumb_spec: NetSpec,
    block_spec: NetSpec,
    thumb_cfg: TrainConfig,
    block_cfg: TrainConfig,
    factors=None,
    grid=None,
    thumbnail_net: SirenNetwork | None = None,
    upscale: str = "query",
    workers: int = 1,
) -> PyramidArtifact:
    """Fit a thumbnail network plus per-block residual networks to ``target``.

    Passing ``thumbnail_net`` warm-starts the thumbnail fit from it. Block
    fits are seeded from ``block_cfg.seed`` and the block id, so running them
    on ``workers`` threads gives the same result as running them in order.
    """
    shape = target.shape
    if upscale not in UPSCALE_MODES:
        raise ValueError(f"unknown upscale mode {upscale!r}")
    factors = default_factors(shape) if factors is None else tuple(factors)
    grid = default_block_grid(shape) if grid is None else tuple(grid)
    thumb = downscale(target, factors)
    t_coords = thumbnail_coords(shape, factors).reshape(-1, 4)
    if thumbnail_net is None:
        net, rep = siren.fit(t_coords, thumb.reshape(-1), thumb_spec.widths(), thumb_spec.omega, thumb_cfg)
    else:
        net, rep = siren.train(thumbnail_net.copy(), t_coords, thumb.reshape(-1), thumb_cfg)
    stats = {"thumb_steps": rep.steps_run, "thumb_rmse": rep.final_rmse, "diverged": rep.diverged}
    resid = target - upscale_net(net, coords, shape, factors, upscale)
    art = PyramidArtifact(net, factors, grid, {}, eps, [], upscale, stats)

    def fit_block(item):
        bid, sl = item
        r = resid[sl]
        before = _block_rmse(r)
        if before <= eps:
            return bid, None, 0, False
        cfg = replace(block_cfg, target_rmse=eps, seed=block_cfg.seed + 1 + bid)
        bnet, brep = siren.fit(coords[sl].reshape(-1, 4), r.reshape(-1), block_spec.widths(), block_spec.omega, cfg)
        keep = brep.final_rmse < before
        return bid, bnet if keep else None, brep.steps_run, brep.final_rmse > eps

    items = list(enumerate(block_slices(shape, grid)))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(fit_block, items))
    else:
        results = [fit_block(it) for it in items]
    block_steps = 0
    for bid, bnet, steps, unmet in results:
        block_steps += steps
        if bnet is not None:
            art.residual_blocks[bid] = bnet
        if unmet:
            art.unmet_blocks.append(bid)
    stats["block_steps"] = block_steps
    return art


def reconstruct(art: PyramidArtifact, coords: np.ndarray, shape) -> np.ndarray:
    shape = tuple(int(n) for n in shape)
    out = np.zeros(shape, dtype=np.float64)
    if art.thumbnail_net is not None:
        out += upscale_net(art.thumbnail_net, coords, shape, art.scale_per_axis, art.upscale)
    slices = block_slices(shape, art.block_grid)
    for bid, net in art.residual_blocks.items():
        sl = slices[bid]
        out[sl] += siren.forward(net, coords[sl].reshape(-1, 4)).reshape(out[sl].shape)
    return out
