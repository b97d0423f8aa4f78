"""Octree refitting of the mid band.

The domain is cut into eight blocks. A block whose current reconstruction
(low band + sparse high band, plus whatever ancestors contributed) already
meets the tolerance is *passed*. Otherwise a network is fitted to the block's
remaining residual. If that fit cannot reach the tolerance within the step
budget, the leftover is split again in frequency with the re-decomposition
thresholds: its high part is stored sparsely and the rest is handed to eight
child blocks one level deeper.
"""
from __future__ import annotations

import enum
import threading
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from . import siren, sparse
from .pyramid import NetSpec
from .siren import SirenNetwork, TrainConfig
from .sparse import SparseHighBand
from .spectral import BandThresholds, REDECOMPOSE_THRESHOLDS, decompose_array

Bounds = tuple[tuple[int, int], tuple[int, int], tuple[int, int]]


class NodeState(enum.IntEnum):
    PASSED = 0
    FITTED = 1
    REDECOMPOSED = 2


@dataclass(eq=False)
class OctreeNode:
    bounds: Bounds
    depth: int
    state: NodeState
    net: SirenNetwork | None = None
    children: list["OctreeNode"] = dc_field(default_factory=list)
    inner_thresholds: BandThresholds | None = None
    inner_sparse: SparseHighBand | None = None
    unmet: bool = False

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(b - a for a, b in self.bounds)  # type: ignore[return-value]

    @property
    def slices(self) -> tuple[slice, slice, slice]:
        return tuple(slice(a, b) for a, b in self.bounds)  # type: ignore[return-value]

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def __eq__(self, other) -> bool:
        if not isinstance(other, OctreeNode):
            return NotImplemented
        return (
            tuple(map(tuple, self.bounds)) == tuple(map(tuple, other.bounds))
            and self.depth == other.depth
            and self.state == other.state
            and self.unmet == other.unmet
            and self.net == other.net
            and self.inner_thresholds == other.inner_thresholds
            and self.inner_sparse == other.inner_sparse
            and self.children == other.children
        )


@dataclass(eq=False)
class OctreeArtifact:
    root: OctreeNode
    target_rmse: float
    step_budget: int
    max_depth: int
    stats: dict = dc_field(default_factory=dict)

    @property
    def nets(self) -> list[SirenNetwork]:
        return [n.net for n in self.root.walk() if n.net is not None]

    def leaves(self) -> list[OctreeNode]:
        return [n for n in self.root.walk() if not n.children]

    def __eq__(self, other) -> bool:
        if not isinstance(other, OctreeArtifact):
            return NotImplemented
        return (
            self.root == other.root
            and self.target_rmse == other.target_rmse
            and self.step_budget == other.step_budget
            and self.max_depth == other.max_depth
        )


IdmArtifact = OctreeArtifact


def split_range(a: int, b: int) -> list[tuple[int, int]]:
    """Halve ``[a, b)`` at the floor midpoint, larger half first; extent 1 stays whole."""
    n = b - a
    if n <= 1:
        return [(a, b)]
    big = n - n // 2
    return [(a, a + big), (a + big, b)]


def octants(bounds: Bounds) -> list[Bounds]:
    """Eight children of a block (fewer when an axis cannot be halved)."""
    out = []
    for p in split_range(*bounds[0]):
        for t in split_range(*bounds[1]):
            for f in split_range(*bounds[2]):
                out.append((p, t, f))
    return out


def _rmse(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x, dtype=np.float64)))) if x.size else 0.0


def _sl(bounds: Bounds):
    return tuple(slice(a, b) for a, b in bounds)


def _local(bounds: Bounds, parent: Bounds):
    return tuple(slice(a - pa, b - pa) for (a, b), (pa, _) in zip(bounds, parent))


@dataclass
class _Run:
    coords: np.ndarray
    eps: float
    budget: int
    max_depth: int
    spec: NetSpec
    cfg: TrainConfig
    thresholds: BandThresholds
    quantile: float
    workers: int = 1
    steps: int = 0
    lock: threading.Lock = dc_field(default_factory=threading.Lock)

    def count(self, steps: int) -> None:
        with self.lock:
            self.steps += steps

    def seed_for(self, bounds: Bounds) -> int:
        # position-derived, so results do not depend on scheduling order
        key = ",".join(f"{a}-{b}" for a, b in bounds).encode()
        return (self.cfg.seed * 1_000_003 + zlib.crc32(key)) % (2**32)


def _process(run: _Run, bounds: Bounds, depth: int, resid: np.ndarray) -> OctreeNode:
    """Handle one block; ``resid`` is the block's unexplained signal."""
    before = _rmse(resid)
    if before <= run.eps:
        return OctreeNode(bounds, depth, NodeState.PASSED)
    coords = run.coords[_sl(bounds)].reshape(-1, 4)
    cfg = replace(run.cfg, max_steps=run.budget, target_rmse=run.eps, seed=run.seed_for(bounds))
    net, rep = siren.fit(coords, resid.reshape(-1), run.spec.widths(), run.spec.omega, cfg)
    run.count(rep.steps_run)
    useful = rep.final_rmse < before
    if rep.final_rmse <= run.eps:
        return OctreeNode(bounds, depth, NodeState.FITTED, net)
    if depth >= run.max_depth:
        if useful:
            return OctreeNode(bounds, depth, NodeState.FITTED, net, unmet=True)
        return OctreeNode(bounds, depth, NodeState.PASSED, unmet=True)
    left = resid - siren.forward(net, coords).reshape(resid.shape) if useful else resid
    _, _, high = decompose_array(left, run.thresholds) if min(left.shape[1:]) >= 2 else (None, None, np.zeros_like(left))
    inner = sparse.sparsify(high.astype(np.float32), quantile=run.quantile)
    left = left - sparse.densify_array(inner)
    children = [_process(run, cb, depth + 1, left[_local(cb, bounds)]) for cb in octants(bounds)]
    return OctreeNode(
        bounds, depth, NodeState.REDECOMPOSED, net if useful else None,
        children, run.thresholds, inner,
    )


def compress(
    mid: np.ndarray,
    context_recon: np.ndarray,
    full_target: np.ndarray,
    coords: np.ndarray,
    eps: float,
    spec: NetSpec,
    cfg: TrainConfig,
    budget: int = 2000,
    max_depth: int = 3,
    thresholds: BandThresholds = REDECOMPOSE_THRESHOLDS,
    quantile: float = sparse.DEFAULT_QUANTILE,
    workers: int = 1,
) -> OctreeArtifact:
    """Octree-fit whatever ``context_recon`` leaves unexplained of ``full_target``.

    ``mid`` is only used for shape checks: when the context is exact the
    residual equals the mid band.
    """
    shape = full_target.shape
    if mid.shape != shape or context_recon.shape != shape:
        raise ValueError(f"shape mismatch: mid {mid.shape}, context {context_recon.shape}, target {shape}")
    resid = full_target.astype(np.float64) - context_recon
    run = _Run(coords, eps, budget, max_depth, spec, cfg, thresholds, quantile, workers)
    root_bounds: Bounds = tuple((0, n) for n in shape)  # type: ignore[assignment]
    blocks = octants(root_bounds)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            children = list(pool.map(lambda b: _process(run, b, 1, resid[_sl(b)]), blocks))
    else:
        children = [_process(run, b, 1, resid[_sl(b)]) for b in blocks]
    # the root only splits; it carries no network, thresholds or sparse part
    root = OctreeNode(root_bounds, 0, NodeState.REDECOMPOSED, None, children)
    art = OctreeArtifact(root, eps, budget, max_depth, {"steps": run.steps})
    return art


def _reconstruct_into(node: OctreeNode, coords: np.ndarray, out: np.ndarray) -> None:
    sl = node.slices
    if node.net is not None:
        out[sl] += siren.forward(node.net, coords[sl].reshape(-1, 4)).reshape(node.shape)
    if node.inner_sparse is not None and node.inner_sparse.nnz:
        out[sl] += sparse.densify_array(node.inner_sparse)
    for c in node.children:
        _reconstruct_into(c, coords, out)


def reconstruct(art: OctreeArtifact, coords: np.ndarray) -> np.ndarray:
    shape = art.root.shape
    out = np.zeros(shape, dtype=np.float64)
    _reconstruct_into(art.root, coords, out)
    return out
