import numpy as np
import pytest

import oracles
from bandcodec import octree, siren
from bandcodec.field import build_coordinates
from bandcodec.octree import NodeState, OctreeArtifact, OctreeNode
from bandcodec.pyramid import NetSpec
from bandcodec.siren import TrainConfig

SHAPE = (4, 16, 32)
SPEC = NetSpec(2, 16, 22.0)
CFG = TrainConfig(max_steps=2000, lr_init=3e-3, seed=0)


def rough_in_octant(shape, which: int, amp: float = 0.01) -> np.ndarray:
    """A smooth wave confined to one octant, zero elsewhere."""
    out = np.zeros(shape)
    b = oracles.octant_bounds(shape)[which]
    sl = tuple(slice(a, c) for a, c in b)
    n_t, n_f = b[1][1] - b[1][0], b[2][1] - b[2][0]
    i = np.arange(n_t)[:, None]
    j = np.arange(n_f)[None, :]
    out[sl] = amp * np.sin(2 * np.pi * 2 * j / n_f) * np.cos(np.pi * i / n_t)
    return out


def test_split_and_octants():
    assert octree.split_range(0, 5) == [(0, 3), (3, 5)]
    assert octree.split_range(2, 3) == [(2, 3)]
    kids = octree.octants(((0, 4), (0, 16), (0, 32)))
    assert kids == oracles.octant_bounds(SHAPE)
    assert len(octree.octants(((0, 1), (0, 4), (0, 4)))) == 4


def test_zero_mid_passes_everything():
    coords = build_coordinates(SHAPE)
    z = np.zeros(SHAPE)
    art = octree.compress(z, z, z, coords, 1e-3, SPEC, CFG)
    assert [c.state for c in art.root.children] == [NodeState.PASSED] * 8
    assert art.nets == []
    assert np.all(octree.reconstruct(art, coords) == 0)


@pytest.mark.parametrize("which", [0, 5])
def test_one_rough_octant_is_the_only_one_worked_on(which):
    coords = build_coordinates(SHAPE)
    target = rough_in_octant(SHAPE, which)
    context = np.zeros(SHAPE)
    eps = 1e-3
    art = octree.compress(target, context, target, coords, eps, SPEC, CFG)
    expected = [oracles.block_rmse(target - context, b) > eps for b in oracles.octant_bounds(SHAPE)]
    worked = [c.state != NodeState.PASSED for c in art.root.children]
    assert worked == expected
    assert sum(worked) == 1 and worked[which]
    recon = octree.reconstruct(art, coords)
    for b, kid in zip(oracles.octant_bounds(SHAPE), art.root.children):
        assert tuple(kid.bounds) == b
        assert oracles.block_rmse(target - recon, b) <= eps


def test_zero_budget_recurses_to_max_depth():
    coords = build_coordinates(SHAPE)
    target = rough_in_octant(SHAPE, 0, amp=0.1)
    art = octree.compress(target, np.zeros(SHAPE), target, coords, 1e-3, SPEC, CFG, budget=0, max_depth=2)
    first = art.root.children[0]
    assert first.state == NodeState.REDECOMPOSED and first.inner_thresholds is not None
    failing_leaves = [n for n in first.walk() if not n.children and n.unmet]
    assert failing_leaves and all(n.depth == 2 for n in failing_leaves)
    for n in art.root.walk():
        if n.children:
            assert n.state == NodeState.REDECOMPOSED
        else:
            assert n.state in (NodeState.PASSED, NodeState.FITTED)


def test_single_fitted_leaf_is_windowed():
    coords = build_coordinates(SHAPE)
    net = siren.init(SPEC.widths(), SPEC.omega, seed=4)
    bounds = oracles.octant_bounds(SHAPE)
    kids = [OctreeNode(b, 1, NodeState.PASSED) for b in bounds]
    kids[3] = OctreeNode(bounds[3], 1, NodeState.FITTED, net)
    art = OctreeArtifact(OctreeNode(tuple((0, n) for n in SHAPE), 0, NodeState.REDECOMPOSED, None, kids), 1e-3, 10, 3)
    out = octree.reconstruct(art, coords)
    sl = tuple(slice(a, b) for a, b in bounds[3])
    assert np.allclose(out[sl], siren.forward(net, coords[sl].reshape(-1, 4)).reshape(out[sl].shape))
    mask = np.ones(SHAPE, bool)
    mask[sl] = False
    assert np.all(out[mask] == 0)


def test_threads_do_not_change_result():
    coords = build_coordinates(SHAPE)
    target = rough_in_octant(SHAPE, 1) + rough_in_octant(SHAPE, 6)
    cfg = TrainConfig(max_steps=200, lr_init=3e-3, seed=1)
    a = octree.compress(target, np.zeros(SHAPE), target, coords, 1e-4, SPEC, cfg, budget=200, max_depth=2)
    b = octree.compress(target, np.zeros(SHAPE), target, coords, 1e-4, SPEC, cfg, budget=200, max_depth=2, workers=4)
    assert a == b


def test_shape_mismatch_rejected():
    z = np.zeros(SHAPE)
    with pytest.raises(ValueError):
        octree.compress(z[:2], z, z, build_coordinates(SHAPE), 1e-3, SPEC, CFG)
