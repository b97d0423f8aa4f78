import dataclasses

import numpy as np
import pytest

from bandcodec import codec, pyramid, siren, sparse, synth, trc
from bandcodec.field import GridField, NormalizationParams, build_coordinates
from bandcodec.pyramid import PyramidArtifact
from conftest import SMALL_SHAPE


@pytest.fixture(scope="module")
def spec():
    return synth.random_spec(SMALL_SHAPE, n_spikes=5, seed=21)


def test_single_frame_chain(spec, quick_cfg):
    chain = trc.compress_series([synth.gen_field(SMALL_SHAPE, spec)], quick_cfg)
    assert len(chain) == 1 and chain.deltas == [] and chain.retrain_markers == set()
    assert isinstance(chain.base, codec.FrameArtifact)


def test_bad_series_rejected(quick_cfg):
    with pytest.raises(ValueError, match="empty"):
        trc.compress_series([], quick_cfg)
    a = GridField(np.zeros(SMALL_SHAPE, np.float32))
    b = GridField(np.zeros((4, 18, 18), np.float32))
    with pytest.raises(ValueError, match="shape"):
        trc.compress_series([a, b], quick_cfg)
    with pytest.raises(ValueError, match="holds"):
        trc.compress_series([a, GridField(a.values, variable_name="q")], quick_cfg)


def test_duplicate_frame_is_nearly_free(spec, quick_cfg):
    f = synth.gen_field(SMALL_SHAPE, spec)
    coords = build_coordinates(SMALL_SHAPE)
    base = codec.compress_frame(f, quick_cfg, coords=coords)
    state = trc.state_from_frame(base, coords)
    art = trc.compress_next_frame(state, dataclasses.replace(f, frame_index=1), quick_cfg, coords)
    assert isinstance(art, trc.TrcFrameArtifact)
    assert art.stats["warm_steps"] <= 200
    assert art.mid_residual.residual_blocks == {}
    assert art.norm_rmse <= quick_cfg.eps


def test_small_drift_series_has_no_retrain(spec, quick_cfg):
    frames = synth.gen_series(SMALL_SHAPE, spec, 3, drift=0.01)
    chain = trc.compress_series(frames, quick_cfg)
    assert chain.retrain_markers == set()
    assert [type(a).__name__ for a in chain.frames] == ["FrameArtifact", "TrcFrameArtifact", "TrcFrameArtifact"]
    assert all(a.norm_rmse <= quick_cfg.eps for a in chain.frames)
    assert all(j["accepted"] for j in chain.stats["judgments"])


def test_independent_frame_triggers_retrain(spec, quick_cfg):
    # rich mid and high content: as hard to fit as a fresh frame
    other = synth.random_spec(SMALL_SHAPE, n_mid=6, n_high=4, amplitudes=(1.0, 0.5, 0.3), n_spikes=5, seed=99)
    frames = [synth.gen_field(SMALL_SHAPE, spec), synth.gen_field(SMALL_SHAPE, other, frame_index=1)]
    coords = build_coordinates(SMALL_SHAPE)
    state = trc.state_from_frame(codec.compress_frame(frames[0], quick_cfg, coords=coords), coords)
    res = trc.compress_next_frame(state, frames[1], quick_cfg, coords)
    assert isinstance(res, trc.RetrainSignal)
    assert res.norm_rmse > quick_cfg.eps and res.candidate is not None

    chain = trc.compress_series(frames, quick_cfg)
    assert chain.retrain_markers == {1}
    assert isinstance(chain.frames[1], codec.FrameArtifact)
    assert 1 in chain.stats["rejected"]


def test_decode_meets_recorded_rmse_and_prefix(spec, quick_cfg):
    frames = synth.gen_series(SMALL_SHAPE, spec, 3, drift=0.02)
    chain = trc.compress_series(frames, quick_cfg)
    out = trc.reconstruct_series(chain)
    for f, d, art in zip(frames, out, chain.frames):
        r = np.sqrt(np.mean((f.values.astype(np.float64) - d.values) ** 2)) * 2 / (art.norm.v_max - art.norm.v_min)
        assert abs(r - art.norm_rmse) <= 1e-6
    prefix = trc.reconstruct_series(chain, n_frames=2)
    assert len(prefix) == 2 and prefix[1] == out[1]
    with pytest.raises(ValueError):
        trc.reconstruct_series(chain, n_frames=4)


def test_broken_link_rejected(spec, quick_cfg):
    chain = trc.compress_series(synth.gen_series(SMALL_SHAPE, spec, 2, drift=0.01), quick_cfg)
    assert isinstance(chain.frames[1], trc.TrcFrameArtifact)
    broken = trc.TemporalChain([chain.frames[1]])
    with pytest.raises(ValueError):
        trc.reconstruct_series(broken)
    swapped = trc.TemporalChain([chain.frames[0], dataclasses.replace(chain.frames[1], frame_index=5)])
    with pytest.raises(ValueError, match="link"):
        trc.reconstruct_series(swapped)


def test_zero_residual_delta_reuses_previous_reconstruction(spec, quick_cfg):
    coords = build_coordinates(SMALL_SHAPE)
    f0, f1 = synth.gen_series(SMALL_SHAPE, spec, 2, drift=0.0)
    base = codec.compress_frame(f0, quick_cfg, coords=coords)
    state = trc.state_from_frame(base, coords)
    zero = siren.init([4, 4, 1], 16.0)
    zero.set_params([np.zeros_like(p) for p in zero.params()])
    empty = PyramidArtifact(zero, (1, 3, 3), (1, 3, 3))
    new_high = sparse.sparsify(np.random.default_rng(0).normal(size=SMALL_SHAPE).astype(np.float32), quantile=0.99)
    delta = trc.TrcFrameArtifact(
        SMALL_SHAPE, 1, base.norm, base.clim_mean, new_high, state.low_net, state.low_factors, state.low_upscale, empty
    )
    recon, _, _ = trc.assemble_delta(delta, state, coords)
    comps = codec.reconstruct_components(base, coords)
    expected = comps.total - comps.high + sparse.densify_array(new_high)
    assert np.allclose(recon, expected, atol=1e-6)


def test_rebase_is_exact_affine_map():
    net = siren.init([4, 8, 8, 1], 14.0, seed=2)
    x = np.random.default_rng(0).uniform(-1, 1, (50, 4)).astype(np.float32)
    moved = trc.rebase(net, 0.8, -0.05)
    assert np.allclose(siren.forward(moved, x), 0.8 * siren.forward(net, x) - 0.05, atol=1e-6)


def test_offset_and_scale_map_between_normalisations():
    rng = np.random.default_rng(5)
    v = rng.normal(size=200) * 3.0 + 1.0
    prev = NormalizationParams(-4.0, 7.0)
    new = NormalizationParams(-6.5, 5.0)
    prev_mean, new_mean = 0.3, -0.2
    y_prev = (v - prev_mean - 0.5 * (prev.v_min + prev.v_max)) / prev.half_range
    y_new = (v - new_mean - 0.5 * (new.v_min + new.v_max)) / new.half_range
    s, c = trc._scale(prev, new), trc._offset(prev, prev_mean, new, new_mean)
    assert np.allclose(s * y_prev + c, y_new)


def test_accepted_frames_never_exceed_retrain_eps(spec, quick_cfg):
    cfg = quick_cfg.replace(eps_retrain=0.05)
    frames = synth.gen_series(SMALL_SHAPE, spec, 4, drift=[0.05, 0.3, 0.05, 0.6, 0.1, 0.2, 1.0, 0.5, 0.05, 0.1][: len(spec.harmonics)])
    chain = trc.compress_series(frames, cfg)
    for a in chain.frames:
        if isinstance(a, trc.TrcFrameArtifact):
            assert a.norm_rmse <= 0.05
