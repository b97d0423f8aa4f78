import json

import numpy as np
import pytest

from bandcodec import codec, metrics, synth
from bandcodec.codec import CodecConfig
from bandcodec.field import Climatology, GridField, build_coordinates
from conftest import SMALL_SHAPE


@pytest.fixture(scope="module")
def small_field():
    return synth.gen_field(SMALL_SHAPE, synth.random_spec(SMALL_SHAPE, n_spikes=5, seed=11))


def test_recorded_rmse_matches_decode(small_field, quick_cfg):
    art = codec.compress_frame(small_field, quick_cfg)
    decoded = codec.reconstruct_frame(art)
    oracle = np.sqrt(np.mean((decoded.values.astype(np.float64) - small_field.values) ** 2)) * 2 / (
        art.norm.v_max - art.norm.v_min
    )
    assert abs(oracle - art.norm_rmse) < 1e-9
    assert art.sparse is not None and art.mim is not None and art.idm is not None
    assert art.fallback == {}
    assert set(art.stats) >= {"ssm", "mim", "idm", "time"}


@pytest.mark.parametrize("stage, band", [("ssm", "high"), ("mim", "low"), ("idm", "mid")])
def test_disabled_stage_falls_back_to_one_network(small_field, quick_cfg, stage, band):
    art = codec.compress_frame(small_field, quick_cfg.replace(**{f"use_{stage}": False}))
    assert set(art.fallback) == {band}
    assert getattr(art, {"ssm": "sparse", "mim": "mim", "idm": "idm"}[stage]) is None
    assert art.norm_rmse == pytest.approx(metrics.normalized_rmse(small_field, codec.reconstruct_frame(art), art.norm))


def test_constant_frame_is_exact():
    f = GridField(np.full(SMALL_SHAPE, 3.25, np.float32))
    art = codec.compress_frame(f, CodecConfig())
    assert art.norm.degenerate and art.nets() == []
    assert np.all(codec.reconstruct_frame(art).values == 3.25)
    assert art.norm_rmse == 0.0


def test_climatology_round_trip(small_field, quick_cfg):
    clim = Climatology(np.full(SMALL_SHAPE, 100.0, np.float32), "1991-2020")
    shifted = small_field.with_values(small_field.values + 100.0)
    art = codec.compress_frame(shifted, quick_cfg, clim)
    assert art.norm.climatology_id == "1991-2020" and art.clim_mean is None
    out = codec.reconstruct_frame(art, clim=clim)
    assert np.abs(out.values.mean() - 100.0) < 1.0
    assert art.norm_rmse == pytest.approx(metrics.normalized_rmse(shifted, out, art.norm))


def test_half_precision_respects_tolerance(small_field, quick_cfg):
    full = codec.compress_frame(small_field, quick_cfg)
    half = codec.compress_frame(small_field, quick_cfg.replace(quant16=True))
    kept, back = half.stats["half"]
    assert kept + back == len(half.nets())
    assert sum(n.storage == "f16" for n in half.nets()) == kept
    assert half.norm_rmse <= max(quick_cfg.eps, full.norm_rmse)


def test_threads_give_identical_artifacts(small_field, quick_cfg):
    a = codec.compress_frame(small_field, quick_cfg)
    b = codec.compress_frame(small_field, quick_cfg.replace(threads=3))
    assert a == b


def test_seed_changes_result(small_field, quick_cfg):
    a = codec.compress_frame(small_field, quick_cfg)
    b = codec.compress_frame(small_field, quick_cfg.replace(seed=1))
    assert a != b


@pytest.mark.parametrize("eps", [0, -1e-3, float("nan"), float("inf")])
def test_unreachable_eps_rejected(eps):
    with pytest.raises(ValueError, match="eps"):
        CodecConfig(eps=eps)


def test_config_dict_round_trip():
    cfg = CodecConfig(eps=5e-4, seed=3, use_mim=False)
    back = CodecConfig.from_dict(json.loads(cfg.to_json()))
    assert back == cfg
    with pytest.raises(ValueError, match="unknown"):
        CodecConfig.from_dict({"epsilon": 1})
    assert CodecConfig().retrain_eps == 1e-3
    assert CodecConfig(eps_retrain=2e-3).retrain_eps == 2e-3


def test_components_sum_to_total(small_field, quick_cfg):
    art = codec.compress_frame(small_field, quick_cfg)
    comps = codec.reconstruct_components(art, build_coordinates(SMALL_SHAPE))
    assert np.allclose(comps.total, comps.high + comps.low + comps.mid)
    assert np.count_nonzero(comps.high) == art.sparse.nnz
