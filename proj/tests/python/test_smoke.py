import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

import adsm


def test_version_and_presets():
    assert adsm.__version__.count(".") == 2
    tiny = adsm.preset("tiny")
    assert tiny["scenes"] == "2"
    with pytest.raises(ValueError):
        adsm.preset("huge")


def test_patchify_counts_tokens():
    frames = np.random.default_rng(0).random((8, 160, 160, 3))
    tokens = adsm.patchify(frames, 16)
    assert tokens.shape == (800, 768)
    np.testing.assert_array_equal(tokens[0], frames[0, :16, :16, :].reshape(-1))


def test_motion_weights_sum_to_one():
    frames = np.zeros((8, 32, 32, 3))
    frames[-1, :8, :8, :] = 1.0
    w = adsm.motion_weights(frames, 8)
    assert len(w) == 128
    assert abs(sum(w) - 1.0) < 1e-9
    assert w[0] > w[1]


def test_noise_schedule_is_log_spaced():
    levels = adsm.noise_schedule(0.001, 1.0, 20)
    steps = np.diff(np.log(levels))
    assert levels[0] == pytest.approx(0.001)
    assert levels[-1] == pytest.approx(1.0)
    assert np.ptp(steps) < 1e-12
    linear = adsm.noise_schedule(0.1, 1.0, 4, mode="linear")
    np.testing.assert_allclose(linear, [0.1, 0.4, 0.7, 1.0])


def test_auc_against_pair_counting():
    rng = np.random.default_rng(1)
    scores = rng.integers(0, 10, 60) / 10
    labels = rng.integers(0, 2, 60)
    pos, neg = scores[labels == 1], scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    assert adsm.roc_auc(scores.tolist(), labels.tolist()) == pytest.approx(wins / (len(pos) * len(neg)), abs=1e-12)
    assert adsm.roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)
    with pytest.raises(adsm.DataError):
        adsm.roc_auc([0.1, 0.2], [0, 0])
    value, excluded = adsm.macro_auc([([0.1, 0.9], [0, 1]), ([0.5, 0.5], [0, 0])])
    assert value == 1.0 and excluded == ["video_1"]


def test_mixture_minor_mode_has_zero_score():
    spec = "0.95:0:0:1;0.05:4:0:1"
    x, y = adsm.mixture_mode(spec, 4.0, 0.0)
    minor = adsm.mixture_score(spec, x, y)
    major = adsm.mixture_score(spec, *adsm.mixture_mode(spec, 0.0, 0.0))
    assert minor["norm"] < 1e-6
    assert minor["density"] < 0.1 * major["density"]


def test_psnr():
    a = np.full((2, 2), 0.5)
    assert adsm.psnr(a, a + 0.1) == pytest.approx(20.0)


def test_pipeline(tmp_path):
    train, test, _ = adsm.generate(tmp_path / "data", seed=5, train_videos_per_scene=2, test_videos_per_scene=2)
    assert (train, test) == (4, 4)
    video = adsm.read_video(next((tmp_path / "data" / "train").glob("*.adsv")))
    assert video.shape == (32, 32, 32, 3)
    losses = adsm.train(tmp_path / "data", tmp_path / "m.ckpt", epochs=2)
    assert len(losses) == 2 and all(math.isfinite(v) for v in losses)
    scores = adsm.score(tmp_path / "m.ckpt", tmp_path / "data", tmp_path / "scores", levels=3)
    assert len(scores) == 4
    for indicator in scores.values():
        assert len(indicator) == 32
        assert min(indicator) >= 0.0 and max(indicator) <= 1.0
    assert (tmp_path / "scores" / "scores_final.csv").exists()


def test_unknown_options_are_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown option"):
        adsm.generate(tmp_path / "d", sceens=3)


def test_missing_data_raises(tmp_path):
    with pytest.raises(adsm.DataError):
        adsm.train(tmp_path / "nowhere", tmp_path / "m.ckpt")
