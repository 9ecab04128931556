import math

import numpy as np
import pytest

import dcdepth


def small_spec():
    spec = dcdepth.SceneSpec.fronto_parallel(3.0)
    spec.intrinsics = dcdepth.Intrinsics(40.0, 40.0, 31.5, 15.5, 64, 32)
    return spec


def test_synth_scene_shapes_and_ground_truth():
    s = dcdepth.synth_scene(small_spec())
    assert len(s.images) == 4
    assert s.images[0].shape == (32, 64, 3)
    assert np.allclose(s.gt_depth[1], 3.0)
    assert s.gt_stereo == dcdepth.Pose6(0.54, 0, 0, 0, 0, 0)
    assert 0.0 <= s.images[2].min() and s.images[2].max() <= 1.0


def test_warp_identity_and_stereo_shift():
    K = dcdepth.Intrinsics(100.0, 100.0, 15.5, 7.5, 32, 16)
    depth = np.full((16, 32), 4.0)
    u, v, valid = dcdepth.warp_coordinates(depth, dcdepth.Pose6(), K)
    assert np.array_equal(u, np.tile(np.arange(32.0), (16, 1)))
    assert np.array_equal(v, np.tile(np.arange(16.0)[:, None], (1, 32)))
    assert valid.all()
    u, v, valid = dcdepth.warp_coordinates(depth, dcdepth.Pose6(0.2, 0, 0, 0, 0, 0), K)
    assert np.allclose(u - np.arange(32.0), 100.0 * 0.2 / 4.0, atol=1e-9)
    img = np.random.default_rng(0).random((16, 32, 3))
    sampled, ok = dcdepth.bilinear_sample(img, *np.meshgrid(np.arange(32.0), np.arange(16.0)))
    assert np.array_equal(sampled, img) and ok.all()


def test_ssim_identity_and_constant_pair():
    x = np.random.default_rng(1).random((9, 9, 3))
    assert np.all(dcdepth.ssim_map(x, x) == 1.0)
    value = dcdepth.ssim_map(np.ones((3, 3)), np.zeros((3, 3)))[1, 1]
    assert value == pytest.approx(0.01 / 1.01, abs=1e-15)


def test_losses_are_finite():
    s = dcdepth.synth_scene(small_spec())
    logits = [np.zeros((32, 64))] * 4
    loss = dcdepth.total_loss(s, logits, s.gt_stereo, dcdepth.Pose6(), np.full((32, 64), 3.0))
    assert all(math.isfinite(loss[k]) for k in ("image", "smooth", "consistency", "explainability"))
    assert loss["total"] == pytest.approx(
        loss["image"] + loss["smooth"] + loss["consistency"] + loss["explainability"], rel=1e-12)
    assert dcdepth.explainability_loss(np.zeros((2, 2))) == pytest.approx(math.log(2.0))


def test_gradcheck_passes():
    errors = dcdepth.gradcheck(seed=3)
    assert set(errors) == {"disparity_l", "disparity_r", "disparity_l1", "disparity_r1",
                           "stereo_pose", "temporal_pose", "mask"}
    assert max(errors.values()) < 1e-4


def test_optimize_scene_short_run():
    s = dcdepth.synth_scene(small_spec())
    cfg = dcdepth.OptimizeConfig()
    cfg.iterations = 10
    cfg.scales = 2
    r = dcdepth.optimize_scene(s, cfg)
    assert len(r.trace) == 20
    d = r.disparity(dcdepth.View.RIGHT)
    assert d.shape == (32, 64) and np.all((d > 0) & (d < 0.3))
    assert r.stereo == dcdepth.Pose6(0.54, 0, 0, 0, 0, 0)
    depth = dcdepth.depth_from_disparity(d, s.intrinsics, s.baseline)
    assert np.all(depth > 0)
    cfg.iterations = 300
    assert dcdepth.lr_schedule(250, cfg) == pytest.approx(2.5e-5)


def test_metrics_and_flip_merge():
    gt = np.random.default_rng(2).uniform(1, 40, (8, 8))
    r = dcdepth.eigen_metrics(2 * gt, gt)
    assert r["abs_rel"] == pytest.approx(1.0)
    assert r["rmse_log"] == pytest.approx(math.log(2.0))
    assert r["delta1"] == 0.0
    assert dcdepth.d1_all(np.array([[50.0, 100.0]]), np.array([[60.0, 104.0]])) == 50.0
    d = np.random.default_rng(3).random((4, 40))
    assert np.array_equal(dcdepth.flip_merge(d, d), d)
    assert dcdepth.flip_merge_weight(0, 40) == 1.0


def test_io_round_trip(tmp_path):
    img = np.round(np.random.default_rng(4).random((5, 7, 3)) * 255) / 255
    dcdepth.save_ppm(img, tmp_path / "a.ppm")
    assert np.array_equal(dcdepth.load_ppm(tmp_path / "a.ppm"), img)
    depth = np.array([[0.0, 1.0], [2.5, 200.0]])
    dcdepth.save_depth_pgm16(depth, tmp_path / "d.pgm")
    values, valid = dcdepth.load_depth_pgm16(tmp_path / "d.pgm")
    assert valid.tolist() == [[False, True], [True, True]]
    assert np.allclose(values, depth, atol=1 / 512)
    with pytest.raises(dcdepth.ParseError):
        dcdepth.SceneSpec.parse("nonsense=1\n")


def test_cli_in_process(tmp_path):
    code, out, _ = dcdepth.run_cli(["synth", "--out", str(tmp_path)])
    assert code == 0 and "scene.txt" in out
    s = dcdepth.load_scene(tmp_path / "scene.txt")
    assert s.intrinsics.width == 256
    assert dcdepth.run_cli(["bogus"])[0] == 2
