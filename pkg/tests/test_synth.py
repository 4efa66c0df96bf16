import numpy as np
import pytest

from btristd.btr_solver import SolverParams, btr_compose, solve
from btristd.errors import ParameterError, SceneError
from btristd.patch_tensor import PatchConfig, build_tensor
from btristd.synth import (
    SynthSpec,
    TargetSpec,
    default_spec,
    planted_btr,
    render_blob,
    synth_sequence,
)


def test_constant_scene_without_targets():
    frames, gt = synth_sequence(SynthSpec(20, 30, 4, background="constant", noise=0.0, level=0.3))
    assert frames.shape == (4, 20, 30)
    assert np.all(frames == 0.3)
    assert gt == {}


def test_static_target_peak():
    spec = SynthSpec(32, 32, 3, background="constant", noise=0.0, level=0.1,
                     targets=(TargetSpec(10, 20, amplitude=0.5),))
    frames, gt = synth_sequence(spec)
    for f in range(3):
        assert frames[f, 10, 20] == pytest.approx(0.6, abs=1e-12)
        assert frames[f].max() == frames[f, 10, 20]
        assert gt[f][0].row == 10 and gt[f][0].col == 20


def test_moving_target_ground_truth():
    spec = SynthSpec(40, 40, 5, background="constant", noise=0.0,
                     targets=(TargetSpec(5, 6, 1.5, -0.5),))
    _, gt = synth_sequence(spec)
    assert [(t[0].row, t[0].col) for t in (gt[f] for f in range(5))] == [
        (5 + 1.5 * f, 6 - 0.5 * f) for f in range(5)]


def test_blob_width():
    blob = render_blob((21, 21), 10, 10, 1.0, radius=4.0)
    # sigma = 2, so one sigma away the value is exp(-1/2)
    assert blob[10, 12] == pytest.approx(np.exp(-0.5))


def test_target_leaving_frame():
    spec = SynthSpec(20, 20, 10, targets=(TargetSpec(15, 10, v_row=1.0),))
    with pytest.raises(SceneError):
        synth_sequence(spec)


def test_bad_background_name():
    with pytest.raises(ParameterError):
        synth_sequence(SynthSpec(8, 8, 2, background="clouds"))


def test_btr_background_needs_divisible_sizes():
    with pytest.raises(ParameterError):
        synth_sequence(SynthSpec(25, 20, 4, background="btr", nw=10, nt=2))


def test_deterministic_and_clipped():
    spec = default_spec(7, n_targets=2, height=64, width=64, n_frames=6, noise=0.3)
    a, gta = synth_sequence(spec)
    b, gtb = synth_sequence(spec)
    np.testing.assert_array_equal(a, b)
    assert gta == gtb
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert a.min() == 0.0 or a.max() == 1.0  # heavy noise does hit a bound


def test_default_spec_keeps_targets_inside():
    for seed in range(30):
        spec = default_spec(seed, n_targets=3, speed=2.0, height=80, width=90, n_frames=20)
        spec.validate()
        for tg in spec.targets:
            for f in (0, 19):
                r, c = tg.position(f)
                assert 10 - 1e-9 <= r <= 69 + 1e-9 and 10 - 1e-9 <= c <= 79 + 1e-9


def test_smooth_background_range():
    frames, _ = synth_sequence(default_spec(0, n_targets=0, noise=0.0, n_frames=5))
    assert 0.05 < frames.min() and frames.max() < 0.6


def test_planted_btr_is_exact(rng):
    shape, ranks = (6, 5, 4, 7), (3, 2, 4)
    t, f = planted_btr(shape, ranks, rng, offset=0.4, contrast=0.25)
    assert t.shape == shape
    assert [g.shape for g in f.left] == [(3, 6, 3), (3, 5, 3), (3, 2, 3)]
    assert [g.shape for g in f.right] == [(4, 2, 4), (4, 4, 4), (4, 7, 4)]
    np.testing.assert_allclose(btr_compose(f), t, rtol=0, atol=1e-14)
    assert np.max(np.abs(t - 0.4)) == pytest.approx(0.25, abs=1e-14)


def test_btr_background_separates_cleanly():
    spec = SynthSpec(20, 20, 6, background="btr", noise=0.0, nw=10, nt=6, ranks=(3, 2, 4), seed=3)
    frames, _ = synth_sequence(spec)
    pt = build_tensor(frames, PatchConfig(nw=10, nt=6))
    params = SolverParams(ranks=(3, 2, 4), max_iter=60, tol=1e-8)
    b4d, t4d, _ = solve(pt.tensor, params)
    err = np.linalg.norm(b4d - pt.tensor) / np.linalg.norm(pt.tensor)
    assert err < 1e-2
