import numpy as np
import pytest
from hypothesis import given, strategies as st

from oneshot_vos.synthvid import (SceneSpec, Shape, Texture, make_benchmark, random_scene,
                                  read_benchmark, render_frame, render_sequence, scene_attributes,
                                  silhouette, write_benchmark)

FLAT = Texture("flat", (0.9, 0.1, 0.1), (0.9, 0.1, 0.1))
BG = Texture("checker", (0.3, 0.3, 0.3), (0.5, 0.5, 0.5), period=6.0)


def _static_spec(**kw):
    target = Shape("ellipse", (5.0, 7.0), FLAT, (16.0, 16.0))
    return SceneSpec(seed=1, target=target, background=BG, frame_size=32, num_frames=6, **kw)


def test_static_target_has_constant_gt():
    seq = render_sequence(_static_spec())
    for g in seq.gt[1:]:
        np.testing.assert_array_equal(g, seq.gt[0])
    assert seq.gt[0].any()


def test_ellipse_area_close_to_analytic():
    sil = silhouette(Shape("ellipse", (5.0, 7.0), FLAT, (16.0, 16.0)), 0, 32)
    assert abs(sil.sum() - np.pi * 35) < 6


def test_same_spec_renders_identically():
    spec = random_scene(99, n_distractors=2, occlusion=True)
    a, b = render_sequence(spec), render_sequence(spec)
    for x, y in zip(a.frames + a.gt, b.frames + b.gt):
        assert x.tobytes() == y.tobytes()


def test_occluder_empties_gt_inside_its_window():
    spec = random_scene(5, occlusion=True, num_frames=20)
    assert spec.occluder_window == (8, 12)
    seq = render_sequence(spec)
    empty = [t for t, g in enumerate(seq.gt) if not g.any()]
    assert empty == [8, 9, 10, 11]
    assert "OCC" in scene_attributes(spec)


@given(st.integers(0, 10_000))
def test_random_scenes_render_in_range(seed):
    spec = random_scene(seed, n_distractors=1, frame_size=24, num_frames=3)
    for t in range(3):
        img, gt = render_frame(spec, t)
        assert img.shape == (24, 24, 3) and gt.shape == (24, 24)
        assert img.min() >= 0.0 and img.max() <= 1.0
        assert gt.dtype == bool


def test_illumination_ramp():
    spec = _static_spec(illumination=(0.5, 1.0, 1.5))
    np.testing.assert_allclose(spec.gain(0), [1, 1, 1])
    np.testing.assert_allclose(spec.gain(5), [0.5, 1.0, 1.5])
    dim, _ = render_frame(spec, 5)
    plain, _ = render_frame(_static_spec(), 5)
    assert dim[..., 0].mean() < plain[..., 0].mean() < dim[..., 2].mean()


def test_attributes_follow_scene_parameters():
    fast = Shape("ellipse", (4.0, 4.0), FLAT, (16.0, 16.0), velocity=(2.0, 0.0), scale_rate=0.05)
    spec = SceneSpec(seed=2, target=fast, background=BG, frame_size=32, num_frames=4,
                     background_drift=(0.3, 0.0), motion_blur=True)
    assert scene_attributes(spec) == {"FM", "AC", "DB", "MB"}
    assert scene_attributes(_static_spec()) == frozenset()


def test_scene_needs_two_frames():
    with pytest.raises(ValueError):
        SceneSpec(seed=0, target=_static_spec().target, background=BG, num_frames=1)


def test_benchmark_cardinality_and_determinism(tmp_path):
    a = make_benchmark(11, 8, 4, frame_size=16, num_frames=4)
    assert len(a.train) == 8 and len(a.val) == 4
    assert all(s.gt is not None for s in a.train + a.val)
    b = make_benchmark(11, 8, 4, frame_size=16, num_frames=4)
    for x, y in zip(a.train + a.val, b.train + b.val):
        assert x.name == y.name
        for f, g in zip(x.frames, y.frames):
            assert f.tobytes() == g.tobytes()
    write_benchmark(a, tmp_path)
    back = read_benchmark(tmp_path)
    assert [s.name for s in back.val] == [s.name for s in a.val]
    for x, y in zip(a.val, back.val):
        for f, g in zip(x.frames, y.frames):
            np.testing.assert_array_equal(f, g)
        assert x.attributes == y.attributes


def test_validation_split_has_occlusion_every_fourth():
    ds = make_benchmark(7, 1, 8, frame_size=32, num_frames=20)
    assert ["OCC" in s.attributes for s in ds.val] == [i % 4 == 0 for i in range(8)]
    with pytest.raises(ValueError):
        make_benchmark(7, 0, 1)
