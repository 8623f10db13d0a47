import json

import numpy as np
import pytest

from dualdepth.errors import InputError
from dualdepth.synth import (
    generate_body,
    half_thickness_field,
    load_manifest,
    load_sample_arrays,
    make_dataset,
    render_sample,
    sample_appearance,
)
from dualdepth.synth.body import BodySpec, Capsule
from dualdepth.synth.dataset import desk_cameras


def _rendered(seed=3, size=64, with_persp=False):
    rng = np.random.default_rng(seed)
    spec = generate_body(rng)
    app = sample_appearance(rng, len(spec.capsules))
    persp, ortho = desk_cameras(size)
    return render_sample(spec, app, ortho, persp if with_persp else None), spec


def test_capsule_validation():
    with pytest.raises(InputError):
        Capsule(ax=0, ay=0, bx=1, by=1, radius=0.0)
    with pytest.raises(InputError):
        BodySpec(capsules=(), z0=2000.0)


def test_half_thickness_sphere_analytic():
    # a zero-length capsule is a ball: h = sqrt(r^2 - d^2)
    spec = BodySpec(capsules=(Capsule(ax=0, ay=0, bx=0, by=0, radius=100.0),), z0=2000.0)
    x = np.array([[0.0, 60.0, 150.0]])
    y = np.zeros((1, 3))
    h, which = half_thickness_field(spec, x, y)
    assert h[0, 0] == pytest.approx(100.0)
    assert h[0, 1] == pytest.approx(80.0)
    assert h[0, 2] == 0.0
    assert which[0, 0] == 0 and which[0, 2] == -1


def test_half_thickness_segment_interior():
    spec = BodySpec(capsules=(Capsule(ax=-50, ay=0, bx=50, by=0, radius=30.0),), z0=2000.0)
    x = np.array([[0.0, 50.0, 80.0]])
    y = np.zeros((1, 3))
    h, _ = half_thickness_field(spec, x, y)
    assert h[0, 0] == pytest.approx(30.0)  # on the axis
    assert h[0, 1] == pytest.approx(30.0)  # at the cap center
    assert h[0, 2] == 0.0  # outside the stadium


def test_generate_body_reproducible():
    a = generate_body(np.random.default_rng(11))
    b = generate_body(np.random.default_rng(11))
    assert a == b
    c = generate_body(np.random.default_rng(12))
    assert a != c


def test_generate_body_stays_in_desk_frame():
    persp, ortho = desk_cameras(64)
    x, y = ortho.pixel_grid()
    for seed in range(20):
        spec = generate_body(np.random.default_rng(seed))
        for c in spec.capsules:
            for px, py in ((c.ax, c.ay), (c.bx, c.by)):
                assert x.min() < px - c.radius and px + c.radius < x.max()
                assert y.min() < py - c.radius and py + c.radius < y.max()
        assert 1500.0 < spec.z0 < 2500.0


def test_render_silhouette_consistency():
    s, _ = _rendered()
    sil = s.silhouette
    assert sil.any()
    assert np.array_equal(s.depth_front > 0, sil)
    assert np.array_equal(s.depth_back > 0, sil)
    assert np.array_equal(np.any(s.albedo_front > 0, axis=2), sil)
    assert (s.shading[~sil] == 0).all()


def test_render_depth_ordering_with_margin():
    s, spec = _rendered()
    _, ortho = desk_cameras(64)
    x, y = ortho.pixel_grid()
    h, _ = half_thickness_field(spec, x, y)
    sil = s.silhouette
    gap = (s.depth_back - s.depth_front)[sil]
    assert (gap >= 0.75 * 2.0 * h[sil] - 1e-9).all()


def test_render_color_is_albedo_times_shading():
    s, _ = _rendered()
    assert np.allclose(s.color_front, s.albedo_front * s.shading[..., None])
    assert s.color_front.max() <= 1.0 + 1e-12


def test_render_shading_mean_one():
    s, _ = _rendered()
    lit = s.silhouette & (s.shading > 0)
    assert s.shading[lit].mean() == pytest.approx(1.0)


def test_render_is_deterministic():
    a, _ = _rendered(seed=9)
    b, _ = _rendered(seed=9)
    assert np.array_equal(a.depth_front, b.depth_front)
    assert np.array_equal(a.albedo_back, b.albedo_back)


def test_render_perspective_pair():
    s, _ = _rendered(with_persp=True)
    assert s.depth_persp is not None and s.color_persp is not None
    valid = s.depth_persp > 0
    assert valid.any()
    # perspective depths live in the same range as the front sheet
    lo, hi = s.depth_front[s.silhouette].min(), s.depth_front[s.silhouette].max()
    assert s.depth_persp[valid].min() > lo - 50.0
    assert s.depth_persp[valid].max() < hi + 50.0


def test_desk_cameras_shapes():
    persp, ortho = desk_cameras(64)
    assert (persp.width, persp.height) == (64, 64)
    assert (ortho.width, ortho.height) == (64, 64)
    assert ortho.pixel_pitch == pytest.approx(30.0)
    with pytest.raises(InputError):
        desk_cameras(8)


def test_make_dataset_files_and_manifest(tmp_path):
    root = tmp_path / "ds"
    manifest = make_dataset(root, 2, 1, size=64, base_seed=5)
    assert (root / "manifest.json").is_file()
    assert len(manifest.split("train")) == 2
    assert len(manifest.split("test")) == 1
    sample = manifest.split("train")[0]
    arrays = load_sample_arrays(manifest, sample)
    assert set(arrays) == {
        "input_depth", "input_color", "front_depth", "back_depth",
        "front_albedo", "back_albedo", "shading",
    }
    sil = arrays["front_depth"] > 0
    assert np.array_equal(arrays["back_depth"] > 0, sil)
    assert (arrays["back_depth"][sil] >= arrays["front_depth"][sil]).all()
    assert (arrays["input_depth"] > 0).any()


def test_make_dataset_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    make_dataset(a, 1, 1, size=64, base_seed=3)
    make_dataset(b, 1, 1, size=64, base_seed=3)
    for f in sorted(p.name for p in a.iterdir()):
        if f.endswith(".png"):
            assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_make_dataset_seed_changes_content(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    make_dataset(a, 1, 0, size=64, base_seed=0)
    make_dataset(b, 1, 0, size=64, base_seed=1)
    fa = a / "sample_0000_front_depth.png"
    fb = b / "sample_0000_front_depth.png"
    assert fa.read_bytes() != fb.read_bytes()


def test_load_manifest_validates_format(tmp_path):
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps({"format": "something-else", "version": 1, "samples": []}))
    with pytest.raises(InputError):
        load_manifest(tmp_path)


def test_load_manifest_accepts_dir_or_file(tmp_path):
    root = tmp_path / "ds"
    make_dataset(root, 1, 0, size=64)
    by_dir = load_manifest(root)
    by_file = load_manifest(root / "manifest.json")
    assert by_dir.samples == by_file.samples


def test_make_dataset_rejects_bad_counts(tmp_path):
    with pytest.raises(InputError):
        make_dataset(tmp_path / "x", 0, 1)
