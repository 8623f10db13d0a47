import numpy as np
import pytest

from dualdepth.errors import InputError
from dualdepth.networks import (
    NetworkBundle,
    crop_to_square,
    forward_pipeline,
    normalized_depth,
    rectify,
    reference_depth,
)
from dualdepth.synth import generate_body, render_sample, sample_appearance
from dualdepth.synth.dataset import desk_cameras


@pytest.fixture(scope="module")
def rendered():
    rng = np.random.default_rng(21)
    spec = generate_body(rng)
    app = sample_appearance(rng, len(spec.capsules))
    persp, ortho = desk_cameras(64)
    return render_sample(spec, app, ortho, persp), persp, ortho


def test_rectify_produces_consistent_rasters(rendered):
    sample, persp, ortho = rendered
    rect = rectify(sample.depth_persp, sample.color_persp, persp, ortho_cam=ortho)
    assert rect.depth.shape == (64, 64)
    assert rect.color.shape == (64, 64, 3)
    # silhouette covers the splat and any interior holes it enclosed
    assert (rect.silhouette | ~rect.splat_mask).all()
    assert np.array_equal(rect.depth > 0, rect.silhouette)
    assert (rect.color[~rect.silhouette] == 0).all()
    # rectified depth approximates the true front sheet where both exist
    both = rect.silhouette & (sample.depth_front > 0)
    err = np.abs(rect.depth - sample.depth_front)[both]
    assert np.median(err) < 10.0


def test_rectify_fits_camera_when_not_given(rendered):
    sample, persp, _ = rendered
    rect = rectify(sample.depth_persp, sample.color_persp, persp, ortho_size=(48, 48))
    assert rect.cam.width == 48 and rect.cam.height == 48
    assert rect.silhouette.any()


def test_rectify_rejects_empty_depth():
    from dualdepth.geometry import CameraIntrinsics

    cam = CameraIntrinsics(fx=60.0, fy=60.0, cx=31.5, cy=31.5, width=64, height=64)
    with pytest.raises(InputError):
        rectify(np.zeros((64, 64)), np.zeros((64, 64, 3)), cam)


def test_crop_to_square_centers_silhouette(rendered):
    sample, persp, ortho = rendered
    rect = rectify(sample.depth_persp, sample.color_persp, persp, ortho_cam=ortho)
    square = crop_to_square(rect, size=32)
    assert square.depth.shape == (32, 32)
    assert square.silhouette.sum() > 0
    # the camera origin tracks the crop so world positions are unchanged
    full_x, full_y = rect.cam.pixel_grid()
    sq_x, sq_y = square.cam.pixel_grid()
    vs, us = np.nonzero(square.silhouette)
    v0, u0 = vs[0], us[0]
    world = (sq_x[v0, u0], sq_y[v0, u0])
    hit = np.isclose(full_x, world[0]) & np.isclose(full_y, world[1])
    assert hit.any()
    vf, uf = np.nonzero(hit)
    assert rect.depth[vf[0], uf[0]] == square.depth[v0, u0]


def test_normalized_depth_and_reference():
    depth = np.array([[2000.0, 2100.0], [0.0, 1900.0]])
    sil = depth > 0
    z_ref = reference_depth(depth, sil)
    assert z_ref == pytest.approx(2000.0)
    nd = normalized_depth(depth, sil, z_ref)
    assert nd[0, 0] == pytest.approx(0.0)
    assert nd[0, 1] == pytest.approx(0.1)
    assert nd[1, 0] == 0.0
    assert nd[1, 1] == pytest.approx(-0.1)


def test_reference_depth_empty_mask_rejected():
    with pytest.raises(InputError):
        reference_depth(np.zeros((4, 4)), np.zeros((4, 4), dtype=bool))


@pytest.fixture(scope="module")
def pipeline_out(rendered):
    sample, persp, ortho = rendered
    bundle = NetworkBundle.create(levels=2, base_channels=4, disc_base_channels=4, seed=0)
    rect = rectify(sample.depth_persp, sample.color_persp, persp, ortho_cam=ortho)
    return forward_pipeline(bundle, rect), rect


def test_pipeline_silhouette_consistency(pipeline_out):
    out, rect = pipeline_out
    sil = out.silhouette
    assert np.array_equal(sil, rect.silhouette)
    assert np.array_equal(out.depth_front > 0, sil)
    assert np.array_equal(out.depth_back > 0, sil)
    assert (out.color_front[~sil] == 0).all()
    assert (out.color_back[~sil] == 0).all()


def test_pipeline_back_not_in_front(pipeline_out):
    out, _ = pipeline_out
    sil = out.silhouette
    assert (out.depth_back[sil] >= out.depth_front[sil]).all()


def test_pipeline_normals_unit_or_zero(pipeline_out):
    out, _ = pipeline_out
    for normals in (out.normals_front, out.normals_back):
        lengths = np.linalg.norm(normals, axis=2)
        valid = lengths > 0
        assert np.abs(lengths[valid] - 1.0).max() < 1e-6


def test_pipeline_color_in_unit_range(pipeline_out):
    out, _ = pipeline_out
    for c in (out.color_front, out.color_back):
        assert c.min() >= 0.0 and c.max() <= 1.0


def test_pipeline_shading_normalized(pipeline_out):
    out, _ = pipeline_out
    lit = out.silhouette & (out.shading > 0)
    # the positive floor may lift a few deep-shadow pixels after scaling
    assert out.shading[lit].mean() == pytest.approx(1.0, abs=5e-3)
