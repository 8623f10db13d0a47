import numpy as np
import pytest

from dualdepth.errors import InputError
from dualdepth.geometry import CameraIntrinsics, OrthoCamera, fit_ortho_camera


def test_intrinsics_round_trip():
    cam = CameraIntrinsics(fx=365.0, fy=365.0, cx=255.5, cy=211.5, width=512, height=424)
    assert CameraIntrinsics.from_dict(cam.to_dict()) == cam


def test_intrinsics_rejects_nonpositive_focal():
    with pytest.raises(InputError):
        CameraIntrinsics(fx=0.0, fy=365.0, cx=1.0, cy=1.0, width=4, height=4)


def test_ortho_round_trip():
    cam = OrthoCamera(pixel_pitch=5.0, origin_x=-10.0, origin_y=3.0, width=8, height=6)
    assert OrthoCamera.from_dict(cam.to_dict()) == cam


def test_ortho_rejects_nonpositive_pitch():
    with pytest.raises(InputError):
        OrthoCamera(pixel_pitch=0.0, origin_x=0.0, origin_y=0.0, width=4, height=4)


def test_pixel_grid_spacing_and_origin():
    cam = OrthoCamera(pixel_pitch=2.5, origin_x=-5.0, origin_y=1.0, width=5, height=3)
    x, y = cam.pixel_grid()
    assert x.shape == (3, 5) and y.shape == (3, 5)
    assert x[0, 0] == -5.0 and y[0, 0] == 1.0
    assert np.allclose(np.diff(x, axis=1), 2.5)
    assert np.allclose(np.diff(y, axis=0), 2.5)
    assert np.allclose(np.diff(x, axis=0), 0.0)


def test_fit_ortho_camera_covers_points():
    rng = np.random.default_rng(0)
    pts = rng.uniform([-400, -900, 1500], [400, 900, 2500], size=(1000, 3))
    cam = fit_ortho_camera(pts, width=64, height=64, coverage=0.9)
    x, y = cam.pixel_grid()
    assert x.min() <= pts[:, 0].min() and x.max() >= pts[:, 0].max()
    assert y.min() <= pts[:, 1].min() and y.max() >= pts[:, 1].max()
    # grid is centered on the cloud
    assert np.isclose((x.min() + x.max()) / 2, (pts[:, 0].min() + pts[:, 0].max()) / 2)
    assert np.isclose((y.min() + y.max()) / 2, (pts[:, 1].min() + pts[:, 1].max()) / 2)


def test_fit_ortho_camera_coverage_fraction():
    # a 900 mm-tall cloud at coverage 0.9 must span 90% of the grid rows
    pts = np.array([[0.0, -450.0, 2000.0], [0.0, 450.0, 2000.0]])
    cam = fit_ortho_camera(pts, width=101, height=101, coverage=0.9)
    assert np.isclose(cam.pixel_pitch, 900.0 / (0.9 * 100))


def test_fit_ortho_camera_degenerate_cloud():
    pts = np.zeros((5, 3))
    cam = fit_ortho_camera(pts, width=16, height=16)
    assert cam.pixel_pitch > 0
