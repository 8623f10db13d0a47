import numpy as np
import pytest

from dualdepth.errors import InputError
from dualdepth.geometry import (
    CameraIntrinsics,
    OrthoCamera,
    ortho_unproject,
    project_orthographic,
    project_perspective,
    unproject_perspective,
)


def _persp_cam(w=8, h=6):
    return CameraIntrinsics(fx=10.0, fy=10.0, cx=(w - 1) / 2, cy=(h - 1) / 2, width=w, height=h)


def _ortho_cam(w=8, h=6, pitch=10.0):
    return OrthoCamera(pixel_pitch=pitch, origin_x=0.0, origin_y=0.0, width=w, height=h)


def test_unproject_perspective_pinhole_rays():
    cam = _persp_cam()
    depth = np.zeros((6, 8))
    depth[2, 5] = 2000.0
    color = np.zeros((6, 8, 3))
    color[2, 5] = (0.25, 0.5, 0.75)
    cloud = unproject_perspective(depth, color, cam)
    assert len(cloud) == 1
    x = (5 - cam.cx) / cam.fx * 2000.0
    y = (2 - cam.cy) / cam.fy * 2000.0
    assert np.allclose(cloud.positions[0], [x, y, 2000.0])
    assert np.allclose(cloud.colors[0], [0.25, 0.5, 0.75])
    assert tuple(cloud.pixels[0]) == (5, 2)


def test_unproject_skips_invalid_pixels():
    cam = _persp_cam()
    depth = np.zeros((6, 8))
    cloud = unproject_perspective(depth, np.zeros((6, 8, 3)), cam)
    assert len(cloud) == 0


def test_ortho_unproject_project_identity():
    cam = _ortho_cam()
    rng = np.random.default_rng(3)
    depth = np.where(rng.random((6, 8)) < 0.6, rng.uniform(500, 3000, (6, 8)), 0.0)
    color = rng.random((6, 8, 3))
    cloud = ortho_unproject(depth, cam, color)
    d2, c2, mask = project_orthographic(cloud, cam)
    assert np.array_equal(d2, depth)
    assert np.array_equal(mask, depth > 0)
    assert np.allclose(c2[depth > 0], color[depth > 0])


def test_projection_keeps_nearest_point():
    cam = _ortho_cam()
    positions = np.array([[15.0, 25.0, 2000.0], [16.0, 24.0, 1500.0]])
    colors = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    from dualdepth.geometry.pointcloud import ColoredPointCloud

    cloud = ColoredPointCloud(positions, colors, np.zeros((2, 2), dtype=np.int32))
    depth, color, mask = project_orthographic(cloud, cam)
    # both points land on pixel (2, 2); the nearer one wins
    assert depth[2, 2] == 1500.0
    assert np.allclose(color[2, 2], [0.0, 1.0, 0.0])
    assert mask.sum() == 1


def test_projection_drops_out_of_frame_points():
    cam = _ortho_cam()
    from dualdepth.geometry.pointcloud import ColoredPointCloud

    positions = np.array([[-50.0, 0.0, 1000.0], [1e5, 0.0, 1000.0], [0.0, 0.0, -5.0]])
    cloud = ColoredPointCloud(positions, np.zeros((3, 3)), np.zeros((3, 2), dtype=np.int32))
    depth, _, mask = project_orthographic(cloud, cam)
    assert mask.sum() == 0 and (depth == 0).all()


def test_perspective_round_trip_centers():
    cam = _persp_cam()
    depth = np.zeros((6, 8))
    depth[1:5, 2:6] = 1800.0
    color = np.random.default_rng(0).random((6, 8, 3))
    cloud = unproject_perspective(depth, color, cam)
    d2, c2, mask = project_perspective(cloud, cam)
    assert np.array_equal(mask, depth > 0)
    assert np.allclose(d2, depth)
    assert np.allclose(c2[mask], color[mask])


def test_cloud_shape_validation():
    from dualdepth.geometry.pointcloud import ColoredPointCloud

    with pytest.raises(InputError):
        ColoredPointCloud(np.zeros((3, 2)), np.zeros((3, 3)), np.zeros((3, 2), dtype=np.int32))
    with pytest.raises(InputError):
        unproject_perspective(np.zeros((4, 4, 1)), np.zeros((4, 4, 3)), _persp_cam(4, 4))
