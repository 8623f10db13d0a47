import numpy as np

from dualdepth.geometry import OrthoCamera, compute_normals, normals_from_point_grid


def _ortho(w=16, h=16, pitch=1.0):
    return OrthoCamera(pixel_pitch=pitch, origin_x=0.0, origin_y=0.0, width=w, height=h)


def _grid_points(depth, cam):
    x, y = cam.pixel_grid()
    return np.dstack([x, y, depth])


def test_flat_plane_normal_points_at_camera():
    cam = _ortho()
    depth = np.full((16, 16), 1000.0)
    normals = compute_normals(depth, cam)
    interior = normals[1:-1, 1:-1]
    assert np.abs(interior - np.array([0.0, 0.0, -1.0])).max() < 1e-6


def test_tilted_plane_exact_normal():
    # z = 1000 + x  =>  unnormalized normal (1, 0, -1)
    cam = _ortho()
    x, _ = cam.pixel_grid()
    depth = 1000.0 + x
    normals = compute_normals(depth, cam, max_depth_jump=10.0)
    expected = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
    assert np.abs(normals[1:-1, 1:-1] - expected).max() < 1e-6


def test_normals_flip_toward_camera():
    # descending plane flips the cross-product direction; the depth-map
    # wrapper must still return camera-facing normals (nz < 0)
    cam = _ortho()
    x, _ = cam.pixel_grid()
    normals = compute_normals(1000.0 - x, cam, max_depth_jump=10.0)
    assert (normals[1:-1, 1:-1, 2] < 0).all()


def test_point_grid_estimator_is_rotation_equivariant():
    rng = np.random.default_rng(5)
    cam = _ortho()
    depth = 1000.0 + rng.normal(0.0, 0.3, (16, 16)).cumsum(axis=1)
    pts = _grid_points(depth, cam)
    valid = np.ones((16, 16), dtype=bool)

    a, b, c = 0.3, -0.8, 1.9
    rx = np.array([[1, 0, 0], [0, np.cos(a), -np.sin(a)], [0, np.sin(a), np.cos(a)]])
    ry = np.array([[np.cos(b), 0, np.sin(b)], [0, 1, 0], [-np.sin(b), 0, np.cos(b)]])
    rz = np.array([[np.cos(c), -np.sin(c), 0], [np.sin(c), np.cos(c), 0], [0, 0, 1]])
    rot = rx @ ry @ rz

    n0 = normals_from_point_grid(pts, valid)
    n1 = normals_from_point_grid(pts @ rot.T, valid)
    assert np.abs(n1 - n0 @ rot.T).max() < 1e-5


def test_depth_jump_invalidates_pixels():
    cam = _ortho()
    depth = np.full((16, 16), 1000.0)
    depth[:, 8:] = 2000.0
    normals = compute_normals(depth, cam, max_depth_jump=50.0)
    # pixels adjacent to the step have no valid neighbor pair on that side
    lengths = np.linalg.norm(normals, axis=2)
    assert lengths[5, 7] == 0.0 and lengths[5, 8] == 0.0
    assert abs(lengths[5, 3] - 1.0) < 1e-9


def test_invalid_depth_zeroes_normals():
    cam = _ortho()
    depth = np.full((16, 16), 1000.0)
    depth[6, 6] = 0.0
    normals = compute_normals(depth, cam)
    assert np.linalg.norm(normals[6, 6]) == 0.0
    # neighbors keep enough valid pairs to stay defined
    assert abs(np.linalg.norm(normals[6, 5]) - 1.0) < 1e-9


def test_unit_length_on_valid_pixels():
    rng = np.random.default_rng(11)
    cam = _ortho()
    depth = 1500.0 + 5.0 * rng.random((16, 16))
    normals = compute_normals(depth, cam)
    lengths = np.linalg.norm(normals, axis=2)
    inside = lengths > 0
    assert np.abs(lengths[inside] - 1.0).max() < 1e-9
