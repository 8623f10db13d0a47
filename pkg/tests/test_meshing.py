import numpy as np
import pytest

from _meshcheck import assert_closed_ball, mesh_stats
from dualdepth.errors import InputError
from dualdepth.geometry import OrthoCamera, build_mesh


def _cam(w, h, pitch=10.0):
    return OrthoCamera(pixel_pitch=pitch, origin_x=0.0, origin_y=0.0, width=w, height=h)


def _slab(w, h, front=1000.0, back=1100.0):
    d_front = np.full((h, w), front)
    d_back = np.full((h, w), back)
    color = np.ones((h, w, 3)) * 0.5
    return d_front, d_back, color, color


def test_two_by_two_fixture_counts():
    d_front, d_back, c_front, c_back = _slab(2, 2)
    mesh = build_mesh(d_front, d_back, c_front, c_back, _cam(2, 2), max_depth_jump=500.0)
    s = mesh_stats(mesh)
    assert s["v"] == 20
    assert s["f"] == 36
    assert s["e"] == 54
    assert s["euler"] == 2
    assert_closed_ball(mesh)


def test_slab_volume_matches_prism():
    # 4x3 grid at 10 mm pitch spans 30x20 mm between pixel centers; the side
    # wall is vertical, so enclosed volume = area * thickness
    d_front, d_back, c_front, c_back = _slab(4, 3, front=1000.0, back=1250.0)
    mesh = build_mesh(d_front, d_back, c_front, c_back, _cam(4, 3), max_depth_jump=500.0)
    assert_closed_ball(mesh)
    assert mesh.signed_volume() == pytest.approx(30.0 * 20.0 * 250.0, rel=1e-9)


def test_silhouette_with_hole_keeps_manifold():
    # a 1-pixel hole in a 6x6 slab gives a torus-like solid: euler 0
    h = w = 6
    d_front = np.full((h, w), 1000.0)
    d_back = np.full((h, w), 1100.0)
    d_front[3, 3] = 0.0
    d_back[3, 3] = 0.0
    color = np.ones((h, w, 3)) * 0.5
    mesh = build_mesh(d_front, d_back, color, color, _cam(w, h), max_depth_jump=500.0)
    s = mesh_stats(mesh)
    assert s["edge_manifold"]
    assert s["euler"] == 0
    assert mesh.signed_volume() > 0


def test_two_islands_euler_four():
    h, w = 3, 7
    d_front = np.zeros((h, w))
    d_front[:, :3] = 1000.0
    d_front[:, 4:] = 1000.0
    d_back = np.where(d_front > 0, 1100.0, 0.0)
    color = np.ones((h, w, 3)) * 0.5
    mesh = build_mesh(d_front, d_back, color, color, _cam(w, h), max_depth_jump=500.0)
    s = mesh_stats(mesh)
    assert s["edge_manifold"]
    assert s["euler"] == 4  # two disjoint closed balls
    assert mesh.signed_volume() > 0


def test_rim_vertices_interpolate_between_sheets():
    d_front, d_back, c_front, c_back = _slab(2, 2, front=1000.0, back=1200.0)
    mesh = build_mesh(d_front, d_back, c_front, c_back, _cam(2, 2), max_depth_jump=500.0)
    zs = np.unique(np.round(mesh.vertices[:, 2], 6))
    # three interpolated wall levels between the two sheets
    assert set(zs) == {1000.0, 1050.0, 1100.0, 1150.0, 1200.0}


def test_mismatched_silhouettes_rejected():
    d_front, d_back, c_front, c_back = _slab(3, 3)
    d_back = d_back.copy()
    d_back[1, 1] = 0.0
    with pytest.raises(InputError):
        build_mesh(d_front, d_back, c_front, c_back, _cam(3, 3))


def test_back_in_front_of_front_rejected():
    d_front, d_back, c_front, c_back = _slab(3, 3, front=1200.0, back=1000.0)
    with pytest.raises(InputError):
        build_mesh(d_front, d_back, c_front, c_back, _cam(3, 3))


def test_front_faces_point_at_camera():
    d_front, d_back, c_front, c_back = _slab(3, 3)
    mesh = build_mesh(d_front, d_back, c_front, c_back, _cam(3, 3), max_depth_jump=500.0)
    v = mesh.vertices
    f = mesh.faces
    normals = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    front_faces = normals[np.abs(normals[:, 2]) > 1e-9]
    # both orientations exist (front sheet toward -z, back sheet toward +z)
    assert (front_faces[:, 2] < 0).any() and (front_faces[:, 2] > 0).any()


def test_depth_jump_drops_quads_from_both_sheets():
    h = w = 4
    d_front = np.full((h, w), 1000.0)
    d_front[:, 2:] = 1500.0  # 500 mm step inside the silhouette
    d_back = d_front + 100.0
    color = np.ones((h, w, 3)) * 0.5
    mesh = build_mesh(d_front, d_back, color, color, _cam(w, h), max_depth_jump=50.0)
    full = build_mesh(d_front, d_back, color, color, _cam(w, h), max_depth_jump=1e9)
    assert mesh.num_faces < full.num_faces
    # the two sheets lose the same quads
    v = mesh.vertices
    f = mesh.faces
    normals = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    sheet = np.abs(normals[:, 2]) > 1e-9
    toward = (normals[sheet, 2] < 0).sum()
    away = (normals[sheet, 2] > 0).sum()
    assert toward == away


def test_empty_silhouette_rejected():
    z = np.zeros((3, 3))
    color = np.zeros((3, 3, 3))
    with pytest.raises(InputError):
        build_mesh(z, z, color, color, _cam(3, 3))


def test_vertex_colors_come_from_rasters():
    d_front, d_back, _, _ = _slab(2, 2)
    c_front = np.zeros((2, 2, 3))
    c_front[..., 0] = 1.0
    c_back = np.zeros((2, 2, 3))
    c_back[..., 2] = 1.0
    mesh = build_mesh(d_front, d_back, c_front, c_back, _cam(2, 2), max_depth_jump=500.0)
    front_vertex_colors = mesh.colors[mesh.vertices[:, 2] == 1000.0]
    back_vertex_colors = mesh.colors[mesh.vertices[:, 2] == 1100.0]
    assert (front_vertex_colors == [1.0, 0.0, 0.0]).all()
    assert (back_vertex_colors == [0.0, 0.0, 1.0]).all()
