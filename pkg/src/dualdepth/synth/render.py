"""Rasterize procedural figures into ground-truth and sensor-style views.

The orthographic ground truth comes straight from the closed-form depth
fields (front/back sheets, shared silhouette), decorated with low-amplitude
cosine relief and per-part albedo.  Shading is rendered from the front
normals under a randomly drawn but positivity-checked light, then split
canonically (shading mean 1 inside the silhouette).  The perspective input
view splats a supersampled front surface through the pinhole, which leaves
realistic resampling holes for rectification to fill.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from dualdepth.errors import InputError
from dualdepth.geometry.cameras import CameraIntrinsics, OrthoCamera
from dualdepth.geometry.normals import compute_normals
from dualdepth.geometry.pointcloud import ortho_unproject, project_perspective
from dualdepth.shading import _basis_rows, render_shading
from dualdepth.synth.body import BodySpec, half_thickness_field

#: Depth-jump guard disabled when rendering ground-truth shading: rim
#: normals should go grazing (dark), not invalid.
_NO_JUMP_LIMIT = 1e9


@dataclass(frozen=True)
class BodyAppearance:
    """Relief, palette, and light parameters drawn once per figure.

    Wave tables are (k, 4) rows of (kx, ky, phase, amplitude) with the
    amplitudes of each table summing to at most 1, so evaluated relief
    fields stay in [-1, 1].
    """

    bump_amp_mm: float
    bump_front: np.ndarray
    bump_back: np.ndarray
    palette_front: np.ndarray
    palette_back: np.ndarray
    mod_front: np.ndarray
    mod_back: np.ndarray
    light: np.ndarray


def _waves(rng: np.random.Generator, count: int, wavelength_mm: tuple[float, float]) -> np.ndarray:
    rows = []
    for _ in range(count):
        lam = rng.uniform(*wavelength_mm)
        ang = rng.uniform(0.0, 2.0 * np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        k = 2.0 * np.pi / lam
        rows.append((k * np.cos(ang), k * np.sin(ang), phase, 1.0 / count))
    return np.asarray(rows, dtype=np.float64)


def _eval_waves(waves: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape, dtype=np.float64)
    for kx, ky, phase, amp in waves:
        out += amp * np.cos(kx * x + ky * y + phase)
    return out


def _hemisphere_dirs(n: int = 512) -> np.ndarray:
    """Deterministic camera-facing unit normals (nz < 0), Fibonacci spaced."""
    i = np.arange(n, dtype=np.float64)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    nz = -(i + 0.5) / n
    r = np.sqrt(1.0 - nz * nz)
    phi = golden * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), nz], axis=1)


def _calibrated_light(rng: np.random.Generator) -> np.ndarray:
    """Draw light coefficients and shrink the directional part until the
    rendered shading is safely positive over the whole visible hemisphere."""
    light = np.zeros(9, dtype=np.float64)
    light[0] = 1.0
    light[1:4] = rng.uniform(-0.35, 0.35, 3)
    light[4:] = rng.uniform(-0.12, 0.12, 5)
    rows = _basis_rows(_hemisphere_dirs())
    for _ in range(64):
        s = rows @ light
        if s.min() > 0.15 and s.max() < 2.5:
            break
        light[1:] *= 0.8
    return light


def sample_appearance(
    rng: np.random.Generator, n_capsules: int, *, bump_amp_mm: float = 6.0
) -> BodyAppearance:
    """Draw all appearance parameters for one figure from `rng`."""
    return BodyAppearance(
        bump_amp_mm=float(bump_amp_mm),
        bump_front=_waves(rng, 3, (80.0, 220.0)),
        bump_back=_waves(rng, 3, (80.0, 220.0)),
        palette_front=rng.uniform(0.15, 0.9, (n_capsules, 3)),
        palette_back=rng.uniform(0.15, 0.9, (n_capsules, 3)),
        mod_front=_waves(rng, 1, (250.0, 600.0))[0],
        mod_back=_waves(rng, 1, (250.0, 600.0))[0],
        light=_calibrated_light(rng),
    )


def _remove_pinches(sil: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Clear one pixel of every diagonal checkerboard pair.

    A pair of silhouette pixels touching only at a corner would pinch the
    meshed surface at that vertex; dropping the thinner pixel keeps the
    silhouette 2x2-connected.  Runs until stable.
    """
    sil = sil.copy()
    for _ in range(32):
        a = sil[:-1, :-1]
        b = sil[:-1, 1:]
        c = sil[1:, :-1]
        d = sil[1:, 1:]
        main = a & d & ~b & ~c
        anti = b & c & ~a & ~d
        if not main.any() and not anti.any():
            break
        for vs, us, off in (
            (*np.nonzero(main), ((0, 0), (1, 1))),
            (*np.nonzero(anti), ((0, 1), (1, 0))),
        ):
            for v, u in zip(vs, us):
                (v1, u1), (v2, u2) = off
                p1, p2 = (v + v1, u + u1), (v + v2, u + u2)
                if not (sil[p1] and sil[p2]):
                    continue
                sil[p1 if h[p1] <= h[p2] else p2] = False
    return sil


@dataclass(frozen=True)
class RenderedSample:
    """Ground-truth orthographic rasters plus the perspective sensor view."""

    depth_front: np.ndarray
    depth_back: np.ndarray
    albedo_front: np.ndarray
    albedo_back: np.ndarray
    shading: np.ndarray
    color_front: np.ndarray
    silhouette: np.ndarray
    light: np.ndarray
    depth_persp: np.ndarray | None
    color_persp: np.ndarray | None


def _albedo(
    palette: np.ndarray, which: np.ndarray, mod: np.ndarray, x: np.ndarray, y: np.ndarray
) -> np.ndarray:
    base = palette[np.maximum(which, 0)]
    kx, ky, phase, _ = mod
    m = 1.0 + 0.08 * np.cos(kx * x + ky * y + phase)
    return np.clip(base * m[..., None], 0.05, 0.98)


def render_sample(
    spec: BodySpec,
    app: BodyAppearance,
    ortho_cam: OrthoCamera,
    persp_cam: CameraIntrinsics | None = None,
    *,
    supersample: int = 2,
) -> RenderedSample:
    """Render one figure: orthographic ground truth and, when a perspective
    camera is given, the clean sensor-style input view.

    Inside the silhouette the shaded front color equals albedo * shading
    exactly (the canonical split: shading is normalized to mean 1).
    """
    if len(spec.capsules) > app.palette_front.shape[0]:
        raise InputError("appearance palette has fewer entries than the body has capsules")
    x, y = ortho_cam.pixel_grid()
    h, which = half_thickness_field(spec, x, y)
    sil = _remove_pinches(h > 0, h)
    h = np.where(sil, h, 0.0)

    amp = app.bump_amp_mm
    thickness = 2.0 * h
    atten = np.clip(thickness / (8.0 * amp), 0.0, 1.0)
    front = np.where(sil, spec.z0 - h - amp * _eval_waves(app.bump_front, x, y) * atten, 0.0)
    back = np.where(sil, spec.z0 + h + amp * _eval_waves(app.bump_back, x, y) * atten, 0.0)

    normals = compute_normals(front, ortho_cam, max_depth_jump=_NO_JUMP_LIMIT)
    shading_raw = render_shading(normals, app.light)
    lit = sil & (shading_raw > 0)
    if not lit.any():
        raise InputError("figure silhouette is empty or fully unlit")
    mu = float(shading_raw[lit].mean())
    shading = np.where(sil, shading_raw / mu, 0.0)

    a_front = _albedo(app.palette_front, which, app.mod_front, x, y)
    scale = min(1.0, 0.98 / float((a_front * shading[..., None]).max()))
    a_front = np.where(sil[..., None], a_front * scale, 0.0)
    a_back = np.where(
        sil[..., None], _albedo(app.palette_back, which, app.mod_back, x, y) * scale, 0.0
    )
    color_front = a_front * shading[..., None]

    depth_persp = color_persp = None
    if persp_cam is not None:
        if supersample < 1:
            raise InputError("supersample must be >=1")
        fine = replace(
            ortho_cam,
            pixel_pitch=ortho_cam.pixel_pitch / supersample,
            width=ortho_cam.width * supersample,
            height=ortho_cam.height * supersample,
        )
        fx, fy = fine.pixel_grid()
        fh, fwhich = half_thickness_field(spec, fx, fy)
        fsil = fh > 0
        fatten = np.clip(2.0 * fh / (8.0 * amp), 0.0, 1.0)
        ffront = np.where(
            fsil, spec.z0 - fh - amp * _eval_waves(app.bump_front, fx, fy) * fatten, 0.0
        )
        fnormals = compute_normals(ffront, fine, max_depth_jump=_NO_JUMP_LIMIT)
        fshading = render_shading(fnormals, app.light) / mu
        fa = _albedo(app.palette_front, fwhich, app.mod_front, fx, fy) * scale
        fcolor = np.clip(fa * fshading[..., None], 0.0, 1.0) * fsil[..., None]
        cloud = ortho_unproject(ffront, fine, fcolor)
        depth_persp, color_persp, _ = project_perspective(cloud, persp_cam)

    return RenderedSample(
        depth_front=front,
        depth_back=back,
        albedo_front=a_front,
        albedo_back=a_back,
        shading=shading,
        color_front=color_front,
        silhouette=sil,
        light=app.light,
        depth_persp=depth_persp,
        color_persp=color_persp,
    )
