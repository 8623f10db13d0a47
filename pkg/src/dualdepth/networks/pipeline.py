"""Full raster pipeline: rectification, refinement, back-side synthesis.

rectify() turns one perspective RGB-D frame into orthographic rasters with
a closed silhouette.  forward_pipeline() then runs the four generators in
dependency order on one rectified sample: refined front depth first, then
shading-conditioned intrinsic color, then the hidden back depth and color
from the refined front maps.  NetworkBundle groups the generators with
their discriminators so training and inference share one checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from dualdepth.errors import InputError
from dualdepth.autodiff.checkpoint import load_checkpoint, save_checkpoint
from dualdepth.geometry.cameras import CameraIntrinsics, OrthoCamera, fit_ortho_camera
from dualdepth.geometry.inpaint import inpaint_holes, interior_holes
from dualdepth.geometry.normals import compute_normals
from dualdepth.geometry.pointcloud import project_orthographic, unproject_perspective
from dualdepth.networks.patchdisc import PatchDiscConfig, PatchDiscriminator
from dualdepth.networks.unet import UNet, UNetConfig
from dualdepth.shading import estimate_sh, normalize_shading, render_shading

# Input/output channel counts per generator.  Front depth sees the full
# rectified stack (color, normalized depth, measured-pixel mask); front
# color sees color plus the shading estimate; both back networks see the
# intrinsic front color plus the refined normalized front depth.
GENERATOR_CHANNELS = {
    "gen_depth_front": (5, 1),
    "gen_color_front": (4, 3),
    "gen_depth_back": (4, 1),
    "gen_color_back": (4, 3),
}

GAN_CONDITIONS = ("normals", "depth")

MIN_VALID_MM = 1.0


@dataclass(frozen=True)
class RectifiedInput:
    """Orthographic rasters for one frame, hole-filled inside the silhouette.

    depth is in millimeters with 0 outside the silhouette; color is [0, 1].
    splat_mask marks pixels that received a measured point, silhouette adds
    the enclosed holes that were filled by diffusion.
    """

    color: np.ndarray
    depth: np.ndarray
    splat_mask: np.ndarray
    silhouette: np.ndarray
    cam: OrthoCamera

    def __post_init__(self):
        h, w = self.depth.shape
        if self.color.shape != (h, w, 3):
            raise InputError(f"color shape {self.color.shape} does not match depth {(h, w)}")
        if self.splat_mask.shape != (h, w) or self.silhouette.shape != (h, w):
            raise InputError("masks must match the depth raster shape")
        if (self.cam.height, self.cam.width) != (h, w):
            raise InputError("camera size does not match the rasters")


def rectify(
    depth: np.ndarray,
    color: np.ndarray,
    cam: CameraIntrinsics,
    ortho_cam: OrthoCamera | None = None,
    *,
    ortho_size: tuple[int, int] | None = None,
    coverage: float = 0.9,
    inpaint_iterations: int = 64,
) -> RectifiedInput:
    """Resample a perspective RGB-D frame onto an orthographic grid.

    Unprojects valid pixels, z-buffer splats them onto the target grid,
    closes the silhouette over interior holes, and diffusion-fills depth
    and color there.  When no ortho camera is given one is fitted to the
    point cloud at `ortho_size` (default: the input raster size).
    """
    cloud = unproject_perspective(depth, color, cam)
    if len(cloud) == 0:
        raise InputError("depth map has no valid pixels to rectify")
    if ortho_cam is None:
        h, w = (ortho_size if ortho_size is not None else depth.shape[:2])
        ortho_cam = fit_ortho_camera(cloud.positions, int(w), int(h), coverage=coverage)

    d_orth, c_orth, splat = project_orthographic(cloud, ortho_cam)
    silhouette = splat | interior_holes(splat)
    if silhouette.sum() > splat.sum():
        d_orth = inpaint_holes(d_orth, splat, iterations=inpaint_iterations)
        c_orth = inpaint_holes(c_orth, splat, iterations=inpaint_iterations)
    d_orth = np.where(silhouette, d_orth, 0.0)
    c_orth = np.where(silhouette[..., None], c_orth, 0.0)
    return RectifiedInput(
        color=c_orth, depth=d_orth, splat_mask=splat, silhouette=silhouette, cam=ortho_cam
    )


def crop_to_square(rect: RectifiedInput, size: int | None = None) -> RectifiedInput:
    """Crop a rectified frame to a square window centered on the silhouette."""
    h, w = rect.depth.shape
    s = min(h, w) if size is None else int(size)
    if s < 1 or s > min(h, w):
        raise InputError(f"crop size {s} does not fit a {h}x{w} raster")
    if rect.silhouette.any():
        vs, us = np.nonzero(rect.silhouette)
        cv, cu = vs.mean(), us.mean()
    else:
        cv, cu = (h - 1) / 2.0, (w - 1) / 2.0
    v0 = int(np.clip(round(cv - s / 2), 0, h - s))
    u0 = int(np.clip(round(cu - s / 2), 0, w - s))
    win = (slice(v0, v0 + s), slice(u0, u0 + s))
    cam = replace(
        rect.cam,
        origin_x=rect.cam.origin_x + u0 * rect.cam.pixel_pitch,
        origin_y=rect.cam.origin_y + v0 * rect.cam.pixel_pitch,
        width=s,
        height=s,
    )
    return RectifiedInput(
        color=rect.color[win],
        depth=rect.depth[win],
        splat_mask=rect.splat_mask[win],
        silhouette=rect.silhouette[win],
        cam=cam,
    )


def normalized_depth(depth: np.ndarray, silhouette: np.ndarray, z_ref: float) -> np.ndarray:
    """Zero-mean depth in meters: (z - z_ref)/1000 inside the silhouette."""
    return np.where(silhouette, (depth - z_ref) / 1000.0, 0.0)


def reference_depth(depth: np.ndarray, silhouette: np.ndarray) -> float:
    if not silhouette.any():
        raise InputError("silhouette is empty; no depth reference")
    return float(depth[silhouette].mean())


def _chw(image: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(image.transpose(2, 0, 1))


def _stack_input(*channels: np.ndarray) -> np.ndarray:
    planes = []
    for c in channels:
        planes.append(c[None] if c.ndim == 2 else c)
    return np.concatenate(planes, axis=0)[None].astype(np.float32)


@dataclass(frozen=True)
class PipelineOutput:
    """All rasters reconstructed for one frame, masked to the silhouette."""

    depth_front: np.ndarray
    color_front: np.ndarray
    depth_back: np.ndarray
    color_back: np.ndarray
    normals_front: np.ndarray
    normals_back: np.ndarray
    shading: np.ndarray
    silhouette: np.ndarray
    cam: OrthoCamera
    z_ref: float


class NetworkBundle:
    """The four generators and three discriminators behind one checkpoint.

    `gan_condition` controls what the back-depth discriminator sees as its
    condition raster: the normal map of the refined front depth, or (for
    the ablation) the raw normalized front depth.  It changes only that
    discriminator's input width.
    """

    def __init__(
        self,
        generators: dict[str, UNet],
        discriminators: dict[str, PatchDiscriminator],
        gan_condition: str,
        trained_stages: tuple[str, ...] = (),
    ):
        missing = set(GENERATOR_CHANNELS) - set(generators)
        if missing:
            raise InputError(f"bundle is missing generators: {sorted(missing)}")
        self.generators = generators
        self.discriminators = discriminators
        self.gan_condition = gan_condition
        self.trained_stages = tuple(trained_stages)

    @staticmethod
    def disc_channels(gan_condition: str) -> dict[str, int]:
        if gan_condition not in GAN_CONDITIONS:
            raise InputError(f"gan_condition must be one of {GAN_CONDITIONS}")
        back_condition = 3 if gan_condition == "normals" else 1
        return {
            "disc_depth_front": 6,
            "disc_depth_back": 3 + back_condition,
            "disc_color_back": 6,
        }

    @classmethod
    def create(
        cls,
        *,
        levels: int = 3,
        base_channels: int = 16,
        disc_layers: int = 4,
        disc_base_channels: int = 16,
        seed: int = 0,
        gan_condition: str = "normals",
    ) -> "NetworkBundle":
        generators = {}
        for i, (name, (c_in, c_out)) in enumerate(sorted(GENERATOR_CHANNELS.items())):
            generators[name] = UNet(
                UNetConfig(
                    input_channels=c_in,
                    output_channels=c_out,
                    levels=levels,
                    base_channels=base_channels,
                    seed=seed * 1000 + i,
                )
            )
        discriminators = {}
        for i, (name, c_in) in enumerate(sorted(cls.disc_channels(gan_condition).items())):
            discriminators[name] = PatchDiscriminator(
                PatchDiscConfig(
                    input_channels=c_in,
                    layers=disc_layers,
                    base_channels=disc_base_channels,
                    seed=seed * 1000 + 100 + i,
                )
            )
        bundle = cls(generators, discriminators, gan_condition)
        bundle._config = {
            "levels": levels,
            "base_channels": base_channels,
            "disc_layers": disc_layers,
            "disc_base_channels": disc_base_channels,
            "seed": seed,
            "gan_condition": gan_condition,
        }
        return bundle

    def all_params(self) -> dict[str, np.ndarray]:
        flat: dict[str, np.ndarray] = {}
        for name, net in sorted(self.generators.items()):
            for k, v in net.params.items():
                flat[f"{name}/{k}"] = v
        for name, net in sorted(self.discriminators.items()):
            for k, v in net.params.items():
                flat[f"{name}/{k}"] = v
        return flat

    def save(self, path, extra_meta: dict | None = None) -> None:
        meta = {
            "kind": "network-bundle",
            "config": dict(getattr(self, "_config", {})),
            "trained_stages": list(self.trained_stages),
        }
        if extra_meta:
            meta.update(extra_meta)
        save_checkpoint(path, self.all_params(), meta=meta)

    @classmethod
    def load(cls, path) -> "NetworkBundle":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "network-bundle":
            raise InputError(f"{path} is not a network bundle checkpoint")
        config = meta.get("config", {})
        bundle = cls.create(**config)
        bundle.trained_stages = tuple(meta.get("trained_stages", []))
        expected = bundle.all_params()
        if set(expected) != set(tensors):
            raise InputError("checkpoint parameter names do not match the bundle layout")
        for key, arr in tensors.items():
            if arr.shape != expected[key].shape:
                raise InputError(
                    f"checkpoint tensor {key} has shape {arr.shape}, expected {expected[key].shape}"
                )
            expected[key][...] = arr
        return bundle


def forward_pipeline(bundle: NetworkBundle, rect: RectifiedInput) -> PipelineOutput:
    """Reconstruct all output rasters for one rectified frame.

    Stage order matches the data dependencies: refined front depth from the
    rectified stack, intrinsic front color from color + estimated shading,
    then back depth and back color from the refined front maps.  The back
    sheet is clamped to lie at or behind the front sheet so the pair always
    bounds a nonnegative thickness.
    """
    sil = rect.silhouette
    z_ref = reference_depth(rect.depth, sil)
    color_chw = _chw(rect.color)
    d_in = normalized_depth(rect.depth, sil, z_ref)

    x_df = _stack_input(color_chw, d_in, rect.splat_mask.astype(np.float32))
    off_front = bundle.generators["gen_depth_front"].apply(x_df)[0, 0].astype(np.float64)
    depth_front = np.where(sil, np.maximum(off_front * 1000.0 + z_ref, MIN_VALID_MM), 0.0)

    normals_front = compute_normals(depth_front, rect.cam)
    n_valid = np.linalg.norm(normals_front, axis=2) > 0.5
    coeffs = estimate_sh(rect.color, normals_front, sil)
    shading = normalize_shading(render_shading(normals_front, coeffs), sil & n_valid)

    x_cf = _stack_input(color_chw, shading)
    albedo = bundle.generators["gen_color_front"].apply(x_cf)[0].astype(np.float64)
    color_front = np.clip(albedo.transpose(1, 2, 0), 0.0, 1.0) * sil[..., None]

    d_front_in = normalized_depth(depth_front, sil, z_ref)
    x_back = _stack_input(_chw(color_front), d_front_in)
    off_back = bundle.generators["gen_depth_back"].apply(x_back)[0, 0].astype(np.float64)
    depth_back = np.where(sil, np.maximum(off_back * 1000.0 + z_ref, depth_front), 0.0)
    back_rgb = bundle.generators["gen_color_back"].apply(x_back)[0].astype(np.float64)
    color_back = np.clip(back_rgb.transpose(1, 2, 0), 0.0, 1.0) * sil[..., None]

    normals_back = compute_normals(depth_back, rect.cam)
    return PipelineOutput(
        depth_front=depth_front,
        color_front=color_front,
        depth_back=depth_back,
        color_back=color_back,
        normals_front=normals_front,
        normals_back=normals_back,
        shading=shading,
        silhouette=sil,
        cam=rect.cam,
        z_ref=z_ref,
    )
