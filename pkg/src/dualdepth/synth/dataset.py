"""Write and read figure datasets: per-sample PNG rasters plus a manifest.

Every sample in a dataset shares one perspective camera and one
orthographic camera, recorded in the manifest, so ground-truth rasters of
different samples live on the same grid and can be batched.  Sample seeds
are base_seed XOR the global index; train and test indices never overlap,
so the splits stay disjoint under any base seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from dualdepth.errors import InputError
from dualdepth.fileio import (
    read_color_png,
    read_depth_png,
    read_shading_png,
    write_color_png,
    write_depth_png,
    write_shading_png,
)
from dualdepth.geometry.cameras import CameraIntrinsics, OrthoCamera
from dualdepth.networks.training import PreparedSample, prepare_sample
from dualdepth.noise import NoiseConfig, simulate_noise
from dualdepth.synth.body import generate_body
from dualdepth.synth.render import render_sample, sample_appearance

FORMAT_NAME = "dualdepth-dataset"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"

#: Raster files written per sample; *_depth are 16-bit millimeter PNGs,
#: colors are 8-bit, shading is 16-bit scaled by 1e4.
FILE_KEYS = (
    "input_depth",
    "input_color",
    "front_depth",
    "back_depth",
    "front_albedo",
    "back_albedo",
    "shading",
)

SPLITS = ("train", "test")


def desk_cameras(size: int = 64) -> tuple[CameraIntrinsics, OrthoCamera]:
    """Camera pair scaled for desk-size experiments at `size` x `size`.

    The perspective view is aimed slightly below the horizon so a standing
    figure (head up, legs down, +y down the image) fills the frame; the
    orthographic grid covers the same figure envelope around its center.
    """
    if size < 16:
        raise InputError(f"camera size must be >=16 pixels, got {size}")
    f = 60.0 * size / 64.0
    cx = (size - 1) / 2.0
    cy = cx - 5.0 * size / 64.0
    persp = CameraIntrinsics(fx=f, fy=f, cx=cx, cy=cy, width=size, height=size)
    pitch = 1890.0 / (size - 1)
    ortho = OrthoCamera(
        pixel_pitch=pitch,
        origin_x=0.0 - (size - 1) / 2.0 * pitch,
        origin_y=150.0 - (size - 1) / 2.0 * pitch,
        width=size,
        height=size,
    )
    return persp, ortho


@dataclass(frozen=True)
class DatasetSample:
    name: str
    split: str
    seed: int
    files: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "split": self.split, "seed": self.seed, "files": self.files}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSample":
        return cls(name=d["name"], split=d["split"], seed=int(d["seed"]), files=dict(d["files"]))


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    persp_cam: CameraIntrinsics
    ortho_cam: OrthoCamera
    noise: NoiseConfig
    base_seed: int
    samples: tuple[DatasetSample, ...]

    def split(self, name: str) -> list[DatasetSample]:
        if name not in SPLITS:
            raise InputError(f"split must be one of {SPLITS}, got {name!r}")
        return [s for s in self.samples if s.split == name]

    def path_of(self, sample: DatasetSample, key: str) -> Path:
        return self.root / sample.files[key]


def make_dataset(
    out_dir,
    n_train: int,
    n_test: int,
    *,
    size: int = 64,
    base_seed: int = 0,
    noise: NoiseConfig | None = None,
    z0_base: float = 2000.0,
    progress=None,
) -> DatasetManifest:
    """Generate a figure dataset under `out_dir` and write its manifest.

    Each sample gets a fresh figure, appearance, and noise draw, all seeded
    by base_seed XOR index, so regeneration is byte-stable.  The sensor
    input pair is the noisy splatted perspective view; ground truth lives
    on the shared orthographic grid.
    """
    if n_train < 1 or n_test < 0:
        raise InputError("need n_train >= 1 and n_test >= 0")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as e:
        raise InputError(f"cannot write dataset directory {out}: {e}") from e

    persp_cam, ortho_cam = desk_cameras(size)
    noise = noise if noise is not None else NoiseConfig()
    samples = []
    for i in range(n_train + n_test):
        seed = base_seed ^ i
        rng = np.random.default_rng([seed, 1])
        spec = generate_body(rng, z0_base=z0_base)
        app = sample_appearance(rng, len(spec.capsules))
        r = render_sample(spec, app, ortho_cam, persp_cam)
        noisy = simulate_noise(r.depth_persp, replace(noise, seed=seed))

        name = f"sample_{i:04d}"
        split = "train" if i < n_train else "test"
        files = {key: f"{name}_{key}.png" for key in FILE_KEYS}
        write_depth_png(out / files["input_depth"], noisy)
        write_color_png(out / files["input_color"], r.color_persp)
        write_depth_png(out / files["front_depth"], r.depth_front)
        write_depth_png(out / files["back_depth"], r.depth_back)
        write_color_png(out / files["front_albedo"], r.albedo_front)
        write_color_png(out / files["back_albedo"], r.albedo_back)
        write_shading_png(out / files["shading"], r.shading)
        samples.append(DatasetSample(name=name, split=split, seed=seed, files=files))
        if progress is not None:
            progress(i, n_train + n_test)

    manifest = DatasetManifest(
        root=out,
        persp_cam=persp_cam,
        ortho_cam=ortho_cam,
        noise=noise,
        base_seed=base_seed,
        samples=tuple(samples),
    )
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "perspective_camera": persp_cam.to_dict(),
        "ortho_camera": ortho_cam.to_dict(),
        "noise": noise.to_dict(),
        "base_seed": base_seed,
        "samples": [s.to_dict() for s in samples],
    }
    (out / MANIFEST_NAME).write_text(json.dumps(payload, indent=1), encoding="utf-8")
    return manifest


def load_manifest(path) -> DatasetManifest:
    p = Path(path)
    if p.is_dir():
        p = p / MANIFEST_NAME
    if not p.is_file():
        raise InputError(f"no dataset manifest at {p}")
    d = json.loads(p.read_text(encoding="utf-8"))
    if d.get("format") != FORMAT_NAME:
        raise InputError(f"{p} is not a dataset manifest")
    if d.get("version") != FORMAT_VERSION:
        raise InputError(f"unsupported dataset version {d.get('version')}")
    return DatasetManifest(
        root=p.parent,
        persp_cam=CameraIntrinsics.from_dict(d["perspective_camera"]),
        ortho_cam=OrthoCamera.from_dict(d["ortho_camera"]),
        noise=NoiseConfig.from_dict(d["noise"]),
        base_seed=int(d["base_seed"]),
        samples=tuple(DatasetSample.from_dict(s) for s in d["samples"]),
    )


def load_sample_arrays(manifest: DatasetManifest, sample: DatasetSample) -> dict:
    """Read one sample's rasters back into float arrays (mm / [0,1] units)."""
    return {
        "input_depth": read_depth_png(manifest.path_of(sample, "input_depth")),
        "input_color": read_color_png(manifest.path_of(sample, "input_color")),
        "front_depth": read_depth_png(manifest.path_of(sample, "front_depth")),
        "back_depth": read_depth_png(manifest.path_of(sample, "back_depth")),
        "front_albedo": read_color_png(manifest.path_of(sample, "front_albedo")),
        "back_albedo": read_color_png(manifest.path_of(sample, "back_albedo")),
        "shading": read_shading_png(manifest.path_of(sample, "shading")),
    }


def prepare_split(
    manifest: DatasetManifest,
    split: str,
    *,
    gan_condition: str = "normals",
    limit: int | None = None,
    inpaint_iterations: int = 64,
) -> list[PreparedSample]:
    """Rectify and package a split's samples for training or evaluation."""
    records = manifest.split(split)
    if limit is not None:
        records = records[:limit]
    if not records:
        raise InputError(f"dataset has no samples in split {split!r}")
    prepared = []
    for rec in records:
        arrays = load_sample_arrays(manifest, rec)
        prepared.append(
            prepare_sample(
                arrays["input_depth"],
                arrays["input_color"],
                arrays["front_depth"],
                arrays["back_depth"],
                arrays["front_albedo"],
                arrays["back_albedo"],
                arrays["shading"],
                manifest.persp_cam,
                manifest.ortho_cam,
                gan_condition=gan_condition,
                inpaint_iterations=inpaint_iterations,
            )
        )
    return prepared
