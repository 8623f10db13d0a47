"""Command line interface.

Subcommands cover the whole workflow: synth-data, add-noise, rectify,
normals, deshade, mesh, train, infer, eval.  Exit codes: 0 on success, 1
for command line usage errors, 2 for invalid inputs or configuration, 3
when training diverges.

Heavy imports happen inside the command handlers so that --serial can pin
the BLAS thread pools through environment variables before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

_BLAS_ENV = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this CLI reserves 2 for bad
    inputs, so usage problems exit with 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="INI", help="configuration file")
    p.add_argument(
        "--set",
        metavar="SECTION.KEY=VALUE",
        action="append",
        default=[],
        dest="overrides",
        help="override one config entry (repeatable)",
    )
    p.add_argument("--json", action="store_true", help="print machine-readable JSON")
    p.add_argument(
        "--serial",
        action="store_true",
        help="pin BLAS/OpenMP pools to one thread (set before numpy loads)",
    )
    return p


def _camera_flags(p: argparse.ArgumentParser, *, ortho_only: bool = False):
    p.add_argument("--camera", metavar="JSON", help="camera file written by rectify/infer")
    p.add_argument("--pitch", type=float, help="orthographic pixel pitch in mm")
    p.add_argument("--origin-x", type=float, default=0.0, help="ortho grid origin x (mm)")
    p.add_argument("--origin-y", type=float, default=0.0, help="ortho grid origin y (mm)")
    if not ortho_only:
        p.add_argument("--fx", type=float, help="perspective focal length x (px)")
        p.add_argument("--fy", type=float, help="perspective focal length y (px)")
        p.add_argument("--cx", type=float, help="perspective principal point x (px)")
        p.add_argument("--cy", type=float, help="perspective principal point y (px)")


def build_parser() -> _Parser:
    common = _common()
    parser = _Parser(prog="dualdepth", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser(
        "synth-data", parents=[common], help="generate a procedural figure dataset"
    )
    p.add_argument("out_dir", help="output dataset directory")
    p.set_defaults(func=_cmd_synth_data)

    p = sub.add_parser(
        "add-noise", parents=[common], help="apply sensor-style noise to a depth map"
    )
    p.add_argument("depth", help="input 16-bit depth PNG (mm)")
    p.add_argument("out", help="output depth PNG")
    p.add_argument("--seed", type=int, help="override the noise seed")
    p.set_defaults(func=_cmd_add_noise)

    p = sub.add_parser(
        "rectify", parents=[common], help="resample a perspective RGB-D pair orthographically"
    )
    p.add_argument("depth", help="perspective depth PNG (mm)")
    p.add_argument("color", help="perspective color PNG")
    p.add_argument("out_dir", help="directory for the rectified rasters")
    _camera_flags(p)
    p.add_argument("--ortho-size", type=int, help="output grid side length (default: input size)")
    p.add_argument("--square", action="store_true", help="crop to a silhouette-centered square")
    p.set_defaults(func=_cmd_rectify)

    p = sub.add_parser("normals", parents=[common], help="estimate a normal map from depth")
    p.add_argument("depth", help="depth PNG (mm)")
    p.add_argument("out", help="output normal-map PNG")
    _camera_flags(p)
    p.set_defaults(func=_cmd_normals)

    p = sub.add_parser(
        "deshade", parents=[common], help="split color into albedo and shading using depth"
    )
    p.add_argument("color", help="color PNG")
    p.add_argument("depth", help="aligned depth PNG (mm)")
    p.add_argument("albedo_out", help="output albedo PNG")
    p.add_argument("--shading-out", help="also write the shading raster")
    _camera_flags(p)
    p.set_defaults(func=_cmd_deshade)

    p = sub.add_parser(
        "mesh", parents=[common], help="mesh a front/back depth pair into a closed OBJ"
    )
    p.add_argument("front_depth")
    p.add_argument("back_depth")
    p.add_argument("front_color")
    p.add_argument("back_color")
    p.add_argument("out_obj")
    _camera_flags(p, ortho_only=True)
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("train", parents=[common], help="train the raster networks on a dataset")
    p.add_argument("dataset", help="dataset directory (with manifest.json)")
    p.add_argument("checkpoint_out", help="where to write the trained bundle")
    p.add_argument("--resume", metavar="CKPT", help="start from an existing bundle")
    p.add_argument("--history", metavar="JSONL", help="write per-step loss lines here")
    p.add_argument("--limit", type=int, help="use only the first N training samples")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", parents=[common], help="run the full pipeline on one RGB-D pair")
    p.add_argument("checkpoint", help="trained bundle")
    p.add_argument("depth", help="perspective depth PNG (mm)")
    p.add_argument("color", help="perspective color PNG")
    p.add_argument("out_dir", help="directory for the reconstructed rasters")
    _camera_flags(p)
    p.add_argument("--ortho-size", type=int, default=64, help="ortho grid side (default 64)")
    p.add_argument("--mesh-out", metavar="OBJ", help="also mesh the depth pair")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("eval", parents=[common], help="evaluate a bundle on a dataset split")
    p.add_argument("checkpoint", help="trained bundle")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--limit", type=int, help="use only the first N samples")
    p.set_defaults(func=_cmd_eval)

    return parser


def _emit(args, payload: dict, human: list[str]):
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in human:
            print(line)


def _load_cfg(args):
    from dualdepth.config import config_hash, load_config

    cfg = load_config(args.config, args.overrides)
    return cfg, config_hash(cfg)


def _noise_config(cfg: dict, seed_override=None):
    from dualdepth.noise import NoiseConfig

    n = cfg["noise"]
    return NoiseConfig(
        kernel_sigma_px=n["kernel_sigma_px"],
        kernel_density=n["kernel_density"],
        axial_coeffs=(n["axial_c0"], n["axial_c1"], n["axial_c2"]),
        seed=n["seed"] if seed_override is None else seed_override,
    )


def _intrinsics_from_args(args, shape):
    """Perspective intrinsics from flags, with a centered fallback."""
    from dualdepth.geometry import CameraIntrinsics

    h, w = shape
    given = [args.fx, args.fy, args.cx, args.cy]
    if any(v is not None for v in given) and not all(v is not None for v in given):
        from dualdepth.errors import InputError

        raise InputError("--fx, --fy, --cx and --cy must be given together")
    if args.fx is None:
        f = 60.0 * min(h, w) / 64.0
        return CameraIntrinsics(fx=f, fy=f, cx=(w - 1) / 2.0, cy=(h - 1) / 2.0, width=w, height=h)
    return CameraIntrinsics(fx=args.fx, fy=args.fy, cx=args.cx, cy=args.cy, width=w, height=h)


def _ortho_from_args(args, shape):
    """Orthographic camera from --camera JSON or --pitch (+ origins)."""
    from dualdepth.errors import InputError
    from dualdepth.geometry import OrthoCamera

    h, w = shape
    if args.camera:
        data = _read_camera_file(args.camera)
        cam = OrthoCamera.from_dict(data["ortho"])
        if (cam.height, cam.width) != (h, w):
            raise InputError(
                f"camera file grid {cam.height}x{cam.width} does not match raster {h}x{w}"
            )
        return cam
    if args.pitch is None:
        raise InputError("need --camera or --pitch to define the orthographic grid")
    return OrthoCamera(
        pixel_pitch=args.pitch, origin_x=args.origin_x, origin_y=args.origin_y, width=w, height=h
    )


def _read_camera_file(path) -> dict:
    from dualdepth.errors import InputError

    p = Path(path)
    if not p.is_file():
        raise InputError(f"camera file not found: {p}")
    data = json.loads(p.read_text(encoding="utf-8"))
    if "ortho" not in data:
        raise InputError(f"{p} does not contain an 'ortho' camera entry")
    return data


def _write_camera_file(path, ortho, persp=None, z_ref=None):
    data = {"format": "dualdepth-frame", "ortho": ortho.to_dict()}
    if persp is not None:
        data["perspective"] = persp.to_dict()
    if z_ref is not None:
        data["z_ref"] = z_ref
    Path(path).write_text(json.dumps(data, indent=1), encoding="utf-8")


def _cmd_synth_data(args) -> int:
    cfg, digest = _load_cfg(args)
    from dualdepth.synth import make_dataset

    ds = cfg["dataset"]
    manifest = make_dataset(
        args.out_dir,
        ds["train_samples"],
        ds["test_samples"],
        size=ds["size"],
        base_seed=ds["base_seed"],
        noise=_noise_config(cfg),
        z0_base=ds["z0_mm"],
    )
    n_train = len(manifest.split("train"))
    n_test = len(manifest.split("test"))
    _emit(
        args,
        {
            "manifest": str(manifest.root / "manifest.json"),
            "train": n_train,
            "test": n_test,
            "config_hash": digest,
        },
        [
            f"dataset written to {manifest.root} ({n_train} train / {n_test} test samples)",
            f"config sha256 {digest}",
        ],
    )
    return 0


def _cmd_add_noise(args) -> int:
    cfg, digest = _load_cfg(args)
    from dualdepth.fileio import read_depth_png, write_depth_png
    from dualdepth.noise import axial_sigma, simulate_noise

    noise_cfg = _noise_config(cfg, seed_override=args.seed)
    depth = read_depth_png(args.depth)
    write_depth_png(args.out, simulate_noise(depth, noise_cfg))
    sigma_2m = float(axial_sigma(2.0, noise_cfg))
    _emit(
        args,
        {"out": args.out, "sigma_mm_at_2m": sigma_2m, "config_hash": digest},
        [f"noisy depth written to {args.out} (axial sigma at 2m: {sigma_2m:.1f}mm)"],
    )
    return 0


def _cmd_rectify(args) -> int:
    cfg, digest = _load_cfg(args)
    from dualdepth.fileio import read_color_png, read_depth_png, write_color_png, write_depth_png
    from dualdepth.networks import crop_to_square, rectify

    depth = read_depth_png(args.depth)
    color = read_color_png(args.color)
    persp = _intrinsics_from_args(args, depth.shape)
    size = args.ortho_size
    rect = rectify(
        depth,
        color,
        persp,
        ortho_size=(size, size) if size else None,
        inpaint_iterations=cfg["geometry"]["inpaint_iterations"],
    )
    if args.square:
        rect = crop_to_square(rect)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_depth_png(out / "ortho_depth.png", rect.depth)
    write_color_png(out / "ortho_color.png", rect.color)
    write_depth_png(out / "mask_splat.png", rect.splat_mask * 65535)
    write_depth_png(out / "mask_silhouette.png", rect.silhouette * 65535)
    _write_camera_file(out / "camera.json", rect.cam, persp)
    coverage = float(rect.silhouette.mean())
    _emit(
        args,
        {
            "out_dir": str(out),
            "grid": [rect.cam.height, rect.cam.width],
            "pixel_pitch_mm": rect.cam.pixel_pitch,
            "silhouette_fraction": coverage,
            "config_hash": digest,
        },
        [
            f"rectified rasters written to {out}",
            f"grid {rect.cam.height}x{rect.cam.width}, pitch {rect.cam.pixel_pitch:.2f}mm, "
            f"silhouette covers {100 * coverage:.1f}% of the frame",
        ],
    )
    return 0


def _ortho_or_persp_cam(args, shape):
    from dualdepth.errors import InputError

    if args.camera or args.pitch is not None:
        return _ortho_from_args(args, shape)
    if args.fx is not None:
        return _intrinsics_from_args(args, shape)
    raise InputError("need --camera, --pitch, or perspective intrinsics (--fx/--fy/--cx/--cy)")


def _cmd_normals(args) -> int:
    cfg, _ = _load_cfg(args)
    from dualdepth.fileio import read_depth_png, write_normals_png
    from dualdepth.geometry import compute_normals

    depth = read_depth_png(args.depth)
    cam = _ortho_or_persp_cam(args, depth.shape)
    normals = compute_normals(depth, cam, max_depth_jump=cfg["geometry"]["max_depth_jump_mm"])
    write_normals_png(args.out, normals)
    valid = float((abs((normals**2).sum(axis=2) - 1.0) < 1e-6).mean())
    _emit(
        args,
        {"out": args.out, "valid_fraction": valid},
        [f"normal map written to {args.out} ({100 * valid:.1f}% valid pixels)"],
    )
    return 0


def _cmd_deshade(args) -> int:
    cfg, _ = _load_cfg(args)
    import numpy as np

    from dualdepth.fileio import read_color_png, read_depth_png, write_color_png, write_shading_png
    from dualdepth.geometry import compute_normals
    from dualdepth.shading import estimate_sh, normalize_shading, remove_shading, render_shading

    color = read_color_png(args.color)
    depth = read_depth_png(args.depth)
    cam = _ortho_or_persp_cam(args, depth.shape)
    normals = compute_normals(depth, cam, max_depth_jump=cfg["geometry"]["max_depth_jump_mm"])
    mask = depth > 0
    coeffs = estimate_sh(color, normals, mask)
    valid = mask & (np.linalg.norm(normals, axis=2) > 0.5)
    shading = normalize_shading(render_shading(normals, coeffs), valid)
    albedo = remove_shading(color, shading) * mask[..., None]
    write_color_png(args.albedo_out, albedo)
    if args.shading_out:
        write_shading_png(args.shading_out, shading)
    _emit(
        args,
        {
            "albedo_out": args.albedo_out,
            "shading_out": args.shading_out,
            "light_coefficients": [round(float(c), 6) for c in coeffs],
        },
        [
            f"albedo written to {args.albedo_out}"
            + (f", shading to {args.shading_out}" if args.shading_out else ""),
            "light coefficients: " + " ".join(f"{c:+.4f}" for c in coeffs),
        ],
    )
    return 0


def _cmd_mesh(args) -> int:
    cfg, _ = _load_cfg(args)
    from dualdepth.fileio import read_color_png, read_depth_png, write_obj
    from dualdepth.geometry import build_mesh

    d_front = read_depth_png(args.front_depth)
    d_back = read_depth_png(args.back_depth)
    c_front = read_color_png(args.front_color)
    c_back = read_color_png(args.back_color)
    cam = _ortho_from_args(args, d_front.shape)
    mesh = build_mesh(
        d_front, d_back, c_front, c_back, cam,
        max_depth_jump=cfg["geometry"]["max_depth_jump_mm"],
    )
    write_obj(args.out_obj, mesh)
    volume_l = mesh.signed_volume() / 1e6
    _emit(
        args,
        {
            "out": args.out_obj,
            "vertices": mesh.num_vertices,
            "faces": mesh.num_faces,
            "volume_liters": volume_l,
        },
        [
            f"mesh written to {args.out_obj}: {mesh.num_vertices} vertices, "
            f"{mesh.num_faces} faces, volume {volume_l:.2f}l"
        ],
    )
    return 0


def _cmd_train(args) -> int:
    cfg, digest = _load_cfg(args)
    from dualdepth.networks import NetworkBundle, TrainConfig, train
    from dualdepth.synth import load_manifest, prepare_split

    net_cfg = cfg["networks"]
    if args.resume:
        bundle = NetworkBundle.load(args.resume)
    else:
        bundle = NetworkBundle.create(
            levels=net_cfg["levels"],
            base_channels=net_cfg["base_channels"],
            disc_layers=net_cfg["disc_layers"],
            disc_base_channels=net_cfg["disc_base_channels"],
            seed=net_cfg["seed"],
            gan_condition=net_cfg["gan_condition"],
        )
    manifest = load_manifest(args.dataset)
    samples = prepare_split(
        manifest,
        "train",
        gan_condition=bundle.gan_condition,
        limit=args.limit,
        inpaint_iterations=cfg["geometry"]["inpaint_iterations"],
    )
    t = cfg["training"]
    train_cfg = TrainConfig(
        stage=t["stage"],
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        learning_rate=t["learning_rate"],
        beta1=t["beta1"],
        beta2=t["beta2"],
        seed=t["seed"],
        term_weights=cfg["weights"] or None,
        non_saturating=t["non_saturating"],
        force=t["force"],
    )

    def progress(epoch, step, losses):
        if not args.json:
            parts = ", ".join(f"{k}={v:.4f}" for k, v in sorted(losses.items()))
            print(f"epoch {epoch + 1}/{t['epochs']} step {step}: {parts}", flush=True)

    summary = train(bundle, samples, train_cfg, history_path=args.history, progress=progress)
    bundle.save(args.checkpoint_out, extra_meta={"config_hash": digest})
    _emit(
        args,
        {
            "checkpoint": args.checkpoint_out,
            "config_hash": digest,
            **summary,
        },
        [
            f"{summary['stage']} stage finished after {summary['steps']} steps "
            f"({summary['epochs']} epochs, {len(samples)} samples)",
            f"bundle written to {args.checkpoint_out}",
            f"config sha256 {digest}",
        ],
    )
    return 0


def _cmd_infer(args) -> int:
    cfg, _ = _load_cfg(args)
    from dualdepth.errors import InputError
    from dualdepth.fileio import (
        read_color_png,
        read_depth_png,
        write_color_png,
        write_depth_png,
        write_normals_png,
        write_obj,
        write_shading_png,
    )
    from dualdepth.geometry import build_mesh
    from dualdepth.networks import NetworkBundle, forward_pipeline, rectify

    bundle = NetworkBundle.load(args.checkpoint)
    levels = getattr(bundle, "_config", {}).get("levels", 3)
    multiple = 2**levels
    if args.ortho_size % multiple:
        raise InputError(
            f"--ortho-size must be a multiple of {multiple} for this bundle, got {args.ortho_size}"
        )
    depth = read_depth_png(args.depth)
    color = read_color_png(args.color)
    persp = _intrinsics_from_args(args, depth.shape)
    rect = rectify(
        depth,
        color,
        persp,
        ortho_size=(args.ortho_size, args.ortho_size),
        inpaint_iterations=cfg["geometry"]["inpaint_iterations"],
    )
    out = forward_pipeline(bundle, rect)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_depth_png(out_dir / "front_depth.png", out.depth_front)
    write_depth_png(out_dir / "back_depth.png", out.depth_back)
    write_color_png(out_dir / "front_color.png", out.color_front)
    write_color_png(out_dir / "back_color.png", out.color_back)
    write_normals_png(out_dir / "front_normals.png", out.normals_front)
    write_normals_png(out_dir / "back_normals.png", out.normals_back)
    write_shading_png(out_dir / "shading.png", out.shading)
    write_depth_png(out_dir / "mask_silhouette.png", out.silhouette * 65535)
    _write_camera_file(out_dir / "camera.json", out.cam, persp, z_ref=out.z_ref)
    payload = {"out_dir": str(out_dir), "z_ref_mm": out.z_ref}
    human = [f"reconstructed rasters written to {out_dir} (z_ref {out.z_ref:.0f}mm)"]
    if args.mesh_out:
        mesh = build_mesh(
            out.depth_front,
            out.depth_back,
            out.color_front,
            out.color_back,
            out.cam,
            max_depth_jump=cfg["geometry"]["max_depth_jump_mm"],
        )
        write_obj(args.mesh_out, mesh)
        payload["mesh"] = {
            "out": args.mesh_out,
            "vertices": mesh.num_vertices,
            "faces": mesh.num_faces,
        }
        human.append(
            f"mesh written to {args.mesh_out}: {mesh.num_vertices} vertices, {mesh.num_faces} faces"
        )
    _emit(args, payload, human)
    return 0


def _cmd_eval(args) -> int:
    cfg, _ = _load_cfg(args)
    from dualdepth.networks import NetworkBundle, evaluate
    from dualdepth.synth import load_manifest, prepare_split

    bundle = NetworkBundle.load(args.checkpoint)
    manifest = load_manifest(args.dataset)
    samples = prepare_split(
        manifest,
        args.split,
        gan_condition=bundle.gan_condition,
        limit=args.limit,
        inpaint_iterations=cfg["geometry"]["inpaint_iterations"],
    )
    result = evaluate(bundle, samples)
    human = [f"{args.split} split, {result['count']} samples:"]
    for row in ("input", "front", "back"):
        human.append(
            f"  {row:6s} mae {result[row]['mae']:7.2f}mm   rmse {result[row]['rmse']:7.2f}mm"
        )
    human.append(
        f"  back normal energy {result['back_normal_energy']:.5f} "
        f"(ground truth {result['back_normal_energy_gt']:.5f})"
    )
    _emit(args, result, human)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.serial:
        for var in _BLAS_ENV:
            os.environ[var] = "1"
    from dualdepth.errors import InputError, TrainingDiverged

    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except TrainingDiverged as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
