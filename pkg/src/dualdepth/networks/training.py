"""Staged training for the raster networks, plus held-out evaluation.

Training is teacher-forced: every generator sees ground-truth upstream
rasters, so the four networks train independently within a step.  The
pretrain stage fits generators with reconstruction terms only; the joint
stage adds the perceptual, feature-matching and adversarial terms and
alternates generator and discriminator updates.  Losses are masked to the
pixels where the rectified silhouette and the ground-truth silhouette
agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dualdepth.errors import InputError, TrainingDiverged
from dualdepth.autodiff import ops
from dualdepth.autodiff.normals_op import normals_from_depth_diff
from dualdepth.autodiff.tensor import Graph
from dualdepth.geometry.cameras import CameraIntrinsics, OrthoCamera
from dualdepth.geometry.metrics import depth_error, normal_gradient_energy
from dualdepth.geometry.normals import compute_normals
from dualdepth.losses import FeatureExtractor, LossReport, compose_loss
from dualdepth.networks.pipeline import (
    GAN_CONDITIONS,
    NetworkBundle,
    RectifiedInput,
    forward_pipeline,
    normalized_depth,
    rectify,
    reference_depth,
)

STAGES = ("pretrain", "joint")

#: Generator terms silenced during the reconstruction-only stage.
PRETRAIN_ZEROED = ("perceptual", "feature_matching", "gan")

#: Discriminator paired with each adversarially trained generator.
ADVERSARIAL_PAIRS = {
    "gen_depth_front": "disc_depth_front",
    "gen_depth_back": "disc_depth_back",
    "gen_color_back": "disc_color_back",
}

#: Joint-stage generator term weights: reconstruction dominates, the
#: adversarial and matching terms season it without moving the optimum far.
JOINT_TERM_WEIGHTS = {
    "gen_depth_front": {"l1": 100.0, "perceptual": 10.0, "feature_matching": 10.0, "gan": 1.0},
    "gen_color_front": {"l1": 100.0, "perceptual": 10.0},
    "gen_depth_back": {"l1": 100.0, "feature_matching": 10.0, "gan": 1.0},
    "gen_color_back": {"l1": 100.0, "feature_matching": 10.0, "gan": 1.0},
}


@dataclass(frozen=True)
class TrainConfig:
    stage: str
    epochs: int
    batch_size: int = 4
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    term_weights: dict | None = None
    non_saturating: bool = False
    force: bool = False

    def __post_init__(self):
        if self.stage not in STAGES:
            raise InputError(f"stage must be one of {STAGES}, got {self.stage!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise InputError("epochs and batch_size must be >=1")
        if self.learning_rate <= 0:
            raise InputError("learning_rate must be positive")


class Adam:
    """Adam over a named parameter dict, updating the arrays in place."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float,
        beta1: float = 0.5,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray | None]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, p in self.params.items():
            g = grads.get(k)
            if g is None:
                continue
            g = np.asarray(g, dtype=p.dtype)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


@dataclass(frozen=True)
class PreparedSample:
    """One frame's network inputs, loss targets, and metric references.

    Raster tensors are float32 in channel-first layout; depth values are
    normalized (zero-mean, per meter) against this sample's z_ref.
    """

    rect: RectifiedInput
    z_ref: float
    mask: np.ndarray
    mask1: np.ndarray
    x_depth_front: np.ndarray
    cond_front: np.ndarray
    y_depth_front: np.ndarray
    n_front_gt: np.ndarray
    x_color_front: np.ndarray
    y_albedo_front: np.ndarray
    x_back: np.ndarray
    cond_back: np.ndarray
    y_depth_back: np.ndarray
    n_back_gt: np.ndarray
    cond_color: np.ndarray
    y_albedo_back: np.ndarray
    gt_front_mm: np.ndarray = field(repr=False)
    gt_back_mm: np.ndarray = field(repr=False)


def _chw(image: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(image.transpose(2, 0, 1), dtype=np.float32)


def _diff_normals(depth_1hw: np.ndarray, pitch_m: float) -> np.ndarray:
    g = Graph(np.float32)
    t = g.leaf(depth_1hw[None].astype(np.float32))
    return normals_from_depth_diff(t, pitch_m).data[0]


def prepare_sample(
    depth_noisy: np.ndarray,
    color: np.ndarray,
    gt_front: np.ndarray,
    gt_back: np.ndarray,
    gt_albedo_front: np.ndarray,
    gt_albedo_back: np.ndarray,
    gt_shading: np.ndarray,
    persp_cam: CameraIntrinsics,
    ortho_cam: OrthoCamera,
    *,
    gan_condition: str = "normals",
    inpaint_iterations: int = 64,
) -> PreparedSample:
    """Rectify one noisy frame and bundle it with its ground-truth rasters.

    gt rasters must live on `ortho_cam`'s grid; all samples of a dataset
    share that grid so prepared samples can be batched.
    """
    if gan_condition not in GAN_CONDITIONS:
        raise InputError(f"gan_condition must be one of {GAN_CONDITIONS}")
    rect = rectify(
        depth_noisy, color, persp_cam, ortho_cam, inpaint_iterations=inpaint_iterations
    )
    gt_sil = gt_front > 0
    mask = rect.silhouette & gt_sil
    if not mask.any():
        raise InputError("rectified and ground-truth silhouettes do not overlap")
    mask1 = mask[None].astype(np.float32)
    z_ref = reference_depth(rect.depth, rect.silhouette)
    pitch_m = ortho_cam.pixel_pitch / 1000.0

    d_in = normalized_depth(rect.depth, rect.silhouette, z_ref).astype(np.float32)
    x_depth_front = np.concatenate(
        [_chw(rect.color), d_in[None], rect.splat_mask[None].astype(np.float32)]
    )
    cond_front = _diff_normals(d_in[None], pitch_m)

    y_depth_front = (
        normalized_depth(gt_front, gt_sil, z_ref).astype(np.float32) * mask1[0]
    )[None]
    n_front_gt = _diff_normals(y_depth_front, pitch_m)

    x_color_front = np.concatenate(
        [_chw(rect.color), np.asarray(gt_shading, dtype=np.float32)[None]]
    )
    y_albedo_front = _chw(gt_albedo_front) * mask1

    d_gt_in = normalized_depth(gt_front, gt_sil, z_ref).astype(np.float32)
    x_back = np.concatenate([_chw(gt_albedo_front), d_gt_in[None]])
    cond_back = (
        _diff_normals(d_gt_in[None], pitch_m)
        if gan_condition == "normals"
        else d_gt_in[None]
    )
    y_depth_back = (
        normalized_depth(gt_back, gt_sil, z_ref).astype(np.float32) * mask1[0]
    )[None]
    n_back_gt = _diff_normals(y_depth_back, pitch_m)
    cond_color = _chw(gt_albedo_front)
    y_albedo_back = _chw(gt_albedo_back) * mask1

    return PreparedSample(
        rect=rect,
        z_ref=z_ref,
        mask=mask,
        mask1=mask1,
        x_depth_front=x_depth_front,
        cond_front=cond_front,
        y_depth_front=y_depth_front,
        n_front_gt=n_front_gt,
        x_color_front=x_color_front,
        y_albedo_front=y_albedo_front,
        x_back=x_back,
        cond_back=cond_back,
        y_depth_back=y_depth_back,
        n_back_gt=n_back_gt,
        cond_color=cond_color,
        y_albedo_back=y_albedo_back,
        gt_front_mm=np.asarray(gt_front, dtype=np.float64),
        gt_back_mm=np.asarray(gt_back, dtype=np.float64),
    )


def _collate(samples: list[PreparedSample], idx: np.ndarray, name: str) -> np.ndarray:
    return np.stack([getattr(samples[i], name) for i in idx])


def resolve_term_weights(cfg: TrainConfig) -> dict[str, dict[str, float]]:
    """Per-network term weights for one stage, with user overrides on top."""
    weights: dict[str, dict[str, float]] = {}
    if cfg.stage == "pretrain":
        for name in ADVERSARIAL_PAIRS:
            weights[name] = {t: 0.0 for t in PRETRAIN_ZEROED}
        weights["gen_color_front"] = {"perceptual": 0.0}
    else:
        weights = {net: dict(terms) for net, terms in JOINT_TERM_WEIGHTS.items()}
    for net, terms in (cfg.term_weights or {}).items():
        weights.setdefault(net, {}).update({k: float(v) for k, v in terms.items()})
    return weights


def _check_finite(report: LossReport, step: int) -> None:
    if np.isfinite(report.total):
        return
    term = next((k for k, v in report.terms.items() if not np.isfinite(v)), "total")
    raise TrainingDiverged(network=report.network, term=term, step=step)


def _grad_dict(pt) -> dict[str, np.ndarray | None]:
    return {k: t.grad for k, t in pt.items()}


def train(
    bundle: NetworkBundle,
    samples: list[PreparedSample],
    cfg: TrainConfig,
    *,
    history_path: str | Path | None = None,
    progress=None,
) -> dict:
    """Run one training stage over the prepared samples.

    Writes one JSON line per network per step to `history_path` when given.
    The joint stage refuses to start unless the bundle already carries the
    pretrain stage (override with cfg.force).  Returns a summary with the
    mean last-epoch total per network.
    """
    if not samples:
        raise InputError("no training samples")
    if cfg.stage == "joint" and "pretrain" not in bundle.trained_stages and not cfg.force:
        raise InputError(
            "joint training refuses to start from uninitialized generators; "
            "run the pretrain stage first or set force"
        )
    weights = resolve_term_weights(cfg)
    fx = FeatureExtractor.seeded(in_channels=3, seed=0)
    pitch_m = samples[0].rect.cam.pixel_pitch / 1000.0

    opt = {
        name: Adam(net.params, cfg.learning_rate, cfg.beta1, cfg.beta2)
        for name, net in bundle.generators.items()
    }
    run_discs = cfg.stage == "joint"
    if run_discs:
        for name, net in bundle.discriminators.items():
            opt[name] = Adam(net.params, cfg.learning_rate, cfg.beta1, cfg.beta2)

    def gan_active(gen_name: str) -> bool:
        return run_discs and weights.get(gen_name, {}).get("gan", 1.0) != 0.0

    history = open(history_path, "w", encoding="utf-8") if history_path else None
    rng = np.random.default_rng(cfg.seed)
    step = 0
    last_epoch_totals: dict[str, list[float]] = {}

    def log(report: LossReport, epoch: int) -> None:
        _check_finite(report, step)
        last_epoch_totals.setdefault(report.network, []).append(report.total)
        if history is not None:
            line = report.to_json_dict(step)
            line["epoch"] = epoch
            history.write(json.dumps(line) + "\n")

    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(samples))
            last_epoch_totals.clear()
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                step += 1
                b_mask1 = _collate(samples, idx, "mask1")
                b_mask3 = np.repeat(b_mask1, 3, axis=1)

                # Front depth generator.
                g = Graph(np.float32)
                net = bundle.generators["gen_depth_front"]
                pt = net.enter(g, requires_grad=True)
                pred = net.forward(g.leaf(_collate(samples, idx, "x_depth_front")), pt)
                pred_m = ops.mul(pred, g.leaf(b_mask1))
                n_pred = normals_from_depth_diff(pred_m, pitch_m)
                n_gt = g.leaf(_collate(samples, idx, "n_front_gt"))
                report = compose_loss(
                    "gen_depth_front",
                    pred=pred_m,
                    target=g.leaf(_collate(samples, idx, "y_depth_front")),
                    normal_pred=n_pred,
                    normal_target=n_gt,
                    fx=fx,
                    disc=bundle.discriminators["disc_depth_front"],
                    condition=g.leaf(_collate(samples, idx, "cond_front")),
                    weights=weights.get("gen_depth_front"),
                    non_saturating=cfg.non_saturating,
                )
                g.backward(report.total_tensor)
                opt["gen_depth_front"].step(_grad_dict(pt))
                log(report, epoch)
                n_pred_front = n_pred.data.copy()

                # Front color generator.
                g = Graph(np.float32)
                net = bundle.generators["gen_color_front"]
                pt = net.enter(g, requires_grad=True)
                pred = net.forward(g.leaf(_collate(samples, idx, "x_color_front")), pt)
                pred_m = ops.mul(pred, g.leaf(b_mask3))
                report = compose_loss(
                    "gen_color_front",
                    pred=pred_m,
                    target=g.leaf(_collate(samples, idx, "y_albedo_front")),
                    fx=fx,
                    weights=weights.get("gen_color_front"),
                )
                g.backward(report.total_tensor)
                opt["gen_color_front"].step(_grad_dict(pt))
                log(report, epoch)

                # Back depth generator.
                g = Graph(np.float32)
                net = bundle.generators["gen_depth_back"]
                pt = net.enter(g, requires_grad=True)
                x_back = _collate(samples, idx, "x_back")
                pred = net.forward(g.leaf(x_back), pt)
                pred_m = ops.mul(pred, g.leaf(b_mask1))
                n_pred = normals_from_depth_diff(pred_m, pitch_m)
                cond_back = _collate(samples, idx, "cond_back")
                report = compose_loss(
                    "gen_depth_back",
                    pred=pred_m,
                    target=g.leaf(_collate(samples, idx, "y_depth_back")),
                    normal_pred=n_pred,
                    normal_target=g.leaf(_collate(samples, idx, "n_back_gt")),
                    disc=bundle.discriminators["disc_depth_back"],
                    condition=g.leaf(cond_back),
                    weights=weights.get("gen_depth_back"),
                    non_saturating=cfg.non_saturating,
                )
                g.backward(report.total_tensor)
                opt["gen_depth_back"].step(_grad_dict(pt))
                log(report, epoch)
                n_pred_back = n_pred.data.copy()

                # Back color generator.
                g = Graph(np.float32)
                net = bundle.generators["gen_color_back"]
                pt = net.enter(g, requires_grad=True)
                pred = net.forward(g.leaf(x_back), pt)
                pred_m = ops.mul(pred, g.leaf(b_mask3))
                cond_color = _collate(samples, idx, "cond_color")
                report = compose_loss(
                    "gen_color_back",
                    pred=pred_m,
                    target=g.leaf(_collate(samples, idx, "y_albedo_back")),
                    disc=bundle.discriminators["disc_color_back"],
                    condition=g.leaf(cond_color),
                    weights=weights.get("gen_color_back"),
                    non_saturating=cfg.non_saturating,
                )
                g.backward(report.total_tensor)
                opt["gen_color_back"].step(_grad_dict(pt))
                log(report, epoch)
                pred_color_back = pred_m.data.copy()

                # Discriminators judge the (detached) predictions just made.
                disc_rows = []
                if gan_active("gen_depth_front"):
                    disc_rows.append(
                        ("disc_depth_front", "n_front_gt", n_pred_front, "cond_front")
                    )
                if gan_active("gen_depth_back"):
                    disc_rows.append(
                        ("disc_depth_back", "n_back_gt", n_pred_back, "cond_back")
                    )
                for name, gt_field, pred_data, cond_field in disc_rows:
                    g = Graph(np.float32)
                    disc = bundle.discriminators[name]
                    pt = disc.enter(g, requires_grad=True)
                    report = compose_loss(
                        name,
                        normal_target=g.leaf(_collate(samples, idx, gt_field)),
                        normal_pred=g.leaf(pred_data),
                        disc=disc.bind(pt),
                        condition=g.leaf(_collate(samples, idx, cond_field)),
                        weights=weights.get(name),
                    )
                    g.backward(report.total_tensor)
                    opt[name].step(_grad_dict(pt))
                    log(report, epoch)
                if gan_active("gen_color_back"):
                    g = Graph(np.float32)
                    disc = bundle.discriminators["disc_color_back"]
                    pt = disc.enter(g, requires_grad=True)
                    report = compose_loss(
                        "disc_color_back",
                        target=g.leaf(_collate(samples, idx, "y_albedo_back")),
                        pred=g.leaf(pred_color_back),
                        disc=disc.bind(pt),
                        condition=g.leaf(cond_color),
                        weights=weights.get("disc_color_back"),
                    )
                    g.backward(report.total_tensor)
                    opt["disc_color_back"].step(_grad_dict(pt))
                    log(report, epoch)
            if progress is not None:
                progress(epoch, step, {k: float(np.mean(v)) for k, v in last_epoch_totals.items()})
    finally:
        if history is not None:
            history.close()

    if cfg.stage not in bundle.trained_stages:
        bundle.trained_stages = bundle.trained_stages + (cfg.stage,)
    return {
        "stage": cfg.stage,
        "epochs": cfg.epochs,
        "steps": step,
        "final_losses": {k: float(np.mean(v)) for k, v in last_epoch_totals.items()},
    }


def evaluate(bundle: NetworkBundle, samples: list[PreparedSample]) -> dict:
    """Run the full pipeline on each sample and average depth metrics.

    Rows compare the rectified input and the refined prediction against the
    ground-truth front sheet, plus the predicted back sheet against the
    ground-truth back, all over the rectified-and-true silhouette overlap.
    back_normal_energy measures high-frequency detail on the predicted back
    normals (ground-truth energy is reported alongside for reference).
    """
    if not samples:
        raise InputError("no evaluation samples")
    rows = {"input": [], "front": [], "back": []}
    energy_pred, energy_gt = [], []
    for s in samples:
        out = forward_pipeline(bundle, s.rect)
        m = s.mask
        rows["input"].append(depth_error(s.rect.depth, s.gt_front_mm, m))
        rows["front"].append(depth_error(out.depth_front, s.gt_front_mm, m))
        rows["back"].append(depth_error(out.depth_back, s.gt_back_mm, m))
        energy_pred.append(normal_gradient_energy(out.normals_back, m))
        gt_back_normals = compute_normals(s.gt_back_mm, s.rect.cam)
        energy_gt.append(normal_gradient_energy(gt_back_normals, m))
    result = {"count": len(samples)}
    for key, vals in rows.items():
        arr = np.asarray(vals, dtype=np.float64)
        result[key] = {"mae": float(arr[:, 0].mean()), "rmse": float(arr[:, 1].mean())}
    result["back_normal_energy"] = float(np.mean(energy_pred))
    result["back_normal_energy_gt"] = float(np.mean(energy_gt))
    return result
