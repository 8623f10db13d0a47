"""Differentiable training losses and their per-network composition.

Seven networks consume losses: four generators (front depth, front color,
back depth, back color) and three discriminators (front depth, back depth,
back color).  Each has a fixed term set; compose_loss owns that table and
rejects calls missing a required tensor, naming the absent term.

All losses build on the autodiff tape and return scalar tensors, so any of
them can back-propagate.  Ground-truth inputs are plain constant leaves and
never receive gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dualdepth.errors import InputError
from dualdepth.autodiff import ops
from dualdepth.autodiff.tensor import Tensor

#: Probability clamp inside GAN log terms.
GAN_EPS = 1e-7

GENERATOR_IDS = ("gen_depth_front", "gen_color_front", "gen_depth_back", "gen_color_back")
DISCRIMINATOR_IDS = ("disc_depth_front", "disc_depth_back", "disc_color_back")


class FeatureExtractor:
    """Fixed (never trained) conv+leaky-relu stack for the perceptual loss.

    Stage weights are ordinary arrays re-entered as constants on whatever
    graph the loss runs on.  `lambdas` weights each stage's contribution.
    """

    def __init__(
        self,
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        lambdas: list[float],
        slope: float = 0.2,
        stride: int = 2,
    ):
        if not weights or len(weights) != len(biases) or len(weights) != len(lambdas):
            raise InputError("need equal, nonzero counts of weights, biases and lambdas")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.lambdas = [float(l) for l in lambdas]
        self.slope = float(slope)
        self.stride = int(stride)
        self.in_channels = self.weights[0].shape[1]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 4 or b.shape != (1, w.shape[0], 1, 1):
                raise InputError(f"stage {i}: kernel must be 4-D with (1,oc,1,1) bias")

    @classmethod
    def seeded(
        cls, in_channels: int = 3, stage_channels: tuple[int, ...] = (8, 16), seed: int = 0
    ) -> "FeatureExtractor":
        """Default 2-stage extractor with fan-in-scaled random kernels."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        c = in_channels
        for oc in stage_channels:
            bound = np.sqrt(1.0 / (c * 9))
            weights.append(rng.uniform(-bound, bound, size=(oc, c, 3, 3)))
            biases.append(np.zeros((1, oc, 1, 1)))
            c = oc
        lambdas = [1.0 / len(stage_channels)] * len(stage_channels)
        return cls(weights, biases, lambdas)

    def features(self, x: Tensor) -> list[Tensor]:
        if x.data.shape[1] != self.in_channels:
            raise InputError(
                f"extractor expects {self.in_channels} channels, got {x.data.shape[1]}"
            )
        out = []
        h = x
        for w, b in zip(self.weights, self.biases):
            g = x.graph
            pad = (w.shape[2] - 1) // 2
            h = ops.leaky_relu(
                ops.conv2d(h, g.leaf(w), g.leaf(b), stride=self.stride, padding=pad),
                self.slope,
            )
            out.append(h)
        return out


@dataclass
class LossReport:
    """Weighted term values for one network at one step; total = their sum."""

    network: str
    terms: dict[str, float]
    total: float
    total_tensor: Tensor | None = field(default=None, compare=False, repr=False)

    def to_json_dict(self, step: int) -> dict:
        d = {"step": step, "network": self.network}
        d.update({k: round(v, 8) for k, v in self.terms.items()})
        d["total"] = round(self.total, 8)
        return d


def l1_loss(pred: Tensor, gt: Tensor) -> Tensor:
    """Mean absolute difference."""
    if pred.data.shape != gt.data.shape:
        raise InputError(f"l1_loss shape mismatch: {pred.data.shape} vs {gt.data.shape}")
    return ops.mean_all(ops.absolute(ops.sub(pred, gt)))


def perceptual_loss(fx: FeatureExtractor, pred: Tensor, gt: Tensor) -> Tensor:
    """Stage-weighted mean absolute distance between extractor features."""
    if pred.data.shape != gt.data.shape:
        raise InputError(f"perceptual_loss shape mismatch: {pred.data.shape} vs {gt.data.shape}")
    fp = fx.features(pred)
    fg = fx.features(gt)
    total = None
    for lam, a, b in zip(fx.lambdas, fp, fg):
        term = ops.mul_scalar(ops.mean_all(ops.absolute(ops.sub(a, b))), lam)
        total = term if total is None else ops.add(total, term)
    return total


def _clamped_prob(x: Tensor) -> Tensor:
    return ops.clamp(x, GAN_EPS, 1.0 - GAN_EPS)


def gan_loss_d(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """-(mean log d_real + mean log(1 - d_fake)); the discriminator minimizes this."""
    real_term = ops.mean_all(ops.log(_clamped_prob(d_real)))
    fake_term = ops.mean_all(
        ops.log(_clamped_prob(ops.add_scalar(ops.mul_scalar(d_fake, -1.0), 1.0)))
    )
    return ops.mul_scalar(ops.add(real_term, fake_term), -1.0)


def gan_loss_g(d_fake: Tensor, non_saturating: bool = False) -> Tensor:
    """Generator objective: mean log(1 - d_fake), or -mean log d_fake if non-saturating."""
    if non_saturating:
        return ops.mul_scalar(ops.mean_all(ops.log(_clamped_prob(d_fake))), -1.0)
    return ops.mean_all(
        ops.log(_clamped_prob(ops.add_scalar(ops.mul_scalar(d_fake, -1.0), 1.0)))
    )


def _disc_activations(disc, x: Tensor, condition: Tensor | None) -> list[Tensor]:
    inp = ops.concat_channels([condition, x]) if condition is not None else x
    acts = disc.activations(inp)
    if len(acts) < 3:
        raise InputError("discriminator must expose at least 3 layer activations")
    return acts


def feature_matching_loss(
    disc, pred: Tensor, gt: Tensor, condition: Tensor | None = None
) -> Tensor:
    """Sum of mean-absolute feature gaps over intermediate discriminator layers.

    Uses layers 2 through T-1 (1-indexed) of a T-layer discriminator; the
    ground-truth pass contributes constants only.
    """
    acts_p = _disc_activations(disc, pred, condition)
    acts_g = _disc_activations(disc, gt, condition)
    total = None
    for a, b in zip(acts_p[1:-1], acts_g[1:-1]):
        term = ops.mean_all(ops.absolute(ops.sub(a, b)))
        total = term if total is None else ops.add(total, term)
    return total


def _require(value, term: str, what: str):
    if value is None:
        raise InputError(f"{term} term requires {what}")
    return value


def _fm_from_activations(acts_p: list[Tensor], acts_g: list[Tensor]) -> Tensor:
    total = None
    for a, b in zip(acts_p[1:-1], acts_g[1:-1]):
        term = ops.mean_all(ops.absolute(ops.sub(a, b)))
        total = term if total is None else ops.add(total, term)
    return total


def compose_loss(
    network: str,
    *,
    pred: Tensor | None = None,
    target: Tensor | None = None,
    normal_pred: Tensor | None = None,
    normal_target: Tensor | None = None,
    fx: FeatureExtractor | None = None,
    disc=None,
    condition: Tensor | None = None,
    weights: dict[str, float] | None = None,
    non_saturating: bool = False,
) -> LossReport:
    """Build the fixed loss table row for one network.

    Generator rows combine l1 on the primary raster with perceptual /
    feature-matching / adversarial terms on the raster the matching
    discriminator judges (the normal map for the depth networks, the color
    map for back color).  Discriminator rows hold only their own objective.
    Term weights default to 1; a weight of exactly 0 skips the term.
    """
    weights = dict(weights or {})

    def w(term: str) -> float:
        return float(weights.get(term, 1.0))

    terms: dict[str, Tensor] = {}

    def add_term(term: str, build):
        wt = w(term)
        if wt == 0.0:
            return
        tensor = build()
        terms[term] = tensor if wt == 1.0 else ops.mul_scalar(tensor, wt)

    def add_adversarial(candidate_pred, candidate_target, pred_name: str, target_name: str):
        # Shares one discriminator pass on the candidate between the
        # feature-matching and adversarial terms.
        want_fm = w("feature_matching") != 0.0
        want_gan = w("gan") != 0.0
        if not (want_fm or want_gan):
            return
        lead = "feature_matching" if want_fm else "gan"
        d = _require(disc, lead, "a discriminator")
        acts_pred = _disc_activations(d, _require(candidate_pred, lead, pred_name), condition)
        if want_fm:
            acts_target = _disc_activations(
                d, _require(candidate_target, "feature_matching", target_name), condition
            )
            add_term("feature_matching", lambda: _fm_from_activations(acts_pred, acts_target))
        if want_gan:
            add_term("gan", lambda: gan_loss_g(acts_pred[-1], non_saturating))

    if network == "gen_depth_front":
        add_term("l1", lambda: l1_loss(_require(pred, "l1", "pred"), _require(target, "l1", "target")))
        add_term(
            "perceptual",
            lambda: perceptual_loss(
                _require(fx, "perceptual", "a feature extractor"),
                _require(normal_pred, "perceptual", "normal_pred"),
                _require(normal_target, "perceptual", "normal_target"),
            ),
        )
        add_adversarial(normal_pred, normal_target, "normal_pred", "normal_target")
    elif network == "gen_color_front":
        add_term("l1", lambda: l1_loss(_require(pred, "l1", "pred"), _require(target, "l1", "target")))
        add_term(
            "perceptual",
            lambda: perceptual_loss(
                _require(fx, "perceptual", "a feature extractor"),
                _require(pred, "perceptual", "pred"),
                _require(target, "perceptual", "target"),
            ),
        )
    elif network == "gen_depth_back":
        add_term("l1", lambda: l1_loss(_require(pred, "l1", "pred"), _require(target, "l1", "target")))
        add_adversarial(normal_pred, normal_target, "normal_pred", "normal_target")
    elif network == "gen_color_back":
        add_term("l1", lambda: l1_loss(_require(pred, "l1", "pred"), _require(target, "l1", "target")))
        add_adversarial(pred, target, "pred", "target")
    elif network in ("disc_depth_front", "disc_depth_back"):
        add_term(
            "gan",
            lambda: gan_loss_d(
                _disc_activations(
                    _require(disc, "gan", "a discriminator"),
                    _require(normal_target, "gan", "normal_target"),
                    condition,
                )[-1],
                _disc_activations(disc, _require(normal_pred, "gan", "normal_pred"), condition)[-1],
            ),
        )
    elif network == "disc_color_back":
        add_term(
            "gan",
            lambda: gan_loss_d(
                _disc_activations(
                    _require(disc, "gan", "a discriminator"),
                    _require(target, "gan", "target"),
                    condition,
                )[-1],
                _disc_activations(disc, _require(pred, "gan", "pred"), condition)[-1],
            ),
        )
    else:
        raise InputError(
            f"unknown network {network!r}; expected one of {GENERATOR_IDS + DISCRIMINATOR_IDS}"
        )

    if not terms:
        raise InputError(f"all terms of {network} are weighted to zero")

    total = None
    for t in terms.values():
        total = t if total is None else ops.add(total, t)
    return LossReport(
        network=network,
        terms={k: t.item() for k, t in terms.items()},
        total=total.item(),
        total_tensor=total,
    )
