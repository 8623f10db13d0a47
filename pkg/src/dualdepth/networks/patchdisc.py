"""Patch discriminator: strided convs ending in a sigmoid score grid.

Layers 1..T-1 are 4x4 stride-2 convs with leaky relu, so a T-layer
discriminator downsamples by 2^(T-1); the final layer is a 3x3 stride-1
conv to one channel followed by a sigmoid.  activations() exposes all T
post-nonlinearity maps: the intermediate ones feed the feature-matching
loss, the last is the per-patch probability grid.

The final conv starts near zero, so an untrained discriminator scores
every patch at about 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dualdepth.errors import InputError
from dualdepth.autodiff import ops
from dualdepth.autodiff.tensor import Graph, Tensor
from dualdepth.networks.unet import _uniform_fan_in


@dataclass(frozen=True)
class PatchDiscConfig:
    input_channels: int
    layers: int = 4
    base_channels: int = 16
    leaky_slope: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.layers < 3:
            raise InputError("a patch discriminator needs at least 3 layers")
        if self.input_channels < 1 or self.base_channels < 1:
            raise InputError("channel counts must be >=1")


class PatchDiscriminator:
    def __init__(self, cfg: PatchDiscConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        p: dict[str, np.ndarray] = {}
        c_in = cfg.input_channels
        for i in range(cfg.layers - 1):
            c_out = cfg.base_channels * (2**i)
            p[f"layer{i}.w"] = _uniform_fan_in(rng, (c_out, c_in, 4, 4))
            p[f"layer{i}.b"] = np.zeros((1, c_out, 1, 1), dtype=np.float32)
            c_in = c_out
        # Near-zero final layer: pre-sigmoid logits start close to 0.
        p["final.w"] = _uniform_fan_in(rng, (1, c_in, 3, 3)) * 0.05
        p["final.b"] = np.zeros((1, 1, 1, 1), dtype=np.float32)
        self.params = p

    def enter(self, graph: Graph, requires_grad: bool = False) -> dict[str, Tensor]:
        return {k: graph.leaf(v, requires_grad=requires_grad) for k, v in self.params.items()}

    def forward_with_params(self, x: Tensor, pt: dict[str, Tensor]) -> list[Tensor]:
        cfg = self.cfg
        if x.data.shape[1] != cfg.input_channels:
            raise InputError(
                f"discriminator expects {cfg.input_channels} input channels, got {x.data.shape[1]}"
            )
        acts: list[Tensor] = []
        h = x
        for i in range(cfg.layers - 1):
            h = ops.leaky_relu(
                ops.conv2d(h, pt[f"layer{i}.w"], pt[f"layer{i}.b"], stride=2, padding=1),
                cfg.leaky_slope,
            )
            acts.append(h)
        h = ops.sigmoid(ops.conv2d(h, pt["final.w"], pt["final.b"], padding=1))
        acts.append(h)
        return acts

    def activations(self, x: Tensor) -> list[Tensor]:
        """All T layer outputs on x's graph with constant parameters.

        Training steps that optimize the discriminator call
        forward_with_params with freshly entered gradient-tracking leaves.
        """
        pt = getattr(self, "_entered", None)
        if pt is None or next(iter(pt.values())).graph is not x.graph:
            pt = self.enter(x.graph, requires_grad=False)
        return self.forward_with_params(x, pt)

    def bind(self, pt: dict[str, Tensor]) -> "PatchDiscriminator":
        """Return a view whose activations() use the given parameter tensors."""
        view = object.__new__(PatchDiscriminator)
        view.cfg = self.cfg
        view.params = self.params
        view._entered = pt
        return view
