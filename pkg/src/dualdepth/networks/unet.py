"""Encoder-decoder generator with skip connections.

Each level halves the spatial size on the way down (conv + leaky relu +
2x2 average pool) and doubles it back with nearest-neighbor upsampling,
concatenating the matching encoder activation before each decoder conv.
The final conv is linear; output ranges are the caller's business (depth
offsets and colors want different clamps).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dualdepth.errors import InputError
from dualdepth.autodiff import ops
from dualdepth.autodiff.tensor import Graph, Tensor


@dataclass(frozen=True)
class UNetConfig:
    input_channels: int
    output_channels: int
    levels: int = 3
    base_channels: int = 16
    leaky_slope: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.levels < 2:
            raise InputError("levels must be >=2")
        if self.input_channels < 1 or self.output_channels < 1 or self.base_channels < 1:
            raise InputError("channel counts must be >=1")


def _uniform_fan_in(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in = int(np.prod(shape[1:]))
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class UNet:
    """Parameter container + forward builder; weights live in a plain dict."""

    def __init__(self, cfg: UNetConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        p: dict[str, np.ndarray] = {}
        c_in = cfg.input_channels
        for i in range(cfg.levels):
            c_out = cfg.base_channels * (2**i)
            p[f"enc{i}.w"] = _uniform_fan_in(rng, (c_out, c_in, 3, 3))
            p[f"enc{i}.b"] = np.zeros((1, c_out, 1, 1), dtype=np.float32)
            c_in = c_out
        c_mid = cfg.base_channels * (2**cfg.levels)
        p["mid.w"] = _uniform_fan_in(rng, (c_mid, c_in, 3, 3))
        p["mid.b"] = np.zeros((1, c_mid, 1, 1), dtype=np.float32)
        c_in = c_mid
        for i in reversed(range(cfg.levels)):
            c_skip = cfg.base_channels * (2**i)
            p[f"dec{i}.w"] = _uniform_fan_in(rng, (c_skip, c_in + c_skip, 3, 3))
            p[f"dec{i}.b"] = np.zeros((1, c_skip, 1, 1), dtype=np.float32)
            c_in = c_skip
        p["out.w"] = _uniform_fan_in(rng, (cfg.output_channels, c_in, 3, 3))
        p["out.b"] = np.zeros((1, cfg.output_channels, 1, 1), dtype=np.float32)
        self.params = p

    def enter(self, graph: Graph, requires_grad: bool = False) -> dict[str, Tensor]:
        """Register all parameters on a graph for one forward/backward pass."""
        return {k: graph.leaf(v, requires_grad=requires_grad) for k, v in self.params.items()}

    def forward(self, x: Tensor, pt: dict[str, Tensor] | None = None) -> Tensor:
        cfg = self.cfg
        if x.data.shape[1] != cfg.input_channels:
            raise InputError(
                f"expected {cfg.input_channels} input channels, got {x.data.shape[1]}"
            )
        if pt is None:
            pt = self.enter(x.graph, requires_grad=False)
        h = x
        skips = []
        for i in range(cfg.levels):
            h = ops.leaky_relu(
                ops.conv2d(h, pt[f"enc{i}.w"], pt[f"enc{i}.b"], padding=1), cfg.leaky_slope
            )
            skips.append(h)
            h = ops.avg_pool2(h)
        h = ops.leaky_relu(ops.conv2d(h, pt["mid.w"], pt["mid.b"], padding=1), cfg.leaky_slope)
        for i in reversed(range(cfg.levels)):
            h = ops.upsample_nearest2(h)
            h = ops.concat_channels([h, skips[i]])
            h = ops.leaky_relu(
                ops.conv2d(h, pt[f"dec{i}.w"], pt[f"dec{i}.b"], padding=1), cfg.leaky_slope
            )
        return ops.conv2d(h, pt["out.w"], pt["out.b"], padding=1)

    def apply(self, x: np.ndarray, dtype=np.float32) -> np.ndarray:
        """Inference on a bare (n,c,h,w) array with constant parameters."""
        g = Graph(dtype)
        return self.forward(g.leaf(x)).data
