"""Central finite-difference verification of backward rules."""

from __future__ import annotations

from typing import Callable

import numpy as np

from dualdepth.errors import InputError
from dualdepth.autodiff.tensor import Graph, Tensor


def finite_diff_check(
    f: Callable[[Tensor], Tensor],
    x0: np.ndarray,
    h: float = 1e-5,
    dtype=np.float64,
) -> float:
    """Max relative error between backward and central-difference gradients.

    `f` receives a fresh leaf tensor and must build a scalar output on that
    leaf's graph (construct any constants via `t.graph.leaf(...)`).  The
    relative error uses denominator max(|analytic|, |numeric|, 1e-8), so
    exactly-zero gradients compare cleanly.
    """
    if h <= 0:
        raise InputError("step h must be positive")
    x0 = np.asarray(x0, dtype=np.float64)

    graph = Graph(dtype)
    x = graph.leaf(x0, requires_grad=True)
    out = f(x)
    if out.data.size != 1:
        raise InputError("finite_diff_check needs a scalar-valued function")
    graph.backward(out)
    analytic = np.zeros_like(x0) if x.grad is None else np.asarray(x.grad, dtype=np.float64)

    def eval_at(arr: np.ndarray) -> float:
        g = Graph(dtype)
        return f(g.leaf(arr)).item()

    worst = 0.0
    flat = x0.reshape(-1)
    ana = analytic.reshape(-1)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + h
        fp = eval_at(bumped.reshape(x0.shape))
        bumped[i] = flat[i] - h
        fm = eval_at(bumped.reshape(x0.shape))
        numeric = (fp - fm) / (2.0 * h)
        denom = max(abs(numeric), abs(ana[i]), 1e-8)
        worst = max(worst, abs(numeric - ana[i]) / denom)
    return worst
