"""Minimal reverse-mode autodiff over (n,c,h,w) numpy tensors.

Submodules: tensor (tape), ops (operators), normals_op (differentiable
normal maps), gradcheck (finite differences), checkpoint (weight files).
"""

from dualdepth.autodiff.tensor import Graph, Tensor
from dualdepth.autodiff import ops
from dualdepth.autodiff.normals_op import normals_from_depth_diff
from dualdepth.autodiff.gradcheck import finite_diff_check
from dualdepth.autodiff.checkpoint import (
    FORMAT_NAME,
    FORMAT_VERSION,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "Graph",
    "Tensor",
    "ops",
    "normals_from_depth_diff",
    "finite_diff_check",
    "load_checkpoint",
    "save_checkpoint",
    "FORMAT_NAME",
    "FORMAT_VERSION",
]
