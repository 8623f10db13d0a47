"""Double-sided RGB-D human reconstruction toolkit.

A person is modeled as a front-view and a back-view depth/color map pair
sharing one silhouette.  The package provides the full batch pipeline:

- orthographic rectification of perspective RGB-D captures,
- cross-product normal maps from depth,
- sensor-style correlated depth noise simulation,
- spherical-harmonics shading estimation and removal,
- a small reverse-mode autodiff engine with UNet generators and patch
  discriminators trained under normal-conditioned adversarial losses,
- procedural double-sided training data, and
- watertight meshing of a front/back depth pair.

Rasters are plain numpy arrays: depth maps are float ``(h, w)`` in
millimeters with 0 marking invalid pixels, color images are float
``(h, w, 3)`` in ``[0, 1]``, masks are bool ``(h, w)``, and normal maps are
float ``(h, w, 3)`` with unit-length rows on valid pixels and zeros
elsewhere.
"""

from dualdepth.errors import (
    ConfigError,
    DualDepthError,
    InputError,
    RankDeficientNormals,
    TrainingDiverged,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DualDepthError",
    "InputError",
    "RankDeficientNormals",
    "TrainingDiverged",
    "__version__",
]
