"""Procedural figures built from capsules whose axes share one depth plane.

Every capsule axis lies in the plane z = z0, so the squared distance from a
point to any axis splits into an in-plane part and (z - z0)^2.  The front
and back depth sheets therefore have the closed form z0 -/+ h(x, y), where
h is the largest half-thickness any capsule contributes at (x, y).  That
makes the pair continuous for arbitrary overlaps, exactly silhouette
consistent, and back >= front everywhere by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dualdepth.errors import InputError


@dataclass(frozen=True)
class Capsule:
    """Segment (ax, ay) - (bx, by) in the z0 plane, swept by `radius`."""

    ax: float
    ay: float
    bx: float
    by: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise InputError(f"capsule radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class BodySpec:
    capsules: tuple[Capsule, ...]
    z0: float

    def __post_init__(self):
        if not self.capsules:
            raise InputError("a body needs at least one capsule")
        if self.z0 <= 0:
            raise InputError(f"z0 must be positive, got {self.z0}")


def _u(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(rng.uniform(lo, hi))


def generate_body(rng: np.random.Generator, *, z0_base: float = 2000.0) -> BodySpec:
    """Sample a jittered nine-capsule figure (torso, head, arms, legs).

    All limbs overlap the torso deeply, so the union silhouette is one
    connected component without enclosed holes.  A roll about the view axis
    plus an in-plane offset pose the figure; both keep every axis in the
    z0 plane.  Units are millimeters; +y points down the image.
    """
    caps = [
        # torso
        (
            (_u(rng, -15, 15), _u(rng, -320, -280)),
            (_u(rng, -15, 15), _u(rng, 220, 280)),
            _u(rng, 170, 220),
        ),
        # head
        (
            (_u(rng, -15, 15), _u(rng, -490, -450)),
            (_u(rng, -15, 15), _u(rng, -395, -365)),
            _u(rng, 90, 120),
        ),
    ]
    for side in (-1.0, 1.0):
        caps.append(  # arm
            (
                (side * _u(rng, 140, 160), _u(rng, -300, -260)),
                (side * _u(rng, 175, 205), _u(rng, 20, 100)),
                _u(rng, 55, 75),
            )
        )
    for side in (-1.0, 1.0):
        caps.append(  # leg
            (
                (side * _u(rng, 70, 90), _u(rng, 210, 250)),
                (side * _u(rng, 80, 110), _u(rng, 760, 840)),
                _u(rng, 70, 95),
            )
        )

    theta = _u(rng, -0.25, 0.25)
    dx = _u(rng, -100, 100)
    dy = _u(rng, -100, 100)
    z0 = z0_base + _u(rng, -100, 100)
    c, s = np.cos(theta), np.sin(theta)

    def posed(p: tuple[float, float]) -> tuple[float, float]:
        x, y = p
        return (c * x - s * y + dx, s * x + c * y + dy)

    capsules = tuple(
        Capsule(*posed(a), *posed(b), radius=r) for a, b, r in caps
    )
    return BodySpec(capsules=capsules, z0=z0)


def half_thickness_field(
    spec: BodySpec, x: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate h(x, y) = max_c sqrt(r_c^2 - d_c(x, y)^2) over the capsules.

    Returns (h, which): the half thickness (0 outside the silhouette) and
    the index of the capsule attaining it (first maximum wins; -1 outside).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InputError("x and y grids must have the same shape")
    h = np.zeros(x.shape, dtype=np.float64)
    which = np.full(x.shape, -1, dtype=np.int64)
    for i, cap in enumerate(spec.capsules):
        abx, aby = cap.bx - cap.ax, cap.by - cap.ay
        denom = abx * abx + aby * aby
        px, py = x - cap.ax, y - cap.ay
        if denom > 0:
            t = np.clip((px * abx + py * aby) / denom, 0.0, 1.0)
        else:
            t = 0.0
        dx = px - t * abx
        dy = py - t * aby
        h_i = np.sqrt(np.maximum(cap.radius**2 - (dx * dx + dy * dy), 0.0))
        better = h_i > h
        h[better] = h_i[better]
        which[better] = i
    return h, which
