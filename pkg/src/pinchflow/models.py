"""Closed-form catalog: round spheres, round cylinders and two-factor sphere products."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from .errors import Extinct, ZeroMeanCurvature
from .tensor import CurvatureFrame, PinchingParams, norm_A2, norm_H2

SPHERE = "sphere"
CYLINDER = "cylinder"
PRODUCT = "product"

_MIN_CODIM = {SPHERE: 1, CYLINDER: 1, PRODUCT: 2}


@dataclass(frozen=True)
class ModelGeometry:
    """A homogeneous model submanifold.

    ``dims`` and ``radii`` hold one entry per round factor: ``(n,)`` for
    ``S^n(r)``, ``(n - 1,)`` for the cylinder ``S^{n-1}(r) x R``, and
    ``(p, q2)`` for ``S^p(r1) x S^q2(r2)``.  Use the :func:`Sphere`,
    :func:`Cylinder` and :func:`ProductSpheres` constructors.
    """

    kind: str
    dims: Tuple[int, ...]
    radii: Tuple[float, ...]
    ambient_codim: int = field(default=0)

    def __post_init__(self):
        if self.kind not in _MIN_CODIM:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if len(self.dims) != len(self.radii):
            raise ValueError("dims and radii must have equal length")
        if any(d < 1 for d in self.dims):
            raise ValueError("factor dimensions must be positive")
        if any(not (r > 0) for r in self.radii):
            raise ValueError("radii must be positive")
        codim = self.ambient_codim or _MIN_CODIM[self.kind]
        if codim < _MIN_CODIM[self.kind]:
            raise ValueError(f"{self.kind} needs ambient codimension >= {_MIN_CODIM[self.kind]}")
        object.__setattr__(self, "ambient_codim", codim)
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))

    @property
    def n(self) -> int:
        if self.kind == CYLINDER:
            return self.dims[0] + 1
        return sum(self.dims)

    def scaled(self, lam: float) -> "ModelGeometry":
        return replace(self, radii=tuple(lam * r for r in self.radii))

    def __str__(self):
        if self.kind == SPHERE:
            return f"S^{self.dims[0]}({self.radii[0]:g})"
        if self.kind == CYLINDER:
            return f"S^{self.dims[0]}({self.radii[0]:g})xR"
        return f"S^{self.dims[0]}({self.radii[0]:g})xS^{self.dims[1]}({self.radii[1]:g})"


def Sphere(n: int, r: float, ambient_codim: int = 0) -> ModelGeometry:
    return ModelGeometry(SPHERE, (n,), (r,), ambient_codim)


def Cylinder(n: int, r: float, ambient_codim: int = 0) -> ModelGeometry:
    """``S^{n-1}(r) x R``, an n-dimensional cylinder."""
    if n < 2:
        raise ValueError("cylinder needs n >= 2")
    return ModelGeometry(CYLINDER, (n - 1,), (r,), ambient_codim)


def ProductSpheres(p: int, r1: float, q2: int, r2: float, ambient_codim: int = 0) -> ModelGeometry:
    """``S^p(r1) x S^q2(r2)`` in ``R^{p+1} x R^{q2+1}``."""
    return ModelGeometry(PRODUCT, (p, q2), (r1, r2), ambient_codim)


def curvature_frame(m: ModelGeometry) -> CurvatureFrame:
    """Exact second fundamental form in an adapted orthonormal frame.

    Each round factor ``S^d(r)`` contributes ``(1/r) I_d`` in its own normal
    direction (the inward unit normal of that factor); the flat line of the
    cylinder contributes a zero row and column.  ``nabla A`` vanishes.
    """
    n, q = m.n, m.ambient_codim
    h = np.zeros((n, n, q))
    start = 0
    for alpha, (d, r) in enumerate(zip(m.dims, m.radii)):
        idx = np.arange(start, start + d)
        h[idx, idx, alpha] = 1.0 / r
        start += d
    return CurvatureFrame(h, gradA=np.zeros((n, n, n, q)), grad2A=np.zeros((n, n, n, n, q)))


def pinch_ratio(m: ModelGeometry) -> float:
    """``|A|^2 / |H|^2``; independent of a uniform scaling of the radii."""
    f = curvature_frame(m)
    H2 = norm_H2(f)
    if H2 <= 0.0:
        raise ZeroMeanCurvature(f"{m} has vanishing mean curvature")
    return norm_A2(f) / H2


def extinction_time(m: ModelGeometry) -> float:
    """First time at which some factor of the exact shrinking solution vanishes."""
    return min(r * r / (2.0 * d) for d, r in zip(m.dims, m.radii))


def shrink_exact(m: ModelGeometry, t: float) -> ModelGeometry:
    """Exact mean curvature flow of a model at time ``t``.

    A round factor ``S^d(r)`` evolves by ``r' = -d / r``, i.e.
    ``r(t)^2 = r^2 - 2 d t``; factors of a product shrink independently.

    Raises
    ------
    Extinct
        If any factor has radius^2 <= 0 at time ``t``.
    """
    if t == 0:
        return m
    new = []
    for d, r in zip(m.dims, m.radii):
        rad = r * r - 2.0 * d * t
        if rad <= 0.0:
            raise Extinct(f"{m} is extinct by t = {t} (factor S^{d} vanishes at {r * r / (2 * d):g})")
        new.append(math.sqrt(rad))
    return replace(m, radii=tuple(new))


def is_pinched(m: ModelGeometry, p: PinchingParams) -> bool:
    """True iff ``|A|^2 - c|H|^2 <= -eps |H|^2``, i.e. ratio <= c - eps."""
    return pinch_ratio(m) <= p.c - p.eps


def lifespan_bound(m: ModelGeometry) -> float:
    """``R0^2 / (2n)`` with ``R0`` the largest distance from the origin.

    The catalog models are centred at the origin; for the cylinder the bound
    is infinite because it is unbounded.
    """
    if m.kind == CYLINDER:
        return math.inf
    R2 = sum(r * r for r in m.radii)
    return R2 / (2.0 * m.n)
