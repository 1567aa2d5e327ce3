"""Pointwise algebra of second fundamental forms in orthonormal frames.

Every function here takes either a :class:`CurvatureFrame` or a raw array of
shape ``(..., n, n, q)`` holding ``h[i, j, alpha]``.  Leading axes are treated
as a batch, so a hundred thousand random frames can be checked in one call.
Indices ``i, j`` are orthonormal tangent directions and ``alpha`` runs over an
orthonormal basis of the normal space.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Union

import numpy as np

from .errors import (
    InvalidSlope,
    MissingGradient,
    NotPinched,
    ZeroMeanCurvature,
)

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class CurvatureFrame:
    """Second fundamental form (and optionally its derivatives) at a point.

    Attributes
    ----------
    h : ndarray, shape (n, n, q)
        Components ``h_{ij alpha}``; symmetric in ``i, j``.
    gradA : ndarray, shape (n, n, n, q), optional
        ``(nabla_k h)_{ij alpha}`` with the derivative index first.
    grad2A : ndarray, shape (n, n, n, n, q), optional
        ``(nabla_l nabla_k h)_{ij alpha}``.
    """

    h: np.ndarray
    gradA: Optional[np.ndarray] = None
    grad2A: Optional[np.ndarray] = None

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.ndim != 3 or h.shape[0] != h.shape[1]:
            raise ValueError(f"h must have shape (n, n, q), got {h.shape}")
        if h.shape[0] < 1 or h.shape[2] < 1:
            raise ValueError("need n >= 1 and q >= 1")
        scale = max(1.0, float(np.abs(h).max()))
        asym = float(np.abs(h - h.transpose(1, 0, 2)).max())
        if asym > SYMMETRY_TOL * scale:
            raise ValueError(f"h is not symmetric in i, j (asymmetry {asym:.3g})")
        object.__setattr__(self, "h", h)
        n, q = h.shape[0], h.shape[2]
        if self.gradA is not None:
            g = np.asarray(self.gradA, dtype=float)
            if g.shape != (n, n, n, q):
                raise ValueError(f"gradA must have shape {(n, n, n, q)}, got {g.shape}")
            object.__setattr__(self, "gradA", g)
        if self.grad2A is not None:
            g2 = np.asarray(self.grad2A, dtype=float)
            if g2.shape != (n, n, n, n, q):
                raise ValueError(f"grad2A must have shape {(n, n, n, n, q)}, got {g2.shape}")
            object.__setattr__(self, "grad2A", g2)

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def q(self) -> int:
        return self.h.shape[2]


@dataclass(frozen=True)
class PinchingParams:
    """Parameters of the pinching class ``|A|^2 + a <= c |H|^2``.

    ``eps`` is the strictness in ``|A|^2 - c|H|^2 <= -eps |H|^2``.
    """

    n: int
    q: int
    c: float
    a: float = 0.0
    eps: float = 0.0

    def __post_init__(self):
        if self.n < 2 or self.q < 1:
            raise ValueError("need n >= 2 and q >= 1")
        if self.c <= 0:
            raise ValueError("pinching slope c must be positive")
        if self.a < 0 or self.eps < 0:
            raise ValueError("a and eps must be nonnegative")

    @property
    def in_preserved_range(self) -> bool:
        """True when 1/n < c <= 4/(3n), the range where Q <= 0 is preserved."""
        return 1.0 / self.n < self.c <= 4.0 / (3.0 * self.n) + 1e-15


class ReactionTerms(NamedTuple):
    R1: np.ndarray
    R2: np.ndarray
    rmPerpSq: np.ndarray


class Decomposition(NamedTuple):
    A1: np.ndarray
    A1traceless: np.ndarray
    Aminus: np.ndarray
    AminusTraceless: np.ndarray


class ReactionCheck(NamedTuple):
    lhs: np.ndarray
    rhsBound: np.ndarray
    ok: np.ndarray
    first_link: np.ndarray
    second_link: np.ndarray


class KatoCheck(NamedTuple):
    lhs: float
    rhs: float
    ok: bool


FrameLike = Union[CurvatureFrame, np.ndarray]


def _h(f: FrameLike) -> np.ndarray:
    return f.h if isinstance(f, CurvatureFrame) else np.asarray(f, dtype=float)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def norm_A2(f: FrameLike):
    """Squared norm ``sum h_{ij alpha}^2``."""
    h = _h(f)
    return _scalar(np.einsum("...ija,...ija->...", h, h))


def mean_vector(f: FrameLike) -> np.ndarray:
    """Mean curvature vector ``H_alpha = sum_i h_{ii alpha}``."""
    return np.einsum("...iia->...a", _h(f))


def norm_H2(f: FrameLike):
    H = mean_vector(f)
    return _scalar(np.einsum("...a,...a->...", H, H))


def reaction_terms(f: FrameLike) -> ReactionTerms:
    """Reaction terms of the evolution equations for ``|A|^2`` and ``|H|^2``.

    ``rmPerpSq`` is the squared normal curvature, built from commutators of the
    shape operators ``h_alpha`` viewed as symmetric matrices.
    """
    h = _h(f)
    gram = np.einsum("...ija,...ijb->...ab", h, h)
    # (h_a h_b)_{ij}; the second commutator term is its transpose in (a, b)
    prod = np.einsum("...ipa,...pjb->...abij", h, h)
    comm = prod - np.swapaxes(prod, -4, -3)
    rm = np.einsum("...abij,...abij->...", comm, comm)
    R1 = np.einsum("...ab,...ab->...", gram, gram) + rm
    H = mean_vector(h)
    HA = np.einsum("...a,...ija->...ij", H, h)
    R2 = np.einsum("...ij,...ij->...", HA, HA)
    return ReactionTerms(_scalar(R1), _scalar(R2), _scalar(rm))


def decompose(f: FrameLike) -> Decomposition:
    """Split ``h`` along the unit mean curvature direction and its complement.

    Raises
    ------
    ZeroMeanCurvature
        If ``|H| = 0`` anywhere in the batch.
    """
    h = _h(f)
    n = h.shape[-2]
    H = mean_vector(h)
    Hn = np.sqrt(np.einsum("...a,...a->...", H, H))
    if np.any(Hn <= 0.0):
        raise ZeroMeanCurvature("decomposition needs |H| > 0")
    nu = H / Hn[..., None]
    A1 = np.einsum("...ija,...a->...ij", h, nu)
    Aminus = h - A1[..., None] * nu[..., None, None, :]
    eye = np.eye(n)
    A1o = A1 - (np.einsum("...ii->...", A1) / n)[..., None, None] * eye
    tr_minus = np.einsum("...iia->...a", Aminus)
    Amo = Aminus - (tr_minus / n)[..., None, None, :] * eye[:, :, None]
    return Decomposition(A1, A1o, Aminus, Amo)


def pinch_Q(f: FrameLike, p: PinchingParams):
    """``Q = |A|^2 + a - c |H|^2``."""
    return _scalar(norm_A2(f) + p.a - p.c * norm_H2(f))


def reaction_inequality_check(f: FrameLike, p: PinchingParams, tol_factor: float = 1e-9) -> ReactionCheck:
    """Check ``2R1 - 2cR2 <= (refined bound) <= 0`` on pinched frames.

    The refined bound expresses the reaction terms through ``Q`` and the
    decomposition of ``h`` along ``H``.  Both links of the chain are checked
    separately with tolerance ``tol_factor * (|A|^2 + |H|^2)^2``.

    Raises
    ------
    InvalidSlope
        If ``c <= 1/n``.
    NotPinched
        If ``Q > 0`` for any frame of the batch.
    """
    h = _h(f)
    n = h.shape[-2]
    c, a = p.c, p.a
    if c <= 1.0 / n:
        raise InvalidSlope(f"c = {c} <= 1/n = {1.0 / n}")
    A2 = np.asarray(norm_A2(h))
    H2 = np.asarray(norm_H2(h))
    Q = A2 + a - c * H2
    scale = (A2 + H2) ** 2
    if np.any(Q > tol_factor * np.sqrt(scale)):
        raise NotPinched("reaction bound requires Q <= 0")
    R1, R2, _ = reaction_terms(h)
    lhs = 2.0 * np.asarray(R1) - 2.0 * c * np.asarray(R2)
    d = decompose(h)
    A1sq = np.einsum("...ij,...ij->...", d.A1, d.A1)
    A1osq = np.einsum("...ij,...ij->...", d.A1traceless, d.A1traceless)
    Amsq = np.einsum("...ija,...ija->...", d.Aminus, d.Aminus)
    Amosq = np.einsum("...ija,...ija->...", d.AminusTraceless, d.AminusTraceless)
    inv = 1.0 / (c - 1.0 / n)
    w = 2.0 * inv / n
    rhs = (
        2.0 * A1sq * Q
        - 2.0 * a * A1sq
        - (2.0 * a / n) * inv * Amosq
        + w * Amsq * Q
        + (6.0 - w) * A1osq * Amosq
        + (3.0 - w) * Amosq**2
    )
    tol = tol_factor * scale
    first = lhs <= rhs + tol
    second = rhs <= tol
    ok = first & (lhs <= tol)
    return ReactionCheck(_scalar(lhs), _scalar(rhs), _scalar(ok), _scalar(first), _scalar(second))


def grad_norm2(gradA: np.ndarray) -> float:
    return float(np.sum(gradA * gradA))


def grad_H(gradA: np.ndarray) -> np.ndarray:
    """``(nabla_k H)_alpha = sum_i (nabla_k h)_{ii alpha}``."""
    return np.einsum("kiia->ka", gradA)


def kato_check(f: CurvatureFrame, tol: float = 0.0) -> KatoCheck:
    """Kato-type inequality ``|nabla A|^2 >= 3/(n+2) |nabla H|^2``."""
    if f.gradA is None:
        raise MissingGradient("kato_check needs gradA")
    lhs = grad_norm2(f.gradA)
    gH = grad_H(f.gradA)
    rhs = 3.0 / (f.n + 2) * float(np.sum(gH * gH))
    return KatoCheck(lhs, rhs, bool(lhs >= rhs - tol))


class NonstandardDimensionWarning(UserWarning):
    pass


def c_n_constant(n: int) -> Fraction:
    """Optimal pinching slope ``min{4/(3n), 1/(n-2)}`` for ``n >= 5``.

    For ``n < 5`` the value ``4/(3n)`` is returned with a warning, since the
    two-term minimum is only meaningful from dimension five on.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if n < 5:
        warnings.warn(f"c_n is nonstandard for n = {n} < 5", NonstandardDimensionWarning, stacklevel=2)
        return Fraction(4, 3 * n)
    return min(Fraction(4, 3 * n), Fraction(1, n - 2))


def simons_residual_parallel(f: FrameLike) -> np.ndarray:
    """Cubic part of Simons' identity; vanishes when ``nabla A = 0``.

    Returns the array (indices ``i, j, alpha``) of
    ``H.h_ip h_pj - h_ij.h_pq h_pq + 2 h_jq.h_ip h_pq - h_iq.h_qp h_pj - h_jq.h_qp h_pi``
    where ``x.y z`` means ``(x.y) z`` with ``.`` the inner product in the
    normal index.
    """
    h = _h(f)
    H = mean_vector(h)
    t1 = np.einsum("...b,...ipb,...pja->...ija", H, h, h)
    t2 = np.einsum("...ijb,...pqb,...pqa->...ija", h, h, h)
    t3 = 2.0 * np.einsum("...jqb,...ipb,...pqa->...ija", h, h, h)
    t4 = np.einsum("...iqb,...qpb,...pja->...ija", h, h, h)
    t5 = np.einsum("...jqb,...qpb,...pia->...ija", h, h, h)
    return t1 - t2 + t3 - t4 - t5


def random_pinched_frames(
    rng: np.random.Generator,
    n: int,
    q: int,
    c: float,
    a: float = 0.0,
    size: int = 1,
    shift_max: Optional[float] = None,
    unit_H: bool = False,
) -> np.ndarray:
    """Rejection-sample frames with ``Q <= 0``.

    Proposals are ``s * I (x) nu + tau * E`` with ``E`` symmetric, entries drawn
    uniformly from [-1, 1], ``nu`` a uniform unit normal, ``tau`` uniform in
    [0, 1] and ``s`` uniform in [0, shift_max].  Plain uniform symmetric
    tensors are essentially never pinched, so the umbilic shift is what makes
    acceptance possible; the noise scale ``tau`` spreads samples across the
    interior of the cone and up to its boundary.

    Returns an array of shape ``(size, n, n, q)``.
    """
    if shift_max is None:
        # noise |A°|^2 ~ n^2 q / 6; need (c - 1/n) n^2 s^2 >~ that
        gap = max(c - 1.0 / n, 1e-3)
        shift_max = 3.0 * np.sqrt(q / (6.0 * gap))
    out = np.empty((size, n, n, q))
    filled = 0
    eye = np.eye(n)[None, :, :, None]
    while filled < size:
        m = max(2 * (size - filled), 64)
        E = rng.uniform(-1.0, 1.0, size=(m, n, n, q))
        E = 0.5 * (E + E.transpose(0, 2, 1, 3))
        tau = rng.uniform(0.0, 1.0, size=(m, 1, 1, 1))
        nu = rng.normal(size=(m, q))
        nu /= np.linalg.norm(nu, axis=1, keepdims=True)
        s = rng.uniform(0.0, shift_max, size=(m, 1, 1, 1))
        h = tau * E + s * eye * nu[:, None, None, :]
        A2 = np.einsum("mija,mija->m", h, h)
        H = np.einsum("miia->ma", h)
        H2 = np.einsum("ma,ma->m", H, H)
        keep = (A2 + a - c * H2 <= 0.0) & (H2 > 0.0)
        acc = h[keep][: size - filled]
        if unit_H:
            # a > 0 is not scale invariant; only rescale when a = 0
            if a != 0.0:
                raise ValueError("unit_H rescaling requires a = 0")
            Hn = np.sqrt(np.einsum("miia,mjja->m", acc, acc))
            acc = acc / Hn[:, None, None, None]
        out[filled : filled + len(acc)] = acc
        filled += len(acc)
    return out


def cauchy_schwarz_gap(f: FrameLike):
    """``n|A|^2 - |H|^2``, nonnegative for every frame."""
    h = _h(f)
    return _scalar(h.shape[-2] * np.asarray(norm_A2(h)) - np.asarray(norm_H2(h)))
