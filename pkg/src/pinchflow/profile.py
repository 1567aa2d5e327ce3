"""Rotationally symmetric immersions and their curvature.

An O(n)-equivariant immersion ``F(x, w) = (u(x) w, chi(x))`` with
``w in S^{n-1}`` is determined by its profile curve
``gamma(x) = (u(x), chi(x))`` in ``R^{1+k}``.  Profile vectors below use
component 0 for the radial direction ``e_u`` and components ``1..k`` for
``chi``.

In an orthonormal frame made of the unit profile tangent ``T`` and ``n - 1``
sphere directions ``e_a`` the second fundamental form is

* ``h(T, T) = K`` (the profile curvature vector ``gamma_ss``),
* ``h(e_a, e_b) = delta_ab S`` with ``S = -(e_u - u_s T) / u``,
* ``h(T, e_a) = 0``.

With ``rho = u_s / u`` and ``P`` the projection onto the profile normal
space, the only nonzero components of ``nabla A`` are ``D1 = P K_s`` at
``(T, T, T)`` and ``D2 = rho (K - S)`` at ``(T, a, a)`` and its two
permutations, so ``|nabla A|^2 = |D1|^2 + 3(n-1)|D2|^2``.  One more
derivative gives ``P D1_s``, ``P D2_s``, ``rho (D1 - 2 D2)`` on the slots
with a single sphere pair, and ``rho D2 (d_ab d_cd + d_ac d_bd + d_ad d_bc)``
on pure sphere slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DegenerateImmersion
from .tensor import CurvatureFrame

# central stencils: STENCILS[accuracy][derivative order] -> weights on offsets -m..m
STENCILS = {
    2: {
        1: np.array([-0.5, 0.0, 0.5]),
        2: np.array([1.0, -2.0, 1.0]),
        3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
        4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
    },
    4: {
        1: np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12]),
        2: np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]),
        3: np.array([1 / 8, -1.0, 13 / 8, 0.0, -13 / 8, 1.0, -1 / 8]),
        4: np.array([-1 / 6, 2.0, -13 / 2, 28 / 3, -13 / 2, 2.0, -1 / 6]),
    },
}

MIN_POINTS = 16


def fd_derivative(f: np.ndarray, d: int, dx: float, accuracy: int = 4, periodic: bool = True) -> np.ndarray:
    """``d``-th derivative along axis 0 by central differences.

    Non-periodic data get NaN where the stencil would leave the array.
    """
    w = STENCILS[accuracy][d]
    m = len(w) // 2
    out = np.zeros_like(f, dtype=float)
    if periodic:
        for j, wj in enumerate(w):
            if wj != 0.0:
                out += wj * np.roll(f, -(j - m), axis=0)
    else:
        N = f.shape[0]
        out[:] = np.nan
        acc = np.zeros_like(f[m : N - m], dtype=float)
        for j, wj in enumerate(w):
            if wj != 0.0:
                acc += wj * f[j : N - 2 * m + j]
        out[m : N - m] = acc
    return out / dx**d


@dataclass
class ProfileState:
    """Discretized profile curve of an equivariant immersion.

    Attributes
    ----------
    n : int
        Dimension of the immersed submanifold (sphere orbits are ``S^{n-1}``).
    u : ndarray, shape (N,)
        Radii, all positive.
    chi : ndarray, shape (N, k)
        Axial coordinates.
    time : float
        Flow time.
    chi_shift : ndarray, shape (k,)
        ``chi(x + 1) = chi(x) + chi_shift``.  Zero for closed profiles; a
        nonzero shift represents an unbounded profile periodic up to
        translation, such as a straight cylinder.
    periodic : bool
        False for open test charts: derivatives are only formed at interior
        points and the state cannot be evolved.
    dx : float
        Parameter spacing; ``1/N`` for periodic profiles.
    labels : ndarray, shape (N,)
        Lagrangian labels of the grid points, carried through regridding.
    """

    n: int
    u: np.ndarray
    chi: np.ndarray
    time: float = 0.0
    chi_shift: Optional[np.ndarray] = None
    periodic: bool = True
    dx: Optional[float] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        chi = np.asarray(self.chi, dtype=float)
        if chi.ndim == 1:
            chi = chi[:, None]
        self.chi = chi
        N = self.u.shape[0]
        if self.u.ndim != 1 or chi.shape[0] != N:
            raise ValueError("u must be (N,) and chi (N, k)")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if N < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} grid points, got {N}")
        if not np.all(self.u > 0):
            raise ValueError("radii u must be positive")
        if self.chi_shift is None:
            self.chi_shift = np.zeros(self.k)
        self.chi_shift = np.asarray(self.chi_shift, dtype=float).reshape(self.k)
        if self.dx is None:
            if not self.periodic:
                raise ValueError("open charts need an explicit dx")
            self.dx = 1.0 / N
        if self.labels is None:
            self.labels = np.arange(N) * self.dx
        self.labels = np.asarray(self.labels, dtype=float)

    @property
    def N(self) -> int:
        return self.u.shape[0]

    @property
    def k(self) -> int:
        return self.chi.shape[1]

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N) * self.dx

    def gamma(self) -> np.ndarray:
        """Profile points as an (N, 1 + k) array."""
        return np.column_stack([self.u, self.chi])

    def copy(self, **changes) -> "ProfileState":
        base = dict(
            u=self.u.copy(),
            chi=self.chi.copy(),
            chi_shift=self.chi_shift.copy(),
            labels=self.labels.copy(),
        )
        base.update(changes)
        return replace(self, **base)

    def with_gamma(self, gamma: np.ndarray, **changes) -> "ProfileState":
        return self.copy(u=gamma[:, 0].copy(), chi=gamma[:, 1:].copy(), **changes)


def product_circle_state(n: int, r: float, R: float, N: int, k: int = 2,
                         bump_amplitude: float = 0.0, bump_mode: int = 1) -> ProfileState:
    """``u = r (1 + amp cos(2 pi mode x))`` over a circle of radius ``R`` in the first two chi axes.

    With zero amplitude this is the product ``S^{n-1}(r) x S^1(R)``.
    """
    if k < 2:
        raise ValueError("a circular profile needs k >= 2")
    if r <= 0 or R <= 0:
        raise ValueError("radii must be positive")
    x = np.arange(N) / N
    u = r * (1.0 + bump_amplitude * np.cos(2 * np.pi * bump_mode * x))
    chi = np.zeros((N, k))
    chi[:, 0] = R * np.cos(2 * np.pi * x)
    chi[:, 1] = R * np.sin(2 * np.pi * x)
    return ProfileState(n=n, u=u, chi=chi)


def straight_cylinder_state(n: int, r: float, N: int, length: float = 1.0, k: int = 1) -> ProfileState:
    """``u = r`` over a straight axial segment repeated by translation: ``S^{n-1}(r) x R``."""
    x = np.arange(N) / N
    chi = np.zeros((N, k))
    chi[:, 0] = length * x
    shift = np.zeros(k)
    shift[0] = length
    return ProfileState(n=n, u=np.full(N, float(r)), chi=chi, chi_shift=shift)


@dataclass
class ProfileGeometry:
    """Pointwise curvature data of a profile state (arrays over the grid)."""

    n: int
    lam: np.ndarray          # |gamma_x|
    T: np.ndarray            # unit tangent, (N, 1+k)
    K: np.ndarray            # h(T, T)
    S: np.ndarray            # h(e_a, e_a)
    Hvec: np.ndarray         # mean curvature vector
    A2: np.ndarray
    H2: np.ndarray
    u: np.ndarray
    u_s: np.ndarray
    D1: Optional[np.ndarray] = None
    D2: Optional[np.ndarray] = None
    gradA2: Optional[np.ndarray] = None
    gradH2: Optional[np.ndarray] = None
    E1: Optional[np.ndarray] = None   # P D1_s
    E2: Optional[np.ndarray] = None   # P D2_s
    grad2A2: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    @property
    def Hnorm(self) -> np.ndarray:
        return np.sqrt(self.H2)

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.A2 / self.H2

    @property
    def kappa(self) -> np.ndarray:
        """Length of the profile curvature vector."""
        return np.linalg.norm(self.K, axis=1)


def _project(v: np.ndarray, T: np.ndarray) -> np.ndarray:
    return v - np.einsum("ni,ni->n", v, T)[:, None] * T


def _derivatives(s: ProfileState, order: int, accuracy: int):
    g = s.gamma()
    x = s.x
    shift = np.concatenate([[0.0], s.chi_shift])
    # subtract the linear drift so the data are genuinely periodic
    gp = g - x[:, None] * shift[None, :]
    ds = [fd_derivative(gp, d, s.dx, accuracy, s.periodic) for d in range(1, order + 1)]
    ds[0] = ds[0] + shift[None, :]
    return ds


def profile_geometry(s: ProfileState, accuracy: int = 4, grad: bool = True, grad2: bool = False) -> ProfileGeometry:
    """Curvature quantities at every grid point of ``s``.

    Raises
    ------
    DegenerateImmersion
        If the profile speed nearly vanishes somewhere.
    """
    n = s.n
    m = n - 1
    a, b, c = _derivatives(s, 3, accuracy)
    lam = np.linalg.norm(a, axis=1)
    finite = np.isfinite(lam)
    scale = np.nanmax(np.abs(s.gamma())) if s.N else 1.0
    if np.any(lam[finite] <= 1e-12 * max(scale, 1.0)):
        raise DegenerateImmersion("profile speed vanishes")
    T = a / lam[:, None]
    u = s.u
    u_s = T[:, 0]
    Pb = _project(b, T)
    K = Pb / lam[:, None] ** 2
    eu = np.zeros_like(T)
    eu[:, 0] = 1.0
    Peu = eu - u_s[:, None] * T
    S = -Peu / u[:, None]
    Hvec = K + m * S
    A2 = np.einsum("ni,ni->n", K, K) + m * np.einsum("ni,ni->n", S, S)
    H2 = np.einsum("ni,ni->n", Hvec, Hvec)
    geo = ProfileGeometry(n, lam, T, K, S, Hvec, A2, H2, u, u_s)
    if not (grad or grad2):
        return geo

    # K_x from gamma_x, gamma_xx, gamma_xxx
    bT = np.einsum("ni,ni->n", b, T)
    cT = np.einsum("ni,ni->n", c, T)
    T_x = Pb / lam[:, None]
    bTx = np.einsum("ni,ni->n", b, T_x)
    lam_x = bT
    K_x = (c - cT[:, None] * T - bTx[:, None] * T - bT[:, None] * T_x) / lam[:, None] ** 2 \
        - 2.0 * (lam_x / lam)[:, None] * K
    D1 = _project(K_x, T) / lam[:, None]
    rho = u_s / u
    D2 = rho[:, None] * (K - S)
    geo.D1, geo.D2 = D1, D2
    geo.gradA2 = np.einsum("ni,ni->n", D1, D1) + 3 * m * np.einsum("ni,ni->n", D2, D2)
    gH = D1 + m * D2
    geo.gradH2 = np.einsum("ni,ni->n", gH, gH)
    if grad2:
        E1 = _project(fd_derivative(D1, 1, s.dx, accuracy, s.periodic), T) / lam[:, None]
        E2 = _project(fd_derivative(D2, 1, s.dx, accuracy, s.periodic), T) / lam[:, None]
        F = D1 - 2.0 * D2
        sq = lambda v: np.einsum("ni,ni->n", v, v)
        geo.E1, geo.E2 = E1, E2
        geo.grad2A2 = sq(E1) + 3 * m * sq(E2) + 3 * m * rho**2 * sq(F) + 3 * m * (m + 2) * rho**2 * sq(D2)
    return geo


def normal_basis(T: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the complement of unit ``T`` in ``R^{1+k}``.

    Gram-Schmidt over ``e_u, e_1, ..., e_k`` in that order, skipping
    candidates that are nearly dependent.
    """
    dim = T.shape[0]
    basis = [T]
    for j in range(dim):
        v = np.zeros(dim)
        v[j] = 1.0
        for b in basis:
            v = v - (v @ b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
        if len(basis) == dim:
            break
    return np.array(basis[1:])


def profile_curvature(s: ProfileState, i: int, accuracy: int = 4, grad2: bool = True,
                      geometry: Optional[ProfileGeometry] = None) -> CurvatureFrame:
    """Full curvature frame at grid point ``i``.

    Tangent index 0 is the profile direction, 1..n-1 the sphere directions;
    the normal index runs over :func:`normal_basis` of the profile tangent.
    """
    geo = geometry if geometry is not None else profile_geometry(s, accuracy, grad=True, grad2=grad2)
    n, k = s.n, s.k
    if not np.isfinite(geo.lam[i]):
        raise ValueError(f"grid point {i} has no full stencil")
    nu = normal_basis(geo.T[i])
    comp = lambda v: nu @ v
    h = np.zeros((n, n, k))
    h[0, 0] = comp(geo.K[i])
    Sc = comp(geo.S[i])
    for a in range(1, n):
        h[a, a] = Sc
    gradA = np.zeros((n, n, n, k))
    d1, d2 = comp(geo.D1[i]), comp(geo.D2[i])
    gradA[0, 0, 0] = d1
    for a in range(1, n):
        gradA[0, a, a] = gradA[a, 0, a] = gradA[a, a, 0] = d2
    grad2A = None
    if geo.E1 is not None:
        grad2A = np.zeros((n, n, n, n, k))
        rho = geo.u_s[i] / geo.u[i]
        e1, e2 = comp(geo.E1[i]), comp(geo.E2[i])
        f = rho * (d1 - 2.0 * d2)
        g = rho * d2
        grad2A[0, 0, 0, 0] = e1
        for a in range(1, n):
            grad2A[0, 0, a, a] = grad2A[0, a, 0, a] = grad2A[0, a, a, 0] = e2
            grad2A[a, 0, 0, a] = grad2A[a, 0, a, 0] = grad2A[a, a, 0, 0] = f
            for b in range(1, n):
                for cc in range(1, n):
                    for d in range(1, n):
                        w = (a == b) * (cc == d) + (a == cc) * (b == d) + (a == d) * (b == cc)
                        if w:
                            grad2A[a, b, cc, d] = w * g
    return CurvatureFrame(h, gradA=gradA, grad2A=grad2A)


def arclength(s: ProfileState, geo: Optional[ProfileGeometry] = None, accuracy: int = 4) -> np.ndarray:
    """Cumulative arclength at the grid points, starting from 0 at index 0.

    Trapezoid rule with the Euler-Maclaurin end correction (fourth order on
    smooth periodic data).  For periodic states an extra final entry holds the
    total length of one period.
    """
    if geo is None:
        geo = profile_geometry(s, accuracy, grad=False)
    lam = geo.lam
    if s.periodic:
        lam_x = fd_derivative(lam, 1, s.dx, accuracy, True)
        seg = 0.5 * s.dx * (lam + np.roll(lam, -1)) - s.dx**2 / 12.0 * (np.roll(lam_x, -1) - lam_x)
        return np.concatenate([[0.0], np.cumsum(seg)])
    # open charts carry NaN edges; accumulate over the finite interior only
    seg = 0.5 * s.dx * (lam[:-1] + lam[1:])
    out = np.concatenate([[0.0], np.cumsum(np.nan_to_num(seg))])
    out[~np.isfinite(lam)] = np.nan
    return out


def profile_distance(s: ProfileState, i0: int, geo: Optional[ProfileGeometry] = None) -> np.ndarray:
    """Intrinsic distance from the orbit of point ``i0`` to every other orbit.

    For closed periodic profiles the shorter way round is taken.
    """
    sc = arclength(s, geo)
    if s.periodic:
        L = sc[-1]
        d = np.abs(sc[:-1] - sc[i0])
        if not np.any(s.chi_shift):
            d = np.minimum(d, L - d)
        return d
    return np.abs(sc - sc[i0])


def max_H_point(s: ProfileState, geo: Optional[ProfileGeometry] = None, rtol: float = 1e-12):
    """Index and value of the largest ``|H|``; near-ties go to the lowest index."""
    if geo is None:
        geo = profile_geometry(s, grad=False)
    Hn = geo.Hnorm
    top = np.nanmax(Hn)
    i = int(np.flatnonzero(Hn >= top * (1.0 - rtol))[0])
    return i, float(Hn[i])
