"""Brute-force curvature of explicit chart embeddings by finite differences.

This module shares no formulas with :mod:`pinchflow.profile` or
:mod:`pinchflow.models`: it only ever sees a map from parameter space into
Euclidean space, differentiates it numerically, and builds the second
fundamental form and its covariant derivatives from the definitions

    h_ij = (F_ij)^perp,
    (nabla_k h)_ij = (d_k h_ij)^perp - G^l_ki h_lj - G^l_kj h_il,

with Christoffel symbols ``G^l_ij = g^lm <F_ij, F_m>`` of the induced metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import IndeterminateOrder, RankDeficient
from .models import CYLINDER, PRODUCT, SPHERE, ModelGeometry
from .tensor import CurvatureFrame

W1 = np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12])
W2 = np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])
OFFS = np.arange(-2, 3)

COND_LIMIT = 1e8


@dataclass
class ChartPatch:
    """A parametrized patch ``F: R^m -> R^N`` around ``base``.

    ``extra_tangents`` is the symmetry descriptor for equivariant sources:
    fixed unit vectors that are tangent to the full submanifold at ``base``
    but not spanned by the chart, each behaving like chart direction
    ``replicate`` (same diagonal block of ``h``, no off-diagonal coupling).
    """

    embedding: Callable[[np.ndarray], np.ndarray]
    base: np.ndarray
    h_grid: float
    extra_tangents: Optional[np.ndarray] = None
    replicate: int = -1

    def __post_init__(self):
        self.base = np.atleast_1d(np.asarray(self.base, dtype=float))
        if self.extra_tangents is not None:
            self.extra_tangents = np.atleast_2d(np.asarray(self.extra_tangents, dtype=float))

    @property
    def m(self) -> int:
        return self.base.shape[0]

    def with_spacing(self, h_grid: float) -> "ChartPatch":
        return ChartPatch(self.embedding, self.base, h_grid, self.extra_tangents, self.replicate)


def _jet(F, x: np.ndarray, hh: float):
    """First and second derivatives of ``F`` at ``x`` (fourth-order stencils)."""
    m = x.shape[0]
    pts = [x]
    # axis lines
    for i in range(m):
        for o in OFFS:
            if o:
                pts.append(x + o * hh * np.eye(m)[i])
    # mixed planes
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    for i, j in pairs:
        for a in OFFS:
            for b in OFFS:
                if a and b:
                    pts.append(x + hh * (a * np.eye(m)[i] + b * np.eye(m)[j]))
    vals = np.asarray(F(np.array(pts)), dtype=float)
    f0 = vals[0]
    pos = 1
    axis = {}
    for i in range(m):
        line = {}
        for o in OFFS:
            if o:
                line[o] = vals[pos]
                pos += 1
            else:
                line[o] = f0
        axis[i] = line
    Fi = np.array([sum(W1[t] * axis[i][o] for t, o in enumerate(OFFS)) for i in range(m)]) / hh
    Fij = np.zeros((m, m, vals.shape[1]))
    for i in range(m):
        Fij[i, i] = sum(W2[t] * axis[i][o] for t, o in enumerate(OFFS)) / hh**2
    for i, j in pairs:
        acc = 0.0
        for a in OFFS:
            for b in OFFS:
                if a and b:
                    acc = acc + W1[a + 2] * W1[b + 2] * vals[pos]
                    pos += 1
        Fij[i, j] = Fij[j, i] = acc / hh**2
    return Fi, Fij


def _local(patch: ChartPatch, x: np.ndarray):
    """Metric data, normal projector and ambient-valued ``h_ij`` at ``x``."""
    Fi, Fij = _jet(patch.embedding, x, patch.h_grid)
    g = Fi @ Fi.T
    sv = np.linalg.svd(Fi, compute_uv=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else math.inf
    if cond > COND_LIMIT:
        raise RankDeficient(f"chart Jacobian condition number {cond:.3g}")
    ginv = np.linalg.inv(g)
    tangent = Fi
    if patch.extra_tangents is not None:
        tangent = np.vstack([Fi, patch.extra_tangents])
    Qt, _ = np.linalg.qr(tangent.T)
    Pperp = np.eye(Fi.shape[1]) - Qt @ Qt.T
    h = np.einsum("ab,ijb->ija", Pperp, Fij)
    Gam = np.einsum("lm,ijv,mv->lij", ginv, Fij, Fi)
    return dict(Fi=Fi, g=g, ginv=ginv, Pperp=Pperp, h=h, Gamma=Gam, cond=cond)


def _tangent_frame(Fi: np.ndarray) -> np.ndarray:
    """Coefficients ``E`` with ``e_a = sum_i E[a, i] F_i`` orthonormal (Gram-Schmidt in chart order)."""
    m = Fi.shape[0]
    E = np.zeros((m, m))
    vecs = []
    for i in range(m):
        coef = np.zeros(m)
        coef[i] = 1.0
        v = Fi[i].copy()
        for a, w in enumerate(vecs):
            p = v @ w
            v = v - p * w
            coef = coef - p * E[a]
        nv = np.linalg.norm(v)
        E[i] = coef / nv
        vecs.append(v / nv)
    return E


def _normal_basis(Pperp: np.ndarray, q: int) -> np.ndarray:
    """Gram-Schmidt over projected standard basis vectors, in index order."""
    N = Pperp.shape[0]
    basis = []
    for j in range(N):
        v = Pperp[:, j].copy()
        for b in basis:
            v = v - (v @ b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            basis.append(v / nv)
        if len(basis) == q:
            break
    return np.array(basis)


def _codim(patch: ChartPatch, N: int) -> int:
    e = 0 if patch.extra_tangents is None else patch.extra_tangents.shape[0]
    return N - patch.m - e


def _frame_h(loc, E, nu, patch: ChartPatch):
    m = E.shape[0]
    hc = np.einsum("ai,bj,ijv,qv->abq", E, E, loc["h"], nu)
    hc = 0.5 * (hc + hc.transpose(1, 0, 2))
    e = 0 if patch.extra_tangents is None else patch.extra_tangents.shape[0]
    if e == 0:
        return hc
    n = m + e
    full = np.zeros((n, n, nu.shape[0]))
    full[:m, :m] = hc
    r = patch.replicate % m
    for j in range(m, n):
        full[j, j] = hc[r, r]
    return full


def fd_curvature(patch: ChartPatch, at: Optional[Sequence[float]] = None, return_info: bool = False):
    """Second fundamental form at ``at`` (default: the patch base point).

    With ``return_info`` a dict with the Jacobian condition number and the
    raw asymmetry of ``h`` (before symmetrization) is returned as well.

    Raises
    ------
    RankDeficient
        If the chart Jacobian is numerically singular.
    """
    x = patch.base if at is None else np.asarray(at, dtype=float)
    loc = _local(patch, x)
    E = _tangent_frame(loc["Fi"])
    q = _codim(patch, loc["Fi"].shape[1])
    nu = _normal_basis(loc["Pperp"], q)
    raw = np.einsum("ai,bj,ijv,qv->abq", E, E, loc["h"], nu)
    frame = CurvatureFrame(_frame_h(loc, E, nu, patch))
    if return_info:
        info = dict(cond=loc["cond"], asymmetry=float(np.abs(raw - raw.transpose(1, 0, 2)).max()))
        return frame, info
    return frame


def _grad_h_coords(patch: ChartPatch, x: np.ndarray):
    """Coordinate components ``(nabla_k h)_ij`` as ambient normal vectors."""
    m = patch.m
    hh = patch.h_grid
    loc = _local(patch, x)
    dh = np.zeros((m,) + loc["h"].shape)
    for k in range(m):
        for t, o in enumerate(OFFS):
            if o:
                dh[k] += W1[t] * _local(patch, x + o * hh * np.eye(m)[k])["h"]
    dh /= hh
    Pp, G, h = loc["Pperp"], loc["Gamma"], loc["h"]
    nab = np.einsum("vw,kijw->kijv", Pp, dh)
    nab -= np.einsum("lki,ljv->kijv", G, h)
    nab -= np.einsum("lkj,ilv->kijv", G, h)
    return loc, nab


def fd_grad_curvature(patch: ChartPatch, at: Optional[Sequence[float]] = None, second: bool = False) -> CurvatureFrame:
    """Curvature frame including ``nabla A`` (and ``nabla^2 A`` when ``second``).

    Only full charts are supported (no symmetry descriptor): covariant
    derivatives need genuine neighbours in every tangent direction.
    """
    if patch.extra_tangents is not None:
        raise ValueError("covariant derivatives need a full chart, not a symmetry-reduced one")
    x = patch.base if at is None else np.asarray(at, dtype=float)
    m = patch.m
    hh = patch.h_grid
    loc, nab = _grad_h_coords(patch, x)
    E = _tangent_frame(loc["Fi"])
    q = _codim(patch, loc["Fi"].shape[1])
    nu = _normal_basis(loc["Pperp"], q)
    h = _frame_h(loc, E, nu, patch)
    gradA = np.einsum("ck,ai,bj,kijv,qv->cabq", E, E, E, nab, nu)
    grad2A = None
    if second:
        d_nab = np.zeros((m,) + nab.shape)
        for l in range(m):
            for t, o in enumerate(OFFS):
                if o:
                    d_nab[l] += W1[t] * _grad_h_coords(patch, x + o * hh * np.eye(m)[l])[1]
        d_nab /= hh
        G = loc["Gamma"]
        n2 = np.einsum("vw,lkijw->lkijv", loc["Pperp"], d_nab)
        n2 -= np.einsum("plk,pijv->lkijv", G, nab)
        n2 -= np.einsum("pli,kpjv->lkijv", G, nab)
        n2 -= np.einsum("plj,kipv->lkijv", G, nab)
        grad2A = np.einsum("dl,ck,ai,bj,lkijv,qv->dcabq", E, E, E, E, n2, nu)
    return CurvatureFrame(h, gradA=gradA, grad2A=grad2A)


def convergence_order(v_h: float, v_h2: float, v_h4: float, floor: float = 1e-14) -> float:
    """Observed order ``log2(|v(h) - v(h/2)| / |v(h/2) - v(h/4)|)``.

    Raises
    ------
    IndeterminateOrder
        When either difference is at or below ``floor`` times the data scale.
    """
    scale = max(abs(v_h), abs(v_h2), abs(v_h4), 1e-300)
    d1, d2 = abs(v_h - v_h2), abs(v_h2 - v_h4)
    if d1 <= floor * scale or d2 <= floor * scale:
        raise IndeterminateOrder("differences underflow")
    return math.log2(d1 / d2)


# ---------------------------------------------------------------- chart builders

def _graph_sphere(y: np.ndarray, r: float) -> np.ndarray:
    """Upper hemisphere of ``S^d(r)`` as a graph over ``y in R^d``."""
    return np.sqrt(r * r - np.sum(y * y, axis=-1, keepdims=True))


def model_chart(m: ModelGeometry, h_grid: Optional[float] = None) -> ChartPatch:
    """Explicit graph-chart embedding of a catalog model, padded with zero normals."""
    n = m.n
    codim = m.ambient_codim
    Namb = n + codim
    kmax = max(1.0 / r for r in m.radii)
    if h_grid is None:
        h_grid = 0.05 / kmax

    def F(P):
        P = np.atleast_2d(P)
        parts = []
        if m.kind == SPHERE:
            parts = [P, _graph_sphere(P, m.radii[0])]
        elif m.kind == CYLINDER:
            y, z = P[:, : n - 1], P[:, n - 1 :]
            parts = [y, _graph_sphere(y, m.radii[0]), z]
        elif m.kind == PRODUCT:
            p = m.dims[0]
            y1, y2 = P[:, :p], P[:, p:]
            parts = [y1, _graph_sphere(y1, m.radii[0]), y2, _graph_sphere(y2, m.radii[1])]
        out = np.hstack(parts)
        pad = Namb - out.shape[1]
        if pad:
            out = np.hstack([out, np.zeros((out.shape[0], pad))])
        return out

    return ChartPatch(F, np.zeros(n), h_grid)


def equivariant_chart(u_fn: Callable, chi_fn: Callable, n: int, x0: float, h_grid: float,
                      reduced: bool = False) -> ChartPatch:
    """Chart of ``(u(x) w, chi(x))`` near the orbit point with ``w = e_1``.

    The full chart uses gnomonic coordinates ``w = (1, theta)/|(1, theta)|``
    on ``S^{n-1}``.  With ``reduced=True`` only one sphere angle is kept and
    the remaining ``n - 2`` sphere directions are supplied through the
    symmetry descriptor.
    """
    k = np.atleast_1d(chi_fn(np.array([x0]))).reshape(1, -1).shape[1]

    def F(P):
        P = np.atleast_2d(P)
        x = P[:, 0]
        u = np.asarray(u_fn(x), dtype=float).reshape(-1)
        chi = np.asarray(chi_fn(x), dtype=float).reshape(len(x), k)
        if reduced:
            th = P[:, 1]
            w = np.zeros((len(x), n))
            w[:, 0] = np.cos(th)
            w[:, 1] = np.sin(th)
        else:
            w = np.hstack([np.ones((len(x), 1)), P[:, 1:]])
            w = w / np.linalg.norm(w, axis=1, keepdims=True)
        return np.hstack([u[:, None] * w, chi])

    if reduced:
        extras = np.zeros((n - 2, n + k))
        for j in range(n - 2):
            extras[j, 2 + j] = 1.0
        return ChartPatch(F, np.array([x0, 0.0]), h_grid, extra_tangents=extras, replicate=1)
    return ChartPatch(F, np.concatenate([[x0], np.zeros(n - 1)]), h_grid)


def random_graph_patch(rng: np.random.Generator, n: int = 3, q: int = 2, terms: int = 3,
                       amplitude: float = 0.5, h_grid: float = 0.02) -> ChartPatch:
    """Graph ``y -> (y, f_1(y), ..., f_q(y))`` of random trigonometric sums.

    Any immersion satisfies the Codazzi equation, so these patches are valid
    inputs for the Kato inequality.
    """
    w = rng.normal(size=(q, terms, n))
    phase = rng.uniform(0, 2 * np.pi, size=(q, terms))
    amp = amplitude * rng.uniform(0.2, 1.0, size=(q, terms)) / terms

    def F(P):
        P = np.atleast_2d(P)
        arg = np.einsum("atn,pn->pat", w, P) + phase[None]
        f = np.sum(amp[None] * np.sin(arg), axis=2)
        return np.hstack([P, f])

    return ChartPatch(F, np.zeros(n), h_grid)
