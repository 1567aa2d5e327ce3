"""Monitors for the quantitative estimates of pinched flows.

Each check turns an existence statement into something falsifiable on
recorded data: constants are measured on part of a run and then verified on
the rest, and curvature comparisons use profile arclength as the intrinsic
distance between orbits.

Check functions return :class:`CheckResult`, which is truthy iff the check
passed and carries the worst margin and where it occurred.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    BelowThreshold,
    InsufficientHistory,
    NoQualifyingPoints,
    NotPinched,
    PreconditionFailed,
    WindowExceedsDomain,
    ZeroMeanCurvature,
)
from .models import ModelGeometry, curvature_frame
from .profile import (
    ProfileGeometry,
    ProfileState,
    arclength,
    fd_derivative,
    max_H_point,
    profile_distance,
    profile_geometry,
)
from .tensor import CurvatureFrame, PinchingParams, grad_norm2, norm_A2, norm_H2


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    margin: float
    index: int = -1
    detail: str = ""

    def __bool__(self):
        return bool(self.ok)


# ---------------------------------------------------------------- parameters


def d_sharp(n: int, c_sharp: float) -> float:
    """Half/double neighbourhood size ``1 / (8 (n-1)^2 c#)``; infinite when ``c# = 0``."""
    if c_sharp < 0:
        raise ValueError("c_sharp must be nonnegative")
    if c_sharp == 0:
        return math.inf
    return 1.0 / (8.0 * (n - 1) ** 2 * c_sharp)


@dataclass(frozen=True)
class GradientEstimateConsts:
    """Measured constants of the gradient, second-derivative and curvature-ratio estimates."""

    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma3: float = 0.0
    gamma4: float = 0.0
    c_sharp: float = 0.0
    H_sharp: float = 0.0
    d_sharp: float = math.inf

    def __post_init__(self):
        vals = (self.gamma1, self.gamma2, self.gamma3, self.gamma4, self.c_sharp, self.H_sharp, self.d_sharp)
        if any(not (v >= 0) for v in vals):
            raise ValueError("estimate constants must be nonnegative")

    @classmethod
    def with_n(cls, n: int, **kw) -> "GradientEstimateConsts":
        """Build the constants with ``d_sharp`` derived from ``c_sharp``."""
        kw["d_sharp"] = d_sharp(n, kw.get("c_sharp", 0.0))
        return cls(**kw)


@dataclass(frozen=True)
class ParabolicNbhd:
    """Backward neighbourhood of spatial radius ``L r_hat`` and lookback ``theta r_hat^2``."""

    center: int
    center_time: float
    radius: float
    lookback: float
    r_hat: float

    def __post_init__(self):
        if not (self.lookback >= 0 and self.radius >= 0 and self.r_hat > 0):
            raise ValueError("invalid parabolic neighbourhood")


def parabolic_nbhd(s: ProfileState, i: int, L: float, theta: float,
                   geo: Optional[ProfileGeometry] = None) -> ParabolicNbhd:
    if geo is None:
        geo = profile_geometry(s, grad=False)
    H = float(geo.Hnorm[i])
    if not H > 0:
        raise ZeroMeanCurvature(f"|H| = 0 at {i}")
    r_hat = (s.n - 1) / H
    return ParabolicNbhd(i, s.time, L * r_hat, theta * r_hat * r_hat, r_hat)


@dataclass(frozen=True)
class NeckParams:
    eps_neck: float = 0.1
    k_reg: int = 2
    L: float = 2.0
    theta: float = 1.0

    def __post_init__(self):
        if not self.eps_neck > 0 or self.L < 1 or self.k_reg < 0 or self.theta < 0:
            raise ValueError("need eps_neck > 0, L >= 1, k_reg >= 0, theta >= 0")


@dataclass(frozen=True)
class DichotomyParams:
    n: int
    eta0: float
    c_sharp: float = 0.0

    def __post_init__(self):
        if not (0 < self.eta0 < 1.0 / (self.n - 1)):
            raise ValueError("eta0 must lie in (0, 1/(n-1))")
        if self.c_sharp < 0:
            raise ValueError("c_sharp must be nonnegative")

    @property
    def alpha0(self) -> float:
        return math.sqrt(2.0) * math.pi / math.sqrt(self.eta0)

    @property
    def gamma0(self) -> float:
        return 1.0 + self.c_sharp * self.alpha0


# ---------------------------------------------------------------- field access


def _fields(obj, grad=True, grad2=False, geo=None) -> Dict[str, np.ndarray]:
    """Pointwise ``A2, H2, gradA2, grad2A2`` arrays for a state, model or frame."""
    if isinstance(obj, ProfileState):
        if geo is None or (grad and geo.gradA2 is None) or (grad2 and geo.grad2A2 is None):
            geo = profile_geometry(obj, grad=grad or grad2, grad2=grad2)
        out = dict(A2=geo.A2, H2=geo.H2)
        if grad:
            out["gradA2"] = geo.gradA2
        if grad2:
            out["grad2A2"] = geo.grad2A2
        return out
    if isinstance(obj, ModelGeometry):
        obj = curvature_frame(obj)
    if isinstance(obj, CurvatureFrame):
        out = dict(A2=np.atleast_1d(norm_A2(obj)), H2=np.atleast_1d(norm_H2(obj)))
        if grad:
            out["gradA2"] = np.atleast_1d(grad_norm2(obj.gradA)) if obj.gradA is not None else None
        if grad2:
            out["grad2A2"] = np.atleast_1d(grad_norm2(obj.grad2A)) if obj.grad2A is not None else None
        return out
    raise TypeError(f"unsupported geometry {type(obj).__name__}")


# ---------------------------------------------------------------- gradient estimates


def kappa_n(n: int, c: float) -> float:
    return 3.0 / (n + 2) - c


def gradient_ratio_bound(n: int, c: float, eps_meas: float) -> float:
    """``3 c / (2 kappa (n + 2) eps)`` with ``kappa = 3/(n+2) - c``."""
    kap = kappa_n(n, c)
    if kap <= 0:
        raise ValueError("c must be below 3/(n+2)")
    if not eps_meas > 0:
        raise NotPinched("realized pinching margin must be positive")
    return 3.0 * c / (2.0 * kap * (n + 2) * eps_meas)


def gradient_ratio_monitor(s, p: PinchingParams, geo: Optional[ProfileGeometry] = None) -> Tuple[float, float]:
    """``(sup |grad A|^2 / g^2, closed-form bound)`` with ``g = c|H|^2 - |A|^2``.

    The bound uses the realized margin ``eps = min g / |A|^2``.

    Raises
    ------
    NotPinched
        If ``g <= 0`` somewhere.
    """
    f = _fields(s, grad=True, geo=geo)
    g = p.c * f["H2"] - f["A2"]
    if np.any(g <= 0):
        raise NotPinched("c|H|^2 - |A|^2 is not positive everywhere")
    eps_meas = float(np.min(g / f["A2"]))
    sup = float(np.max(f["gradA2"] / g**2))
    return sup, gradient_ratio_bound(p.n, p.c, eps_meas)


def _bound_check(lhs, rhs, scale, tol) -> CheckResult:
    margin = lhs - rhs
    j = int(np.argmax(margin))
    worst = float(margin[j])
    return CheckResult(worst <= tol * float(np.max(scale)) + 1e-300, worst, j)


def gradient_bound_check(s, g: GradientEstimateConsts, tol: float = 1e-9,
                         geo: Optional[ProfileGeometry] = None) -> CheckResult:
    """``max(|grad A|^2 - gamma1 |A|^4 - gamma2) <= tol * max|A|^4``."""
    f = _fields(s, grad=True, geo=geo)
    A4 = f["A2"] ** 2
    return _bound_check(f["gradA2"], g.gamma1 * A4 + g.gamma2, A4, tol)


def second_deriv_monitor(s, g: GradientEstimateConsts, tol: float = 1e-9,
                         geo: Optional[ProfileGeometry] = None) -> CheckResult:
    """``max(|grad^2 A|^2 - gamma3 |A|^6 - gamma4) <= tol * max|A|^6``."""
    f = _fields(s, grad=False, grad2=True, geo=geo)
    A6 = f["A2"] ** 3
    return _bound_check(f["grad2A2"], g.gamma3 * A6 + g.gamma4, A6, tol)


def fit_gamma(states: Sequence, power: int = 2, second: bool = False) -> Tuple[float, float]:
    """Fit ``|grad^k A|^2 <= gamma_a |A|^(2 power) + gamma_b`` on a calibration window.

    ``gamma_a`` is the largest scale-invariant ratio seen; ``gamma_b`` is the
    largest remaining excess, which is zero by construction of ``gamma_a``.
    Both are returned so a different split (for instance a capped
    ``gamma_a``) can be substituted by the caller.
    """
    if not states:
        raise ValueError("empty calibration window")
    key = "grad2A2" if second else "gradA2"
    ga = 0.0
    for st in states:
        f = _fields(st, grad=not second, grad2=second)
        ga = max(ga, float(np.max(f[key] / f["A2"] ** power)))
    return ga, 0.0


# ---------------------------------------------------------------- material tracking


def _geos(states: Sequence[ProfileState], geos=None, grad=True) -> List[ProfileGeometry]:
    if geos is not None:
        return list(geos)
    return [profile_geometry(st, grad=grad) for st in states]


def values_at_labels(s: ProfileState, values: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Evaluate grid ``values`` of ``s`` at material ``labels`` by periodic cubic interpolation.

    Labels advance by one per period, so ``labels - x`` is periodic and
    the labels are monotone along the grid.
    """
    if np.array_equal(query, s.labels):
        return np.asarray(values, dtype=float)
    lab = np.concatenate([s.labels, [s.labels[0] + 1.0]])
    v = np.concatenate([values, values[:1]])
    spl = CubicSpline(lab, v, bc_type="periodic")
    q = lab[0] + np.mod(np.asarray(query) - lab[0], 1.0)
    return spl(q)


def _dHdt(states, geos) -> List[np.ndarray]:
    """Finite-difference ``d|H|/dt`` at fixed material labels for each state.

    Only neighbours on the same grid (identical labels) are used: central
    differences when both qualify, one-sided when one does.  Across a regrid
    the interpolation error would swamp the change over one tiny step, so a
    state with no same-grid neighbour gets NaN.
    """
    m = len(states)
    out = []
    for k in range(m):
        same = [j for j in (k - 1, k + 1) if 0 <= j < m and np.array_equal(states[j].labels, states[k].labels)]
        if not same:
            out.append(np.full(states[k].N, np.nan))
            continue
        lo, hi = (same[0], same[-1]) if len(same) == 2 else (min(k, same[0]), max(k, same[0]))
        out.append((geos[hi].Hnorm - geos[lo].Hnorm) / (states[hi].time - states[lo].time))
    return out


def measure_csharp(states: Sequence[ProfileState], H_sharp: float, geos=None) -> float:
    """Smallest ``c#`` with ``|grad H| <= c# |H|^2`` and ``|d_t H| <= c# |H|^3`` where ``|H| >= H#``.

    ``d_t H`` is the time derivative of ``|H|`` at fixed material labels,
    estimated by differences in recorded time between states on the same
    grid; it is omitted where no such pair exists (a single state, or a
    state isolated between regrids).  Labels are material only when the run
    used no tangential redistribution.

    Raises
    ------
    NoQualifyingPoints
        If ``|H| < H#`` at every recorded point.
    """
    states = list(states)
    if not states:
        raise NoQualifyingPoints("empty series")
    geos = _geos(states, geos)
    dts = _dHdt(states, geos)
    c = -math.inf
    for geo, dt in zip(geos, dts):
        H = geo.Hnorm
        mask = H >= H_sharp
        if not np.any(mask):
            continue
        gH = np.sqrt(geo.gradH2[mask])
        c = max(c, float(np.max(gH / H[mask] ** 2)))
        if np.all(np.isfinite(dt[mask])):
            c = max(c, float(np.max(np.abs(dt[mask]) / H[mask] ** 3)))
    if c == -math.inf:
        raise NoQualifyingPoints(f"|H| < {H_sharp} everywhere")
    return c


def harnack_lower_bound(H0: float, c_sharp: float, d) -> np.ndarray:
    """``|H(p0)| / (1 + c# d |H(p0)|)``."""
    return H0 / (1.0 + c_sharp * np.asarray(d) * H0)


def harnack_check(s: ProfileState, i0: int, c_sharp: float, H_sharp: float, gamma: float,
                  tol: float = 1e-9, geo: Optional[ProfileGeometry] = None) -> CheckResult:
    """Curvature lower bound around a high-curvature point.

    Within profile distance ``(gamma - 1)/(c# |H(i0)|)`` of ``i0`` every point
    must satisfy ``|H(q)| >= |H(i0)| / (1 + c# d |H(i0)|)`` (and so
    ``>= |H(i0)|/gamma``), up to ``tol * |H(i0)|``.

    Raises
    ------
    BelowThreshold
        If ``|H(i0)| < gamma H#``.
    """
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    if geo is None:
        geo = profile_geometry(s, grad=False)
    H = geo.Hnorm
    H0 = float(H[i0])
    if H0 < gamma * H_sharp:
        raise BelowThreshold(f"|H({i0})| = {H0:.6g} < gamma H# = {gamma * H_sharp:.6g}")
    d = profile_distance(s, i0, geo)
    radius = math.inf if c_sharp == 0 else (gamma - 1.0) / (c_sharp * H0)
    ball = d <= radius
    lower = harnack_lower_bound(H0, c_sharp, d)
    margin = np.where(ball, lower - H, -np.inf)
    j = int(np.argmax(margin))
    worst = float(margin[j])
    return CheckResult(worst <= tol * H0, worst, j, f"radius={radius:.6g} points={int(ball.sum())}")


def half_double_check(states: Sequence[ProfileState], i0: int, k0: int, c_sharp: float, H_sharp: float,
                      tol: float = 1e-9, geos=None, L: Optional[float] = None,
                      theta: Optional[float] = None) -> CheckResult:
    """``|H|/2 <= |H(q, s)| <= 2|H|`` on the backward neighbourhood of point ``i0`` at state ``k0``.

    The neighbourhood has radius ``L r_hat`` (profile distance at the centre
    time) and lookback ``theta r_hat^2``; both multiples default to ``d#``.
    Earlier states are sampled at the material labels of the ball.

    Raises
    ------
    BelowThreshold
        If ``|H(i0)| < H#`` at the centre time.
    InsufficientHistory
        If the recorded states do not reach back over the whole lookback.
    """
    states = list(states)
    s0 = states[k0]
    n = s0.n
    dS = d_sharp(n, c_sharp)
    L = dS if L is None else L
    theta = dS if theta is None else theta
    geo_c = profile_geometry(s0, grad=False) if geos is None else geos[k0]
    H0 = float(geo_c.Hnorm[i0])
    if H0 < H_sharp:
        raise BelowThreshold(f"|H({i0})| = {H0:.6g} < H# = {H_sharp:.6g}")
    nb = parabolic_nbhd(s0, i0, L, theta, geo_c)
    t_start = s0.time - nb.lookback
    if not math.isfinite(t_start) or states[0].time > t_start + 1e-15 * max(1.0, abs(t_start)):
        raise InsufficientHistory(f"history starts at {states[0].time:.6g}, neighbourhood needs {t_start:.6g}")
    ball = profile_distance(s0, i0, geo_c) <= nb.radius
    labels = s0.labels[ball]
    worst, where = -math.inf, -1
    for k in range(k0, -1, -1):
        st = states[k]
        if st.time < t_start:
            break
        geo = profile_geometry(st, grad=False) if geos is None else geos[k]
        Hq = values_at_labels(st, geo.Hnorm, labels) if k != k0 else geo.Hnorm[ball]
        m = np.maximum(0.5 * H0 - Hq, Hq - 2.0 * H0)
        j = int(np.argmax(m))
        if m[j] > worst:
            worst, where = float(m[j]), k
    return CheckResult(worst <= tol * H0, worst, where, f"d#={dS:.6g} radius={nb.radius:.6g} lookback={nb.lookback:.6g}")


# ---------------------------------------------------------------- necks and trends


def _window(s: ProfileState, i0: int, half_width: float, geo: ProfileGeometry) -> np.ndarray:
    """Indices of the arclength window around ``i0``, in order along the curve."""
    N = s.N
    sc = arclength(s, geo)
    if s.periodic:
        seg = np.diff(sc)
        left, right = [], []
        acc = 0.0
        j = i0
        while True:
            acc += seg[(j - 1) % N]
            j = (j - 1) % N
            if acc > half_width:
                break
            left.append(j)
        acc = 0.0
        j = i0
        while True:
            acc += seg[j]
            j = (j + 1) % N
            if acc > half_width:
                break
            right.append(j)
        if len(left) + len(right) + 1 > N:
            raise WindowExceedsDomain(f"window of half-width {half_width:.6g} wraps around the profile")
        return np.array(left[::-1] + [i0] + right)
    d = np.abs(sc - sc[i0])
    inside = np.where(d <= half_width)[0]
    lo, hi = inside.min(), inside.max()
    if lo == 0 or hi == N - 1 or np.isnan(sc[lo - 1]) or np.isnan(sc[hi + 1]):
        raise WindowExceedsDomain("window reaches the edge of the open chart")
    return np.arange(lo, hi + 1)


def neck_detect(s: ProfileState, i0: int, params: NeckParams = NeckParams(),
                geo: Optional[ProfileGeometry] = None) -> Tuple[bool, float]:
    """Test whether the region around ``i0`` is close to a round cylinder.

    After rescaling by ``r_hat = (n-1)/|H(i0)|``, the deviation is the
    largest of ``|u / r_hat - 1|``, ``|u_s|``, ``|kappa| r_hat`` and
    ``(n-1) | |A|^2/|H|^2 - 1/(n-1) |`` over the arclength window of
    half-width ``L r_hat``.  A neck additionally needs the rescaled
    arclength derivatives of these quantities, up to order ``k_reg``, to be
    at most ``eps_neck``.

    Raises
    ------
    ZeroMeanCurvature
        If ``|H(i0)| = 0``.
    WindowExceedsDomain
        If the window wraps around the profile or leaves an open chart.
    """
    if geo is None:
        geo = profile_geometry(s, grad=False)
    n = s.n
    H0 = float(geo.Hnorm[i0])
    if not H0 > 0:
        raise ZeroMeanCurvature(f"|H| = 0 at {i0}")
    r_hat = (n - 1) / H0
    win = _window(s, i0, params.L * r_hat, geo)
    kap = np.linalg.norm(geo.K, axis=1)
    qs = [
        s.u / r_hat - 1.0,
        geo.u_s,
        kap * r_hat,
        (n - 1) * (geo.ratio - 1.0 / (n - 1)),
    ]
    dev = max(float(np.max(np.abs(q[win]))) for q in qs)
    deriv = 0.0
    if params.k_reg > 0:
        for q in qs:
            cur = np.nan_to_num(q)
            for _ in range(params.k_reg):
                cur = fd_derivative(cur, 1, s.dx, 4, s.periodic) * r_hat / geo.lam
                deriv = max(deriv, float(np.max(np.abs(cur[win]))))
    return bool(dev <= params.eps_neck and deriv <= params.eps_neck), dev


def neck_count(s: ProfileState, params: NeckParams = NeckParams(),
               geo: Optional[ProfileGeometry] = None) -> int:
    """Number of strict local maxima of ``|H|`` that pass :func:`neck_detect`."""
    if geo is None:
        geo = profile_geometry(s, grad=False)
    H = geo.Hnorm
    peaks = np.where((H > np.roll(H, 1)) & (H >= np.roll(H, -1)))[0]
    count = 0
    for i in peaks:
        try:
            ok, _ = neck_detect(s, int(i), params, geo)
        except WindowExceedsDomain:
            ok = False
        count += int(ok)
    return count


@dataclass
class TrendResult:
    maxH: np.ndarray
    ratio: np.ndarray
    envelope: np.ndarray
    asymptote: float
    slope: float

    def within(self, target: float, tol: float, H_min: float) -> bool:
        """Every recorded ratio with ``maxH >= H_min`` and the asymptote lie within ``tol`` of ``target``."""
        sel = self.maxH >= H_min
        if not np.any(sel):
            return False
        ok = np.all(np.abs(self.ratio[sel] - target) <= tol)
        return bool(ok and abs(self.asymptote - target) <= tol)


def cylindrical_trend(maxH: Sequence[float], ratio: Sequence[float], top_fraction: float = 0.5) -> TrendResult:
    """Upper envelope of the ratio at the max-|H| point, and its fitted limit.

    ``envelope[j]`` is the largest ratio recorded at curvature ``>= maxH[j]``.
    The asymptote comes from a least-squares fit ``ratio = a + b / maxH^2``
    over the records whose ``log maxH`` lies in the top ``top_fraction`` of
    the observed range.
    """
    H = np.asarray(maxH, dtype=float)
    r = np.asarray(ratio, dtype=float)
    if H.size == 0 or H.shape != r.shape:
        raise ValueError("need equally long, nonempty series")
    order = np.argsort(H, kind="stable")
    env_sorted = np.maximum.accumulate(r[order][::-1])[::-1]
    env = np.empty_like(r)
    env[order] = env_sorted
    logH = np.log(H)
    cut = logH.max() - top_fraction * (logH.max() - logH.min())
    sel = logH >= cut
    X = np.column_stack([np.ones(sel.sum()), 1.0 / H[sel] ** 2])
    if sel.sum() < 2 or np.ptp(X[:, 1]) <= 1e-14 * np.max(X[:, 1]):
        a, b = float(np.mean(r[sel])), 0.0
    else:
        Xs = X / X.max(axis=0)
        coef, *_ = np.linalg.lstsq(Xs, r[sel], rcond=None)
        a, b = float(coef[0] / X[:, 0].max()), float(coef[1] / X[:, 1].max())
    return TrendResult(H, r, env, a, b)


def trend_from_rows(rows: Sequence[dict], **kw) -> TrendResult:
    return cylindrical_trend([r["maxH"] for r in rows], [r["ratioAtMaxH"] for r in rows], **kw)


# ---------------------------------------------------------------- dichotomy


def chen_kmin(f) -> Union[float, np.ndarray]:
    """Lower bound ``(|H|^2/(n-1) - |A|^2) / 2`` for the smallest sectional curvature."""
    if isinstance(f, ModelGeometry):
        f = curvature_frame(f)
    return 0.5 * (norm_H2(f) / (f.n - 1) - norm_A2(f))


def chen_kmin_profile(geo: ProfileGeometry) -> np.ndarray:
    return 0.5 * (geo.H2 / (geo.n - 1) - geo.A2)


COMPACT = "Compact"
NECK_CANDIDATE = "NeckCandidate"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class DichotomyResult:
    kind: str
    index: int = -1
    H_center: float = math.nan
    H_candidate: float = math.nan
    curvature_ok: bool = True
    searched: int = 0


def dichotomy_classify(s: Union[ProfileState, ModelGeometry], i0: int, dp: DichotomyParams,
                       c_sharp: Optional[float] = None, H_sharp: float = 0.0,
                       geo: Optional[ProfileGeometry] = None) -> DichotomyResult:
    """Classify around ``i0``: far from cylindrical everywhere nearby, or a nearby neck.

    Every point within profile distance ``alpha0 / |H(i0)|`` is searched.
    The first point of largest ratio with ratio ``>= 1/(n-1) - eta0`` is
    returned as a neck candidate, together with whether
    ``|H(q)| >= |H(i0)|/gamma0``.  Otherwise the result is ``Compact`` only
    if the sectional curvature lower bound is positive throughout the ball,
    and ``Inconclusive`` if not.

    A :class:`ModelGeometry` is homogeneous, so its single "point" stands
    for the whole ball.

    Raises
    ------
    PreconditionFailed
        If the ratio at ``i0`` is not below ``1/(n-1) - eta0`` or
        ``|H(i0)| < gamma0 H#``.
    """
    if c_sharp is not None and c_sharp != dp.c_sharp:
        dp = DichotomyParams(dp.n, dp.eta0, c_sharp)
    n = dp.n
    thresh = 1.0 / (n - 1) - dp.eta0
    if isinstance(s, ModelGeometry):
        f = curvature_frame(s)
        H = np.array([math.sqrt(norm_H2(f))])
        ratio = np.array([norm_A2(f) / norm_H2(f)])
        kmin = np.array([chen_kmin(f)])
        dist = np.zeros(1)
        i0 = 0
    else:
        if geo is None:
            geo = profile_geometry(s, grad=False)
        H, ratio, kmin = geo.Hnorm, geo.ratio, chen_kmin_profile(geo)
        dist = profile_distance(s, i0, geo)
    H0 = float(H[i0])
    if not ratio[i0] < thresh:
        raise PreconditionFailed(f"ratio {ratio[i0]:.6g} at {i0} is not below {thresh:.6g}")
    if H0 < dp.gamma0 * H_sharp:
        raise PreconditionFailed(f"|H| = {H0:.6g} below gamma0 H# = {dp.gamma0 * H_sharp:.6g}")
    ball = np.where(dist <= dp.alpha0 / H0)[0]
    cand = ball[ratio[ball] >= thresh]
    if cand.size:
        q = int(cand[np.argmax(ratio[cand])])
        Hq = float(H[q])
        return DichotomyResult(NECK_CANDIDATE, q, H0, Hq, Hq >= H0 / dp.gamma0, int(ball.size))
    if np.all(kmin[ball] > 0):
        return DichotomyResult(COMPACT, -1, H0, searched=int(ball.size))
    return DichotomyResult(INCONCLUSIVE, int(ball[np.argmin(kmin[ball])]), H0, searched=int(ball.size))


# ---------------------------------------------------------------- report


@dataclass
class EstimateReport:
    """Measured constants and check outcomes, serialized as ``key = value`` lines."""

    values: Dict[str, object] = field(default_factory=dict)

    def set(self, key: str, value) -> None:
        self.values[key] = value

    def check(self, name: str, result) -> None:
        ok = bool(result)
        self.values[f"{name}.pass"] = ok
        if isinstance(result, CheckResult):
            self.values[f"{name}.margin"] = result.margin
            self.values[f"{name}.index"] = result.index

    @property
    def all_passed(self) -> bool:
        return all(v for k, v in self.values.items() if k.endswith(".pass"))

    def to_text(self) -> str:
        lines = []
        for k, v in self.values.items():
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = "%.17g" % v
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EstimateReport":
        vals: Dict[str, object] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            k, v = k.strip(), v.strip()
            if v in ("true", "false"):
                vals[k] = v == "true"
                continue
            try:
                vals[k] = int(v)
            except ValueError:
                try:
                    vals[k] = float(v)
                except ValueError:
                    vals[k] = v
        return cls(vals)
