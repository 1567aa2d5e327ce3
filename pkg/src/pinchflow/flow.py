"""Mean curvature flow of equivariant profiles.

The immersion ``(u w, chi)`` moves with velocity ``H``; on the profile curve
this is ``gamma_t = K + (n - 1) S`` (see :mod:`pinchflow.profile`).  Time
stepping is classical fourth-order Runge-Kutta with the CFL-limited step
``dt = cfl * ds_min^2 / (2 (n + 1))``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import Blowup, DegenerateImmersion, ZeroMeanCurvature
from .profile import ProfileGeometry, ProfileState, max_H_point, profile_geometry

log = logging.getLogger(__name__)

STEP = "Step"
RESCALED = "Rescaled"
SINGULARITY = "SingularityDetected"
VIOLATION = "InvariantViolation"


class SingularityDetected(Blowup):
    """The flow can no longer be resolved: dt underflow or an unresolved neck."""

    def __init__(self, msg, index=-1, value=math.nan):
        super().__init__(msg)
        self.index = index
        self.value = value


@dataclass
class FlowConfig:
    cfl_number: float = 0.4
    derivative_order: int = 4
    t_end: float = math.inf
    stop_when_max_H_exceeds: float = math.inf
    regrid_every: int = 0
    tangential_redistribution: bool = False
    regrid_curvature_weight: float = 0.0
    max_steps: int = 10_000_000
    max_halvings: int = 40
    unresolved_threshold: float = 4.0
    record_every: int = 1
    keep_snapshots: bool = False

    def __post_init__(self):
        if not (0 < self.cfl_number <= 1):
            raise ValueError("cfl_number must lie in (0, 1]")
        if self.derivative_order not in (2, 4):
            raise ValueError("derivative_order must be 2 or 4")
        if self.t_end < 0 or self.stop_when_max_H_exceeds <= 0:
            raise ValueError("t_end must be >= 0 and the |H| stop threshold positive")
        if self.regrid_every < 0 or self.record_every < 1:
            raise ValueError("regrid_every must be >= 0 and record_every >= 1")
        if self.regrid_curvature_weight < 0:
            raise ValueError("regrid_curvature_weight must be >= 0")


@dataclass
class FlowEvent:
    kind: str
    time: float
    index: int = -1
    payload: float = math.nan
    note: str = ""


@dataclass
class RunResult:
    state: ProfileState
    events: List[FlowEvent]
    rows: List[dict]
    initial: dict
    snapshots: List[ProfileState] = field(default_factory=list)
    status: str = "completed"
    steps: int = 0

    @property
    def singular(self) -> bool:
        return self.status == SINGULARITY


def velocity(s: ProfileState, tangential: bool = False, accuracy: int = 4,
             geo: Optional[ProfileGeometry] = None) -> np.ndarray:
    """Profile velocity: the mean curvature vector, plus an optional tangential term.

    The tangential term is the tangential part of ``gamma_xx / |gamma_x|^2``;
    it pulls the parametrization towards constant speed without moving the
    image curve.
    """
    if geo is None:
        geo = profile_geometry(s, accuracy, grad=False)
    v = geo.Hvec.copy()
    if tangential:
        from .profile import _derivatives

        _, b = _derivatives(s, 2, accuracy)
        bt = np.einsum("ni,ni->n", b, geo.T) / geo.lam**2
        v += bt[:, None] * geo.T
    return v


def stable_dt(s: ProfileState, cfg: FlowConfig, geo: Optional[ProfileGeometry] = None) -> float:
    if geo is None:
        geo = profile_geometry(s, cfg.derivative_order, grad=False)
    ds_min = float(np.min(geo.lam)) * s.dx
    return cfg.cfl_number * ds_min**2 / (2.0 * (s.n + 1))


def _check_resolved(s: ProfileState, geo: ProfileGeometry, cfg: FlowConfig):
    ds = geo.lam * s.dx
    crit = geo.A2 * ds**2
    j = int(np.argmax(crit))
    if crit[j] > cfg.unresolved_threshold:
        raise SingularityDetected(f"unresolved curvature: |A|^2 ds^2 = {crit[j]:.3g} at {j}", j, float(crit[j]))


def _rk4(s: ProfileState, dt: float, cfg: FlowConfig) -> ProfileState:
    acc = cfg.derivative_order
    tang = cfg.tangential_redistribution
    g0 = s.gamma()

    def f(g):
        st = s.with_gamma(g)
        return velocity(st, tang, acc)

    k1 = f(g0)
    k2 = f(g0 + 0.5 * dt * k1)
    k3 = f(g0 + 0.5 * dt * k2)
    k4 = f(g0 + dt * k3)
    g1 = g0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return s.with_gamma(g1, time=s.time + dt)


def step(s: ProfileState, cfg: FlowConfig, dt: Optional[float] = None):
    """Advance one accepted explicit step.

    Returns ``(new_state, dt_used)``.  A trial step is rejected and ``dt``
    halved when ``max|A|^2 dt > 1`` or when the result leaves the admissible
    set (nonpositive radius, non-finite values, degenerate parametrization).

    Raises
    ------
    SingularityDetected
        After ``cfg.max_halvings`` rejections, or when the curvature is no
        longer resolved by the grid.
    """
    if not s.periodic:
        raise ValueError("open charts cannot be evolved")
    geo = profile_geometry(s, cfg.derivative_order, grad=False)
    _check_resolved(s, geo, cfg)
    if dt is None:
        dt = stable_dt(s, cfg, geo)
    maxA2 = float(np.max(geo.A2))
    for _ in range(cfg.max_halvings + 1):
        if maxA2 * dt <= 1.0:
            try:
                with np.errstate(all="ignore"):
                    new = _rk4(s, dt, cfg)
                if np.all(np.isfinite(new.u)) and np.all(np.isfinite(new.chi)) and np.all(new.u > 0):
                    profile_geometry(new, cfg.derivative_order, grad=False)
                    return new, dt
            except (DegenerateImmersion, ValueError, FloatingPointError):
                pass
        dt *= 0.5
    i, _ = max_H_point(s, geo)
    raise SingularityDetected(f"time step underflow after {cfg.max_halvings} halvings", i, dt)


def regrid(s: ProfileState, curvature_weight: float = 0.0, accuracy: int = 4, smoothing: int = 4) -> ProfileState:
    """Resample the profile so grid points equidistribute ``lam (1 + w |A| / mean|A|)``.

    With ``w = 0`` the points are uniform in arclength.  Positions are
    interpolated with periodic cubic splines; labels follow the same map.
    """
    N = s.N
    geo = profile_geometry(s, accuracy, grad=False)
    A = np.sqrt(geo.A2)
    ds = geo.lam * s.dx
    Abar = float(np.sum(A * ds) / np.sum(ds))
    rho = geo.lam * (1.0 + curvature_weight * A / Abar)
    for _ in range(smoothing):
        rho = 0.25 * (np.roll(rho, 1) + 2 * rho + np.roll(rho, -1))
    x = np.arange(N + 1) / N
    cell = 0.5 * (rho + np.roll(rho, -1)) * s.dx
    Phi = np.concatenate([[0.0], np.cumsum(cell)])
    target = np.arange(N) / N * Phi[-1]
    xnew = PchipInterpolator(Phi, x)(target)
    xnew[0] = 0.0

    shift = np.concatenate([[0.0], s.chi_shift])
    g = s.gamma()
    gp = g - s.x[:, None] * shift[None, :]
    gp = np.vstack([gp, gp[:1]])
    gnew = CubicSpline(x, gp, bc_type="periodic", axis=0)(xnew) + xnew[:, None] * shift[None, :]
    lab = np.concatenate([s.labels - s.x, [s.labels[0] - s.x[0]]])
    lab_new = CubicSpline(x, lab, bc_type="periodic")(xnew) + xnew
    return s.with_gamma(gnew, labels=lab_new)


def summarize(s: ProfileState, geo: ProfileGeometry) -> dict:
    i, Hmax = max_H_point(s, geo)
    ratio = geo.ratio
    return dict(
        t=s.time,
        maxH=Hmax,
        iH=i,
        maxA2=float(np.max(geo.A2)),
        maxRatio=float(np.max(ratio)),
        ratioAtMaxH=float(ratio[i]),
        minU=float(np.min(s.u)),
    )


Monitor = Callable[[ProfileState, ProfileGeometry], Optional[dict]]


def run(s: ProfileState, cfg: FlowConfig, monitors: Sequence[Monitor] = ()) -> RunResult:
    """Integrate until ``t_end``, the ``|H|`` stop threshold, or a singularity.

    Each monitor is called with the state and its geometry (including
    ``nabla A``) on every recorded step; the dict it returns is merged into
    the time-series row.  A ``"violation"`` entry in that dict produces an
    ``InvariantViolation`` event.  Step failures end the run with status
    ``SingularityDetected`` and a matching event; they are never swallowed.
    """
    acc = cfg.derivative_order
    geo0 = profile_geometry(s, acc, grad=True)
    initial = summarize(s, geo0)
    res = RunResult(state=s, events=[], rows=[], initial=initial)
    if cfg.keep_snapshots:
        res.snapshots.append(s)
    t_end = s.time + cfg.t_end if math.isfinite(cfg.t_end) else math.inf
    cur = s
    nsteps = 0
    while True:
        if cur.time >= t_end - 1e-15 * max(1.0, abs(t_end)):
            res.status = "completed"
            break
        if nsteps >= cfg.max_steps:
            res.status = "max_steps"
            break
        if cfg.regrid_every and nsteps % cfg.regrid_every == 0:
            cur = regrid(cur, cfg.regrid_curvature_weight, acc)
        try:
            dt_max = t_end - cur.time
            dt = min(stable_dt(cur, cfg), dt_max)
            cur, dt = step(cur, cfg, dt)
        except SingularityDetected as exc:
            res.events.append(FlowEvent(SINGULARITY, cur.time, exc.index, exc.value, str(exc)))
            res.status = SINGULARITY
            log.info("singularity at t=%.6g: %s", cur.time, exc)
            break
        nsteps += 1
        hit = False
        if math.isfinite(cfg.stop_when_max_H_exceeds):
            geo_c = profile_geometry(cur, acc, grad=False)
            hit = float(np.max(geo_c.Hnorm)) >= cfg.stop_when_max_H_exceeds
        if hit or nsteps % cfg.record_every == 0 or cur.time >= t_end:
            geo = profile_geometry(cur, acc, grad=True)
            row = summarize(cur, geo)
            row["dt"] = dt
            row["event"] = STEP
            for mon in monitors:
                extra = mon(cur, geo) or {}
                viol = extra.pop("violation", None)
                if viol:
                    res.events.append(FlowEvent(VIOLATION, cur.time, row["iH"], math.nan, str(viol)))
                    row["event"] = VIOLATION
                row.update(extra)
            res.rows.append(row)
            if cfg.keep_snapshots:
                res.snapshots.append(cur)
        if hit:
            res.status = "threshold"
            break
    res.state = cur
    res.steps = nsteps
    return res


def position_bound_check(s: ProfileState, R0: float, tol: float = 1e-6) -> bool:
    """``max |F|^2 <= R0^2 - 2 n t + tol`` with ``|F|^2 = u^2 + |chi|^2``."""
    F2 = s.u**2 + np.sum(s.chi**2, axis=1)
    return bool(np.max(F2) <= R0 * R0 - 2.0 * s.n * s.time + tol)


def max_radius(s: ProfileState) -> float:
    return float(np.sqrt(np.max(s.u**2 + np.sum(s.chi**2, axis=1))))


@dataclass(frozen=True)
class AffineMap:
    """``F_rescaled = (F - origin) / scale``, ``tau = (t - t0) / scale^2``.

    ``origin`` lives in the axial (chi) coordinates only; the radial
    coordinate is scaled about the symmetry axis.
    """

    scale: float
    origin: np.ndarray
    t0: float

    def to_original(self, u: np.ndarray, chi: np.ndarray, tau: float):
        return self.scale * u, self.scale * chi + self.origin, self.t0 + self.scale**2 * tau


def parabolic_rescale(s: ProfileState, i: int, threshold: float = 0.0, accuracy: int = 4):
    """Blow up around grid point ``i`` so that ``|H| = n - 1`` there.

    The scale is ``r_hat = (n - 1) / |H(i)|``.  The axial coordinates are
    translated so the orbit of point ``i`` sits at ``chi = 0``; translating
    the radial coordinate would break the rotational symmetry, so it is only
    scaled.  Time restarts at zero; the returned :class:`AffineMap` converts
    back.

    Raises
    ------
    ZeroMeanCurvature
        If ``|H(i)|`` is zero or not above ``threshold``.
    """
    geo = profile_geometry(s, accuracy, grad=False)
    Hi = float(geo.Hnorm[i])
    if not Hi > 0.0:
        raise ZeroMeanCurvature(f"|H| = 0 at {i}")
    if Hi <= threshold:
        raise ZeroMeanCurvature(f"|H({i})| = {Hi:.6g} is not above the rescaling threshold {threshold:.6g}")
    r_hat = (s.n - 1) / Hi
    origin = s.chi[i].copy()
    new = s.copy(
        u=s.u / r_hat,
        chi=(s.chi - origin) / r_hat,
        chi_shift=s.chi_shift / r_hat,
        time=0.0,
        dx=s.dx,
    )
    return new, AffineMap(r_hat, origin, s.time)
