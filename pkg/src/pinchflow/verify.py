"""Property suites behind ``pinchflow verify``.

Samples are split into fixed shards whose seeds are spawned from the root
seed, so results do not depend on how the shards are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from .errors import IndeterminateOrder
from .models import Cylinder, ModelGeometry, ProductSpheres, Sphere, curvature_frame
from .oracle import convergence_order, equivariant_chart, fd_curvature, fd_grad_curvature, model_chart, random_graph_patch
from .profile import ProfileState, profile_curvature
from .tensor import (
    CurvatureFrame,
    PinchingParams,
    c_n_constant,
    grad_norm2,
    kato_check,
    norm_A2,
    norm_H2,
    random_pinched_frames,
    reaction_inequality_check,
    reaction_terms,
    simons_residual_parallel,
)

SUITES = ("algebraic", "kato", "simons", "oracle")
MIN_ORDER = 1.9


@dataclass
class SuiteResult:
    suite: str
    samples: int
    seed: int
    failures: int = 0
    values: Dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.samples > 0

    def to_text(self) -> str:
        lines = [
            f"suite = {self.suite}",
            f"samples = {self.samples}",
            f"seed = {self.seed}",
            f"failures = {self.failures}",
            f"pass = {'true' if self.passed else 'false'}",
        ]
        for k, v in self.values.items():
            lines.append(f"{k} = {'%.17g' % v if isinstance(v, float) else v}")
        return "\n".join(lines) + "\n"


def _shard_sizes(samples: int, shards: int) -> List[int]:
    base, extra = divmod(samples, shards)
    return [base + (i < extra) for i in range(shards)]


def algebraic_suite(samples: int, seed: int, invert: bool = False) -> SuiteResult:
    """Reaction inequality and its refined bound on random pinched frames.

    One shard per ``(n, q)`` with ``n`` in 5..10 and ``q`` in 1..4, slope
    ``c = c_n``.  With ``invert`` the first inequality is tested in the
    wrong direction; this is a negative control that must fail.
    """
    combos = [(n, q) for n in range(5, 11) for q in range(1, 5)]
    seqs = np.random.SeedSequence(seed).spawn(len(combos))
    res = SuiteResult("algebraic", samples, seed)
    worst_lhs, worst_link = -math.inf, -math.inf
    for (n, q), ss, cnt in zip(combos, seqs, _shard_sizes(samples, len(combos))):
        if cnt == 0:
            continue
        rng = np.random.default_rng(ss)
        c = float(c_n_constant(n))
        p = PinchingParams(n, q, c)
        f = random_pinched_frames(rng, n, q, c, size=cnt)
        chk = reaction_inequality_check(f, p)
        ok = np.asarray(chk.ok) & np.asarray(chk.first_link) & np.asarray(chk.second_link)
        if invert:
            ok = np.asarray(chk.lhs) >= 0.0
        res.failures += int(np.count_nonzero(~ok))
        scale = (np.asarray(norm_A2(f)) + np.asarray(norm_H2(f))) ** 2
        worst_lhs = max(worst_lhs, float(np.max(np.asarray(chk.lhs) / scale)))
        worst_link = max(worst_link, float(np.max((np.asarray(chk.lhs) - np.asarray(chk.rhsBound)) / scale)))
    res.values["worstScaledLhs"] = worst_lhs
    res.values["worstScaledFirstLink"] = worst_link
    res.values["inverted"] = "true" if invert else "false"
    return res


def kato_suite(samples: int, seed: int, h_grid: float = 0.02) -> SuiteResult:
    """Kato inequality on random graph patches, with an FD error allowance.

    The tolerance for each patch is ten times the change of ``|grad A|^2``
    between spacings ``h`` and ``h/2`` (a Richardson error estimate).  The
    first patch is also refined three times and its convergence order
    recorded.
    """
    seqs = np.random.SeedSequence(seed).spawn(samples)
    res = SuiteResult("kato", samples, seed)
    worst = math.inf
    for k, ss in enumerate(seqs):
        rng = np.random.default_rng(ss)
        patch = random_graph_patch(rng, n=3, q=2, h_grid=h_grid)
        f1 = fd_grad_curvature(patch)
        f2 = fd_grad_curvature(patch.with_spacing(h_grid / 2))
        tol = 10.0 * abs(grad_norm2(f1.gradA) - grad_norm2(f2.gradA)) + 1e-12
        chk = kato_check(f2, tol)
        res.failures += int(not chk.ok)
        worst = min(worst, (chk.lhs - chk.rhs) / max(chk.lhs, 1e-300))
        if k == 0:
            f4 = fd_grad_curvature(patch.with_spacing(h_grid / 4))
            vals = [grad_norm2(f.gradA) for f in (f1, f2, f4)]
            try:
                order = convergence_order(*vals)
            except IndeterminateOrder:
                order = math.nan
            res.values["convergenceOrder"] = order
            if not order >= MIN_ORDER:
                res.failures += 1
    res.values["worstRelativeMargin"] = worst
    return res


def random_model(rng: np.random.Generator) -> ModelGeometry:
    kind = rng.integers(3)
    extra = int(rng.integers(0, 3))
    if kind == 0:
        n = int(rng.integers(2, 11))
        return Sphere(n, rng.uniform(0.5, 2.0), 1 + extra)
    if kind == 1:
        n = int(rng.integers(2, 11))
        return Cylinder(n, rng.uniform(0.5, 2.0), 1 + extra)
    p = int(rng.integers(1, 6))
    q2 = int(rng.integers(1, 6))
    return ProductSpheres(p, rng.uniform(0.5, 2.0), q2, rng.uniform(0.5, 2.0), 2 + extra)


def _random_rotation(rng, d):
    Q, R = np.linalg.qr(rng.normal(size=(d, d)))
    return Q * np.sign(np.diag(R))


def simons_suite(samples: int, seed: int, tol: float = 1e-10) -> SuiteResult:
    """Cubic Simons residual on randomly rotated catalog frames (all parallel)."""
    seqs = np.random.SeedSequence(seed).spawn(samples)
    res = SuiteResult("simons", samples, seed)
    worst = 0.0
    for ss in seqs:
        rng = np.random.default_rng(ss)
        m = random_model(rng)
        h = curvature_frame(m).h
        Ot, On = _random_rotation(rng, m.n), _random_rotation(rng, m.ambient_codim)
        h = np.einsum("ai,bj,ijv,wv->abw", Ot, Ot, h, On)
        r = float(np.max(np.abs(simons_residual_parallel(CurvatureFrame(h)))))
        worst = max(worst, r)
        res.failures += int(r > tol)
    res.values["maxResidual"] = worst
    return res


def _invariants(f: CurvatureFrame) -> np.ndarray:
    rt = reaction_terms(f)
    return np.array([norm_A2(f), norm_H2(f), rt.R1, rt.R2])


def oracle_suite(samples: int, seed: int) -> SuiteResult:
    """Oracle against catalog frames and against the equivariant closed form.

    Each sample compares frame invariants (``|A|^2, |H|^2, R1, R2``) from the
    FD oracle with the exact values at three spacings, requiring relative
    error below 1e-4 at the finest spacing and observed order >= 1.9.  Odd
    samples use a random catalog model; even samples a bumped product
    profile compared with its reduced equivariant chart.
    """
    seqs = np.random.SeedSequence(seed).spawn(samples)
    res = SuiteResult("oracle", samples, seed)
    worst_err, worst_order = 0.0, math.inf
    for k, ss in enumerate(seqs):
        rng = np.random.default_rng(ss)
        if k % 2:
            m = random_model(rng)
            exact = _invariants(curvature_frame(m))
            h0 = 0.2 / max(1.0 / r for r in m.radii)
            vals = [_invariants(fd_curvature(model_chart(m, h0 / 2**j))) for j in range(3)]
        else:
            n = int(rng.integers(3, 9))
            amp, R = rng.uniform(0.05, 0.3), rng.uniform(1.2, 2.5)
            uf = lambda x, a=amp: 1.0 + a * np.cos(2 * np.pi * x)
            cf = lambda x, R=R: np.column_stack([R * np.cos(2 * np.pi * x), R * np.sin(2 * np.pi * x)])
            N = 256
            x = np.arange(N) / N
            i = int(rng.integers(N))
            s = ProfileState(n=n, u=uf(x), chi=cf(x))
            exact = _invariants(profile_curvature(s, i, grad2=False))
            h0 = 0.08
            vals = [_invariants(fd_curvature(equivariant_chart(uf, cf, n, x[i], h0 / 2**j, reduced=True)))
                    for j in range(3)]
        err = np.abs(vals[-1] - exact) / np.abs(exact)
        worst_err = max(worst_err, float(np.max(err)))
        bad = bool(np.any(err > 1e-4))
        j = int(np.argmax(np.abs(exact)))
        try:
            order = convergence_order(*(v[j] for v in vals))
        except IndeterminateOrder:
            order = math.inf  # already exact to roundoff
        worst_order = min(worst_order, order)
        bad |= not order >= MIN_ORDER
        res.failures += int(bad)
    res.values["worstRelativeError"] = worst_err
    res.values["worstOrder"] = worst_order
    return res


RUNNERS: Dict[str, Callable[..., SuiteResult]] = {
    "algebraic": algebraic_suite,
    "kato": kato_suite,
    "simons": simons_suite,
    "oracle": oracle_suite,
}
