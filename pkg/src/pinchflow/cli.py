"""Command line entry point: ``pinchflow {verify, run, report}``.

Exit codes: 0 success, 1 a property or invariant failed, 2 bad arguments or
configuration, 3 numerical blowup that was not classified as a singularity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .config import Scenario, load_scenario
from .errors import (
    Blowup,
    BelowThreshold,
    ConfigError,
    InsufficientHistory,
    NoQualifyingPoints,
    NotPinched,
    PreconditionFailed,
)
from .estimates import (
    DichotomyParams,
    EstimateReport,
    GradientEstimateConsts,
    NeckParams,
    d_sharp,
    dichotomy_classify,
    fit_gamma,
    gradient_bound_check,
    gradient_ratio_monitor,
    half_double_check,
    harnack_check,
    measure_csharp,
    neck_count,
    second_deriv_monitor,
    trend_from_rows,
)
from .flow import SINGULARITY, STEP, VIOLATION, FlowConfig, RunResult, max_radius, position_bound_check, run
from .models import ModelGeometry, curvature_frame, extinction_time, lifespan_bound, shrink_exact
from .profile import ProfileState, max_H_point, profile_geometry
from .tensor import norm_A2, norm_H2
from .verify import RUNNERS, SUITES

log = logging.getLogger("pinchflow")

COLUMNS = ("t", "dt", "maxH", "maxA2", "maxRatio", "minQ", "minU", "gradRatio", "neckCount", "event")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BLOWUP = 0, 1, 2, 3

# pinching preservation tolerance, relative to max |H|^2
PINCH_TOL = 1e-6


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path: Path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.get(c, math.nan)) for c in COLUMNS])


def read_csv(path: Path) -> List[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({k: (v if k == "event" else float(v)) for k, v in r.items()})
    return out


def _neck_params(sc: Scenario) -> NeckParams:
    kw = {}
    for key, attr, conv in (("epsNeck", "eps_neck", float), ("kReg", "k_reg", int), ("L", "L", float),
                            ("theta", "theta", float)):
        if key in sc.neck:
            kw[attr] = conv(sc.neck[key])
    return NeckParams(**kw)


@dataclass
class ScenarioOutcome:
    rows: List[dict]
    report: EstimateReport
    exit_code: int
    result: Optional[RunResult] = None
    notes: List[str] = field(default_factory=list)


# ---------------------------------------------------------------- model scenarios


def _run_model(sc: Scenario) -> ScenarioOutcome:
    m: ModelGeometry = sc.geometry
    p = sc.pinching
    T = extinction_time(m)
    t_stop = min(sc.flow.t_end, T)
    rep = EstimateReport()
    rep.set("name", sc.name)
    rep.set("geometry", str(m))
    rows = []
    k = sc.model_samples
    times = np.linspace(0.0, t_stop, k + 1)[1:]
    prev = 0.0
    for t in times:
        if t >= T:
            break
        mt = shrink_exact(m, float(t))
        f = curvature_frame(mt)
        A2, H2 = norm_A2(f), norm_H2(f)
        rows.append(dict(t=float(t), dt=float(t - prev), maxH=math.sqrt(H2), maxA2=A2, maxRatio=A2 / H2,
                         minQ=p.c * H2 - A2 - p.a, minU=min(mt.radii), gradRatio=0.0, neckCount=math.nan,
                         event=STEP))
        prev = float(t)
    singular = t_stop >= T
    if singular and rows:
        rows[-1]["event"] = SINGULARITY
    bound = lifespan_bound(m)
    rep.set("status", SINGULARITY if singular else "completed")
    rep.set("lifespan", T)
    rep.set("lifespanBound", bound)
    rep.set("lifespan.pass", bool(T <= bound * (1 + 1e-15)))
    if rows:
        ratios = np.array([r["maxRatio"] for r in rows])
        rep.set("maxRatioSpread", float(np.ptp(ratios)))
    if "pinching" in sc.monitors and rows:
        worst = min(r["minQ"] / r["maxH"] ** 2 for r in rows)
        rep.set("pinching.minScaledMargin", worst)
        rep.set("pinching.pass", bool(worst >= -PINCH_TOL))
    return ScenarioOutcome(rows, rep, EXIT_OK if rep.all_passed else EXIT_FAIL)


# ---------------------------------------------------------------- profile scenarios


def _make_monitor(sc: Scenario, R0: float):
    p = sc.pinching
    mons = set(sc.monitors)
    neckp = _neck_params(sc)

    def monitor(state: ProfileState, geo):
        out = {}
        margin = p.c * geo.H2 - geo.A2 - p.a
        out["minQ"] = float(np.min(margin))
        viol = []
        if "pinching" in mons and out["minQ"] < -PINCH_TOL * float(np.max(geo.H2)):
            viol.append("pinching")
        if "positionBound" in mons and not position_bound_check(state, R0):
            viol.append("positionBound")
        if "gradientRatio" in mons:
            try:
                sup, bound = gradient_ratio_monitor(state, p, geo)
                out["gradRatio"], out["gradBound"] = sup, bound
                if sup > bound:
                    viol.append("gradientRatio")
            except NotPinched:
                out["gradRatio"] = math.nan
                viol.append("gradientRatio")
        if "neck" in mons:
            out["neckCount"] = neck_count(state, neckp, geo)
        if viol:
            out["violation"] = ",".join(viol)
        return out

    return monitor


def _post_gradient(sc, res, rep):
    snaps = res.snapshots
    if len(snaps) < 4:
        rep.set("gradientBound.status", "insufficientHistory")
        rep.set("gradientBound.pass", False)
        return
    t_half = snaps[0].time + 0.5 * (snaps[-1].time - snaps[0].time)
    first = [s for s in snaps if s.time <= t_half]
    second = [s for s in snaps if s.time > t_half]
    if "gradientBound" in sc.monitors:
        g1, g2 = fit_gamma(first, 2)
        consts = GradientEstimateConsts(gamma1=g1, gamma2=g2)
        rep.set("gradientBound.gamma1", g1)
        rep.set("gradientBound.gamma2", g2)
        results = [gradient_bound_check(s, consts) for s in second]
        bad = [r for r in results if not r.ok]
        rep.set("gradientBound.secondHalfRatio", fit_gamma(second, 2)[0])
        rep.set("gradientBound.failingStates", len(bad))
        rep.check("gradientBound", bad[0] if bad else max(results, key=lambda r: r.margin))
    if "secondDeriv" in sc.monitors:
        step = max(1, len(snaps) // 200)
        sub1 = first[::step] or first
        sub2 = second[::step] or second
        g3, g4 = fit_gamma(sub1, 3, second=True)
        consts = GradientEstimateConsts(gamma3=g3, gamma4=g4)
        rep.set("secondDeriv.gamma3", g3)
        rep.set("secondDeriv.gamma4", g4)
        results = [second_deriv_monitor(s, consts) for s in sub2]
        bad = [r for r in results if not r.ok]
        rep.set("secondDeriv.secondHalfRatio", fit_gamma(sub2, 3, second=True)[0])
        rep.check("secondDeriv", bad[0] if bad else max(results, key=lambda r: r.margin))


def _post_harnack(sc, res, rep, H_sharp):
    snaps = res.snapshots
    geos = [profile_geometry(s, grad=True) for s in snaps]
    try:
        c = measure_csharp(snaps, H_sharp, geos)
    except NoQualifyingPoints:
        rep.set("cSharp.status", "noQualifyingPoints")
        for name in ("harnack", "halfDouble"):
            if name in sc.monitors:
                rep.set(f"{name}.pass", False)
        return None
    n = sc.pinching.n
    rep.set("cSharp", c)
    rep.set("HSharp", H_sharp)
    rep.set("dSharp", d_sharp(n, c))
    gamma = float(sc.estimates.get("gamma", 2.0))
    centers = []
    for k, (s, g) in enumerate(zip(snaps, geos)):
        i, H = max_H_point(s, g)
        if H >= gamma * H_sharp:
            centers.append((k, i))
    stride = max(1, len(centers) // 50)
    centers = centers[::stride] + ([centers[-1]] if centers and centers[-1] not in centers[::stride] else [])
    if "harnack" in sc.monitors:
        fails, checked = 0, 0
        for k, i in centers:
            checked += 1
            fails += not harnack_check(snaps[k], i, c, H_sharp, gamma, geo=geos[k])
        rep.set("harnack.centers", checked)
        rep.set("harnack.failures", fails)
        rep.set("harnack.pass", bool(checked > 0 and fails == 0))
    if "halfDouble" in sc.monitors:
        fails, checked, skipped = 0, 0, 0
        for k, i in centers:
            try:
                ok = half_double_check(snaps, i, k, c, H_sharp, geos=geos)
            except (InsufficientHistory, BelowThreshold):
                skipped += 1
                continue
            checked += 1
            fails += not ok
        rep.set("halfDouble.centers", checked)
        rep.set("halfDouble.skipped", skipped)
        rep.set("halfDouble.failures", fails)
        rep.set("halfDouble.pass", bool(checked > 0 and fails == 0))
    return c


def _run_profile(sc: Scenario) -> ScenarioOutcome:
    s0: ProfileState = sc.geometry
    p = sc.pinching
    geo0 = profile_geometry(s0, sc.flow.derivative_order, grad=True)
    if np.any(p.c * geo0.H2 - geo0.A2 - p.a < 0) and "pinching" in sc.monitors:
        raise ConfigError("initial profile is not pinched for the configured (c, a)")
    R0 = max_radius(s0)
    res = run(s0, sc.flow, [_make_monitor(sc, R0)])
    rows = res.rows
    rep = EstimateReport()
    rep.set("name", sc.name)
    rep.set("status", res.status)
    rep.set("steps", res.steps)
    rep.set("finalTime", res.state.time)
    H_init = res.initial["maxH"]
    rep.set("initialMaxH", H_init)
    H_fin = max_H_point(res.state)[1]
    rep.set("finalMaxH", H_fin)
    rep.set("maxHGrowth", H_fin / H_init)
    for ev in res.events:
        if ev.kind == SINGULARITY:
            rep.set("singularity.time", ev.time)
            rep.set("singularity.index", ev.index)
            rep.set("singularity.reason", ev.note)
    if rows and res.status == SINGULARITY:
        rows[-1]["event"] = SINGULARITY
    violations = [e for e in res.events if e.kind == VIOLATION]
    rep.set("violations", len(violations))
    for e in violations[:5]:
        log.warning("invariant violation at t=%.6g: %s", e.time, e.note)
    mons = set(sc.monitors)
    if "pinching" in mons and rows:
        worst = min(r["minQ"] / r["maxH"] ** 2 for r in rows)
        rep.set("pinching.minScaledMargin", worst)
        rep.set("pinching.pass", bool(worst >= -PINCH_TOL))
    if "positionBound" in mons:
        rep.set("positionBound.R0", R0)
        rep.set("positionBound.pass", not any("positionBound" in e.note for e in violations))
    if "gradientRatio" in mons and rows:
        rep.set("gradientRatio.maxSup", max(r.get("gradRatio", math.nan) for r in rows))
        rep.set("gradientRatio.minBound", min(r.get("gradBound", math.inf) for r in rows))
        rep.set("gradientRatio.pass", not any("gradientRatio" in e.note for e in violations))
    if {"gradientBound", "secondDeriv"} & mons:
        _post_gradient(sc, res, rep)
    c_sharp = None
    if {"harnack", "halfDouble"} & mons:
        H_sharp = float(sc.estimates.get("HSharp", H_init))
        c_sharp = _post_harnack(sc, res, rep, H_sharp)
    if "neck" in mons and rows:
        T = rows[-1]["t"]
        late = [r for r in rows if r["t"] >= 0.9 * T]
        best = max(r.get("neckCount", 0) for r in late)
        rep.set("neck.finalWindowMaxCount", best)
        if res.status == SINGULARITY:
            rep.set("neck.pass", bool(best >= 1))
    if "cylindricalTrend" in mons and rows:
        tr = trend_from_rows(rows)
        target = 1.0 / (p.n - 1)
        rep.set("cylindricalTrend.asymptote", tr.asymptote)
        rep.set("cylindricalTrend.target", target)
        growth = float(sc.estimates.get("trendGrowth", 50.0))
        if H_fin >= growth * H_init:
            rep.set("cylindricalTrend.pass", tr.within(target, float(sc.estimates.get("trendTol", 0.02)),
                                                       growth * H_init))
        else:
            rep.set("cylindricalTrend.status", "insufficientGrowth")
    if "dichotomy" in mons:
        s = res.state
        g = profile_geometry(s, grad=True)
        i0 = int(np.argmin(g.ratio))
        cs = c_sharp if c_sharp is not None else float(np.max(np.sqrt(g.gradH2) / g.H2))
        dp = DichotomyParams(p.n, float(sc.estimates.get("eta0", 0.005)), cs)
        try:
            d = dichotomy_classify(s, i0, dp, H_sharp=float(sc.estimates.get("dichotomyHSharp", 0.0)), geo=g)
            rep.set("dichotomy.kind", d.kind)
            rep.set("dichotomy.index", d.index)
            rep.set("dichotomy.alpha0", dp.alpha0)
            rep.set("dichotomy.gamma0", dp.gamma0)
            rep.set("dichotomy.pass", bool(d.curvature_ok))
        except PreconditionFailed as exc:
            rep.set("dichotomy.kind", "preconditionFailed")
            rep.set("dichotomy.reason", str(exc))
    finite = all(math.isfinite(r["maxH"]) and math.isfinite(r["maxA2"]) for r in rows)
    if not finite:
        code = EXIT_BLOWUP
    elif violations:
        code = EXIT_FAIL
    else:
        code = EXIT_OK
    return ScenarioOutcome(rows, rep, code, res)


def run_scenario(sc: Scenario) -> ScenarioOutcome:
    """Execute a parsed scenario; numerical blowups map to exit code 3."""
    try:
        if sc.is_model:
            return _run_model(sc)
        return _run_profile(sc)
    except (Blowup, FloatingPointError, OverflowError) as exc:
        rep = EstimateReport({"name": sc.name, "status": "blowup", "reason": str(exc)})
        return ScenarioOutcome([], rep, EXIT_BLOWUP)


# ---------------------------------------------------------------- commands


def cmd_verify(args) -> int:
    if args.samples < 1:
        print("error: --samples must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    runner = RUNNERS[args.suite]
    kw = {"invert": True} if (args.suite == "algebraic" and args.invert_inequality) else {}
    res = runner(args.samples, args.seed, **kw)
    text = res.to_text()
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_run(args) -> int:
    try:
        sc = load_scenario(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        outcome = run_scenario(sc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_csv(out / sc.outputs["csv"], outcome.rows)
    outcome.report.set("exitCode", outcome.exit_code)
    (out / sc.outputs["report"]).write_text(outcome.report.to_text())
    print(f"{sc.name}: status={outcome.report.values.get('status')} rows={len(outcome.rows)} "
          f"exit={outcome.exit_code}")
    return outcome.exit_code


def cmd_report(args) -> int:
    d = Path(args.inp)
    path = d / "report.txt"
    if not path.is_file():
        print(f"error: no report.txt in {d}", file=sys.stderr)
        return EXIT_USAGE
    rep = EstimateReport.from_text(path.read_text())
    sys.stdout.write(rep.to_text())
    csv_path = d / "series.csv"
    if csv_path.is_file():
        rows = read_csv(csv_path)
        print(f"rows = {len(rows)}")
        if rows:
            print("finalMaxH = %.17g" % rows[-1]["maxH"])
    failed = [k[:-5] for k, v in rep.values.items() if k.endswith(".pass") and not v]
    print(f"failedChecks = {','.join(failed) if failed else 'none'}")
    code = rep.values.get("exitCode", EXIT_OK)
    return EXIT_FAIL if failed and code == EXIT_OK else int(code)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pinchflow", description="Pinched mean curvature flow laboratory.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("--suite", required=True, choices=SUITES)
    v.add_argument("--samples", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", help="also write the report to this file")
    v.add_argument("--invert-inequality", action="store_true", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize a run directory")
    p.add_argument("--in", dest="inp", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
