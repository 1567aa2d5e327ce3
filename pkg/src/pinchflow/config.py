"""Scenario files: plain ``key = value`` lines with dotted sections.

Example::

    name = neckpinch-n8
    pinching.c = 1/6
    geometry.kind = productCircle
    geometry.n = 8
    geometry.r = 0.2
    flow.regridEvery = 10
    monitors = pinching, gradientRatio, neck

Blank lines and ``#`` comments are ignored.  Numbers may be written as
fractions (``1/6``) or ``inf``; booleans as ``true``/``false``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from .errors import ConfigError
from .flow import FlowConfig
from .models import Cylinder, ModelGeometry, ProductSpheres, Sphere
from .profile import ProfileState, product_circle_state
from .tensor import PinchingParams, c_n_constant

MONITORS = (
    "pinching",
    "gradientRatio",
    "gradientBound",
    "secondDeriv",
    "harnack",
    "halfDouble",
    "neck",
    "cylindricalTrend",
    "positionBound",
    "dichotomy",
)

# config key -> FlowConfig attribute
_FLOW_KEYS = {
    "cflNumber": ("cfl_number", float),
    "derivativeOrder": ("derivative_order", int),
    "tEnd": ("t_end", float),
    "stopWhenMaxHExceeds": ("stop_when_max_H_exceeds", float),
    "regridEvery": ("regrid_every", int),
    "regridCurvatureWeight": ("regrid_curvature_weight", float),
    "tangentialRedistribution": ("tangential_redistribution", bool),
    "maxSteps": ("max_steps", int),
    "recordEvery": ("record_every", int),
}


def parse_text(text: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        k, v = (x.strip() for x in line.split("=", 1))
        if not k:
            raise ConfigError(f"line {lineno}: empty key")
        if k in out:
            raise ConfigError(f"line {lineno}: duplicate key {k!r}")
        out[k] = v
    return out


def to_float(v: str, key: str = "") -> float:
    s = v.strip().lower()
    if s in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(Fraction(s)) if "/" in s else float(s)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key}: not a number: {v!r}") from None


def to_int(v: str, key: str = "") -> int:
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {v!r}") from None


def to_bool(v: str, key: str = "") -> bool:
    s = v.strip().lower()
    if s in ("true", "yes", "1", "on"):
        return True
    if s in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: not a boolean: {v!r}")


_CONVERT = {float: to_float, int: to_int, bool: to_bool}


@dataclass
class Scenario:
    name: str
    pinching: PinchingParams
    geometry: Union[ModelGeometry, ProfileState]
    flow: FlowConfig
    monitors: Tuple[str, ...] = ()
    outputs: Dict[str, str] = field(default_factory=lambda: {"csv": "series.csv", "report": "report.txt"})
    seed: int = 0
    neck: Dict[str, float] = field(default_factory=dict)
    estimates: Dict[str, float] = field(default_factory=dict)
    model_samples: int = 100

    @property
    def is_model(self) -> bool:
        return isinstance(self.geometry, ModelGeometry)


def _section(kv: Dict[str, str], prefix: str) -> Dict[str, str]:
    p = prefix + "."
    return {k[len(p):]: v for k, v in kv.items() if k.startswith(p)}


def _geometry(g: Dict[str, str]):
    kind = g.get("kind")
    if kind is None:
        raise ConfigError("geometry.kind is required")

    def num(key, default=None, conv=to_float):
        if key not in g:
            if default is None:
                raise ConfigError(f"geometry.{key} is required for kind {kind}")
            return default
        return conv(g[key], f"geometry.{key}")

    if kind == "productCircle":
        n, k = num("n", conv=to_int), num("k", 2, to_int)
        r, R = num("r"), num("R", 1.0)
        amp, mode, N = num("bumpAmplitude", 0.0), num("bumpMode", 1, to_int), num("N", 256, to_int)
        if r <= 0 or R <= 0:
            raise ConfigError("geometry.r and geometry.R must be positive")
        if abs(amp) >= 1:
            raise ConfigError("|geometry.bumpAmplitude| must be < 1 so that u > 0")
        if n < 2 or k < 2 or N < 16 or mode < 0:
            raise ConfigError("productCircle needs n >= 2, k >= 2, N >= 16, bumpMode >= 0")
        return product_circle_state(n, r, R, N, k, amp, mode)
    codim = num("ambientCodim", 0, to_int)
    try:
        if kind == "sphere":
            return Sphere(num("n", conv=to_int), num("r"), codim)
        if kind == "cylinder":
            return Cylinder(num("n", conv=to_int), num("r"), codim)
        if kind == "product":
            return ProductSpheres(num("p", conv=to_int), num("r1"), num("q2", conv=to_int), num("r2"), codim)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc
    raise ConfigError(f"unknown geometry.kind {kind!r}")


def parse_scenario(text: str) -> Scenario:
    """Build a :class:`Scenario`; every problem is reported as :class:`ConfigError`."""
    kv = parse_text(text)
    known_sections = ("pinching", "geometry", "flow", "outputs", "neck", "estimates")
    for k in kv:
        head = k.split(".", 1)[0]
        if "." in k and head not in known_sections:
            raise ConfigError(f"unknown section in key {k!r}")
        if "." not in k and k not in ("name", "monitors", "seed", "modelSamples"):
            raise ConfigError(f"unknown key {k!r}")
    geom = _geometry(_section(kv, "geometry"))
    n = geom.n
    q = geom.k if isinstance(geom, ProfileState) else geom.ambient_codim

    pin = _section(kv, "pinching")
    unknown = set(pin) - {"n", "q", "c", "a", "eps"}
    if unknown:
        raise ConfigError(f"unknown pinching keys {sorted(unknown)}")
    c = to_float(pin["c"], "pinching.c") if "c" in pin and pin["c"] != "auto" else float(c_n_constant(n))
    try:
        pinching = PinchingParams(
            n=to_int(pin.get("n", str(n)), "pinching.n"),
            q=to_int(pin.get("q", str(q)), "pinching.q"),
            c=c,
            a=to_float(pin.get("a", "0"), "pinching.a"),
            eps=to_float(pin.get("eps", "0"), "pinching.eps"),
        )
    except ValueError as exc:
        raise ConfigError(f"pinching: {exc}") from exc
    if pinching.n != n:
        raise ConfigError(f"pinching.n = {pinching.n} does not match the geometry dimension {n}")

    fl = _section(kv, "flow")
    fkw = {}
    for k, v in fl.items():
        if k not in _FLOW_KEYS:
            raise ConfigError(f"unknown flow key {k!r}")
        attr, typ = _FLOW_KEYS[k]
        fkw[attr] = _CONVERT[typ](v, f"flow.{k}")
    mons = tuple(m.strip() for m in kv.get("monitors", "").split(",") if m.strip())
    bad = [m for m in mons if m not in MONITORS]
    if bad:
        raise ConfigError(f"unknown monitors {bad}; choose from {', '.join(MONITORS)}")
    if {"harnack", "halfDouble", "gradientBound", "secondDeriv"} & set(mons):
        fkw["keep_snapshots"] = True
    try:
        flow = FlowConfig(**fkw)
    except ValueError as exc:
        raise ConfigError(f"flow: {exc}") from exc

    outputs = {"csv": "series.csv", "report": "report.txt"}
    outputs.update(_section(kv, "outputs"))
    neck = {k: to_float(v, f"neck.{k}") for k, v in _section(kv, "neck").items()}
    est = {k: to_float(v, f"estimates.{k}") for k, v in _section(kv, "estimates").items()}
    return Scenario(
        name=kv.get("name", "scenario"),
        pinching=pinching,
        geometry=geom,
        flow=flow,
        monitors=mons,
        outputs=outputs,
        seed=to_int(kv.get("seed", "0"), "seed"),
        neck=neck,
        estimates=est,
        model_samples=to_int(kv.get("modelSamples", "100"), "modelSamples"),
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_scenario(text)
