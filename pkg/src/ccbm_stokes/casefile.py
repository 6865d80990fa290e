"""JSON case files.

A case file has four blocks::

    {
      "name": "paper_2d",
      "geometry": {"inner_radius": 0.4,
                   "outer": {"type": "ellipse", "a": 1.0, "b": 1.1},
                   "n_inner": 30, "n_outer": 70, "target_h": null},
      "physics": {"alpha": 0.01, "forcing": ["-10*x", "-10*y"],
                  "dirichlet": ["0", "0"]},
      "optimizer": {"mu": 1.0, "max_iters": 40, "backtrack_factor": 0.5,
                    "max_backtracks": 15, "gradient_norm_floor": null,
                    "c_N": 1e-8},
      "output": {"directory": "out", "vtk": true, "snapshot_stride": 0}
    }

Outer curves are ``{"type": "circle", "radius": R}``,
``{"type": "ellipse", "a": A, "b": B}`` or
``{"type": "polar", "a0": R0, "cos": [...], "sin": [...]}``.  The
``optimizer`` and ``output`` blocks are optional.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ParseError, ValidationError
from .expressions import VectorField
from .mesh import Circle, Ellipse, PolarSeries, generate_annulus
from .optimizer import OptConfig
from .state import PhysicsCase


@dataclass(frozen=True)
class GeometrySpec:
    inner_radius: float
    outer: object
    n_inner: int
    n_outer: int
    target_h: float | None = None

    def build(self):
        return generate_annulus(self.inner_radius, self.outer, self.n_inner, self.n_outer,
                                self.target_h)


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    vtk: bool = True
    snapshot_stride: int = 0


@dataclass(frozen=True)
class CaseFile:
    name: str
    case: PhysicsCase
    config: OptConfig
    geometry: GeometrySpec
    output: OutputSpec


def bundled_cases():
    return sorted(p.name for p in resources.files("ccbm_stokes").joinpath("cases").iterdir()
                  if p.name.endswith(".json"))


def resolve(path) -> Path:
    """A filesystem path, or the name of a bundled case."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.name.endswith(".json") else p.name + ".json"
    bundled = resources.files("ccbm_stokes").joinpath("cases", name)
    if bundled.is_file():
        return Path(str(bundled))
    raise ParseError(f"case file not found: {path}")


def _get(block, key, where, kind=None, required=True, default=None):
    if key not in block:
        if required:
            raise ParseError(f"{where}.{key}: missing required field")
        return default
    value = block[key]
    if kind is not None and value is not None and not _is(value, kind):
        raise ValidationError(f"{where}.{key}: expected {kind}, got {value!r}")
    return value


def _is(value, kind):
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "object":
        return isinstance(value, dict)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "string":
        return isinstance(value, str)
    return True


def _block(doc, key, required=True):
    if key not in doc:
        if required:
            raise ParseError(f"{key}: missing required block")
        return {}
    if not isinstance(doc[key], dict):
        raise ParseError(f"{key}: expected an object")
    return doc[key]


def _curve(spec, where):
    kind = _get(spec, "type", where, "string")
    if kind == "circle":
        r = _get(spec, "radius", where, "number")
        if r <= 0:
            raise ValidationError(f"{where}.radius: must be positive")
        return Circle(r)
    if kind == "ellipse":
        a = _get(spec, "a", where, "number")
        b = _get(spec, "b", where, "number")
        if a <= 0 or b <= 0:
            raise ValidationError(f"{where}: semi-axes must be positive")
        return Ellipse(a, b)
    if kind == "polar":
        a0 = _get(spec, "a0", where, "number")
        cos = _get(spec, "cos", where, required=False, default=[])
        sin = _get(spec, "sin", where, required=False, default=[])
        for name, seq in (("cos", cos), ("sin", sin)):
            if not isinstance(seq, list) or not all(_is(v, "number") for v in seq):
                raise ValidationError(f"{where}.{name}: expected a list of numbers")
        return PolarSeries(a0, cos, sin)
    raise ValidationError(f"{where}.type: unknown curve type {kind!r}")


def _field(block, key, where, default=None):
    value = _get(block, key, where, required=default is None, default=default)
    try:
        return VectorField.parse(value)
    except ParseError as exc:
        raise ParseError(f"{where}.{key}: {exc}") from None


def parse_document(doc, name="case") -> CaseFile:
    if not isinstance(doc, dict):
        raise ParseError("case file must contain a JSON object")
    g = _block(doc, "geometry")
    ph = _block(doc, "physics")
    op = _block(doc, "optimizer", required=False)
    out = _block(doc, "output", required=False)

    inner = _get(g, "inner_radius", "geometry", "number")
    if inner <= 0:
        raise ValidationError("geometry.inner_radius: must be positive")
    outer = _curve(_get(g, "outer", "geometry", "object"), "geometry.outer")
    n_in = _get(g, "n_inner", "geometry", "int")
    n_out = _get(g, "n_outer", "geometry", "int")
    if n_in < 8 or n_out < 8:
        raise ValidationError("geometry: n_inner and n_outer must be at least 8")
    th = _get(g, "target_h", "geometry", "number", required=False)
    if th is not None and th <= 0:
        raise ValidationError("geometry.target_h: must be positive")
    geometry = GeometrySpec(float(inner), outer, n_in, n_out, th)

    alpha = _get(ph, "alpha", "physics", "number")
    if alpha <= 0:
        raise ValidationError(f"physics.alpha: must be positive, got {alpha}")
    forcing = _field(ph, "forcing", "physics")
    dirichlet = _field(ph, "dirichlet", "physics", default=["0", "0"])
    label = doc.get("name", name)
    case = PhysicsCase(alpha, forcing, dirichlet, str(label))

    kwargs = {}
    for key, kind in (("mu", "number"), ("max_iters", "int"), ("backtrack_factor", "number"),
                      ("max_backtracks", "int"), ("gradient_norm_floor", "number"),
                      ("c_N", "number")):
        if key in op:
            kwargs[key] = _get(op, key, "optimizer", kind)
    unknown = set(op) - {"mu", "max_iters", "backtrack_factor", "max_backtracks",
                         "gradient_norm_floor", "c_N"}
    if unknown:
        raise ValidationError(f"optimizer: unknown fields {sorted(unknown)}")
    try:
        config = OptConfig(case=case, geometry=geometry, **kwargs)
    except ValueError as exc:
        raise ValidationError(f"optimizer: {exc}") from None
    if not config.c_N > 0:
        raise ValidationError("optimizer.c_N: must be positive")

    output = OutputSpec(
        str(_get(out, "directory", "output", "string", required=False, default="out")),
        bool(_get(out, "vtk", "output", "bool", required=False, default=True)),
        int(_get(out, "snapshot_stride", "output", "int", required=False, default=0)),
    )
    return CaseFile(str(label), case, config, geometry, output)


def load(path) -> CaseFile:
    """Parse a case file (or a bundled case name) into a :class:`CaseFile`."""
    p = resolve(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p.name}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_document(doc, p.stem)


def parse_case(path):
    """Return ``(PhysicsCase, OptConfig, GeometrySpec)``."""
    cf = load(path)
    return cf.case, cf.config, cf.geometry
