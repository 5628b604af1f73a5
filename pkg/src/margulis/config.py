"""JSON configuration for the command-line tools.

Schema (version 1):

{
  "schema": 1,
  "generators": [
    {"name": "a", "matrix": [[a, b], [c, d]]},
    {"name": "b", "angles": [theta1, theta2], "length": L}
  ],
  "cocycle": {"type": "triples", "values": [[x,y,z], ...]}
           | {"type": "coboundary", "vector": [x,y,z]}
           | {"type": "length-derivative", "values": [s1, s2, ...]},
  "knobs": {"word_depth": 4, "mesh_h": 0.1, "radius": null,
            "scan_depth": 6, "delta": 1e-3, "witness_n_max": 40,
            "t_grid": [0.2, 0.1, 0.05, 0.025], "tolerance": 1e-9}
}

A generator given by "angles" is the hyperbolic element whose axis has the
two given ideal endpoints on the circle at infinity and whose translation
length is "length".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import GeometryError, Isom, cross, eigen_frame, group_exp, qform
from .groups import Cocycle, Representation, coboundary

SCHEMA_VERSION = 1
DET_TOL = 1e-9

DEFAULT_KNOBS = {
    "word_depth": 4,
    "mesh_h": 0.1,
    "radius": None,
    "scan_depth": 6,
    "delta": 1e-3,
    "witness_n_max": 40,
    "t_grid": [0.2, 0.1, 0.05, 0.025],
    "tolerance": 1e-9,
}


class ConfigError(GeometryError):
    """Schema violation; the message names the offending field."""


@dataclass
class Config:
    names: list
    j: Representation
    u: Cocycle
    knobs: dict
    raw: dict = field(repr=False, default=None)


def _gen_from_angles(theta1: float, theta2: float, length: float) -> Isom:
    l1 = np.array([np.cos(theta1), np.sin(theta1), 1.0])
    l2 = np.array([np.cos(theta2), np.sin(theta2), 1.0])
    v = cross(l1, l2)
    q = qform(v)
    if q <= 1e-12:
        raise ConfigError("generator axis endpoints coincide")
    return group_exp(float(length) / np.sqrt(q) * v)


def _parse_generator(spec: dict, idx: int) -> Isom:
    where = "generators[%d]" % idx
    if "matrix" in spec:
        m = np.asarray(spec["matrix"], float)
        if m.shape != (2, 2):
            raise ConfigError("%s.matrix must be 2x2" % where)
        det = float(np.linalg.det(m))
        if abs(det - 1.0) > DET_TOL:
            raise ConfigError(
                "%s (%s): determinant %.12g != 1"
                % (where, spec.get("name", "?"), det))
        return Isom(m)
    if "angles" in spec:
        th = spec["angles"]
        if len(th) != 2:
            raise ConfigError("%s.angles must have two entries" % where)
        return _gen_from_angles(float(th[0]), float(th[1]),
                                float(spec.get("length", 1.0)))
    raise ConfigError("%s needs either 'matrix' or 'angles'" % where)


def _parse_cocycle(spec: dict, j: Representation) -> Cocycle:
    kind = spec.get("type")
    if kind == "triples":
        vals = spec.get("values", [])
        if len(vals) != j.rank:
            raise ConfigError("cocycle.values needs one triple per generator")
        return Cocycle(tuple(np.asarray(v, float) for v in vals))
    if kind == "coboundary":
        return coboundary(j, np.asarray(spec["vector"], float))
    if kind == "length-derivative":
        vals = spec.get("values", [])
        if len(vals) != j.rank:
            raise ConfigError("cocycle.values needs one real per generator")
        return Cocycle(tuple(
            float(s) * eigen_frame(g).c_zero
            for s, g in zip(vals, j.gens)))
    raise ConfigError("cocycle.type must be one of "
                      "'triples' | 'coboundary' | 'length-derivative'")


def parse_config_dict(data: dict) -> Config:
    if data.get("schema") != SCHEMA_VERSION:
        raise ConfigError("schema: expected %d, got %r"
                          % (SCHEMA_VERSION, data.get("schema")))
    gens_spec = data.get("generators")
    if not gens_spec:
        raise ConfigError("generators: at least one required")
    gens = tuple(_parse_generator(g, i) for i, g in enumerate(gens_spec))
    names = [g.get("name", "g%d" % (i + 1))
             for i, g in enumerate(gens_spec)]
    j = Representation(gens)
    u = _parse_cocycle(data.get("cocycle", {}), j)
    knobs = dict(DEFAULT_KNOBS)
    for k, v in data.get("knobs", {}).items():
        if k not in DEFAULT_KNOBS:
            raise ConfigError("knobs.%s: unknown knob" % k)
        knobs[k] = v
    for k in ("word_depth", "mesh_h", "scan_depth", "delta",
              "witness_n_max", "tolerance"):
        if knobs[k] is not None and knobs[k] <= 0:
            raise ConfigError("knobs.%s must be positive" % k)
    return Config(names=names, j=j, u=u, knobs=knobs, raw=data)


def parse_config(path) -> Config:
    with open(path) as fh:
        data = json.load(fh)
    return parse_config_dict(data)


def serialize_config(cfg: Config) -> str:
    """Canonical serialization; parse -> serialize -> parse is stable."""
    return json.dumps(cfg.raw, sort_keys=True, indent=2) + "\n"
