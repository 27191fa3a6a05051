"""Run configuration: a single JSON document per experiment.

Scientific parameters have no defaults; only engineering knobs (workers,
output and cache locations) do.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import jsonschema

from .lattice import PreconditionError, Window
from .renorm import INT_LIMIT, build_ladder
from .samplers import FAMILIES, ModelSpec

KINDS = ("sample", "clusters", "density", "stretch", "shape", "renorm-validate",
         "renorm-path", "decorr", "covariance", "torus", "mesoscopic")
ENGINEERING = ("workers", "output", "cache")
PARAM_NAME = {"bernoulli": "p", "gff_level": "h", "interlacement": "u", "vacant": "u",
              "torus_vacant": "u"}

_int_vec = {"type": "array", "items": {"type": "integer"}, "minItems": 1}
_pos = {"type": "integer", "minimum": 1}

_MODEL = {
    "type": "object",
    "required": ["family", "d"],
    "properties": {
        "family": {"enum": list(FAMILIES)},
        "d": _pos,
        "p": {"type": "number"},
        "h": {"type": "number"},
        "u": {"type": "number"},
        "pad": {"type": "integer", "minimum": 0},
        "escape_radius": _pos,
        "cap_trials": _pos,
        "calibration_seed": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

_WINDOW = {
    "type": "object",
    "oneOf": [{"required": ["radius"]}, {"required": ["anchor", "sides"]}, {"required": ["torus"]}],
    "properties": {
        "radius": {"type": "integer", "minimum": 0},
        "anchor": _int_vec,
        "sides": _int_vec,
        "torus": _pos,
    },
    "additionalProperties": False,
}

_LADDER = {"l0": _pos, "r0": _pos, "L0": _pos, "theta": _pos, "kmax": {"type": "integer", "minimum": 0}}

_PROFILE = {
    "type": "object",
    "required": ["eps_P", "chi_P"],
    "properties": {"eps_P": {"type": "number", "exclusiveMinimum": 0},
                   "chi_P": {"type": "number", "exclusiveMinimum": 0}},
    "additionalProperties": False,
}

_EVENT = {
    "type": "object",
    "required": ["type", "center"],
    "properties": {"type": {"enum": ["crossing", "occupied"]}, "center": _int_vec,
                   "radius": {"type": "integer", "minimum": 0},
                   "axis": {"type": "integer", "minimum": 0}},
    "additionalProperties": False,
}

PARAMS = {
    "sample": {"properties": {}},
    "clusters": {"required": ["policy"], "properties": {"policy": {"enum": ["diameter_span", "largest"]}}},
    "density": {"required": ["policy"], "properties": {"policy": {"enum": ["diameter_span", "largest"]}}},
    "stretch": {"required": ["R"], "properties": {"R": {"type": "integer", "minimum": 2},
                                                  "n_probes": _pos}},
    "shape": {"required": ["directions", "n_grid"],
              "properties": {"directions": {"type": "array", "items": _int_vec, "minItems": 1},
                             "n_grid": {"type": "array", "items": _pos, "minItems": 1},
                             "margin": {"type": "integer", "minimum": 0}}},
    "renorm-validate": {"required": ["d", "l0", "r0", "L0", "theta", "kmax", "profile"],
                        "properties": {**_LADDER, "d": _pos, "profile": _PROFILE,
                                       "p0_exponent": {"type": ["number", "null"]}}},
    "renorm-path": {"required": ["l0", "r0", "L0", "theta", "kmax", "R", "eta"],
                    "properties": {**_LADDER, "R": _pos,
                                   "eta": {"oneOf": [
                                       {"type": "number", "minimum": 0, "maximum": 1},
                                       {"type": "object", "required": ["trials", "radius", "seed"],
                                        "properties": {"trials": _pos, "radius": _pos,
                                                       "seed": {"type": "integer", "minimum": 0}},
                                        "additionalProperties": False}]}}},
    "decorr": {"required": ["u", "u_hat", "L", "R", "events", "profile"],
               "properties": {"u": {"type": "number"}, "u_hat": {"type": "number"}, "L": _pos,
                              "R": {"type": "number", "exclusiveMinimum": 0},
                              "events": {"type": "array", "items": _EVENT,
                                         "minItems": 2, "maxItems": 2},
                              "profile": _PROFILE}},
    "covariance": {"required": ["distances"],
                   "properties": {"distances": {"type": "array", "items": _pos, "minItems": 2},
                                  "side": _pos}},
    "torus": {"required": ["N_grid"], "properties": {"N_grid": {"type": "array", "items": _pos,
                                                                "minItems": 1}}},
    "mesoscopic": {"required": ["N", "C"],
                   "properties": {"N": _pos, "C": {"type": "number", "exclusiveMinimum": 0},
                                  "grid_step": _pos}},
}

SCHEMA = {
    "type": "object",
    "required": ["kind", "seed", "trials", "params"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "trials": _pos,
        "model": _MODEL,
        "window": _WINDOW,
        "params": {"type": "object"},
        "workers": _pos,
        "output": {"type": "string"},
        "cache": {"type": "string"},
    },
    "additionalProperties": False,
}

NEEDS_MODEL = {k for k in KINDS if k != "renorm-validate"}
NEEDS_WINDOW = {"sample", "clusters", "density", "stretch"}


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


def _path(parts) -> str:
    return ".".join(str(p) for p in parts) or "<root>"


def validate(doc) -> list[Diagnostic]:
    """Structural and semantic diagnostics; empty for a valid config."""
    out = []
    v = jsonschema.Draft202012Validator(SCHEMA)
    for err in sorted(v.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        out.append(Diagnostic(_path(err.absolute_path), err.message))
    if out or not isinstance(doc, dict):
        return out
    kind = doc["kind"]
    ps = {"type": "object", "additionalProperties": False, **PARAMS[kind]}
    for err in jsonschema.Draft202012Validator(ps).iter_errors(doc["params"]):
        out.append(Diagnostic(_path(["params", *err.absolute_path]), err.message))
    if kind in NEEDS_MODEL and "model" not in doc:
        out.append(Diagnostic("model", f"required for kind {kind!r}"))
    if kind in NEEDS_WINDOW and "window" not in doc:
        out.append(Diagnostic("window", f"required for kind {kind!r}"))
    if out:
        return out
    if "model" in doc:
        out += _check_model(doc["model"])
    if "window" in doc and "model" in doc:
        w = doc["window"]
        d = doc["model"]["d"]
        if "anchor" in w and not len(w["anchor"]) == len(w["sides"]) == d:
            out.append(Diagnostic("window", f"anchor and sides must have length d={d}"))
        if "sides" in w and any(s < 1 for s in w["sides"]):
            out.append(Diagnostic("window.sides", "sides must be positive"))
    if out:
        return out
    out += _check_kind(doc)
    return out


def _check_model(m) -> list[Diagnostic]:
    out = []
    fam = m["family"]
    name = PARAM_NAME[fam]
    for other in set(PARAM_NAME.values()) - {name}:
        if other in m:
            out.append(Diagnostic(f"model.{other}", f"not a parameter of {fam}"))
    if name not in m:
        out.append(Diagnostic(f"model.{name}", f"required for family {fam}"))
        return out
    val = m[name]
    if fam == "bernoulli" and not 0 <= val <= 1:
        out.append(Diagnostic("model.p", f"must lie in [0, 1], got {val}"))
    if name == "u" and val < 0:
        out.append(Diagnostic("model.u", f"must be non-negative, got {val}"))
    if fam in ("gff_level", "interlacement", "vacant") and m["d"] < 3:
        out.append(Diagnostic("model.d", f"{fam} needs d >= 3"))
    if fam in ("interlacement", "vacant") and "escape_radius" not in m:
        out.append(Diagnostic("model.escape_radius", "required for interlacements"))
    if fam == "gff_level" and "pad" not in m:
        out.append(Diagnostic("model.pad", "required for the field"))
    return out


def _check_kind(doc) -> list[Diagnostic]:
    out = []
    kind, p = doc["kind"], doc["params"]
    fam = doc.get("model", {}).get("family")
    if kind in ("torus", "mesoscopic") and fam != "torus_vacant":
        out.append(Diagnostic("model.family", f"kind {kind!r} needs torus_vacant"))
    if kind not in ("torus", "mesoscopic") and fam == "torus_vacant" and "window" in doc \
            and "torus" not in doc["window"]:
        out.append(Diagnostic("window", "torus_vacant needs a torus window"))
    if kind == "stretch":
        w = window_of(doc)
        R = p["R"]
        d = doc["model"]["d"]
        if w.is_torus or not w.contains_box([-2 * R] * d, [2 * R + 1] * d):
            out.append(Diagnostic("window", f"must cover B(0, 2R) = [-{2 * R}, {2 * R}]^{d}"))
    if kind in ("renorm-validate", "renorm-path"):
        if not p["l0"] > 4 * p["r0"]:
            out.append(Diagnostic("params.l0", "need l0 > 4 r0 (path descent hypothesis)"))
        if p["L0"] < 2:
            out.append(Diagnostic("params.L0", "need L0 >= 2"))
        if not out:
            limit = None if kind == "renorm-validate" else INT_LIMIT
            try:
                build_ladder(p["l0"], p["r0"], p["L0"], p["theta"], p["kmax"], limit=limit)
            except (PreconditionError, OverflowError) as exc:
                out.append(Diagnostic("params.kmax", str(exc)))
    if kind == "renorm-path" and p["R"] < p["L0"] ** doc["model"]["d"]:
        out.append(Diagnostic("params.R", "need R >= L0^d"))
    if kind == "shape":
        d = doc["model"]["d"]
        for i, x in enumerate(p["directions"]):
            if len(x) != d:
                out.append(Diagnostic(f"params.directions.{i}", f"needs length {d}"))
            elif not any(x):
                out.append(Diagnostic(f"params.directions.{i}", "zero direction"))
    if kind == "decorr":
        d = doc["model"]["d"]
        for i, e in enumerate(p["events"]):
            if len(e["center"]) != d:
                out.append(Diagnostic(f"params.events.{i}.center", f"needs length {d}"))
            if e["type"] == "crossing" and "radius" not in e:
                out.append(Diagnostic(f"params.events.{i}.radius", "required for crossings"))
    return out


def window_of(doc) -> Window:
    w = doc["window"]
    d = doc["model"]["d"]
    if "radius" in w:
        return Window.centered(w["radius"], d)
    if "torus" in w:
        return Window.torus(w["torus"], d)
    return Window(tuple(w["anchor"]), tuple(w["sides"]))


def model_of(doc) -> ModelSpec:
    m = doc["model"]
    fam = m["family"]
    return ModelSpec(fam, m["d"], float(m[PARAM_NAME[fam]]), m.get("pad"), m.get("escape_radius"),
                     m.get("cap_trials", 2000), m.get("calibration_seed", 0))


def resolve(doc, workers: int | None = None, output: str | None = None) -> dict:
    """Resolved form: engineering knobs filled in, everything else verbatim."""
    out = copy.deepcopy(doc)
    out["workers"] = workers or out.get("workers", 1)
    if output is not None:
        out["output"] = output
    if out.get("model", {}).get("family") in ("interlacement", "vacant"):
        out["model"].setdefault("cap_trials", 2000)
        out["model"].setdefault("calibration_seed", 0)
    return out


def config_hash(doc) -> str:
    """Hash of the scientific content (engineering knobs excluded)."""
    sci = {k: v for k, v in doc.items() if k not in ENGINEERING}
    blob = json.dumps(sci, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2)


def load(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
