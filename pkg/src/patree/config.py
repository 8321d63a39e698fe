"""Strict JSON experiment configs: law, model, run and optional sections."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import CapError, ConfigError, PatreeError
from .fitness import FitnessModel, phi_from_spec
from .sweep import SWEEP_CAP
from .weightlaw import WeightLaw

SECTIONS = {"law", "model", "run", "condensation", "urn", "sweep", "description"}
LAW_KEYS = {
    "uniform": {"kind", "w_star"},
    "beta_poly": {"kind", "alpha"},
    "atoms": {"kind", "values", "probs", "w_star"},
    "piecewise": {"kind", "breakpoints", "densities", "w_star"},
}
MODEL_KEYS = {
    "random_recursive": {"form", "c"},
    "classic_pa": {"form", "c"},
    "constant": {"form", "c_g", "c_h"},
    "bianconi_barabasi": {"form"},
    "additive": {"form"},
    "product": {"form", "phi1", "phi2", "h"},
    "separable_sum": {"form", "alpha", "beta", "phi1", "phi2", "h"},
    "table": {"form", "matrix", "h"},
}
RUN_KEYS = {"n_steps", "replicas", "master_seed", "bins", "k_max", "stride", "keep_edges"}
COND_KEYS = {"eps", "n", "replicas"}
URN_KEYS = {"m", "k_prime"}
SWEEP_KEYS = {"param", "values", "start", "stop", "num"}


@dataclass
class ExperimentConfig:
    law: WeightLaw
    model: FitnessModel | None
    raw: dict
    text: str
    path: str | None = None
    run: dict = field(default_factory=dict)
    condensation: dict | None = None
    urn: dict | None = None
    sweep: dict | None = None

    @property
    def digest(self):
        return hashlib.sha256(self.text.encode()).hexdigest()


def _locate(text, key):
    """Line and column of the first occurrence of a quoted key."""
    pos = text.find(f'"{key}"')
    if pos < 0:
        return None, None
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _fail(msg, text, key, path):
    line, col = _locate(text, key) if key is not None else (None, None)
    raise ConfigError(msg, path=path, line=line, column=col)


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ValueError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _check_keys(section, allowed, name, text, path):
    if not isinstance(section, dict):
        _fail(f"section {name!r} must be an object", text, name, path)
    for k in section:
        if k not in allowed:
            _fail(f"unknown key {k!r} in {name}", text, k, path)


def _positive_int(section, key, name, text, path, default=None, minimum=1):
    if key not in section:
        if default is None:
            _fail(f"{name}.{key} is required", text, name, path)
        return default
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        _fail(f"{name}.{key} must be an integer >= {minimum}", text, key, path)
    return v


def parse_config(text, path=None):
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, path=path, line=exc.lineno, column=exc.colno) from None
    except ValueError as exc:
        raise ConfigError(str(exc), path=path) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", path=path, line=1, column=1)
    for k in raw:
        if k not in SECTIONS:
            _fail(f"unknown section {k!r}", text, k, path)
    if "law" not in raw:
        raise ConfigError("missing section 'law'", path=path)
    law = build_law(raw["law"], text, path)
    model = build_model(raw["model"], law, text, path) if "model" in raw else None
    cfg = ExperimentConfig(law, model, raw, text, path)
    if "run" in raw:
        run = raw["run"]
        _check_keys(run, RUN_KEYS, "run", text, path)
        cfg.run = {
            "n_steps": _positive_int(run, "n_steps", "run", text, path),
            "replicas": _positive_int(run, "replicas", "run", text, path, 1),
            "master_seed": _positive_int(run, "master_seed", "run", text, path, 0, minimum=0),
            "bins": _positive_int(run, "bins", "run", text, path, 64),
            "k_max": _positive_int(run, "k_max", "run", text, path, 64),
        }
        cfg.run["stride"] = _positive_int(run, "stride", "run", text, path) if "stride" in run else None
        if "keep_edges" in run:
            if not isinstance(run["keep_edges"], bool):
                _fail("run.keep_edges must be true or false", text, "keep_edges", path)
            cfg.run["keep_edges"] = run["keep_edges"]
    if "condensation" in raw:
        c = raw["condensation"]
        _check_keys(c, COND_KEYS, "condensation", text, path)
        eps = c.get("eps")
        ns = c.get("n")
        if not _num_list(eps) or any(e <= 0 for e in eps):
            _fail("condensation.eps must be a list of positive numbers", text, "eps", path)
        if not isinstance(ns, list) or not ns or any(isinstance(x, bool) or not isinstance(x, int) or x < 1 for x in ns):
            _fail("condensation.n must be a list of positive integers", text, "condensation", path)
        cfg.condensation = {"eps": [float(e) for e in eps], "n": ns,
                            "replicas": _positive_int(c, "replicas", "condensation", text, path, 1)}
    if "urn" in raw:
        u = raw["urn"]
        _check_keys(u, URN_KEYS, "urn", text, path)
        cfg.urn = {"m": _positive_int(u, "m", "urn", text, path, 2),
                   "k_prime": _positive_int(u, "k_prime", "urn", text, path, 2)}
    if "sweep" in raw:
        cfg.sweep = build_sweep(raw["sweep"], text, path)
    return cfg


def _num_list(x):
    return isinstance(x, list) and len(x) > 0 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in x)


def build_law(sec, text="", path=None):
    if not isinstance(sec, dict) or sec.get("kind") not in LAW_KEYS:
        _fail(f"law.kind must be one of {sorted(LAW_KEYS)}", text, "law", path)
    kind = sec["kind"]
    _check_keys(sec, LAW_KEYS[kind], "law", text, path)
    try:
        if kind == "uniform":
            return WeightLaw.uniform(float(sec.get("w_star", 1.0)))
        if kind == "beta_poly":
            return WeightLaw.beta_poly(float(sec["alpha"]))
        if kind == "atoms":
            return WeightLaw.atoms(sec["values"], sec["probs"], sec.get("w_star"))
        return WeightLaw.piecewise(sec["breakpoints"], sec["densities"], sec.get("w_star"))
    except (KeyError, TypeError) as exc:
        _fail(f"law section incomplete or malformed: {exc}", text, "law", path)
    except PatreeError as exc:
        _fail(f"invalid law: {exc}", text, "law", path)


def build_model(sec, law, text="", path=None):
    if not isinstance(sec, dict) or sec.get("form") not in MODEL_KEYS:
        _fail(f"model.form must be one of {sorted(MODEL_KEYS)}", text, "model", path)
    form = sec["form"]
    _check_keys(sec, MODEL_KEYS[form], "model", text, path)
    w_star = law.w_star
    try:
        if form == "random_recursive":
            return FitnessModel.random_recursive(float(sec.get("c", 1.0)))
        if form == "classic_pa":
            return FitnessModel.classic_pa(float(sec.get("c", 1.0)))
        if form == "constant":
            return FitnessModel.constant(float(sec["c_g"]), float(sec["c_h"]))
        if form == "bianconi_barabasi":
            return FitnessModel.bianconi_barabasi(w_star)
        if form == "additive":
            return FitnessModel.additive(w_star)
        h = phi_from_spec(sec["h"]) if "h" in sec else None
        if form == "product":
            return FitnessModel.product(phi_from_spec(sec["phi1"]), phi_from_spec(sec["phi2"]),
                                        h, w_star)
        if form == "separable_sum":
            return FitnessModel.separable_sum(float(sec["alpha"]), float(sec["beta"]),
                                              phi_from_spec(sec["phi1"]), phi_from_spec(sec["phi2"]),
                                              h, w_star)
        return FitnessModel.from_table(sec["matrix"], law, sec["h"])
    except (KeyError, TypeError) as exc:
        _fail(f"model section incomplete or malformed: {exc}", text, "model", path)
    except PatreeError as exc:
        _fail(f"invalid model: {exc}", text, "model", path)


def build_sweep(sec, text="", path=None):
    _check_keys(sec, SWEEP_KEYS, "sweep", text, path)
    if sec.get("param") != "alpha":
        _fail("sweep.param must be 'alpha' (the beta_poly exponent)", text, "param", path)
    if "values" in sec:
        if not _num_list(sec["values"]):
            _fail("sweep.values must be a list of numbers", text, "values", path)
        values = [float(v) for v in sec["values"]]
        if len(values) > SWEEP_CAP:
            raise CapError(f"{len(values)} grid points exceed the cap of {SWEEP_CAP}")
    else:
        try:
            start, stop, num = float(sec["start"]), float(sec["stop"]), int(sec["num"])
        except (KeyError, TypeError, ValueError):
            _fail("sweep needs values or start/stop/num", text, "sweep", path)
        if num < 1:
            _fail("sweep.num must be positive", text, "num", path)
        if num > SWEEP_CAP:
            raise CapError(f"{num} grid points exceed the cap of {SWEEP_CAP}")
        values = [start + (stop - start) * i / max(num - 1, 1) for i in range(num)]
    return {"param": "alpha", "values": values}


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=path) from None
    return parse_config(text, path)
