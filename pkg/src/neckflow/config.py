"""Experiment configuration: schema validation, defaults and metric construction."""
from __future__ import annotations

import copy
import json
import math
from importlib import resources

import jsonschema

from .errors import ConfigError
from .metric import EllipticSurface, MetricFamily, MorseModel, WarpedProduct
from .scaling import PowerFamily

EXPERIMENTS = ("winding", "focussing", "trichotomy", "frontface_limit", "eigencheck", "oracle_check")

DESCRIPTIONS = {
    "winding": "angular length through the waist against C_phi cos(phi) / eps^(k-1)",
    "focussing": "endpoints at z1 of waist geodesics, basins and the focussing exponent",
    "trichotomy": "pass / asymptotic / turn-back classification on a warped product",
    "frontface_limit": "convergence of the rescaled flow to the front-face flow as eps -> 0",
    "eigencheck": "Jacobian eigenvalues at corner critical points against the closed form",
    "oracle_check": "Hamiltonian flow on the elliptic surface against the ambient Lagrangian",
}

DEFAULTS = {
    "winding": {"metric": {"variant": "warped", "k": 2, "p": 2.0},
                "eps": [0.08, 0.04, 0.02, 0.01], "phi": [math.acos(0.95)], "phases": [0.0],
                "z0": 1.0},
    "focussing": {"metric": {"variant": "morse", "k": 2, "delta": 0.7},
                  "eps": [0.2, 0.1, 0.05, 0.025], "seeds": {"n": 10, "theta0": 0.0,
                                                          "mode": "equidistributed"},
                  "z1": 0.5},
    "trichotomy": {"metric": {"variant": "warped", "k": 2, "p": 4.0}, "eps": [0.5],
                   "L": [0.2, 0.25, 0.3]},
    "frontface_limit": {"metric": {"variant": "warped", "k": 2, "p": 2.0},
                        "eps": [0.1, 0.05, 0.025], "y0": 0.3, "theta0": 0.7, "T": 5.0},
    "eigencheck": {"metric": {"variant": "morse", "k": 2, "delta": 0.7}},
    "oracle_check": {"metric": {"variant": "elliptic", "k": 2, "delta": 0.8}, "eps": [1.0],
                     "y0": 0.3, "z1": 1.0},
}

TOL_DEFAULTS = {"tol": 1e-11, "tol_conv": 1e-8, "delta0": 1e-8}


def schema():
    text = resources.files("neckflow").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(cfg: dict) -> dict:
    """Schema check, defaults and cross-field checks.  Returns the completed config."""
    try:
        jsonschema.validate(cfg, schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(f"config schema error at '{path}': {exc.message}") from None
    exp = cfg["experiment"]
    full = _merge(DEFAULTS[exp], cfg)
    if "metric" in cfg and cfg["metric"].get("variant") != DEFAULTS[exp]["metric"]["variant"]:
        full["metric"] = copy.deepcopy(cfg["metric"])
    full["tolerances"] = _merge(TOL_DEFAULTS, full.get("tolerances", {}))
    m = full["metric"]
    k = m["k"]
    kappa = m.get("kappa", 2 * k - 2)
    if m["variant"] == "elliptic" and "kappa" in m:
        raise ConfigError("kappa is fixed by the elliptic surface")
    if m["variant"] != "elliptic" and not (k <= kappa <= 2 * k):
        raise ConfigError(f"kappa must lie in [k, 2k], got {kappa}")
    if exp in ("focussing", "frontface_limit", "eigencheck") and kappa < 2 * k - 2:
        raise ConfigError(f"{exp} needs kappa >= 2k - 2 (got kappa={kappa}, k={k})")
    if exp == "focussing" and kappa != 2 * k - 2:
        raise ConfigError("focussing needs kappa = 2k - 2")
    if m["variant"] == "morse" and "delta" not in m:
        raise ConfigError("morse metric needs delta")
    if m["variant"] == "elliptic" and "delta" not in m:
        raise ConfigError("elliptic metric needs delta")
    if exp == "oracle_check" and m["variant"] != "elliptic":
        raise ConfigError("oracle_check runs on the elliptic surface")
    if exp == "trichotomy" and m["variant"] != "warped":
        raise ConfigError("trichotomy runs on a warped product")
    return full


def load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def build_metric(m: dict) -> MetricFamily:
    v, k = m["variant"], m["k"]
    if v == "warped":
        return WarpedProduct(k, PowerFamily(float(m.get("p", 2.0))), S=float(m.get("S", 0.0)),
                             kappa=m.get("kappa"))
    if v == "morse":
        return MorseModel(k, float(m["delta"]), PowerFamily(float(m.get("p", 2.0))),
                          kappa=m.get("kappa"))
    return EllipticSurface(k, float(m["delta"]), PowerFamily(float(m.get("p", 2.0 * k))))


def echo(cfg: dict) -> dict:
    """Config as echoed in summaries: runtime knobs (workers, output) are dropped."""
    return {k: copy.deepcopy(v) for k, v in sorted(cfg.items()) if k not in ("workers", "output")}
