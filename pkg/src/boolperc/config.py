"""Experiment configuration: schema validation, range checks and default resolution."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import jsonschema

KINDS = ("sample", "percolate", "rc", "hole", "overcrowd", "unique", "fieldmin",
         "verify-discr1", "verify-discr2")

PROCESS_DEFAULTS = {"intensity": 1.0, "buffer": 5.0}

PARAM_DEFAULTS = {
    "sample": {"half_width": 10.0},
    "percolate": {"L": 20.0, "axis": "horizontal"},
    "rc": {"L_schedule": [10.0, 20.0], "tol": 0.01, "target": 0.5},
    "hole": {"theta": 2.0, "L_list": [1, 2, 3, 4], "R_list": []},
    "overcrowd": {"theta": 2.0, "L_list": [1, 2, 3, 4], "k": 4},
    "unique": {"L_list": [10.0, 20.0, 40.0]},
    "fieldmin": {"nu": 2.5, "R_list": [1.2, 2.0]},
    "verify-discr1": {"r": 1.0, "L": 5},
    "verify-discr2": {"theta": 2.0, "k": 1, "L": 2},
}


class ConfigError(ValueError):
    """Validation failed; ``errors`` lists ``{path, message[, constraint]}`` records."""

    def __init__(self, errors: list, kind: str = "schema"):
        self.errors = errors
        self.kind = kind
        super().__init__("; ".join(f"{e['path']}: {e['message']}" for e in errors))


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("boolperc").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _validator(name: str):
    schema = load_schema(name)
    return jsonschema.Draft202012Validator(schema)


def schema_errors(doc, name: str = "experiment_config") -> list:
    errs = sorted(_validator(name).iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message))
    return [{"path": ".".join(str(p) for p in e.absolute_path) or "$", "message": e.message}
            for e in errs]


def chain_half_width(theta: float, L_list) -> float:
    """Smallest origin window holding every nested ``1 x L`` chain."""
    L = max(L_list)
    lo = -(L // 2)
    return theta * max(-lo, lo + L)


def _resolve_params(kind: str, params: dict) -> dict:
    out = copy.deepcopy(PARAM_DEFAULTS[kind])
    out.update(copy.deepcopy(params))
    if kind in ("hole", "overcrowd") and "half_width" not in out:
        need = [chain_half_width(out["theta"], out["L_list"])]
        need += list(out.get("R_list", []))
        out["half_width"] = max(need)
    if kind == "verify-discr1" and "half_width" not in out:
        out["half_width"] = out["L"] * out["r"] / math.sqrt(5.0)
    if kind == "verify-discr2" and "half_width" not in out:
        out["half_width"] = out["L"] * out["theta"]
    return out


def _semantic_errors(kind: str, p: dict) -> list:
    errs = []

    def bad(path, message, constraint):
        errs.append({"path": f"params.{path}", "message": message, "constraint": constraint})

    if kind == "rc":
        s = p["L_schedule"]
        if any(b <= a for a, b in zip(s, s[1:])):
            bad("L_schedule", f"must be increasing, got {s}", "L_schedule strictly increasing")
    if kind in ("hole", "overcrowd"):
        if p["half_width"] < chain_half_width(p["theta"], p["L_list"]) or \
                any(R > p["half_width"] for R in p.get("R_list", [])):
            bad("half_width", "regions must lie inside the sampling window", "region inside window")
    if kind == "verify-discr1":
        theta = p["r"] / math.sqrt(5.0)
        if p["L"] * theta > p["half_width"] * (1 + 1e-12):
            bad("L", "box L*theta must fit in the window", "L*r/sqrt(5) <= half_width")
    if kind == "verify-discr2":
        if not p["r"] < p["theta"] / (18 * p["k"]):
            bad("r", f"r={p['r']} violates r < theta/(18k) with theta={p['theta']}, k={p['k']}",
                "r < theta/(18k)")
        if p["L"] * p["theta"] > p["half_width"] * (1 + 1e-12):
            bad("L", "box L*theta must fit in the window", "L*theta <= half_width")
    return errs


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_kind: str
    process: dict
    master_seed: int
    n_samples: int
    params: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "experiment_kind": self.experiment_kind,
            "process": copy.deepcopy(self.process),
            "master_seed": self.master_seed,
            "n_samples": self.n_samples,
            "params": copy.deepcopy(self.params),
        }
        if self.output:
            d["output"] = copy.deepcopy(self.output)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(changes)
        return validate_config(d)


def validate_config(raw) -> ExperimentConfig:
    """Parse and fully validate a config document (JSON text or dict).

    Raises ``ConfigError`` carrying every structural, range and precondition
    violation found.
    """
    if isinstance(raw, (str, bytes)):
        try:
            doc = json.loads(raw) if raw.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError([{"path": "$", "message": f"invalid JSON: {exc}"}]) from None
    else:
        doc = copy.deepcopy(raw)
    if not isinstance(doc, dict):
        raise ConfigError([{"path": "$", "message": "config must be a JSON object"}])
    if "experiment_kind" in doc:
        doc.setdefault("params", {})
    errs = schema_errors(doc)
    if errs:
        raise ConfigError(errs)
    kind = doc["experiment_kind"]
    process = {**PROCESS_DEFAULTS, **doc["process"]}
    params = _resolve_params(kind, doc.get("params", {}))
    errs = _semantic_errors(kind, params)
    if kind == "fieldmin" and process["name"] != "gaf":
        errs.append({"path": "process.name", "message": "fieldmin is defined for the GAF only",
                     "constraint": "process.name == gaf"})
    if errs:
        raise ConfigError(errs, kind="precondition")
    return ExperimentConfig(kind, process, int(doc["master_seed"]), int(doc["n_samples"]),
                            params, copy.deepcopy(doc.get("output", {})))


def config_errors(raw) -> list:
    """Error list for ``raw`` (empty when valid)."""
    try:
        validate_config(raw)
    except ConfigError as exc:
        return exc.errors
    return []
