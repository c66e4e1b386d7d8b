"""Run configuration: TOML ingestion, strict key checking, validation and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys

from .hamiltonian import ModelParams
from .modes import DilationParam, FormFactorParams, RadialGrid, default_r_max
from .multiscale import MultiscaleParams, check_admissibility

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("spectrum", "kernel", "lineshape", "laplace-check", "plemelj-check",
               "multiscale-check", "oracle-check")

DEFAULTS = {
    "experiment": "spectrum",
    "output_dir": "out",
    "model": {
        "e1": 1.0,
        "g": 0.1,
        "N_max": 2,
        "theta": [0.0, 0.15],
        "literal_dilation": False,
        "grid": {"r_min": 1e-3, "r_max": "auto", "M": 81, "rule": "graded", "scale": 1.0},
        "form": {"cutoff": 1.0, "mu": 0.25},
    },
    "contour": {"eps": 0.1, "R": 8.0, "nodes": [4, 8, 16], "times": [0.5, 2.0, 10.0]},
    "multiscale": {"rho0": 0.2, "rho": 1e-4, "mu": 0.25, "C_bold": 1.05, "m": 4,
                   "nu": 0.15, "e1": 1.0, "gamma": 0.05, "packet": [0.45, 0.15],
                   "Q": [5.0, 10.0, 20.0, 40.0], "q": 0.5, "levels": [[2, 20.0], [3, 40.0]]},
    "packets": [[1.0, 0.3], [0.9, 0.35], [1.1, 0.4]],
    "pairs": [[0, 0], [1, 2]],
    "scan": {"k_min": "auto", "k_max": "auto", "points": 41, "half_widths": 5.0},
    "time_domain": {"s_max": 400.0, "order": 16},
    "plemelj": {"alphas": [0.1, 0.05, 0.025, 0.0125, 0.00625]},
    "precision": {
        "laplace_tol": 1e-6,
        "plemelj_ratio": 5.0,
        "plemelj_order": 0.9,
        "plemelj_limit_tol": 1e-6,
        "oracle_rtol": 1e-3,
        "oracle_atol": 1e-8,
        "width_rtol": 0.15,
        "rate_rtol": 0.3,
        "tail_spread": 0.2,
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violated invariant."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _merge(base, over, path, problems):
    """Recursive merge that records keys absent from ``base``."""
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            problems.append(f"unknown key '{where}'")
            continue
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                problems.append(f"'{where}' must be a table")
                continue
            out[key] = _merge(base[key], val, where, problems)
        else:
            out[key] = val
    return out


class RunConfig:
    """Normalized configuration with derived parameter objects."""

    def __init__(self, data: dict):
        problems = []
        self.data = _merge(DEFAULTS, data, "", problems)
        if problems:
            raise ConfigError(problems)

    @classmethod
    def from_toml(cls, path):
        with open(path, "rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError([f"cannot parse {path}: {exc}"]) from None
        return cls(raw)

    @classmethod
    def default(cls):
        return cls({})

    def __getitem__(self, key):
        return self.data[key]

    @property
    def experiment(self):
        return self.data["experiment"]

    def canonical(self):
        d = copy.deepcopy(self.data)
        d.pop("output_dir", None)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    # -- parameter objects --------------------------------------------------

    def form(self):
        f = self.data["model"]["form"]
        return FormFactorParams(cutoff=float(f["cutoff"]), mu=float(f["mu"]))

    def grid(self):
        g = self.data["model"]["grid"]
        r_max = g["r_max"]
        if r_max == "auto":
            r_max = default_r_max(self.form().cutoff)
        return RadialGrid.from_rule(float(g["r_min"]), float(r_max), int(g["M"]), g["rule"],
                                    scale=float(g["scale"]))

    def theta(self):
        th = self.data["model"]["theta"]
        return DilationParam(float(th[0]), float(th[1]))

    def model(self) -> ModelParams:
        m = self.data["model"]
        return ModelParams(self.grid(), e1=float(m["e1"]), g=float(m["g"]), form=self.form(),
                           theta=self.theta(), N_max=int(m["N_max"]),
                           literal_dilation=bool(m["literal_dilation"]))

    def multiscale(self) -> MultiscaleParams:
        s = self.data["multiscale"]
        return MultiscaleParams(rho0=float(s["rho0"]), rho=float(s["rho"]), mu=float(s["mu"]),
                                C_bold=float(s["C_bold"]), m=int(s["m"]), nu=float(s["nu"]),
                                e1=float(s["e1"]))


def _check(report, name, fn):
    try:
        detail = fn()
        report.append({"check": name, "ok": True, "detail": detail or ""})
    except (ValueError, TypeError, KeyError, IndexError) as exc:
        report.append({"check": name, "ok": False, "detail": str(exc)})


def validate(cfg: RunConfig):
    """Dry-run validation of every invariant; returns a list of check records."""
    report = []
    d = cfg.data

    def experiment():
        if d["experiment"] not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {', '.join(EXPERIMENTS)}")

    def theta():
        th = cfg.theta()
        return f"theta = {th.value}"

    def dims():
        p = cfg.model()
        return f"dim = {p.dim}"

    def admissibility():
        ok, rep = check_admissibility(cfg.multiscale())
        if not ok:
            bad = [k for k, v in rep.items() if isinstance(v, dict) and not v.get("ok", True)]
            raise ValueError(f"multiscale conditions violated: {', '.join(bad) or rep}")
        return "all inequalities hold"

    def packets():
        for c, w in d["packets"]:
            if not (w > 0 and c - w > 0):
                raise ValueError(f"packet ({c}, {w}) must have width > 0 and support in (0, inf)")
        n = len(d["packets"])
        for i, j in d["pairs"]:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"pair ({i}, {j}) refers to a missing packet")

    def contour():
        c = d["contour"]
        if not 0 < c["eps"] < c["R"]:
            raise ValueError("contour needs 0 < eps < R")
        if any(t < 0.1 for t in c["times"]):
            raise ValueError("times must be >= 0.1")
        if any(int(n) < 2 for n in c["nodes"]):
            raise ValueError("node counts must be >= 2")

    def precision():
        for k, v in d["precision"].items():
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ValueError(f"precision.{k} must be a positive number")

    _check(report, "experiment", experiment)
    _check(report, "form factor (mu in (0, 1/2), cutoff > 0)", lambda: repr(cfg.form()))
    _check(report, "dilation parameter in S", theta)
    _check(report, "grid", lambda: f"M = {cfg.grid().M}")
    _check(report, "model and Fock dimension", dims)
    _check(report, "multiscale parameters", lambda: repr(cfg.multiscale()))
    _check(report, "multiscale inequalities", admissibility)
    _check(report, "packets", packets)
    _check(report, "contour", contour)
    _check(report, "precision targets", precision)
    return report
