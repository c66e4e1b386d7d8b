"""Command line entry point: one experiment per invocation.

    sbscatter <experiment> [--config PATH] [--out DIR] [--deterministic] [--threads N]

Exit codes: 0 all checks pass, 1 acceptance failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import os
import sys
import time

import numpy as np
import scipy

from . import __version__
from .config import EXPERIMENTS, ConfigError, RunConfig, validate
from .contour import laplace_identity_defect, laplace_setup
from .distributions import (QuadratureError, extrapolate_to_zero, fit_order, mollified_pairing,
                            sokhotski_defect, sokhotski_limit, standard_family)
from .fock import DimensionError
from .hamiltonian import assemble_full
from .multiscale import (A_tail_study, CompactKernel, check_admissibility, pv_limit_rates,
                         surrogate_u)
from .scattering import (FourierPairing, TimeDomainSetup, WavePacket, build_G, kernel_T,
                         line_shape_scan, oracle_defect, smeared_parts, smeared_T,
                         time_domain_T)
from .distributions import bump
from .spectral import (NearSingularError, QuasiNullError, ResolventForm, TrackingError,
                       eigen_resonances)

log = logging.getLogger("sbscatter")

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
NUMERICAL_ERRORS = (TrackingError, NearSingularError, QuasiNullError, QuadratureError,
                    DimensionError, np.linalg.LinAlgError, RuntimeError, MemoryError)


def _c(z):
    return [float(np.real(z)), float(np.imag(z))]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                          for v in row])


def _check(checks, name, ok, **detail):
    checks.append({"check": name, "pass": bool(ok), **detail})


def _packets(cfg):
    return [WavePacket.bump(float(c), float(w)) for c, w in cfg["packets"]]


def _resonances(cfg, p=None):
    p = p or cfg.model()
    rd = eigen_resonances(p)
    H = assemble_full(p)
    return p, rd, H, ResolventForm(H, rd.phi)


# --------------------------------------------------------------------------
# experiments: each returns (results dict, checks list) and writes its tables


def run_spectrum(cfg, out):
    p, rd, _, _ = _resonances(cfg)
    res = rd.to_dict()
    checks = []
    _check(checks, "Im lambda1 <= 0", np.imag(rd.lam1) <= 1e-12)
    _check(checks, "eigen residuals small", max(rd.residuals.values()) <= 1e-8,
           residuals=rd.residuals)
    if p.g == 0:
        _check(checks, "free closed forms", abs(rd.lam0) <= 1e-12 and abs(rd.lam1 - p.e1) <= 1e-12)
    return res, checks


def _scan_grid(cfg, rd):
    sc = cfg["scan"]
    gam = max(abs(np.imag(rd.lam1)), 1e-3)
    c = float(np.real(rd.lam1))
    lo = c - sc["half_widths"] * gam if sc["k_min"] == "auto" else float(sc["k_min"])
    hi = c + sc["half_widths"] * gam if sc["k_max"] == "auto" else float(sc["k_max"])
    if lo <= 0:
        raise ConfigError(["scan grid must stay away from k = 0"])
    return np.linspace(lo, hi, int(sc["points"]))


def run_kernel(cfg, out):
    p, rd, H, form = _resonances(cfg)
    ks = _scan_grid(cfg, rd)
    T = np.asarray(kernel_T(rd, H, ks, ks, p, form=form))
    _write_csv(os.path.join(out, "kernel.csv"), ["k", "re_T", "im_T", "abs_T"],
               [(k, t.real, t.imag, abs(t)) for k, t in zip(ks, T)])
    packets = _packets(cfg)
    rows, res = [], {"lambda0": _c(rd.lam0), "lambda1": _c(rd.lam1), "pairs": []}
    checks = []
    for i, j in cfg["pairs"]:
        h, l = packets[i], packets[j]
        a = smeared_T(h, l, rd, p, form=form)
        parts = smeared_parts(h, l, rd, p, form=form, panels=24)
        rows.append((i, j, a.real, a.imag, parts.value.real, parts.value.imag))
        res["pairs"].append({"pair": [i, j], "smeared_T": _c(a), "parts": parts.to_dict()})
        _check(checks, f"kernel vs G-form, pair {i},{j}",
               abs(a - parts.value) <= 1e-8 * max(abs(a), 1e-300) + 1e-14)
    _write_csv(os.path.join(out, "smeared.csv"),
               ["h", "l", "re_T", "im_T", "re_T_parts", "im_T_parts"], rows)
    return res, checks


def run_lineshape(cfg, out):
    p, rd, H, form = _resonances(cfg)
    scan = line_shape_scan(rd, p, _scan_grid(cfg, rd), form=form)
    scan.to_csv(os.path.join(out, "lineshape.csv"))
    scan.to_json(os.path.join(out, "lineshape_fit.json"))
    res = scan.summary()
    checks = []
    if not scan.fit_ok:
        _check(checks, "Lorentzian fit", False, message=scan.message)
        return res, checks
    tol = cfg["precision"]["width_rtol"]
    gam = abs(np.imag(rd.lam1))
    _check(checks, "center within one grid spacing of Re lambda1",
           abs(scan.center - np.real(rd.lam1)) <= scan.spacing)
    _check(checks, "half-width within tolerance of |Im lambda1|",
           abs(scan.half_width - gam) <= tol * gam)
    return res, checks


def run_laplace(cfg, out):
    c = cfg["contour"]
    tol = cfg["precision"]["laplace_tol"]
    setup = laplace_setup(cfg.model())
    rows, checks, res = [], [], {"defects": {}}
    for t in c["times"]:
        seq = []
        for n in c["nodes"]:
            d = laplace_identity_defect(setup, float(t), eps=float(c["eps"]), R=float(c["R"]),
                                        n=int(n))
            seq.append(d["defect"])
            rows.append((t, n, d["nodes"], d["contour"].real, d["contour"].imag,
                         d["direct"].real, d["direct"].imag, d["defect"]))
        res["defects"][str(t)] = seq
        _check(checks, f"t={t}: defect <= {tol}", seq[-1] <= tol, defect=seq[-1])
        _check(checks, f"t={t}: decreasing under node doubling",
               all(b <= a for a, b in zip(seq, seq[1:])) or seq[-1] <= 1e-12)
    _write_csv(os.path.join(out, "laplace.csv"),
               ["t", "n", "nodes", "re_contour", "im_contour", "re_direct", "im_direct",
                "defect"], rows)
    return res, checks


def run_plemelj(cfg, out):
    alphas = [float(a) for a in cfg["plemelj"]["alphas"]]
    pr = cfg["precision"]
    rows, checks, res = [], [], {"functions": {}}
    for phi in standard_family():
        d = [sokhotski_defect(phi, a) for a in alphas]
        vals = [mollified_pairing(phi, a) for a in alphas]
        order = fit_order(alphas, d)
        limit = sokhotski_limit(phi)
        extra = extrapolate_to_zero(alphas, vals)
        rows += [(phi.name, a, x) for a, x in zip(alphas, d)]
        res["functions"][phi.name] = {"order": order, "max_ratio": max(x / a for a, x in zip(alphas, d)),
                                      "limit": _c(limit), "extrapolated": _c(extra)}
        _check(checks, f"{phi.name}: defect <= {pr['plemelj_ratio']} alpha",
               all(x <= pr["plemelj_ratio"] * a for a, x in zip(alphas, d) if a <= 0.1))
        _check(checks, f"{phi.name}: order >= {pr['plemelj_order']}", order >= pr["plemelj_order"],
               order=order)
        _check(checks, f"{phi.name}: alpha -> 0 extrapolation hits the limit",
               abs(extra - limit) <= pr["plemelj_limit_tol"], error=abs(extra - limit))
    _write_csv(os.path.join(out, "plemelj.csv"), ["function", "alpha", "defect"], rows)
    return res, checks


def run_multiscale(cfg, out):
    mp = cfg.multiscale()
    s = cfg["multiscale"]
    ok, rep = check_admissibility(mp)
    u = surrogate_u(mp.e1, float(s["gamma"]))
    G = bump(*[float(x) for x in s["packet"]])
    rates = pv_limit_rates(G, u, 0.0, mp)
    zeta = FourierPairing(G, 0.0, CompactKernel(G))
    tail = A_tail_study(zeta, float(s["q"]), [float(q) for q in s["Q"]],
                        [(int(n), float(R)) for n, R in s["levels"]], u, 0.0, mp)
    _write_csv(os.path.join(out, "pv_limit_rates.csv"), ["n", "R", "eta", "defect"],
               [(r["n"], r["R"], r["eta"], r["defect"]) for r in rates["rows"]])
    _write_csv(os.path.join(out, "tail_study.csv"), ["Q", "n", "R", "tail", "Q_tail"],
               [(r["Q"], r["n"], r["R"], r["tail"], r["Q_tail"]) for r in tail["rows"]])
    tol = cfg["precision"]["rate_rtol"]
    checks = []
    _check(checks, "multiscale inequalities", ok)
    for key, name in (("rho", "exponent_rho"), ("invR", "exponent_invR"), ("eta", "exponent_eta")):
        exp = rates["expected"][key]
        _check(checks, f"{name} within {tol:.0%} of {exp:g}",
               abs(rates[name] - exp) <= tol * exp, measured=rates[name])
    spread = float(np.max(tail["relative_spread"]))
    _check(checks, "Q |A(2Q) - A(Q)| stable across levels", spread <= cfg["precision"]["tail_spread"],
           spread=spread)
    res = {"admissibility": {k: v["value"] for k, v in rep.items()},
           "exponents": {k: rates[k] for k in ("exponent_rho", "exponent_invR", "exponent_eta")},
           "expected": rates["expected"], "tail_C": {f"{n},{R}": v for (n, R), v in tail["C"].items()},
           "tail_spread": tail["relative_spread"].tolist()}
    return res, checks


def run_oracle(cfg, out):
    p, rd, H, form = _resonances(cfg)
    pr = cfg["precision"]
    td_cfg = cfg["time_domain"]
    setup = TimeDomainSetup.build(p)
    packets = _packets(cfg)
    rows, checks, res = [], [], {"pairs": []}
    for i, j in cfg["pairs"]:
        h, l = packets[i], packets[j]
        sm = smeared_T(h, l, rd, p, form=form)
        td = time_domain_T(h, l, p, s_max=float(td_cfg["s_max"]), order=int(td_cfg["order"]),
                           setup=setup)
        v = oracle_defect(td.value, sm, pr["oracle_rtol"], pr["oracle_atol"])
        rows.append((i, j, sm.real, sm.imag, td.value.real, td.value.imag, v["difference"],
                     td.tail_estimate))
        res["pairs"].append({"pair": [i, j], "smeared_T": _c(sm), "time_domain_T": _c(td.value),
                             **{k: v[k] for k in ("difference", "bound", "relative")},
                             "tail_estimate": td.tail_estimate})
        _check(checks, f"oracle pair {i},{j}", v["pass"], relative=v["relative"])
    _write_csv(os.path.join(out, "oracle.csv"),
               ["h", "l", "re_smeared", "im_smeared", "re_time", "im_time", "difference",
                "tail_estimate"], rows)
    return res, checks


RUNNERS = {
    "spectrum": run_spectrum,
    "kernel": run_kernel,
    "lineshape": run_lineshape,
    "laplace-check": run_laplace,
    "plemelj-check": run_plemelj,
    "multiscale-check": run_multiscale,
    "oracle-check": run_oracle,
}


# --------------------------------------------------------------------------


def versions():
    return {"sbscatter": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": sys.version.split()[0]}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return _c(x)
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _threads(n):
    if not n:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.warning("threadpoolctl not installed; --threads ignored")
        return contextlib.nullcontext()
    return threadpool_limits(limits=int(n))


def run(cfg: RunConfig, out, deterministic=False, threads=None):
    """Execute ``cfg.experiment``; returns (summary dict, exit code)."""
    bad = [r for r in validate(cfg) if not r["ok"]]
    if bad:
        raise ConfigError([f"{r['check']}: {r['detail']}" for r in bad])
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    with _threads(threads):
        results, checks = RUNNERS[cfg.experiment](cfg, out)
    elapsed = time.perf_counter() - t0
    passed = all(c["pass"] for c in checks)
    summary = {
        "experiment": cfg.experiment,
        "config_hash": cfg.hash,
        "versions": versions(),
        "deterministic": bool(deterministic),
        "timings": None if deterministic else {"total_s": elapsed},
        "results": results,
        "checks": checks,
        "pass": passed,
    }
    summary = _jsonable(summary)
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary, EXIT_PASS if passed else EXIT_FAIL


def _parser():
    ap = argparse.ArgumentParser(prog="sbscatter", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=("validate",) + EXPERIMENTS)
    ap.add_argument("--config", help="TOML configuration file")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--deterministic", action="store_true",
                    help="omit timings so repeated runs give identical files")
    ap.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.from_toml(args.config) if args.config else RunConfig.default()
        if args.command != "validate":
            cfg.data["experiment"] = args.command
    except ConfigError as exc:
        print(json.dumps({"error": "config", "problems": exc.problems}, indent=2))
        return EXIT_CONFIG
    except OSError as exc:
        print(json.dumps({"error": "config", "problems": [str(exc)]}, indent=2))
        return EXIT_CONFIG

    if args.command == "validate":
        report = validate(cfg)
        print(json.dumps({"config_hash": cfg.hash, "checks": report}, indent=2))
        return EXIT_PASS if all(r["ok"] for r in report) else EXIT_CONFIG

    out = args.out or cfg["output_dir"]
    try:
        summary, code = run(cfg, out, args.deterministic, args.threads)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "problems": exc.problems}, indent=2))
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(json.dumps({"error": "numerical", "type": type(exc).__name__,
                          "message": str(exc)}, indent=2))
        return EXIT_NUMERIC
    for c in summary["checks"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['check']}")
    print(f"summary written to {os.path.join(out, 'summary.json')}")
    return code


if __name__ == "__main__":
    sys.exit(main())
