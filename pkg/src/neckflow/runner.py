"""Run a validated experiment configuration and write its artifacts."""
from __future__ import annotations

import math
import os

import numpy as np
import scipy

from . import __version__, analysis, plots
from .errors import ReportError
from .config import build_metric, echo
from .rescaled import integrate_front_face, potential_of
from .report import (FOCUSSING_HEADER, FRONTFACE_HEADER, TRACE_HEADER, WINDING_HEADER,
                     ensure_dir, frontface_rows, trace_rows, write_csv, write_json)


def versions():
    return {"neckflow": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _seeds(cfg):
    s = cfg["seeds"]
    n = s.get("n", 10)
    th = s.get("theta0", 0.0)
    if s.get("mode", "equidistributed") == "random":
        rng = np.random.default_rng(cfg.get("seed", 0))
        ys = np.sort(rng.uniform(0.0, 2 * math.pi, n))
        return [(float(y), th) for y in ys]
    return [(2 * math.pi * j / n, th) for j in range(n)]


def run_winding(cfg, out, workers):
    fam = build_metric(cfg["metric"])
    tol = cfg["tolerances"]
    rep = analysis.winding_experiment(fam, cfg["phi"], cfg["eps"], cfg["z0"], tol["tol"],
                                      cfg["phases"], workers, tol.get("w_switch"))
    rows = rep.rows()
    write_csv(os.path.join(out, "winding.csv"), WINDING_HEADER, rows)
    fits = {format(phi, ".17g"): f for phi, f in rep.fits.items()}
    summary = {
        "experiment": "winding",
        "rows": [dict(zip(WINDING_HEADER, r)) for r in rows],
        "C_phi": {format(k, ".17g"): v for k, v in rep.C_phi.items()},
        "fits": fits,
        "cells": [{"epsilon": c.eps, "phi": c.phi, "y0": c.y0, "angl_measured": c.angl_measured,
                   "remainder": c.remainder, "energy_error": c.energy_error, "error": c.error}
                  for c in rep.cells],
        "failures": sum(c.error is not None for c in rep.cells),
    }
    return summary, ["winding.csv"]


def run_focussing(cfg, out, workers):
    fam = build_metric(cfg["metric"])
    tol = cfg["tolerances"]
    rep = analysis.focussing_experiment(fam, cfg["eps"], z1=cfg["z1"], tol=tol["tol"],
                                        delta0=tol["delta0"], workers=workers, seeds=_seeds(cfg),
                                        w_switch=tol.get("w_switch"))
    rows = [(r.eps, r.seed, r.y0, r.theta0, r.y_end, r.theta_end, r.dist_to_min, r.basin)
            for r in rep.rows]
    write_csv(os.path.join(out, "focussing.csv"), FOCUSSING_HEADER, rows)
    summary = {
        "experiment": "focussing",
        "mode": rep.mode,
        "rows": [dict(zip(FOCUSSING_HEADER, r)) for r in rows],
        "critical_points": [{"y_c": c.y_c, "value": c.value, "a": c.hess_eigs[0],
                             "index": c.morse_index, "classification": c.classification}
                            for c in rep.critical],
        "references": {k: {"y": v.y, "xi": v.xi, "theta": v.theta} for k, v in rep.references.items()},
        "rho": rep.rho, "rho_intercept": rep.rho_intercept, "r2": rep.r2,
        "rho_without_E": rep.rho_no_E, "r2_without_E": rep.r2_no_E,
        "mean_distance": {format(k, ".17g"): v for k, v in rep.mean_dist.items()},
        "histogram": rep.histogram,
        "minima_fraction": {format(e, ".17g"): rep.minima_fraction(e) for e in cfg["eps"]},
        "symmetric": rep.symmetric,
        "vertical_seeds_in_max_basin": [list(x) for x in rep.flagged_max],
        "attractor": rep.attractor,
        "failures": sum(r.error is not None for r in rep.rows),
    }
    return summary, ["focussing.csv"]


def run_trichotomy(cfg, out, workers):
    m = cfg["metric"]
    eps = cfg["eps"][0]
    tol = cfg["tolerances"]["tol"]
    reps = [analysis.trichotomy_run(L, eps, m["k"], m.get("p", 4.0), tol=tol) for L in cfg["L"]]
    header = ("L", "W_min", "classification", "simulated", "z_turn", "angular_length")
    rows = [(r.L, r.W_min, r.classification, r.simulated, r.z_turn, r.angular_length) for r in reps]
    write_csv(os.path.join(out, "trichotomy.csv"), header, rows)
    summary = {"experiment": "trichotomy",
               "rows": [dict(zip(header, r)) | {"consistent": rr.consistent, "z_final": rr.z_final}
                        for r, rr in zip(rows, reps)]}
    return summary, ["trichotomy.csv"]


def run_frontface(cfg, out, workers):
    fam = build_metric(cfg["metric"])
    tol = cfg["tolerances"]
    res = analysis.front_face_limit_check(fam, cfg["eps"], cfg["y0"], cfg["theta0"], cfg["T"])
    pot = potential_of(fam)
    tr = integrate_front_face(pot, fam.k, fam.sf, "Z", 0.0, cfg["y0"], cfg["theta0"],
                              tol_conv=tol["tol_conv"])
    write_csv(os.path.join(out, "frontface_trace.csv"), FRONTFACE_HEADER, frontface_rows(tr))
    write_csv(os.path.join(out, "frontface_limit.csv"), ("epsilon", "deviation"),
              list(zip(res["eps"], res["deviation"])))
    summary = {"experiment": "frontface_limit", **res,
               "limit": None if tr.limit is None else {"y_c": tr.limit.y_c,
                                                       "classification": tr.limit.classification},
               "converged": tr.converged, "lyapunov_violations": tr.lyapunov_violations()}
    return summary, ["frontface_limit.csv", "frontface_trace.csv"]


def run_eigencheck(cfg, out, workers):
    fam = build_metric(cfg["metric"])
    res = analysis.eigen_check(fam)
    rows = []
    for r in res:
        for num, pre in zip(r["numeric"], r["predicted"]):
            rows.append({"y_c": r["y_c"], "a": r["a"], "classification": r["classification"],
                         "numeric_re": num.real, "numeric_im": num.imag,
                         "predicted_re": pre.real, "predicted_im": pre.imag})
    header = tuple(rows[0]) if rows else ("y_c",)
    write_csv(os.path.join(out, "eigencheck.csv"), header, [tuple(r.values()) for r in rows])
    summary = {"experiment": "eigencheck", "rows": rows,
               "max_error": max((r["max_error"] for r in res), default=None),
               "mplus_plus_one": all(r["mplus_has_plus_one"] for r in res)}
    return summary, ["eigencheck.csv"]


def run_oracle(cfg, out, workers):
    m = cfg["metric"]
    tol = cfg["tolerances"]["tol"]
    res = analysis.oracle_check(m["k"], m["delta"], cfg["eps"][0], y0=cfg["y0"], z1=cfg["z1"],
                                tol=min(tol, 1e-12))
    summary = {"experiment": "oracle_check", "hamiltonian": list(res["hamiltonian"]),
               "oracle": list(res["oracle"]), "dz": res["dz"], "dphi": res["dphi"],
               "energy_error": res["energy_error"]}
    tr = res["trace"]
    write_csv(os.path.join(out, "trace.csv"), TRACE_HEADER, trace_rows(tr))
    step = max(1, len(tr.t) // 400)
    summary["trace"] = {"z": list(tr.states[::step, 0]) + [tr.states[-1, 0]],
                        "phi": list(tr.states[::step, 1]) + [tr.states[-1, 1]]}
    return summary, ["trace.csv"]


RUNNERS = {"winding": run_winding, "focussing": run_focussing, "trichotomy": run_trichotomy,
           "frontface_limit": run_frontface, "eigencheck": run_eigencheck,
           "oracle_check": run_oracle}


def render(summary, out, style="color"):
    """Write the SVG figures of a summary; returns the file names."""
    names = []
    try:
        figs = plots.FIGURES[summary["experiment"]]
    except (KeyError, TypeError):
        raise ReportError("report has no known 'experiment' field") from None
    for name, fn in figs.items():
        try:
            fig = fn(summary)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ReportError(f"malformed {summary['experiment']} report: {exc!r}") from None
        if fig is None:
            continue
        fname = f"{name}.svg"
        fig.save(os.path.join(out, fname), style)
        names.append(fname)
    return names


def run(cfg, out, workers=1):
    """Run a completed config; returns the summary dict (also written to summary.json)."""
    ensure_dir(out)
    summary, files = RUNNERS[cfg["experiment"]](cfg, out, workers)
    summary["config"] = echo(cfg)
    summary["versions"] = versions()
    summary["files"] = files
    figs = render(summary, out)
    summary["files"] = files + figs
    write_json(os.path.join(out, "summary.json"), summary)
    return summary
