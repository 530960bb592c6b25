"""Unified command line for the gasket workbench.

Subcommands: topology, kusuoka, resistance, eigen, heat, sobolev, solve,
burgers, walk, acceptance.  Every run writes its primary output
atomically plus a ``<out>.manifest.json`` recording the resolved
configuration, library versions, and wall time (also on failure).  A
``--config FILE`` of ``key=value`` lines supplies defaults; explicit
flags win.  Exit codes: 0 success, 1 computation failure (or failed
acceptance criteria), 2 usage error.

Numbers in CSV/JSON are serialized with 17 significant digits, so equal
configurations produce byte-identical text outputs.  Report-style
subcommands also render PNG figures next to the data unless --no-plot.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from fractions import Fraction

import numpy as np

from .errors import ComputationError, GasketError, ResourceLimitError, UsageError
from . import reporting


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="gasket",
        description="numerical workbench for Dirichlet-form analysis on "
                    "the Sierpinski gasket")
    top.add_argument("--threads", type=int, metavar="N",
                     help="worker process cap (overrides GASKET_THREADS)")
    sub = top.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def add(p, name, **kw):
        kw.setdefault("default", S)
        p.add_argument(name, **kw)

    p = sub.add_parser("topology", help="emit the level graph as JSON")
    add(p, "--level", type=int)
    add(p, "--out", type=str)
    add(p, "--config", type=str)

    p = sub.add_parser("kusuoka", help="cell measure weights as CSV")
    add(p, "--level", type=int)
    add(p, "--out", type=str)
    add(p, "--config", type=str)

    p = sub.add_parser("resistance", help="effective resistances for vertex pairs")
    add(p, "--level", type=int)
    add(p, "--pairs", type=str, help="CSV file of 'x,y' vertex id rows")
    add(p, "--out", type=str)
    add(p, "--config", type=str)

    p = sub.add_parser("eigen", help="eigendecomposition to a binary file")
    add(p, "--level", type=int)
    add(p, "--boundary", type=str, choices=["dirichlet", "neumann"])
    add(p, "--out", type=str)
    add(p, "--no-plot", action="store_true")
    add(p, "--config", type=str)

    p = sub.add_parser("heat", help="heat flow values or kernel samples")
    add(p, "--level", type=int)
    add(p, "--kernel", action="store_true")
    add(p, "--times", type=str, help="comma-separated times")
    add(p, "--x", type=int, help="kernel source vertex")
    add(p, "--y", type=int, help="kernel target vertex (default: x)")
    add(p, "--psi", type=str, help="initial data builtin (bump[:s]|antisym[:s])")
    add(p, "--out", type=str)
    add(p, "--no-plot", action="store_true")
    add(p, "--config", type=str)

    p = sub.add_parser("sobolev", help="inequality verification lab")
    add(p, "--measure", type=str,
        help="nu | mu | dirac[:corner] | file:<csv>")
    add(p, "--p", type=float)
    add(p, "--q", type=float, help="use 'inf' for the sup norm")
    add(p, "--mode", type=str, choices=["verify", "optimal", "condition"])
    add(p, "--levels", type=str, help="comma-separated levels")
    add(p, "--a", type=float, help="override the fitted/formula exponent")
    add(p, "--delta-bar", type=float, help="upper scaling exponent for file measures")
    add(p, "--delta-under", type=float, help="lower scaling exponent for file measures")
    add(p, "--c-sigma", type=float, help="doubling constant for file measures")
    add(p, "--out", type=str)
    add(p, "--no-plot", action="store_true")
    add(p, "--config", type=str)

    p = sub.add_parser("solve", help="semilinear parabolic solver")
    add(p, "--level", type=int)
    add(p, "--T", type=float)
    add(p, "--steps", type=int)
    add(p, "--f", type=str, help="zero | sincos[:scale] | constant:<v>")
    add(p, "--psi", type=str, help="bump[:scale] | antisym[:scale] | zero")
    add(p, "--tol", type=float)
    add(p, "--out", type=str)
    add(p, "--no-plot", action="store_true")
    add(p, "--config", type=str)

    p = sub.add_parser("burgers", help="gasket Burgers equation")
    add(p, "--level", type=int)
    add(p, "--T", type=float)
    add(p, "--steps", type=int)
    add(p, "--psi", type=str)
    add(p, "--outer-tol", type=float)
    add(p, "--out", type=str)
    add(p, "--report", type=str)
    add(p, "--no-plot", action="store_true")
    add(p, "--config", type=str)

    p = sub.add_parser("walk", help="Monte Carlo estimators")
    add(p, "--level", type=int)
    add(p, "--paths", type=int)
    add(p, "--seed", type=int)
    add(p, "--mode", type=str, choices=["heat", "source", "expmoment"])
    add(p, "--T", type=float)
    add(p, "--beta", type=float)
    add(p, "--x0", type=int)
    add(p, "--psi", type=str)
    add(p, "--out", type=str)
    add(p, "--config", type=str)

    p = sub.add_parser("acceptance", help="run the acceptance criteria")
    add(p, "--quick", action="store_true")
    add(p, "--only", type=str, help="comma-separated criterion numbers")
    add(p, "--out", type=str)
    add(p, "--config", type=str)
    return top


_DEFAULTS = {
    "topology": {"level": 3, "out": "graph.json"},
    "kusuoka": {"level": 2, "out": "weights.csv"},
    "resistance": {"level": 3, "pairs": None, "out": "resistance.csv"},
    "eigen": {"level": 4, "boundary": "dirichlet", "out": "spec.bin",
              "no_plot": False},
    "heat": {"level": 5, "kernel": False, "times": "0.01,0.05,0.1,0.5",
             "x": None, "y": None, "psi": "bump", "out": "heat.csv",
             "no_plot": False},
    "sobolev": {"measure": "nu", "p": 2.0, "q": float("inf"),
                "mode": "verify", "levels": "4,5", "a": None,
                "delta_bar": 1.0, "delta_under": 1.0, "c_sigma": 1.0,
                "out": "sobolev.csv", "no_plot": False},
    "solve": {"level": 5, "T": 0.5, "steps": None, "f": "sincos",
              "psi": "bump", "tol": 1e-8, "out": "sol.csv",
              "no_plot": False},
    "burgers": {"level": 5, "T": 0.5, "steps": None, "psi": "bump:0.5",
                "outer_tol": 1e-6, "out": "sol.csv", "report": "report.json",
                "no_plot": False},
    "walk": {"level": 5, "paths": 10000, "seed": 2024, "mode": "heat",
             "T": 0.2, "beta": 1.0, "x0": None, "psi": "bump",
             "out": "mc.json"},
    "acceptance": {"quick": False, "only": None, "out": "acceptance.json"},
}

_BOOL_KEYS = {"kernel", "no_plot", "quick"}
_INT_KEYS = {"level", "steps", "paths", "seed", "x", "y", "x0", "threads"}
_FLOAT_KEYS = {"T", "p", "q", "a", "tol", "outer_tol", "beta", "delta_bar",
               "delta_under", "c_sigma"}


def _read_config(path: str, command: str) -> dict:
    """Flat key=value file; keys use the flag spelling without dashes."""
    allowed = set(_DEFAULTS[command])
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    for ln, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{ln}: expected key=value")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        val = val.strip()
        if key not in allowed:
            raise UsageError(f"{path}:{ln}: unknown key {key!r} for {command}")
        if key in _BOOL_KEYS:
            if val.lower() not in ("true", "false", "1", "0"):
                raise UsageError(f"{path}:{ln}: {key} wants true/false")
            out[key] = val.lower() in ("true", "1")
        elif key in _INT_KEYS:
            out[key] = int(val)
        elif key in _FLOAT_KEYS:
            out[key] = float(val)
        else:
            out[key] = val
    return out


def _resolve(ns: argparse.Namespace) -> dict:
    """Builtin defaults <- config file <- explicit flags."""
    cmd = ns.command
    given = {k: v for k, v in vars(ns).items()
             if k not in ("command", "threads")}
    cfg = {}
    if "config" in given:
        cfg = _read_config(given.pop("config"), cmd)
    merged = dict(_DEFAULTS[cmd])
    merged.update(cfg)
    merged.update(given)
    merged["command"] = cmd
    return merged


def _parse_times(text: str) -> np.ndarray:
    try:
        vals = np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError:
        raise UsageError(f"bad time list {text!r}")
    if vals.size == 0 or (vals <= 0).any():
        raise UsageError("times must be positive")
    return vals


def _builtin_psi(spec: str, level: int):
    from .forms import DiscreteFunction
    from .graph import level_graph
    from .pde import antisymmetric_data, center_bump

    name, _, scale_txt = spec.partition(":")
    scale = float(scale_txt) if scale_txt else 1.0
    if name == "bump":
        return center_bump(level, scale)
    if name == "antisym":
        return antisymmetric_data(level, scale)
    if name == "zero":
        g = level_graph(level)
        return DiscreteFunction(level, np.zeros(g.n_vertices))
    raise UsageError(f"unknown initial data builtin {spec!r}")


def _builtin_source(spec: str):
    from .pde import source_constant, source_sincos, source_zero

    name, _, arg = spec.partition(":")
    if name == "zero":
        return source_zero()
    if name == "sincos":
        return source_sincos(float(arg) if arg else 1.0)
    if name == "constant":
        if not arg:
            raise UsageError("constant source needs a value, e.g. constant:2.0")
        return source_constant(float(arg))
    raise UsageError(f"unknown source builtin {spec!r}")


def _measure_spec(cfg: dict):
    from . import sobolev

    text = cfg["measure"]
    if text == "nu":
        return sobolev.measure_nu()
    if text == "mu":
        return sobolev.measure_mu()
    if text.startswith("dirac"):
        _, _, arg = text.partition(":")
        corner = int(arg) if arg else 0
        return sobolev.measure_dirac(corner=corner)
    if text.startswith("file:"):
        path = text[5:]
        return sobolev.measure_from_table(
            path, cfg["delta_bar"], cfg["delta_under"], cfg["c_sigma"],
            name=os.path.basename(path))
    raise UsageError(f"unknown measure {text!r}")


def _default_x0(level: int) -> int:
    from .graph import level_graph
    return int(level_graph(level).vertex_id((2 ** max(level - 1, 0), 0)))


def _cmd_topology(cfg: dict) -> int:
    from .graph import level_graph

    g = level_graph(cfg["level"])
    m = cfg["level"]
    verts = []
    for i in range(g.n_vertices):
        a, b = (int(x) for x in g.lattice[i])
        x = Fraction(2 * a + b, 2 ** (m + 1))
        y = Fraction(int(b), 2 ** m)
        verts.append({"id": i, "x": str(x), "y": str(y),
                      "boundary": bool(g.boundary_mask[i])})
    from .graph import index_word
    cells = [{"word": index_word(j, m), "vertices": [int(v) for v in row]}
             for j, row in enumerate(g.cells)]
    doc = {
        "level": m,
        "coordinate_note": "x is exact; the plane position is "
                           "(x, y * sqrt(3)/2) with both fractions exact",
        "n_vertices": g.n_vertices,
        "vertices": verts,
        "edges": [[int(u), int(v)] for u, v in g.edges],
        "cells": cells,
    }
    reporting.write_json(cfg["out"], doc)
    return 0


def _cmd_kusuoka(cfg: dict) -> int:
    from .kusuoka import kusuoka_weights
    from .graph import index_word

    m = cfg["level"]
    kw = kusuoka_weights(m)
    rows = []
    for j, num in enumerate(kw.numerators):
        frac = Fraction(num, kw.denominator)
        rows.append((index_word(j, m), frac.numerator, frac.denominator,
                     float(frac)))
    reporting.write_csv(cfg["out"], ["word", "numerator", "denominator",
                                     "value"], rows)
    return 0


def _cmd_resistance(cfg: dict) -> int:
    from .forms import resistance_table
    from .graph import level_graph

    g = level_graph(cfg["level"])
    if cfg["pairs"]:
        pairs = []
        try:
            fh = open(cfg["pairs"])
        except OSError as exc:
            raise UsageError(f"cannot read pairs file: {exc}")
        with fh:
            for ln, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#") or line.startswith("x"):
                    continue
                parts = line.split(",")
                if len(parts) != 2:
                    raise UsageError(f"{cfg['pairs']}:{ln}: expected 'x,y'")
                pairs.append((int(parts[0]), int(parts[1])))
        pairs = np.array(pairs, dtype=np.int64)
    else:
        c = g.corners
        pairs = np.array([(c[0], c[1]), (c[0], c[2]), (c[1], c[2])])
    if pairs.size and (pairs.min() < 0 or pairs.max() >= g.n_vertices):
        raise UsageError("pair ids out of range for this level")
    vals = resistance_table(g, pairs)
    rows = [(int(x), int(y), float(r)) for (x, y), r in zip(pairs, vals)]
    reporting.write_csv(cfg["out"], ["x", "y", "resistance"], rows)
    return 0


def _cmd_eigen(cfg: dict) -> int:
    from .spectral import decomposition

    sd = decomposition(cfg["level"], cfg["boundary"])
    n_modes, n_basis = sd.n_modes, sd.phi.shape[0]
    header = np.array([n_modes, n_basis], dtype="<i8")
    lam = np.asarray(sd.eigenvalues, dtype="<f8")
    phi = np.ascontiguousarray(sd.phi, dtype="<f8")
    blob = header.tobytes() + lam.tobytes() + phi.tobytes()
    out = os.path.abspath(cfg["out"])
    os.makedirs(os.path.dirname(out), exist_ok=True)
    tmp = out + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, out)
    if not cfg["no_plot"]:
        from .plotting import save_spectrum
        save_spectrum(out + ".png", sd.eigenvalues,
                      f"level {cfg['level']} {cfg['boundary']} spectrum")
    return 0


def _cmd_heat(cfg: dict) -> int:
    from .spectral import decomposition, heat_apply, heat_kernel_samples
    from .graph import level_graph

    m = cfg["level"]
    times = _parse_times(cfg["times"])
    sd = decomposition(m, "dirichlet")
    if cfg["kernel"]:
        x = cfg["x"] if cfg["x"] is not None else _default_x0(m)
        y = cfg["y"] if cfg["y"] is not None else x
        rows = []
        vals = []
        for t in times:
            sample = heat_kernel_samples(sd, float(t), [(x, y)])
            v = float(sample.values[0])
            vals.append(v)
            rows.append((float(t), int(x), int(y), v))
        reporting.write_csv(cfg["out"], ["t", "x", "y", "value"], rows)
        if not cfg["no_plot"] and len(times) > 1:
            from .plotting import save_loglog
            lv = np.array(vals)
            if (lv > 0).all():
                A = np.vstack([np.log(times), np.ones(len(times))]).T
                slope = float(np.linalg.lstsq(A, np.log(lv), rcond=None)[0][0])
                save_loglog(cfg["out"] + ".png", times, lv, slope,
                            "t", "p(t,x,y)", "kernel decay")
    else:
        psi = _builtin_psi(cfg["psi"], m)
        rows = []
        sups = []
        for t in times:
            u = heat_apply(sd, float(t), psi)
            sups.append(float(np.abs(u.values).max()))
            for i, v in enumerate(u.values):
                rows.append((float(t), i, float(v)))
        reporting.write_csv(cfg["out"], ["time", "vertex", "value"], rows)
        if not cfg["no_plot"]:
            from .plotting import save_curves
            save_curves(cfg["out"] + ".png", times, {"sup |u|": np.array(sups)},
                        "t", "sup norm", "heat flow decay")
    return 0


def _cmd_sobolev(cfg: dict) -> int:
    from . import sobolev
    from .forms import energy

    spec = _measure_spec(cfg)
    p, q = cfg["p"], cfg["q"]
    levels = [int(x) for x in str(cfg["levels"]).split(",") if x.strip()]
    if not levels:
        raise UsageError("need at least one level")
    mode = cfg["mode"]
    summary: dict = {"measure": spec.name, "p": p, "q": q, "mode": mode}
    rows: list = []
    header: list = []

    if mode == "verify":
        pair = sobolev.exponent_formula(p, q, spec.delta_bar,
                                        spec.delta_underbar)
        a = cfg["a"] if cfg["a"] is not None else pair.a1
        summary["formula_a"] = pair.a1
        summary["used_a"] = a
        header = ["level", "member", "energy", "lhs_norm", "p_norm", "ratio"]
        max_ratios = {}
        for m in levels:
            corpus = sobolev.build_corpus(m)
            rep = sobolev.verify_inequality(corpus, spec, p, q, a)
            max_ratios[str(m)] = rep["max_ratio"]
            for name, u in zip(corpus.names, corpus.members):
                en = energy(u)
                lhs = sobolev.lp_norm(u, spec, q)
                pn = sobolev.lp_norm(u, sobolev.measure_nu(), p)
                rhs = en ** (a / 2.0) * pn ** (1.0 - a)
                rows.append((m, name, en, lhs, pn,
                             lhs / rhs if rhs > 0 else float("nan")))
        summary["max_ratios"] = max_ratios
    elif mode == "optimal":
        k_max = max(2, min(max(levels) - 4, 5))
        fit = sobolev.estimate_optimal_exponent(spec, p, q, k_max=k_max,
                                                level=max(levels))
        pair = sobolev.exponent_formula(p, q, spec.delta_bar,
                                        spec.delta_underbar)
        summary.update({"fitted_a": fit["fitted_a"], "formula_a": pair.a1,
                        "k_max": k_max, "working_level": max(levels)})
        header = ["k", "log_energy_ratio", "log_norm_ratio"]
        rows = [(k + 1, x, y) for k, (x, y) in
                enumerate(zip(fit["log_energy_ratio"], fit["log_norm_ratio"]))]
        if not cfg["no_plot"]:
            from .plotting import save_loglog
            save_loglog(cfg["out"] + ".png",
                        np.exp(fit["log_energy_ratio"]),
                        np.exp(fit["log_norm_ratio"]), fit["fitted_a"],
                        "energy scale", "norm ratio", "bump family fit")
    else:
        rep = sobolev.check_measure_condition(spec, max(levels))
        summary.update({k: rep[k] for k in
                        ("best_C", "best_C_word", "declared_C",
                         "exponent_along_ones", "exponent_along_min_word",
                         "min_word") if k in rep})
        header = ["level", "max_ratio"]
        rows = [(mm + 1, r) for mm, r in enumerate(rep["per_level_max_ratio"])]

    reporting.write_csv(cfg["out"], header, rows)
    json_path = os.path.splitext(cfg["out"])[0] + ".json"
    reporting.write_json(json_path, summary)
    return 0


def _solve_figure(cfg, sol):
    if cfg["no_plot"]:
        return
    from .graph import level_graph
    from .plotting import save_curves, save_scatter

    g = level_graph(cfg["level"])
    save_scatter(cfg["out"] + ".png", g.xy, sol.u[-1],
                 f"solution at T={sol.grid.T:g}")
    sups = np.abs(sol.u).max(axis=1)
    save_curves(cfg["out"] + ".sup.png", sol.grid.times,
                {"sup |u(t)|": sups}, "t", "sup norm", "sup-norm history")


def _write_solution(cfg: dict, sol) -> None:
    from .graph import index_word

    m = cfg["level"]
    rows = []
    for n, t in enumerate(sol.grid.times):
        for i, v in enumerate(sol.u[n]):
            rows.append((float(t), i, float(v)))
    reporting.write_csv(cfg["out"], ["time", "vertex", "value"], rows)
    words = [index_word(j, m) for j in range(3**m)]
    grows = []
    for n, t in enumerate(sol.grid.times):
        for w, v in zip(words, sol.grad[n]):
            grows.append((float(t), w, float(v)))
    base, ext = os.path.splitext(cfg["out"])
    reporting.write_csv(base + ".grad" + ext, ["time", "word", "gradient"],
                        grows)


def _cmd_solve(cfg: dict) -> int:
    from .forms import resistance_table
    from .graph import level_graph
    from .kusuoka import kusuoka_weights
    from .pde import holder_report, solve_semilinear, uniform_grid
    from .spectral import decomposition

    m = cfg["level"]
    sd = decomposition(m, "dirichlet")
    kw = kusuoka_weights(m)
    psi = _builtin_psi(cfg["psi"], m)
    f = _builtin_source(cfg["f"])
    grid = uniform_grid(cfg["T"], cfg["steps"])
    sol = solve_semilinear(sd, kw, psi, f, grid, tol=cfg["tol"])
    _write_solution(cfg, sol)

    g = level_graph(m)
    rng = np.random.default_rng(17)
    pairs = np.array([(int(a), int(b)) for a, b in
                      rng.choice(g.interior_ids, size=(60, 2), replace=True)
                      if a != b])
    table = resistance_table(g, pairs)
    try:
        hrep = holder_report(sol, pairs, table)
        holder = {"time_exponent": hrep["time_exponent"],
                  "space_exponent": hrep["space_exponent"],
                  "holder_quotient": hrep["holder_quotient"]}
    except ComputationError as exc:
        holder = {"unavailable": str(exc)}
    diag = {
        "level": m, "T": cfg["T"], "n_steps": grid.n_steps,
        "picard_distances": sol.diagnostics["picard_distances"],
        "iterations": sol.diagnostics["iterations"],
        "norms": sol.diagnostics["norms"],
        "fitted_exponents": holder,
    }
    json_path = os.path.splitext(cfg["out"])[0] + ".json"
    reporting.write_json(json_path, diag)
    _solve_figure(cfg, sol)
    return 0


def _cmd_burgers(cfg: dict) -> int:
    from .burgers import (BurgersConfig, dissipation_constant,
                          max_principle_report, solve_burgers)
    from .kusuoka import kusuoka_weights
    from .spectral import decomposition

    m = cfg["level"]
    sd = decomposition(m, "dirichlet")
    kw = kusuoka_weights(m)
    psi = _builtin_psi(cfg["psi"], m)
    bc = BurgersConfig(psi=psi, T=cfg["T"], n_steps=cfg["steps"],
                       outer_tol=cfg["outer_tol"])
    sol = solve_burgers(sd, kw, bc)
    _write_solution(cfg, sol)
    rep = max_principle_report(sol)
    report = {
        "level": m, "T": cfg["T"], "n_steps": sol.grid.n_steps,
        "outer_distances": sol.diagnostics["outer_distances"],
        "outer_sup_norms": sol.diagnostics["outer_sup_norms"],
        "max_principle": {"psi_sup": rep["psi_sup"],
                          "max_ratio": rep["max_ratio"],
                          "excess": rep["excess"],
                          "verdict": rep["verdict"]},
        "dissipation_constant": dissipation_constant(sol),
    }
    reporting.write_json(cfg["report"], report)
    _solve_figure(cfg, sol)
    return 0


def _cmd_walk(cfg: dict) -> int:
    from .kusuoka import kusuoka_weights
    from .pde import duhamel, uniform_grid
    from .spectral import decomposition, heat_apply
    from .walk import WalkConfig, fk_heat, fk_source, qv_exponential_moment

    m, T = cfg["level"], cfg["T"]
    wc = WalkConfig(level=m, n_paths=cfg["paths"], master_seed=cfg["seed"])
    x0 = cfg["x0"] if cfg["x0"] is not None else _default_x0(m)
    mode = cfg["mode"]
    if mode == "heat":
        psi = _builtin_psi(cfg["psi"], m)
        res = fk_heat(wc, x0, T, psi)
        sd = decomposition(m, "dirichlet")
        res["spectral_value"] = float(heat_apply(sd, T, psi).values[x0])
    elif mode == "source":
        res = fk_source(wc, x0, T)
        sd = decomposition(m, "dirichlet")
        kw = kusuoka_weights(m)
        grid = uniform_grid(T, 256)
        res["spectral_value"] = float(
            duhamel(sd, kw, np.ones((grid.times.shape[0], 3**m)),
                    grid)[-1].values[x0])
    else:
        res = qv_exponential_moment(wc, cfg["beta"], T, x0=x0)
    if "spectral_value" in res and res["stderr"] > 0:
        res["deviation_sigma"] = abs(res["estimate"]
                                     - res["spectral_value"]) / res["stderr"]
    res.update({"level": m, "T": T, "seed": cfg["seed"], "x0": x0})
    reporting.write_json(cfg["out"], res)
    return 0


def _cmd_acceptance(cfg: dict) -> int:
    from .acceptance import format_lines, run_all

    only = None
    if cfg["only"]:
        only = [int(x) for x in str(cfg["only"]).split(",") if x.strip()]
    results = run_all(quick=cfg["quick"], only=only)
    print(format_lines(results))
    doc = {"quick": cfg["quick"],
           "criteria": results,
           "all_passed": all(r["passed"] for r in results)}
    reporting.write_json(cfg["out"], doc)
    return 0 if doc["all_passed"] else 1


_HANDLERS = {
    "topology": _cmd_topology,
    "kusuoka": _cmd_kusuoka,
    "resistance": _cmd_resistance,
    "eigen": _cmd_eigen,
    "heat": _cmd_heat,
    "sobolev": _cmd_sobolev,
    "solve": _cmd_solve,
    "burgers": _cmd_burgers,
    "walk": _cmd_walk,
    "acceptance": _cmd_acceptance,
}


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if getattr(ns, "threads", None) is not None:
        os.environ["GASKET_THREADS"] = str(ns.threads)
    t0 = time.monotonic()
    cfg = None
    try:
        cfg = _resolve(ns)
        code = _HANDLERS[cfg["command"]](cfg)
        reporting.write_manifest(cfg.get("report") or cfg["out"], cfg,
                                 time.monotonic() - t0)
        return code
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ComputationError, ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if cfg is not None:
            reporting.write_manifest(cfg.get("report") or cfg["out"], cfg,
                                     time.monotonic() - t0,
                                     status="error", error=str(exc))
        return 1
    except GasketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
