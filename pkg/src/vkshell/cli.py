"""Command-line interface: config parsing, subcommand dispatch, and
deterministic JSON/CSV artifacts with a run manifest.

The config is a flat INI file with sections [surface], [moduli],
[scaling], [load], [solver], [output].  Every run writes
``<command>_result.json`` (byte-identical across reruns with the same
config and seed) and ``manifest.json`` (config echo with all defaults,
package versions, timings).  Exit codes: 0 success, 2 config error,
3 numerical failure.
"""

import argparse
import configparser
import csv
import json
import sys
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import functional as fn
from . import gammacheck as gc
from . import geometry as geo
from . import isometry as iso
from . import material as mat
from . import membrane as mem
from . import minimize as mz
from . import presets
from .geometry import ChartError, FormField2


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


SUBCOMMANDS = ("surface", "isometries", "membrane", "energy", "minimize",
               "gamma-check")


@dataclass
class RunConfig:
    family: str = "plate"
    grid: tuple = (32, 32)
    surface_params: dict = field(default_factory=dict)
    mu: float = 1.0
    lam: float = 1.0
    kappa: float = 1.0
    e_rule: str = "kappa2h4"
    load_preset: str = "normal_saddle"
    load_csv: str = ""
    remove_mean: bool = True
    load_scale: float = 1.0
    tol: float = 1e-9
    max_iter: int = 200
    restarts: int = 2
    seed: int = 0
    basis_size: int = 20
    basis_tol: float = 1e-8
    dictionary_degree: int = 4
    fourier_order: int = 16
    t_quad: int = 4
    h_ladder: tuple = (0.1, 0.05, 0.025, 0.0125)
    mode: str = "plate_bending"
    target_preset: str = "ovalization_a2"
    sample_count: int = 64
    output_dir: str = "out"
    formats: tuple = ("json", "csv")

    def echo(self):
        d = asdict(self)
        d["surface_params"] = {k: (list(v) if isinstance(v, tuple) else v)
                               for k, v in d["surface_params"].items()}
        for key in ("grid", "h_ladder", "formats"):
            d[key] = list(d[key])
        return d


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def parse_config(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = cp.read(path)
    if not read:
        raise ConfigError("config file %r not found or unreadable" % (path,))
    cfg = RunConfig()
    try:
        if cp.has_section("surface"):
            s = cp["surface"]
            cfg.family = s.get("family", cfg.family).strip().lower()
            if "grid" in s:
                g = _floats(s["grid"])
                if len(g) != 2:
                    raise ConfigError("[surface] grid needs two integers")
                cfg.grid = (int(g[0]), int(g[1]))
            params = {}
            if "bounds" in s:
                b = _floats(s["bounds"])
                if len(b) != 4:
                    raise ConfigError("[surface] bounds needs four numbers")
                params["bounds"] = ((b[0], b[1]), (b[2], b[3]))
            for key in ("radius", "height", "polar_margin"):
                if key in s:
                    params[key] = float(s[key])
            if "profile_poly" in s:
                params["profile"] = _floats(s["profile_poly"])
            if "s_range" in s:
                r = _floats(s["s_range"])
                if len(r) != 2:
                    raise ConfigError("[surface] s_range needs two numbers")
                params["s_range"] = (r[0], r[1])
            if "theta_scheme" in s:
                params["theta_scheme"] = s["theta_scheme"].strip()
            cfg.surface_params = params
        if cp.has_section("moduli"):
            m = cp["moduli"]
            cfg.mu = m.getfloat("mu", cfg.mu)
            cfg.lam = m.getfloat("lambda", m.getfloat("lam", cfg.lam))
        if cp.has_section("scaling"):
            sc = cp["scaling"]
            cfg.kappa = sc.getfloat("kappa", cfg.kappa)
            cfg.e_rule = sc.get("e_rule", cfg.e_rule).strip()
        if cp.has_section("load"):
            ld = cp["load"]
            cfg.load_preset = ld.get("preset", cfg.load_preset).strip()
            cfg.load_csv = ld.get("csv", cfg.load_csv).strip()
            cfg.remove_mean = ld.getboolean("remove_mean", cfg.remove_mean)
            cfg.load_scale = ld.getfloat("scale", cfg.load_scale)
        if cp.has_section("solver"):
            sv = cp["solver"]
            cfg.tol = sv.getfloat("tol", cfg.tol)
            cfg.max_iter = sv.getint("max_iter", cfg.max_iter)
            cfg.restarts = sv.getint("restarts", cfg.restarts)
            cfg.seed = sv.getint("seed", cfg.seed)
            cfg.basis_size = sv.getint("basis_size", cfg.basis_size)
            cfg.basis_tol = sv.getfloat("basis_tol", cfg.basis_tol)
            cfg.dictionary_degree = sv.getint("dictionary_degree",
                                              cfg.dictionary_degree)
            cfg.fourier_order = sv.getint("fourier_order", cfg.fourier_order)
            cfg.t_quad = sv.getint("t_quad", cfg.t_quad)
            cfg.sample_count = sv.getint("sample_count", cfg.sample_count)
            if "h_ladder" in sv:
                cfg.h_ladder = _floats(sv["h_ladder"])
            cfg.mode = sv.get("mode", cfg.mode).strip()
            cfg.target_preset = sv.get("target_preset", cfg.target_preset).strip()
        if cp.has_section("output"):
            out = cp["output"]
            cfg.output_dir = out.get("directory", cfg.output_dir).strip()
            if "formats" in out:
                cfg.formats = tuple(out["formats"].split())
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("bad config value: %s" % (exc,)) from exc
    return cfg


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _build_chart(cfg):
    return geo.build_chart(cfg.family, cfg.surface_params, cfg.grid)


def _moduli(cfg):
    return mat.ElasticModuli(cfg.mu, cfg.lam)


def _load(cfg, chart):
    if cfg.load_csv:
        rows = np.loadtxt(cfg.load_csv, delimiter=",", skiprows=1)
        if rows.shape != (chart.n_nodes, 3):
            raise ConfigError("load csv must carry %d rows of fx,fy,fz"
                              % chart.n_nodes)
        vals = rows.reshape(chart.shape + (3,))
    else:
        vals = presets.load_preset(chart, cfg.load_preset)
    return fn.make_load(chart, cfg.load_scale * vals,
                        remove_mean=cfg.remove_mean)


def _mode_field(cfg, chart):
    try:
        builder = presets.MODE_PRESETS[cfg.mode]
    except KeyError:
        raise ConfigError("unknown mode preset %r" % (cfg.mode,))
    return builder(chart)


def _e_rule(cfg):
    if cfg.e_rule == "kappa2h4":
        if cfg.kappa > 0:
            return lambda h: (cfg.kappa * h * h) ** 2
        return lambda h: h ** 5
    if cfg.e_rule.startswith("h^"):
        p = float(cfg.e_rule[2:])
        return lambda h: h ** p
    if cfg.e_rule == "h5":
        return lambda h: h ** 5
    raise ConfigError("unknown e_rule %r" % (cfg.e_rule,))


def write_json(path, payload):
    text = json.dumps(payload, sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_field_csv(path, chart, columns):
    """One row per node: u1, u2, x, y, z, then named value columns."""
    U1, U2 = np.meshgrid(chart.u1, chart.u2, indexing="ij")
    header = ["u1", "u2", "x", "y", "z"] + [name for name, _ in columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(chart.shape[0]):
            for j in range(chart.shape[1]):
                row = [repr(U1[i, j]), repr(U2[i, j]),
                       repr(chart.pos[i, j, 0]), repr(chart.pos[i, j, 1]),
                       repr(chart.pos[i, j, 2])]
                row += [repr(float(arr[i, j])) for _, arr in columns]
                writer.writerow(row)


def _verify_chart(chart):
    n_err = float(np.max(np.abs(
        np.linalg.norm(chart.normal, axis=-1) - 1.0)))
    orth = max(
        float(np.max(np.abs(np.einsum("xyc,xyc->xy", chart.frame_e1,
                                      chart.frame_e2)))),
        float(np.max(np.abs(np.einsum("xyc,xyc->xy", chart.frame_e1,
                                      chart.normal)))),
        float(np.max(np.abs(np.einsum("xyc,xyc->xy", chart.frame_e2,
                                      chart.normal)))))
    spd = bool(np.all(chart.sqrt_g > 0))
    checks = {"unit_normal": n_err <= 1e-12, "frame_orthonormal": orth <= 1e-12,
              "metric_spd": spd}
    if not all(checks.values()):
        raise ArithmeticError("chart invariant checks failed: %s" % (checks,))
    return checks


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_surface(cfg, outdir, verify):
    chart = _build_chart(cfg)
    report = mem.robustness_classify(chart)
    payload = {
        "family": chart.family,
        "grid": list(chart.shape),
        "area": geo.integrate(chart, np.ones(chart.shape)),
        "h_max": float(np.max(np.abs(chart.second_form))),
        "robustness": report.label,
        "evidence": report.evidence,
    }
    if verify:
        payload["verify"] = _verify_chart(chart)
    write_json(outdir / "surface_result.json", payload)
    if "csv" in cfg.formats:
        write_field_csv(outdir / "surface_nodes.csv", chart, [
            ("sqrt_g", chart.sqrt_g),
            ("h11", chart.second_form[..., 0, 0]),
            ("h12", chart.second_form[..., 0, 1]),
            ("h22", chart.second_form[..., 1, 1]),
        ])
    return payload


def cmd_isometries(cfg, outdir, verify):
    chart = _build_chart(cfg)
    basis = iso.isometry_basis(chart, n_request=cfg.basis_size,
                               tol=cfg.basis_tol)
    payload = {
        "count": len(basis),
        "cluster_size": basis.cluster_size,
        "gap_ratio": basis.gap_ratio,
        "rayleigh": [float(r) for r in basis.rayleigh],
        "bending_ritz": [float(b) for b in basis.bending_ritz],
        "skew_residuals": [float(s) for s in basis.skew_residuals],
        "threshold": basis.tol,
        "empty": basis.empty,
    }
    if verify:
        _verify_chart(chart)
        payload["rigid_residual"] = max(
            iso.project_onto_basis(basis, r)[1] for r in iso.rigid_basis(chart))
    write_json(outdir / "isometries_result.json", payload)
    if "csv" in cfg.formats:
        for k, mode in enumerate(basis.modes):
            write_field_csv(outdir / ("isometry_mode_%03d.csv" % k), chart, [
                ("vx", mode.values[..., 0]),
                ("vy", mode.values[..., 1]),
                ("vz", mode.values[..., 2]),
            ])
    return payload


def _membrane_target(cfg, chart):
    if cfg.target_preset == "ovalization_a2":
        if chart.family not in ("cylinder", "revolution"):
            raise ConfigError("ovalization_a2 target needs a cylinder chart")
        mode = presets.cylinder_inextensional_mode(chart, 2)
        A = iso.extend_A(chart, mode)
        return fn.a_squared_tan(chart, A)
    if cfg.target_preset == "plate_nonrobust":
        v = presets.plate_bending_mode(chart)
        g = geo.surface_gradient(chart, v)[..., 2, :]
        b = -np.einsum("xyi,xyj->xyij", g, g)
        return FormField2(b)
    if cfg.target_preset.endswith(".csv"):
        rows = np.loadtxt(cfg.target_preset, delimiter=",", skiprows=1)
        if rows.shape != (chart.n_nodes, 3):
            raise ConfigError("target csv must carry b11,b22,b12 per node")
        b = np.zeros(chart.shape + (2, 2))
        b[..., 0, 0] = rows[:, 0].reshape(chart.shape)
        b[..., 1, 1] = rows[:, 1].reshape(chart.shape)
        b[..., 0, 1] = b[..., 1, 0] = rows[:, 2].reshape(chart.shape)
        return FormField2(b)
    raise ConfigError("unknown membrane target %r" % (cfg.target_preset,))


def cmd_membrane(cfg, outdir, verify):
    chart = _build_chart(cfg)
    target = _membrane_target(cfg, chart)
    payload = {}
    if chart.family in ("cylinder", "revolution"):
        sol = mem.solve_revolution_membrane(chart, target,
                                            fourier_order=cfg.fourier_order)
        payload.update({"residual": sol.residual,
                        "fourier_order": sol.fourier_order,
                        "flagged": sol.flagged})
        if "csv" in cfg.formats:
            write_field_csv(outdir / "membrane_w.csv", chart, [
                ("wx", sol.w.values[..., 0]),
                ("wy", sol.w.values[..., 1]),
                ("wz", sol.w.values[..., 2]),
            ])
    proj = mem.project_to_B(chart, target, degree=cfg.dictionary_degree)
    payload["projection_residual"] = proj.residual
    payload["projection_flagged"] = proj.flagged
    payload["dictionary_degree"] = cfg.dictionary_degree
    if verify:
        _verify_chart(chart)
    write_json(outdir / "membrane_result.json", payload)
    return payload


def cmd_energy(cfg, outdir, verify):
    chart = _build_chart(cfg)
    moduli = _moduli(cfg)
    V = _mode_field(cfg, chart)
    zero = FormField2(np.zeros(chart.shape + (2, 2)))
    breakdown = fn.total_I(chart, V, zero, cfg.kappa, moduli)
    load = _load(cfg, chart)
    rset = fn.rotation_set(load, sample_count=cfg.sample_count, seed=cfg.seed)
    bestJ, bestQ = None, None
    for Q in rset.candidates:
        full = fn.total_J(chart, V, zero, cfg.kappa, moduli, load, Q)
        if bestJ is None or full.total < bestJ.total:
            bestJ, bestQ = full, Q
    payload = {
        "stretching": breakdown.stretching,
        "bending": breakdown.bending,
        "total_I": breakdown.total,
        "kappa": cfg.kappa,
        "load_m": rset.m,
        "degenerate_rotations": rset.degenerate,
        "best_J": {"stretching": bestJ.stretching, "bending": bestJ.bending,
                   "load": bestJ.load, "total": bestJ.total},
        "best_rotation": [[float(x) for x in row] for row in bestQ],
    }
    if verify:
        _verify_chart(chart)
        s = bestJ.stretching + bestJ.bending - bestJ.load
        if abs(s - bestJ.total) > 1e-12 * max(abs(bestJ.total), 1.0):
            raise ArithmeticError("energy breakdown is inconsistent")
    write_json(outdir / "energy_result.json", payload)
    return payload


def cmd_minimize(cfg, outdir, verify):
    chart = _build_chart(cfg)
    moduli = _moduli(cfg)
    basis = iso.isometry_basis(chart, n_request=cfg.basis_size,
                               tol=cfg.basis_tol)
    if basis.empty:
        raise ArithmeticError("isometry basis is empty; loosen basis_tol")
    load = _load(cfg, chart)
    rset = fn.rotation_set(load, sample_count=min(cfg.sample_count, 8),
                           seed=cfg.seed)
    opts = mz.SolverOptions(tol=cfg.tol, max_iter=cfg.max_iter,
                            restarts=cfg.restarts, seed=cfg.seed)
    well = mz.wellposedness_check(load, rset.candidates)
    if cfg.kappa == 0:
        result = mz.minimize_quadratic(chart, basis, load, rset.candidates,
                                       moduli, opts)
    else:
        result = mz.minimize_J(chart, basis, load, rset.candidates, cfg.kappa,
                               moduli, dict_degree=cfg.dictionary_degree,
                               opts=opts)
    payload = {
        "value": result.value,
        "gradient_norm": result.gradient_norm,
        "iterations": result.iterations,
        "kappa": cfg.kappa,
        "flagged": result.flagged,
        "wellposed": well.ok,
        "table": result.table,
        "rotation": [[float(x) for x in row] for row in result.rotation],
        "seed": cfg.seed,
    }
    write_json(outdir / "minimize_result.json", payload)
    if "csv" in cfg.formats:
        write_field_csv(outdir / "minimize_V.csv", chart, [
            ("vx", result.V_star.values[..., 0]),
            ("vy", result.V_star.values[..., 1]),
            ("vz", result.V_star.values[..., 2]),
        ])
    if verify:
        _verify_chart(chart)
        hist = result.objective_history
        if any(b - a > 1e-10 * max(abs(hist[0]), 1.0)
               for a, b in zip(hist, hist[1:])):
            raise ArithmeticError("objective sequence increased")
    return payload


def cmd_gamma_check(cfg, outdir, verify):
    chart = _build_chart(cfg)
    moduli = _moduli(cfg)
    V = _mode_field(cfg, chart)
    w = None
    if cfg.kappa > 0 and cfg.mode.startswith("cylinder"):
        A = iso.extend_A(chart, V)
        target = fn.a_squared_tan(chart, A)
        target = FormField2(0.5 * cfg.kappa * target.coeff)
        w = mem.solve_revolution_membrane(chart, target,
                                          fourier_order=cfg.fourier_order).w
    ansatz = gc.build_ansatz(chart, V, w=w, kappa=cfg.kappa, moduli=moduli,
                             e_rule=None if cfg.e_rule == "kappa2h4" else _e_rule(cfg))
    table = gc.convergence_study(ansatz, cfg.h_ladder, moduli,
                                 t_quad=cfg.t_quad)
    errors = table.errors()
    payload = {
        "limit": table.limit,
        "energy_slope": table.energy_slope,
        "final_error": float(errors[-1]),
        "final_relative_error": float(errors[-1] / max(abs(table.limit), 1e-300)),
        "strictly_decreasing": bool(np.all(np.diff(errors) < 0)),
        "rows": [{k: (None if isinstance(v, float) and np.isnan(v) else float(v))
                  for k, v in row.items()} for row in table.rows],
    }
    if verify:
        _verify_chart(chart)
    write_json(outdir / "gamma_check_result.json", payload)
    if "csv" in cfg.formats:
        with open(outdir / "gamma_check_table.csv", "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["h", "energy", "ratio", "error", "slope"])
            for row in table.rows:
                writer.writerow([repr(row["h"]), repr(row["energy"]),
                                 repr(row["ratio"]), repr(row["error"]),
                                 "" if np.isnan(row["slope"]) else repr(row["slope"])])
    return payload


DISPATCH = {
    "surface": cmd_surface,
    "isometries": cmd_isometries,
    "membrane": cmd_membrane,
    "energy": cmd_energy,
    "minimize": cmd_minimize,
    "gamma-check": cmd_gamma_check,
}


def run(argv):
    parser = argparse.ArgumentParser(
        prog="vkshell",
        description="Shell-limit energies: evaluation, minimization, "
                    "and thin-limit verification.")
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--output-dir", default=None)
    parser.add_argument("--verify", action="store_true")
    parser.add_argument("--kappa", type=float, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--max-iter", type=int, default=None)
    parser.add_argument("--restarts", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    t0 = time.perf_counter()
    try:
        cfg = parse_config(args.config)
        for name in ("kappa", "tol", "restarts", "seed"):
            val = getattr(args, name)
            if val is not None:
                setattr(cfg, name, val)
        if args.max_iter is not None:
            cfg.max_iter = args.max_iter
        if args.output_dir is not None:
            cfg.output_dir = args.output_dir
        outdir = Path(cfg.output_dir)
        outdir.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2

    try:
        DISPATCH[args.command](cfg, outdir, args.verify)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except (ArithmeticError, ChartError, mz.MinimizationError,
            np.linalg.LinAlgError, ValueError) as exc:
        diag = {"error": str(exc), "type": type(exc).__name__}
        if isinstance(exc, mz.MinimizationError):
            diag["diagnostics"] = exc.diagnostics
        print(json.dumps(diag, sort_keys=True), file=sys.stderr)
        return 3

    manifest = {
        "command": args.command,
        "config": cfg.echo(),
        "versions": {
            "vkshell": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "elapsed_seconds": time.perf_counter() - t0,
    }
    write_json(outdir / "manifest.json", manifest)
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
