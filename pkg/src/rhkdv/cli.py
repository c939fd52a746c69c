"""Command-line pipeline orchestration.

Subcommands: phase, model, parametrix, solve, sweep, singular, scatter.
Structured reports are emitted as deterministic JSON (sorted keys, no
timestamps); sweeps additionally emit gnuplot-friendly CSV. Configuration
comes from an optional flat key=value file overridden by CLI flags; the
RHKDV_LOG environment variable selects log verbosity.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 validation failure (a computed residual exceeded its contract).
"""

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import cauchy as ca
from . import rhp
from .contours import build_sigma_tilde, collocate
from .phase import solve_phase
from .scattering import (load_potential, oracle_scattering,
                         pure_step_potential, smoothed_step_potential,
                         step_scattering)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3
EXIT_VALIDATION = 4

log = logging.getLogger("rhkdv")

_DATASETS = ("pure-step", "smoothed-step", "potential", "zero")


class ConfigError(ValueError):
    """Invalid configuration (bad flag value, unusable parameter window)."""


class ValidationError(ValueError):
    """A computed quantity violated its stated tolerance."""


@dataclass
class RunConfig:
    """Configuration shared by all subcommands."""
    c: float = 1.0
    xi: float = 0.0
    t: float = 100.0
    t_min: float = 100.0
    t_max: float = 3200.0
    num: int = 8
    nodes: int = 16
    band_levels: int = 12
    truncation_tol: float = 1e-16
    xi_margin: float = 1e-3
    dataset: str = "pure-step"
    potential: str = ""
    out: str = ""
    workers: int = 2

    def validate(self):
        if not self.c > 0:
            raise ConfigError("c must be positive, got %g" % self.c)
        eps = self.xi_margin * self.c ** 2
        lo, hi = -self.c ** 2 / 2.0 + eps, self.c ** 2 / 3.0 - eps
        if not lo < self.xi < hi:
            raise ConfigError(
                "xi = %g outside the admissible window (%g, %g)"
                % (self.xi, lo, hi))
        if self.nodes < 4:
            raise ConfigError("nodes must be >= 4")
        if self.dataset not in _DATASETS:
            raise ConfigError("dataset must be one of %s" % (_DATASETS,))
        if self.dataset == "potential" and not self.potential:
            raise ConfigError("dataset 'potential' requires --potential")
        if not (self.t > 0 and self.t_min > 0 and self.t_max > self.t_min):
            raise ConfigError("need t > 0 and t_max > t_min > 0")
        if self.num < 1:
            raise ConfigError("num must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self


def _parse_config_file(path):
    """Flat key=value file; blank lines and # comments ignored."""
    values = {}
    try:
        with open(path) as fh:
            for ln, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError("%s:%d: expected key=value" % (path, ln))
                key, val = (s.strip() for s in line.split("=", 1))
                values[key.replace("-", "_")] = val
    except OSError as exc:
        raise ConfigError("cannot read config file: %s" % exc)
    return values


def _coerce(cfg_cls, values):
    out = {}
    types = {f.name: f.type for f in fields(cfg_cls)}
    for key, val in values.items():
        if key not in types:
            raise ConfigError("unknown config key %r" % key)
        typ = types[key]
        try:
            if typ in (float, "float"):
                out[key] = float(val)
            elif typ in (int, "int"):
                out[key] = int(val)
            else:
                out[key] = val
        except ValueError:
            raise ConfigError("config key %r: cannot parse %r" % (key, val))
    return out


def build_config(args):
    values = {}
    if args.config:
        values.update(_coerce(RunConfig, _parse_config_file(args.config)))
    for name in ("c", "xi", "t", "t_min", "t_max", "num", "nodes",
                 "band_levels", "dataset", "potential", "out", "workers"):
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return RunConfig(**values).validate()


# ----------------------------------------------------------------------
# shared pipeline pieces


def scattering_data(cfg):
    if cfg.dataset in ("pure-step", "zero"):
        return step_scattering(cfg.c)
    if cfg.dataset == "smoothed-step":
        return oracle_scattering(smoothed_step_potential(cfg.c))
    return oracle_scattering(load_potential(cfg.potential))


def make_grid(cfg, pd, band_levels=None):
    levels = cfg.band_levels if band_levels is None else band_levels
    cont = build_sigma_tilde(pd, truncation_tol=cfg.truncation_tol,
                             band_levels=levels)
    return collocate(cont, cfg.nodes)


def model_q(pd, t):
    """Reference q from the model solution by Richardson evaluation of
    2k^2(m1 m2 - 1) at k = i{10,20,40}c (independent of the SIE path)."""
    P = []
    for K in (10.0, 20.0, 40.0):
        k = 1j * K * pd.c
        m = rhp.model_m(k, pd, t)
        P.append(complex(2.0 * k * k * (m[0] * m[1] - 1.0)))
    r1 = (4.0 * P[1] - P[0]) / 3.0
    r2 = (4.0 * P[2] - P[1]) / 3.0
    return ((16.0 * r2 - r1) / 15.0).real


def _emit(report, cfg, stream=None):
    text = json.dumps(report, sort_keys=True, indent=1, default=float)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text + "\n")
    else:
        (stream or sys.stdout).write(text + "\n")


# ----------------------------------------------------------------------
# subcommands


def cmd_phase(cfg):
    sd = scattering_data(cfg)
    pd = solve_phase(cfg.c, cfg.xi, sd)
    report = {
        "command": "phase",
        "config": {"c": cfg.c, "xi": cfg.xi, "dataset": cfg.dataset},
        "a": pd.a, "musq": pd.musq, "B": pd.B, "Delta": pd.Delta,
        "tau": pd.tau, "zxi": pd.zxi, "yxi": pd.yxi,
        "b": pd.b, "r": pd.r,
        "residuals": {k: abs(complex(v)) for k, v in
                      pd.residuals.items()},
    }
    _emit(report, cfg)
    return EXIT_OK


def model_jump_residuals(pd, sd, grid, t):
    """Max residuals of the model solution against its contract: the cut
    jump conditions at the collocation nodes, point symmetry, and the
    normalization tail."""
    jump_max = 0.0
    for i, arc in enumerate(grid.contour.arcs):
        if arc.kind not in ("band", "middle"):
            continue
        sl = grid.arc_slice(i)
        bh = t * pd.Bhat(t)
        if arc.kind == "band":
            v = np.array([[0.0, 1j], [1j, 0.0]])
        else:
            v = np.diag([np.exp(-1j * bh), np.exp(1j * bh)])
        if not arc.is_master:
            s1 = np.array([[0.0, 1.0], [1.0, 0.0]])
            v = s1 @ v @ s1
        for j in range(sl.start, sl.stop):
            k = complex(grid.nodes[j])
            plus = +1 if arc.is_master else -1
            mp = rhp.model_m(k, pd, t, side=plus)
            mm = rhp.model_m(k, pd, t, side=-plus)
            res = np.max(np.abs(mp - mm @ v)) / max(1.0, np.max(np.abs(mp)))
            jump_max = max(jump_max, float(res))
    sym_max = 0.0
    for k in (0.4 + 0.8j, -1.1 + 0.3j, 0.2 - 1.5j, 1.7 + 0.05j):
        m = rhp.model_m(k, pd, t)
        mm = rhp.model_m(-k, pd, t)
        sym_max = max(sym_max, float(np.max(np.abs(mm - m[::-1]))))
    tail = float(np.max(np.abs(rhp.model_m(1j * 500.0 * pd.c, pd, t) - 1.0)))
    return {"jump_residual": jump_max, "symmetry_residual": sym_max,
            "normalization_tail_500c": tail}


def cmd_model(cfg):
    sd = scattering_data(cfg)
    pd = solve_phase(cfg.c, cfg.xi, sd)
    grid = make_grid(cfg, pd, band_levels=0)
    res = model_jump_residuals(pd, sd, grid, cfg.t)
    report = {
        "command": "model",
        "config": {"c": cfg.c, "xi": cfg.xi, "t": cfg.t,
                   "nodes": cfg.nodes},
        "residuals": res,
        "conventions": {
            "theta_series": "sum over m of exp(m^2 tau/2 + m v)",
            "theta_periods": "2*pi*i and tau",
            "abel_base_point": "A(ic) = 0",
            "abel_at_infinity": "i*pi/2",
            "tau": pd.tau,
        },
    }
    _emit(report, cfg)
    if res["jump_residual"] > 1e-8 or res["symmetry_residual"] > 1e-8:
        raise ValidationError("model jump validator residual %g > 1e-8"
                              % max(res["jump_residual"],
                                    res["symmetry_residual"]))
    return EXIT_OK


def cmd_parametrix(cfg):
    sd = scattering_data(cfg)
    pd = solve_phase(cfg.c, cfg.xi, sd)
    ts = [1e2, 1e3, 1e4]
    mism = [rhp.parametrix_mismatch(pd, sd, t) for t in ts]
    slope = float(np.polyfit(np.log(ts), np.log(mism), 1)[0])
    report = {
        "command": "parametrix",
        "config": {"c": cfg.c, "xi": cfg.xi},
        "t_values": ts,
        "max_mismatch": [float(m) for m in mism],
        "slope": slope,
    }
    _emit(report, cfg)
    if not -1.2 < slope < -0.8:
        raise ValidationError(
            "parametrix matching slope %g outside [-1.2, -0.8]" % slope)
    return EXIT_OK


def cmd_solve(cfg):
    sd = scattering_data(cfg)
    pd = solve_phase(cfg.c, cfg.xi, sd)
    grid = make_grid(cfg, pd)
    if cfg.dataset == "zero":
        # trivial fixture: identity jump everywhere
        jump = ca.JumpData(u_plus=lambda g: np.zeros((g.n_nodes, 2, 2),
                                                     dtype=complex))
        density, diag = ca.solve_sie(grid, jump)
        sol = rhp.RHSolution(spec=rhp.JumpSpec("V3", pd, sd, cfg.t),
                             grid=grid, jump=jump, density=density,
                             diagnostics=diag)
        M1, M2 = sol.moment(1), sol.moment(2)
        q = 2.0 * (M1[0] * M1[1] - M2[0] - M2[1])
        report = {"command": "solve", "dataset": "zero",
                  "q_sie": float(q.real), "diagnostics": diag}
        _emit(report, cfg)
        return EXIT_OK
    sol = rhp.solve_rhp(rhp.JumpSpec("VII", pd, sd, cfg.t), grid)
    qrep = rhp.extract_q(sol)
    qm = model_q(pd, cfg.t)
    report = {
        "command": "solve",
        "config": {"c": cfg.c, "xi": cfg.xi, "t": cfg.t,
                   "nodes": cfg.nodes, "band_levels": cfg.band_levels,
                   "dataset": cfg.dataset},
        "q_sie": qrep["q"],
        "q_model": qm,
        "abs_diff": abs(qrep["q"] - qm),
        "q_extraction": qrep,
        "boundary_residual": rhp.boundary_residual(sol),
        "diagnostics": sol.diagnostics,
    }
    _emit(report, cfg)
    return EXIT_OK


def singular_times_in_range(pd, t_min, t_max, count=3, parity="odd"):
    """Up to `count` singular times t_n Bhat(t_n) = n pi inside the range,
    n odd or even, spread across the interval."""
    n_lo = int(math.ceil((t_min * pd.B + pd.Delta) / math.pi))
    n_hi = int(math.floor((t_max * pd.B + pd.Delta) / math.pi))
    want = 1 if parity == "odd" else 0
    ns = [n for n in range(n_lo, n_hi + 1) if n % 2 == want]
    if not ns:
        return []
    idx = np.unique(np.linspace(0, len(ns) - 1, count).astype(int))
    return [(ns[i], rhp.singular_times(pd, ns[i])) for i in idx]


def _sweep_row(pd, sd, grid, t, kind, cminus=None):
    sol = rhp.solve_rhp(rhp.JumpSpec("VII", pd, sd, t), grid,
                        cminus=cminus)
    q = rhp.extract_q(sol, check=False)
    j1 = rhp.build_jump(rhp.JumpSpec("VI", pd, sd, t), grid)
    rep = ca.appendixB_diagnostics(grid, j1, sol.jump, cminus=cminus)
    row = {
        "t": t, "kind": kind,
        "q_model": model_q(pd, t),
        "q_sie": q["q"],
        "condition_number": sol.diagnostics["condition_number"],
        "regime_product": rep["regime_product"],
        "regime_ok": rep["regime_ok"],
        "phi_diff_measured": rep["measured"]["phi_diff"],
        "resolvent_measured": rep["measured"]["resolvent2"],
        "phi_diff_bound": rep["bounds"].get("phi_diff", float("nan")),
        "resolvent_bound": rep["bounds"].get("resolvent2", float("nan")),
        "violations": len(rep["violations"]),
    }
    row["abs_diff"] = abs(row["q_sie"] - row["q_model"])
    return row


_SWEEP_COLUMNS = ("t", "kind", "q_model", "q_sie", "abs_diff",
                  "condition_number", "phi_diff_measured", "phi_diff_bound",
                  "resolvent_measured", "resolvent_bound",
                  "regime_product", "violations")


def _fit_slope(rows):
    tt = np.array([r["t"] for r in rows])
    dd = np.array([r["abs_diff"] for r in rows])
    keep = dd > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(tt[keep]), np.log(dd[keep]), 1)[0])


def run_sweep(cfg):
    """Sweep rows plus fitted slopes; the heavy per-t work runs on a
    thread pool, report assembly is serialized."""
    if cfg.num < 6:
        raise ConfigError("sweep needs at least 6 generic t points")
    sd = scattering_data(cfg)
    pd = solve_phase(cfg.c, cfg.xi, sd)
    grid = make_grid(cfg, pd)
    tasks = [(float(t), "generic")
             for t in np.geomspace(cfg.t_min, cfg.t_max, cfg.num)]
    tasks += [(ts, "singular") for _, ts in
              singular_times_in_range(pd, cfg.t_min, cfg.t_max)]
    cminus = ca.boundary_minus_matrix(grid)
    rows, failures = [], []
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futs = [(t, kind,
                 pool.submit(_sweep_row, pd, sd, grid, t, kind, cminus))
                for t, kind in tasks]
        for t, kind, fut in futs:
            try:
                rows.append(fut.result())
            except ValueError as exc:
                log.warning("sweep point t=%g failed: %s", t, exc)
                failures.append({"t": t, "kind": kind, "error": str(exc)})
    rows.sort(key=lambda r: r["t"])
    generic = [r for r in rows if r["kind"] == "generic"]
    singular = [r for r in rows if r["kind"] == "singular"]
    if len(generic) < 6:
        raise ValueError(
            "only %d usable generic sweep points (need 6): %s"
            % (len(generic), failures))
    cond_ratios = []
    for s in singular:
        neigh = [g["condition_number"] for g in generic]
        near = min(generic, key=lambda g: abs(math.log(g["t"] / s["t"])))
        cond_ratios.append(s["condition_number"] / near["condition_number"])
    summary = {
        "command": "sweep",
        "config": {"c": cfg.c, "xi": cfg.xi, "t_min": cfg.t_min,
                   "t_max": cfg.t_max, "num": cfg.num, "nodes": cfg.nodes,
                   "band_levels": cfg.band_levels, "dataset": cfg.dataset},
        "slope_generic": _fit_slope(generic),
        "slope_singular": _fit_slope(singular) if len(singular) >= 2
        else float("nan"),
        "condition_ratio_singular_vs_neighbor": cond_ratios,
        "bound_violations": int(sum(r["violations"] for r in rows
                                    if r["regime_ok"])),
        "n_rows": len(rows),
        "failures": failures,
    }
    return rows, summary


def sweep_csv(rows, stream):
    writer = csv.writer(stream)
    writer.writerow(_SWEEP_COLUMNS)
    for r in rows:
        writer.writerow([r[c] for c in _SWEEP_COLUMNS])


def cmd_sweep(cfg):
    rows, summary = run_sweep(cfg)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            sweep_csv(rows, fh)
    else:
        sweep_csv(rows, sys.stdout)
    sys.stdout.write(json.dumps(summary, sort_keys=True, indent=1,
                                default=float) + "\n")
    return EXIT_OK


def cmd_singular(cfg):
    sd = scattering_data(cfg)
    pd = solve_phase(cfg.c, cfg.xi, sd)
    n = cfg.num
    t_star = rhp.singular_times(pd, n)
    audit = rhp.singular_audit(pd, n)
    grid = make_grid(cfg, pd)
    cminus = ca.boundary_minus_matrix(grid)
    conds = {}
    for label, t in (("before", 0.9 * t_star), ("at", t_star),
                     ("after", 1.1 * t_star)):
        sol = rhp.solve_rhp(rhp.JumpSpec("VII", pd, sd, t), grid,
                            cminus=cminus)
        conds[label] = sol.diagnostics["condition_number"]
    ratio = conds["at"] / max(conds["before"], conds["after"])
    report = {
        "command": "singular",
        "config": {"c": cfg.c, "xi": cfg.xi, "n": n, "nodes": cfg.nodes},
        "t_star": t_star,
        "t_star_bhat_over_pi": t_star * pd.Bhat(t_star) / math.pi,
        "parity": "even" if n % 2 == 0 else "odd",
        "zero_structure": ("fourth-root zeros at the band edges +-ia"
                           if n % 2 == 0 else "simple zero at k = 0"),
        "audit": audit,
        "integral_formula": rhp.integral_formula(pd, t_star),
        "condition_numbers": conds,
        "condition_ratio": ratio,
    }
    _emit(report, cfg)
    if ratio > 10.0:
        raise ValidationError(
            "condition number at the singular time is %.1fx its neighbors"
            % ratio)
    return EXIT_OK


def cmd_scatter(cfg):
    ks = np.linspace(0.15, 3.0, 20) * cfg.c
    report = {
        "command": "scatter",
        "config": {"c": cfg.c, "dataset": cfg.dataset,
                   "potential": cfg.potential},
        "k": [float(k) for k in ks],
    }
    if cfg.dataset in ("pure-step", "zero"):
        sd = step_scattering(cfg.c)
        oracle = oracle_scattering(pure_step_potential(cfg.c))
        diff_R = max(abs(complex(sd.R(k)) - complex(oracle.R(k)))
                     for k in ks)
        ys = np.linspace(0.05, 0.95, 10) * cfg.c
        diff_chi = max(abs(complex(sd.chi(1j * y)) -
                           complex(oracle.chi(1j * y))) for y in ys)
        odd = max(abs(complex(sd.chi(1j * y)) + complex(sd.chi(-1j * y)))
                  for y in ys)
        report.update({
            "R": [[float(np.real(sd.R(k))), float(np.imag(sd.R(k)))]
                  for k in ks],
            "closed_form_vs_oracle_R": float(diff_R),
            "closed_form_vs_oracle_chi": float(diff_chi),
            "chi_oddness_residual": float(odd),
        })
        _emit(report, cfg)
        if diff_R > 1e-5 or diff_chi > 1e-5:
            raise ValidationError("closed form vs oracle difference %g > 1e-5"
                                  % max(diff_R, diff_chi))
        return EXIT_OK
    sd = scattering_data(cfg)
    report["R"] = [[float(np.real(sd.R(k))), float(np.imag(sd.R(k)))]
                   for k in ks]
    _emit(report, cfg)
    return EXIT_OK


# ----------------------------------------------------------------------
# entry point


_COMMANDS = {
    "phase": cmd_phase,
    "model": cmd_model,
    "parametrix": cmd_parametrix,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "singular": cmd_singular,
    "scatter": cmd_scatter,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rhkdv",
        description="Numerical Riemann-Hilbert pipeline for the KdV "
                    "shock (elliptic) region.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--c", type=float, default=None)
        p.add_argument("--xi", type=float, default=None)
        p.add_argument("--t", type=float, default=None)
        p.add_argument("--t-min", dest="t_min", type=float, default=None)
        p.add_argument("--t-max", dest="t_max", type=float, default=None)
        p.add_argument("--num", type=int, default=None,
                       help="sweep point count / singular index n")
        p.add_argument("--nodes", type=int, default=None)
        p.add_argument("--band-levels", dest="band_levels", type=int,
                       default=None)
        p.add_argument("--dataset", choices=_DATASETS, default=None)
        p.add_argument("--potential", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--config", default=None)
    return parser


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("RHKDV_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        sys.stderr.write("config error: %s\n" % exc)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        sys.stderr.write("config error: %s\n" % exc)
        return EXIT_CONFIG
    except ValidationError as exc:
        sys.stderr.write("validation failure: %s\n" % exc)
        return EXIT_VALIDATION
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write("numerical failure: %s\n" % exc)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
