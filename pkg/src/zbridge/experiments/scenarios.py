"""Named scenarios.  Each takes a ``ScenarioConfig`` and an output directory,
writes CSVs (and best-effort plots) there and returns a ``ScenarioResult``.

Random streams: replicate ``r`` of cell ``c`` uses ``RngStream(seed, c * STRIDE + r)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..bayes import (
    evidence_auxiliary,
    evidence_likelihood_anchored,
    evidence_prior_anchored,
    oracle_evidence,
    rayleigh_problem,
    rayleigh_zs,
)
from ..density import HomotopyPath, log_ratio, make_pair, parse_h
from ..filter import (
    FILTER_COLUMNS,
    GridCoverageError,
    HomotopyFilterConfig,
    bootstrap_pf,
    homotopy_pf,
    make_model,
    rmse,
    simulate_truth,
)
from ..oracle import log_z_of_exponent, z_of_s
from ..samplers import MetropolisTuning, RngStream
from ..schedule import ScheduleConfig, ScheduleError, empirical_variance, predicted_variance, run_schedule
from . import plots
from .io import write_csv

__all__ = ["ScenarioResult", "SCENARIOS", "STRIDE"]

STRIDE = 1_000_000


@dataclass
class ScenarioResult:
    scenario: str
    out_dir: str
    csv_files: list = field(default_factory=list)
    plot_files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def _plot(self, fn, name, *args):
        p = plots.render(fn, os.path.join(self.out_dir, name), *args)
        if p is not None:
            self.plot_files.append(p)

    def _csv(self, cfg, name, header, rows):
        self.csv_files.append(write_csv(os.path.join(self.out_dir, name), cfg, header, rows))


def _stream(cfg, cell, r=0):
    return RngStream(cfg.seed, cell * STRIDE + r)


# ---------------------------------------------------------------------------

def gaussian_path(cfg, out_dir) -> ScenarioResult:
    """Z(s) by quadrature on a dense grid plus replicate schedule estimates at each s_m."""
    res = ScenarioResult(cfg.scenario, out_dir)
    pair = make_pair(cfg["density"], **cfg.params)
    path = HomotopyPath.uniform(cfg["M"], parse_h(cfg["h"]))
    s_grid = np.linspace(0.0, 1.0, cfg["grid_points"])
    z_curve = np.array([z_of_s(pair, path, float(s)) for s in s_grid])
    res._csv(cfg, "z_curve.csv", ("s", "h_s", "z_oracle"),
             ((s, path.h_at(s), z) for s, z in zip(s_grid, z_curve)))

    z_or = np.array([z_of_s(pair, path, float(s)) for s in path.stages])
    rep_rows, est_rows = [], []
    for c, N in enumerate(cfg["N_list"]):
        runs = []
        for r in range(cfg["replicates"]):
            try:
                tr = run_schedule(ScheduleConfig(pair, path, N, cfg["sampler"], _stream(cfg, c, r)))
            except ScheduleError:
                continue
            z = np.exp(tr.log_z_bar)
            runs.append(z)
            rep_rows.extend((N, r, m, float(path.stages[m]), float(z[m])) for m in range(path.M + 1))
        runs = np.array(runs)
        k = len(runs)
        for m in range(path.M + 1):
            col = runs[:, m] if k else np.array([])
            sd = float(np.std(col, ddof=1)) if k > 1 else math.nan
            est_rows.append((N, m, float(path.stages[m]), path.h_at(float(path.stages[m])),
                             float(np.mean(col)) if k else math.nan, sd, sd / math.sqrt(k) if k > 1 else math.nan,
                             float(z_or[m]), k))
    res._csv(cfg, "replicates.csv", ("N", "replicate", "m", "s_m", "z_bar"), rep_rows)
    res._csv(cfg, "schedule_estimates.csv",
             ("N", "m", "s_m", "h_s_m", "z_mean", "z_sd", "z_se", "z_oracle", "replicates_ok"), est_rows)
    res._plot(plots.z_curve, "z_curve.png", s_grid, z_curve, [(r[0], r[2], r[4], r[6]) for r in est_rows])
    res.summary = {"z1_oracle": float(z_curve[-1]), "z0": float(z_curve[0])}
    return res


# ---------------------------------------------------------------------------

def error_surface(cfg, out_dir) -> ScenarioResult:
    """Empirical mean |Z1_bar - Z1| and the variance model over an (M, N) grid."""
    res = ScenarioResult(cfg.scenario, out_dir)
    pair = make_pair(cfg["density"], **cfg.params)
    h = parse_h(cfg["h"])
    z1 = math.exp(log_z_of_exponent(pair, 1.0))
    Ms, Ns = cfg["M_list"], cfg["N_list"]
    mae = np.full((len(Ms), len(Ns)), np.nan)
    pred_sd = np.full_like(mae, np.nan)
    rows = []
    cell = 0
    for i, M in enumerate(Ms):
        path = HomotopyPath.uniform(M, h)
        for j, N in enumerate(Ns):
            sc = ScheduleConfig(pair, path, N, cfg["sampler"], _stream(cfg, cell))
            emp = empirical_variance(sc, cfg["replicates"], z1)
            em = predicted_variance(pair, path, N=N)
            mae[i, j] = emp.mean_abs_error
            pred_sd[i, j] = math.sqrt(em.predicted_var_logZ1) if em.predicted_var_logZ1 > 0 else math.nan
            rows.append((M, N, M * N, cfg["replicates"], emp.n_failed, z1, emp.mean_abs_error, emp.var_log_z1,
                         em.predicted_var_logZ1, em.printed_var_logZ1, int(em.printed_negative)))
            cell += 1
    res._csv(cfg, "error_surface.csv",
             ("M", "N", "cost", "replicates", "n_failed", "z1_oracle", "mean_abs_error", "var_log_z1",
              "predicted_var_log_z1", "printed_var_log_z1", "printed_negative"), rows)
    res._plot(plots.error_surface, "error_surface.png", Ms, Ns, mae, pred_sd)
    res.summary = {"z1_oracle": z1, "cells": len(rows)}
    return res


# ---------------------------------------------------------------------------

_STAGE_COLUMNS = ("h", "M", "replicate", "m", "s_m", "h_s_m", "population", "survival_fraction", "z_bar",
                  "z_oracle", "extinct")


def _zs_runs(cfg, pair):
    """Importance-rejection schedules for every (h, M); returns stage rows and per-cell summaries."""
    k = pair.ratio_sup_bound
    rows, cells = [], []
    cell = 0
    for hs in cfg["h_list"]:
        for M in cfg["M_list"]:
            path = HomotopyPath.uniform(M, parse_h(hs))
            z_or = [z_of_s(pair, path, float(s)) for s in path.stages]
            terminal, first, failed = [], [], 0
            for r in range(cfg["replicates"]):
                sc = ScheduleConfig(pair, path, cfg["N0"], "importance-rejection", _stream(cfg, cell, r), k=k)
                extinct = 0
                try:
                    tr = run_schedule(sc)
                except ScheduleError as exc:
                    tr, extinct, failed = exc.trace, 1, failed + 1
                pop = tr.population
                for m in range(tr.M + 1):
                    rows.append((hs, M, r, m, float(path.stages[m]), float(tr.h_s[m]), int(pop[m]),
                                 pop[m] / cfg["N0"], math.exp(tr.log_z_bar[m]), z_or[m], extinct))
                if not extinct:
                    terminal.append(pop[-1] / cfg["N0"])
                    first.append(pop[1] / cfg["N0"])
            t = np.array(terminal)
            cells.append((hs, M, len(t), failed,
                          float(t.mean()) if t.size else math.nan,
                          float(t.std(ddof=1) / math.sqrt(t.size)) if t.size > 1 else math.nan,
                          float(np.mean(first)) if first else math.nan,
                          z_or[-1] / (k * z_or[0])))
            cell += 1
    return rows, cells


_SUMMARY_COLUMNS = ("h", "M", "replicates_ok", "n_extinct", "terminal_fraction_mean", "terminal_fraction_se",
                    "first_stage_survival_mean", "expected_terminal_fraction")


def _box_panels(cfg, rows):
    panels = []
    for hs in cfg["h_list"]:
        for M in cfg["M_list"]:
            sel = [r for r in rows if r[0] == hs and r[1] == M and not r[10]]
            if not sel:
                continue
            s = sorted({r[4] for r in sel})
            data = [[r[8] for r in sel if r[4] == sv] for sv in s]
            oracle = [next(r[9] for r in sel if r[4] == sv) for sv in s]
            panels.append((f"h={hs}, M={M}", s, data, oracle))
    return panels


def zs_boxplot(cfg, out_dir) -> ScenarioResult:
    """Z_bar at every stage over replicate importance-rejection runs, with quadrature Z_s."""
    res = ScenarioResult(cfg.scenario, out_dir)
    pair = make_pair(cfg["density"], **cfg.params)
    if pair.ratio_sup_bound is None:
        raise ValueError(f"density {cfg['density']!r} has no bound on q/p")
    rows, cells = _zs_runs(cfg, pair)
    res._csv(cfg, "stages.csv", _STAGE_COLUMNS, rows)
    res._csv(cfg, "summary.csv", _SUMMARY_COLUMNS, cells)
    res._plot(plots.boxplots, "zs_boxplot.png", _box_panels(cfg, rows))
    res.summary = {"k": pair.ratio_sup_bound}
    return res


def rejection_demo(cfg, out_dir) -> ScenarioResult:
    """Survival-probability curves, survival trajectories and Z_s boxplots for the sequential sampler."""
    res = ScenarioResult(cfg.scenario, out_dir)
    pair = make_pair(cfg["density"], **cfg.params)
    k = pair.ratio_sup_bound
    if k is None:
        raise ValueError(f"density {cfg['density']!r} has no bound on q/p")
    x = np.linspace(cfg["psi_lo"], cfg["psi_hi"], cfg["psi_points"])
    lr = np.minimum(log_ratio(pair, x) - math.log(k), 0.0)
    psi_rows, curves = [], {}
    for hs in cfg["h_list"]:
        for M in cfg["M_list"]:
            path = HomotopyPath.uniform(M, parse_h(hs))
            dh = np.diff(path.h_values())
            arrs = []
            for m in range(M):
                psi = np.exp(dh[m] * lr)
                arrs.append(psi)
                psi_rows.extend((hs, M, m, float(path.stages[m]), xi, pi) for xi, pi in zip(x, psi))
            curves[f"h={hs}, M={M}"] = arrs
    res._csv(cfg, "psi.csv", ("h", "M", "m", "s_m", "x", "psi"), psi_rows)

    rows, cells = _zs_runs(cfg, pair)
    res._csv(cfg, "stages.csv", _STAGE_COLUMNS, rows)
    res._csv(cfg, "summary.csv", _SUMMARY_COLUMNS, cells)

    traj = {}
    for hs in cfg["h_list"]:
        for M in cfg["M_list"]:
            sel = [r for r in rows if r[0] == hs and r[1] == M and not r[10]]
            s = sorted({r[4] for r in sel})
            traj[f"h={hs}, M={M}"] = (s, [np.mean([r[7] for r in sel if r[4] == sv]) for sv in s])
    res._plot(plots.psi_curves, "psi.png", x, curves)
    res._plot(plots.survival, "survival.png", traj)
    res._plot(plots.boxplots, "zs_boxplot.png", _box_panels(cfg, rows))
    res.summary = {"k": k}
    return res


# ---------------------------------------------------------------------------

_ANCHORINGS = {
    "prior": evidence_prior_anchored,
    "likelihood": evidence_likelihood_anchored,
    "auxiliary": evidence_auxiliary,
}


def evidence_rayleigh(cfg, out_dir) -> ScenarioResult:
    """Evidence of the Rayleigh-prior problem through each anchoring, against quadrature."""
    res = ScenarioResult(cfg.scenario, out_dir)
    for a in cfg["anchorings"]:
        if a not in _ANCHORINGS:
            raise ValueError(f"unknown anchoring {a!r}; choose from {sorted(_ANCHORINGS)}")
    y, R, Q = cfg["y"], cfg["R"], cfg["Q"]
    problem = rayleigh_problem(y, R, Q)
    z_or = oracle_evidence(problem)
    printed = rayleigh_zs(1.0, y, R, Q)
    path = HomotopyPath.uniform(cfg["M"], parse_h(cfg["h"]))
    tuning = MetropolisTuning(burn_in=cfg["burn_in"])
    rows = []
    cell = 0
    for a in cfg["anchorings"]:
        for N in cfg["N_list"]:
            for r in range(cfg["replicates"]):
                tr = _ANCHORINGS[a](problem, path, N, _stream(cfg, cell, r), sampler=cfg["sampler"], tuning=tuning)
                rows.append((a, cfg["M"], N, r, tr.z1, tr.log_z1_se(), z_or, abs(tr.z1 - z_or),
                             abs(tr.z1 - z_or) / z_or, printed.printed, printed.rel_discrepancy, len(tr.warnings)))
            cell += 1
    res._csv(cfg, "evidence.csv",
             ("anchoring", "M", "N", "replicate", "z_bar", "log_z_se", "z_oracle", "abs_error", "rel_error",
              "z_printed", "printed_rel_discrepancy", "n_warnings"), rows)
    res.summary = {"z_oracle": z_or, "z_printed": printed.printed}
    return res


# ---------------------------------------------------------------------------

def kitagawa_filter(cfg, out_dir) -> ScenarioResult:
    """Truth/observation pair, bootstrap and homotopy filters at each particle count."""
    res = ScenarioResult(cfg.scenario, out_dir)
    model = make_model(cfg["model"], **cfg.params)
    x, y = simulate_truth(model, cfg["T"], _stream(cfg, 0))
    hcfg = HomotopyFilterConfig(M=cfg["M"], N=cfg["N"], h=parse_h(cfg["h"]),
                                tuning=MetropolisTuning(burn_in=cfg["burn_in"]), inflation=cfg["inflation"],
                                grid_sigmas=cfg["grid_sigmas"])
    summary_rows, track_panels, ratio_series = [], [], {}
    times = np.arange(1, cfg["T"] + 1) * model.dt
    for c, n in enumerate(cfg["n_list"]):
        boot = bootstrap_pf(model, y, n, _stream(cfg, 1 + 2 * c), truth=x)
        failure = ""
        try:
            hom = homotopy_pf(model, y, n, hcfg, _stream(cfg, 2 + 2 * c), truth=x)
        except GridCoverageError as exc:
            hom, failure = exc.trace, str(exc)
        for tr in (boot, hom):
            res._csv(cfg, f"filter_{tr.kind}_n{n}.csv", FILTER_COLUMNS, tr.rows())
        ratio = hom.z_ratio()
        summary_rows.append(("bootstrap", n, boot.T, rmse(boot, x[1:boot.T + 1]), boot.n_collapse, 0, math.nan,
                             math.nan))
        summary_rows.append(("homotopy", n, hom.T, rmse(hom, x[1:hom.T + 1]) if hom.T else math.nan,
                             hom.n_collapse, int(bool(failure)),
                             float(np.mean(ratio)) if ratio.size else math.nan,
                             float(np.std(ratio, ddof=1)) if ratio.size > 1 else math.nan))
        track_panels.append((f"n={n}", times, x[1:],
                             [("bootstrap", boot.post_mean, boot.post_std, boot.collapse),
                              ("homotopy", np.pad(hom.post_mean, (0, boot.T - hom.T), constant_values=np.nan),
                               np.pad(hom.post_std, (0, boot.T - hom.T), constant_values=np.nan),
                               np.pad(hom.collapse, (0, boot.T - hom.T)))]))
        ratio_series[f"n={n}"] = (times[: hom.T], ratio)
        if hom.T:
            lo = min(float(np.min(x)), float(np.min(hom.post_mean - 3 * hom.post_std))) - 2.0
            hi = max(float(np.max(x)), float(np.max(hom.post_mean + 3 * hom.post_std))) + 2.0
            xg = np.linspace(lo, hi, cfg["raster_points"])
            dens = np.array([rec.density(xg) for rec in hom.records])
            res._plot(plots.filter_raster, f"posterior_raster_n{n}.png", times[: hom.T], xg, dens,
                      x[1: hom.T + 1], hom.particles, [times[hom.T - 1]] if failure else [])
    res._csv(cfg, "summary.csv", ("filter", "n", "steps_completed", "rmse", "n_collapse", "coverage_failure",
                                  "z_ratio_mean", "z_ratio_std"), summary_rows)
    res._plot(plots.tracks, "tracks.png", track_panels)
    res._plot(plots.z_ratio, "z_ratio.png", ratio_series)
    return res


SCENARIOS = {
    "gaussian-path": gaussian_path,
    "error-surface": error_surface,
    "rejection-demo": rejection_demo,
    "zs-boxplot": zs_boxplot,
    "evidence-rayleigh": evidence_rayleigh,
    "kitagawa-filter": kitagawa_filter,
}
