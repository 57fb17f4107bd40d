"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``[PASS]``/``[FAIL]`` line (visible in ``pytest -v``
output) before asserting.  Run just this file with::

    pytest tests/test_acceptance.py -v
"""

import dataclasses
import filecmp
import itertools
import math
import os

import numpy as np
import pytest
from scipy import stats

from zbridge.bayes import (
    conjugate_gaussian,
    conjugate_gaussian_evidence,
    evidence_auxiliary,
    evidence_likelihood_anchored,
    evidence_prior_anchored,
    oracle_evidence,
    rayleigh_problem,
)
from zbridge.density import HomotopyPath, PowerH, bimodal_student_t, gaussian_pair
from zbridge.experiments import load_config, run_scenario
from zbridge.filter import (
    GridCoverageError,
    HomotopyFilterConfig,
    bootstrap_pf,
    grid_filter,
    homotopy_pf,
    homotopy_pf_step,
    kitagawa,
    rmse,
    simulate_truth,
)
from zbridge.oracle import QuadratureSpec, log_z_of_exponent, ode_path_check
from zbridge.samplers import MetropolisTuning, RngStream, run_sequential_sampler
from zbridge.schedule import (
    ScheduleConfig,
    empirical_variance,
    oracle_schedule,
    predicted_variance,
    run_schedule,
)

Z1_GAUSS = 0.2506628274631  # sqrt(2 pi) * 0.1


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}")
        return ok

    return _report


def test_01_telescoping_exactness(report):
    pair = gaussian_pair()
    z1 = math.exp(log_z_of_exponent(pair, 1.0))
    worst = 0.0
    for M, h in itertools.product((1, 5, 50), (None, PowerH(2.0))):
        lz = oracle_schedule(pair, HomotopyPath.uniform(M, h))
        worst = max(worst, abs(math.exp(lz) / z1 - 1.0))
    ok = worst < 1e-8 and abs(z1 / Z1_GAUSS - 1) < 1e-8
    report(1, ok, f"oracle-mu schedule, M in {{1,5,50}} x h in {{s, s^2}}: max rel err {worst:.2e} (< 1e-8)")
    assert ok


def test_02_gaussian_benchmark(report):
    cfg = ScheduleConfig(gaussian_pair(), HomotopyPath.uniform(50), 10_000, "exact", RngStream(2, 0))
    z = np.exp([run_schedule(dataclasses.replace(cfg, rng=RngStream(2, r))).log_z1 for r in range(100)])
    rel = abs(z.mean() / Z1_GAUSS - 1.0)
    ok = rel < 0.02
    report(2, ok, f"(M,N)=(50,1e4), 100 replicates: mean Z1 {z.mean():.6f} vs {Z1_GAUSS:.7f}, rel err {rel:.2e} (< 2%)")
    assert ok


def test_03_error_model(report):
    pair = gaussian_pair()
    lines, ok = [], True
    for M in (10, 20):
        path = HomotopyPath.uniform(M)
        emp = empirical_variance(ScheduleConfig(pair, path, 1000, "exact", RngStream(3, M * 1000)), 200, Z1_GAUSS)
        pred = predicted_variance(pair, path, N=1000).predicted_var_logZ1
        ratio = emp.var_log_z1 / pred
        ok &= 0.5 <= ratio <= 2.0
        lines.append(f"M={M}: empirical {emp.var_log_z1:.3e} / predicted {pred:.3e} = {ratio:.2f}")
    report(3, ok, "; ".join(lines) + " (within factor 2)")
    assert ok


def test_04_iso_cost(report):
    pair = gaussian_pair()
    mae = {}
    for i, (M, N) in enumerate(((5, 2000), (10, 1000), (20, 500))):
        cfg = ScheduleConfig(pair, HomotopyPath.uniform(M), N, "exact", RngStream(4, i * 1000))
        mae[(M, N)] = empirical_variance(cfg, 100, Z1_GAUSS).mean_abs_error
    spread = max(mae.values()) / min(mae.values())
    ok = spread <= 3.0
    report(4, ok, "MAE " + ", ".join(f"{k}: {v:.2e}" for k, v in mae.items()) + f"; max/min {spread:.2f} (<= 3)")
    assert ok


def test_05_sequential_sampler(report):
    pair = bimodal_student_t()
    k = pair.ratio_sup_bound
    target = math.exp(log_z_of_exponent(pair, 1.0) - pair.log_z0) / k
    cells = {}
    for c, (M, a) in enumerate(itertools.product((5, 10, 20), (0.5, 2.0))):
        path = HomotopyPath.uniform(M, PowerH(a))
        f = np.array([run_sequential_sampler(pair, path, 1000, k, RngStream(5, c * 1000 + r).generator())[-1].accepted
                      / 1000 for r in range(100)])
        cells[(M, a)] = (f.mean(), f.std(ddof=1) / math.sqrt(f.size))
    ok_target = all(abs(m - target) <= 3 * se for m, se in cells.values())
    ok_pairs = all(abs(m1 - m2) <= 3 * math.hypot(s1, s2)
                   for (m1, s1), (m2, s2) in itertools.combinations(cells.values(), 2))
    ok = ok_target and ok_pairs
    worst = max(abs(m - target) / se for m, se in cells.values())
    report(5, ok, f"terminal fraction vs Z1/(k Z0) = {target:.5f}: max |z| {worst:.2f} over M in {{5,10,20}} x "
                  f"h in {{s^0.5, s^2}}; pairwise equal within 3 SE: {ok_pairs}")
    assert ok


def test_06_rejection_sampler_ks(report):
    pair = gaussian_pair()
    path = HomotopyPath.uniform(10)
    gen = RngStream(6).generator()
    ens = run_sequential_sampler(pair, path, 5000, pair.ratio_sup_bound, gen)
    alpha = 0.01 / path.M
    pvals = []
    for m in range(1, path.M + 1):
        exact = pair.sample_theta(path.h_at(path.stages[m]), 5000, gen)
        pvals.append(stats.ks_2samp(ens[m].samples, exact).pvalue)
    ok = min(pvals) > alpha
    report(6, ok, f"KS survivors vs exact theta, {path.M} stages: min p {min(pvals):.3g} (> {alpha:g} Bonferroni)")
    assert ok


def test_07_bayes_anchoring_invariance(report):
    prob = conjugate_gaussian()
    truth = conjugate_gaussian_evidence()
    path = HomotopyPath.uniform(10)
    tuning = MetropolisTuning(burn_in=200)
    lines, ok = [], True
    for i, fn in enumerate((evidence_prior_anchored, evidence_likelihood_anchored, evidence_auxiliary)):
        z = np.array([fn(prob, path, 10_000, RngStream(7, i * 1000 + r), tuning=tuning).z1 for r in range(50)])
        se = z.std(ddof=1) / math.sqrt(z.size)
        zs = (z.mean() - truth) / se
        ok &= abs(zs) <= 3
        lines.append(f"{fn.__name__.split('_', 1)[1]} {z.mean():.5f} (z={zs:+.2f})")
    report(7, ok, f"closed form {truth:.5f}; " + ", ".join(lines) + " (|z| <= 3)")
    assert ok


def test_08_rayleigh(report):
    prob = rayleigh_problem(0.65, 0.25, 0.2)
    truth = oracle_evidence(prob)
    tr = evidence_prior_anchored(prob, HomotopyPath.uniform(10), 10_000, RngStream(8, 0),
                                 tuning=MetropolisTuning(burn_in=300))
    se = tr.log_z1_se()
    zs = (tr.log_z1 - math.log(truth)) / se
    small = evidence_prior_anchored(prob, HomotopyPath.uniform(10), 50, RngStream(8, 1))
    ok = abs(zs) <= 3
    report(8, ok, f"N=1e4: Z {tr.z1:.5f} vs quadrature {truth:.5f}, z={zs:+.2f} (|z| <= 3); "
                  f"informational (M,N)=(10,50) rel err {abs(small.z1 / truth - 1):.2e}")
    assert ok


def test_09_homotopy_pf_step(report):
    model = kitagawa()
    cfg = HomotopyFilterConfig(N=10_000, M=10)
    gen = RngStream(9).generator()
    xs = np.linspace(-40, 40, 1601)
    zscores, norm_dev = [], []
    for r in range(20):
        T = int(gen.integers(2, 30))
        x, y = simulate_truth(model, T, gen)
        gf = grid_filter(model, y[: T], xs)
        prior = gf.sample(T - 2, 10, gen)
        rec, z_or, _ = homotopy_pf_step(model, prior, y[T], T, cfg, gen)
        zscores.append((math.log(rec.z_bar) - math.log(z_or)) / rec.z_se_log)
        norm_dev.append(abs(rec.normalization - 1.0))
    ok_z = max(map(abs, zscores)) <= 3
    ok_norm = max(norm_dev) <= 1e-3
    ok = ok_z and ok_norm
    report(9, ok, f"20 steps: max |z| of Z_bar vs quadrature {max(map(abs, zscores)):.2f} (<= 3: {ok_z}); "
                  f"max |posterior mass - 1| {max(norm_dev):.2e} (<= 1e-3: {ok_norm})")
    assert ok


@pytest.mark.slow
def test_10_kitagawa_comparison(report):
    model = kitagawa()
    assert model.dt == 0.5 and model.transition_std == 1.0 and model.observation_std == 1.0
    cfg = HomotopyFilterConfig()
    wins, completed5, ratios = 0, 0, []
    for seed in range(20):
        x, y = simulate_truth(model, 50, RngStream(1000 + seed, 0))
        boot = bootstrap_pf(model, y, 10, RngStream(1000 + seed, 1))
        try:
            hom = homotopy_pf(model, y, 10, cfg, RngStream(1000 + seed, 2))
            wins += rmse(hom, x) <= rmse(boot, x)
            ratios.append(hom.z_ratio())
        except GridCoverageError:
            pass
        try:
            homotopy_pf(model, y, 5, cfg, RngStream(1000 + seed, 3))
            completed5 += 1
        except GridCoverageError:
            pass
    r = np.concatenate(ratios)
    ok = wins > 10 and completed5 >= 15 and 0.9 <= r.mean() <= 1.15 and r.std(ddof=1) <= 0.3
    report(10, ok, f"homotopy RMSE <= bootstrap in {wins}/20 seeds (> 10); n=5 runs completed {completed5}/20 (>= 15); "
                   f"Z ratio mean {r.mean():.3f} in [0.9, 1.15], std {r.std(ddof=1):.3f} (<= 0.3)")
    assert ok


def test_11_ode_defect(report):
    pair = gaussian_pair()
    spec = QuadratureSpec(rel_tol=1e-12)
    d21 = ode_path_check(pair, np.linspace(0, 1, 21), spec)
    d41 = ode_path_check(pair, np.linspace(0, 1, 41), spec)
    ratio = d21 / d41
    ok_abs = d21 < 1e-3
    ok_halving = 3.0 <= ratio <= 5.0
    report(11, ok_abs and ok_halving, f"max rel defect {d21:.3e} at 21 points (< 1e-3: {ok_abs}); "
                                      f"halving ratio {ratio:.2f} (~4: {ok_halving})")
    assert ok_abs and ok_halving


SMALL = {
    "gaussian-path": ["replicates=4", "N_list=100,400", "grid_points=11"],
    "error-surface": ["replicates=4", "M_list=2,4", "N_list=100,200"],
    "rejection-demo": ["replicates=4", "N0=200", "psi_points=21"],
    "zs-boxplot": ["replicates=4", "N0=200"],
    "evidence-rayleigh": ["N_list=50,200", "burn_in=30"],
    "kitagawa-filter": ["T=5", "N=100", "burn_in=20", "raster_points=50"],
}


def test_12_determinism(report, tmp_path):
    same = {}
    for name, sets in SMALL.items():
        files = []
        for run in ("a", "b"):
            cfg = load_config(name, overrides=sets, seed=12)
            res = run_scenario(cfg, tmp_path / run / name)
            files.append(sorted(os.path.basename(p) for p in res.csv_files))
        assert files[0] == files[1] and files[0]
        same[name] = all(filecmp.cmp(tmp_path / "a" / name / f, tmp_path / "b" / name / f, shallow=False)
                         for f in files[0])
    ok = all(same.values())
    report(12, ok, "byte-identical CSVs on re-run: " + ", ".join(f"{k}={v}" for k, v in same.items()))
    assert ok
