"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from fsa_lab.baselines import fpa_solve
from fsa_lab.bcd import OptimizerConfig, bcd_solve, decompose, grad_carrier, grad_fiv, rate_upper_bound
from fsa_lab.cli import main as cli_main
from fsa_lab.harness import beam_pattern_scan, default_config_path, load_config, run_sweep
from fsa_lab.model import ArrayGeometry, FrequencyPlan, Terminal
from fsa_lab.nullsteer import (
    GENERAL_NEGATIVE,
    GENERAL_POSITIVE,
    SAME_ANGLE,
    SAME_RANGE,
    FrequencyLimits,
    GeometryGap,
    LinkBudget,
    null_residual,
    solve_case_general,
    solve_case_same_angle,
    solve_case_same_range,
)
from fsa_lab.secrecy import (
    Scenario,
    correlation_bruteforce,
    correlation_closed_form,
    mrt_beamformer,
    secrecy_rate,
)
from tests import oracles
from tests.conftest import reference_problem

F0 = 60e9
C = 3e8
ODD_N = np.arange(3, 34, 2)
# received power varies with the carrier on a ~1e10 Hz scale (attenuation and
# aperture phase), so a 1 MHz central step balances truncation and rounding
CARRIER_STEP = 1e6


@pytest.fixture
def verdict(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return report


def one_eve(u_b, r_b, du, dr, power=1.0, noise=1e-11, f0=F0):
    bob = Terminal.free_space(u_b, r_b, f0)
    eve = Terminal.free_space(u_b - du, r_b - dr, f0)
    return Scenario(bob, [eve], noise, power)


def test_criterion_01_closed_form_correlation(verdict):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        g = ArrayGeometry(int(rng.choice(ODD_N)), F0)
        fc, df = rng.uniform(F0, 2 * F0), rng.uniform(0, 4e6)
        du, dr = rng.uniform(-0.2, 0.2), rng.uniform(-100, 100)
        closed = correlation_closed_form(g, fc, df, du, dr)
        plan = FrequencyPlan.ladder(g, fc, df, 4 * F0)
        u_b, r_b = rng.uniform(-0.5, 0.5), rng.uniform(150, 300)
        brute = correlation_bruteforce(g, plan, Terminal(u_b, r_b, 1.0), Terminal(u_b - du, r_b - dr, 1.0))
        loop = oracles.ladder_correlation(g.n_antennas, F0, fc, df, du, dr)
        worst = max(worst, abs(closed - brute), abs(closed - loop))
    elapsed = time.perf_counter() - start
    verdict(1, worst < 1e-10 and elapsed < 5, f"max abs err {worst:.2e}, {elapsed:.2f} s")


def _case_instances(kind, rng):
    """Random single-Eve geometry and limits for one of the four cases."""
    g = ArrayGeometry(int(rng.choice(ODD_N)), F0)
    sign = rng.choice([-1.0, 1.0])
    if kind == SAME_ANGLE:
        gap = GeometryGap(0.0, sign * rng.uniform(5, 100))
    elif kind == SAME_RANGE:
        gap = GeometryGap(sign * rng.uniform(0.01, 0.6), 0.0)
    else:
        du = rng.uniform(0.01, 0.4)
        dr = rng.uniform(5, 100) * (1 if kind == GENERAL_POSITIVE else -1)
        gap = GeometryGap(sign * du, sign * dr)
    lim = FrequencyLimits(rng.uniform(1, 4) * F0, rng.uniform(0, 4e6))
    return g, gap, lim


SOLVERS = {SAME_ANGLE: solve_case_same_angle, SAME_RANGE: solve_case_same_range,
           GENERAL_POSITIVE: solve_case_general, GENERAL_NEGATIVE: solve_case_general}


def test_criterion_02_null_depth(verdict):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst_corr = worst_res = 0.0
    counts = {}
    for kind, solver in SOLVERS.items():
        found = attempts = 0
        while found < 200 and attempts < 5000:
            attempts += 1
            g, gap, lim = _case_instances(kind, rng)
            sol = solver(gap, g, lim)
            if not sol.feasible:
                continue
            found += 1
            assert sol.case_id == kind
            corr = correlation_closed_form(g, sol.carrier_hz, sol.delta_f_hz, gap.delta_u, gap.delta_r)
            plan = FrequencyPlan.ladder(g, sol.carrier_hz, sol.delta_f_hz,
                                        max(lim.carrier_max_hz, 1e3 * g.n_antennas * sol.delta_f_hz))
            brute = correlation_bruteforce(g, plan, Terminal(0.3, 200.0, 1.0),
                                           Terminal(0.3 - gap.delta_u, 200.0 - gap.delta_r, 1.0))
            worst_corr = max(worst_corr, corr, brute)
            worst_res = max(worst_res, null_residual(g, gap, sol.carrier_hz, sol.delta_f_hz, sol.k))
        counts[kind] = found
    elapsed = time.perf_counter() - start
    ok = (all(c == 200 for c in counts.values()) and worst_corr < 1e-8 and worst_res < 1e-9
          and elapsed < 5)
    verdict(2, ok, f"feasible {counts}, max corr {worst_corr:.2e}, max residual {worst_res:.2e}, "
                   f"{elapsed:.2f} s")


def test_criterion_03_same_range_rate_formula(verdict):
    rng = np.random.default_rng(3)
    worst, found = 0.0, 0
    while found < 100:
        g = ArrayGeometry(int(rng.choice(ODD_N)), F0)
        du = rng.choice([-1, 1]) * rng.uniform(0.01, 0.6)
        sc = one_eve(rng.uniform(-0.3, 0.3), rng.uniform(20, 100), du, 0.0,
                     power=10 ** rng.uniform(-4, 0))
        lim = FrequencyLimits(rng.uniform(1, 4) * F0, 4e6)
        sol = solve_case_same_range(GeometryGap(du, 0.0), g, lim, LinkBudget.from_scenario(sc, g))
        if not sol.feasible:
            continue
        found += 1
        plan = FrequencyPlan.ladder(g, sol.carrier_hz, sol.delta_f_hz, lim.carrier_max_hz)
        rep = secrecy_rate(sc, g, plan, mrt_beamformer(g, plan, sc.bob, sc.power_budget_w))
        worst = max(worst, abs(rep.secrecy_rate_bps_hz - sol.achieved_rate_bps_hz))
    verdict(3, worst < 1e-9, f"max |formula - simulated| {worst:.2e} bps/Hz over {found} instances")


def test_criterion_04_same_angle_gain_over_fixed_array(verdict):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        g = ArrayGeometry(13, F0)
        dr = rng.choice([-1, 1]) * rng.uniform(10, 80)
        r_b = rng.uniform(max(20, dr + 5), 150)
        sc = one_eve(rng.uniform(-0.5, 0.5), r_b, 0.0, dr, power=10 ** rng.uniform(-3, 0))
        link = LinkBudget.from_scenario(sc, g)
        lim = FrequencyLimits(2 * F0, 4e6)
        sol = solve_case_same_angle(GeometryGap(0.0, dr), g, lim, link)
        assert sol.feasible
        plan = FrequencyPlan.ladder(g, sol.carrier_hz, sol.delta_f_hz, lim.carrier_max_hz)
        r_fsa = secrecy_rate(sc, g, plan, mrt_beamformer(g, plan, sc.bob, sc.power_budget_w))
        r_fpa = fpa_solve(sc, g).report
        want = min(math.log2(1 + link.snr_eve), math.log2(1 + link.snr_bob))
        worst = max(worst, abs(r_fsa.secrecy_rate_bps_hz - r_fpa.secrecy_rate_bps_hz - want))
    verdict(4, worst < 1e-6, f"max deviation {worst:.2e} bps/Hz")


def test_criterion_05_gradient_audit(verdict):
    sc, g, lim = reference_problem()
    rng = np.random.default_rng(5)
    rows_of = lambda fc, inc: [oracles.channel(g.n_antennas, F0, fc, inc, s.spatial_angle, s.range_m,
                                               s.path_gain_f0) for s in (sc.bob,) + sc.eves]
    start = time.perf_counter()
    err_fiv = err_car = 0.0
    for _ in range(100):
        plan = FrequencyPlan(rng.uniform(1.05, 1.95) * F0, rng.uniform(0.05, 0.95, 13) * 4e6,
                             2 * F0, 4e6)
        w = rng.standard_normal(13) + 1j * rng.standard_normal(13)
        w *= math.sqrt(sc.power_budget_w) / np.linalg.norm(w)
        d = decompose(sc, g, plan, w)
        fd = oracles.central_fd(lambda x: oracles.secrecy_difference(
            rows_of(plan.carrier_hz, x), sc.noise_power_w, w), plan.increments_hz, 1.0)
        err_fiv = max(err_fiv, np.max(np.abs(grad_fiv(d, sc, plan) - fd)) / np.max(np.abs(fd)))
        fd = oracles.central_fd(lambda x: oracles.secrecy_difference(
            rows_of(x[0], plan.increments_hz), sc.noise_power_w, w), [plan.carrier_hz], CARRIER_STEP)[0]
        err_car = max(err_car, abs(grad_carrier(d, sc, g, plan) - fd) / abs(fd))
    elapsed = time.perf_counter() - start
    ok = err_fiv < 1e-5 and err_car < 1e-5 and elapsed < 10
    verdict(5, ok, f"grad_fiv {err_fiv:.2e}, grad_carrier {err_car:.2e}, {elapsed:.2f} s")


def test_criterion_06_bcd_monotone_and_bounded(verdict):
    sc, g, lim = reference_problem()
    res = bcd_solve(sc, g, lim, OptimizerConfig(multistart_count=4))
    trace = np.array(res.trace.objective)
    bound = rate_upper_bound(sc, g)
    drop = float(np.max(-np.diff(trace))) if trace.size > 1 else 0.0
    ok = (drop <= 1e-9 and res.converged and res.iterations <= 200
          and max(res.runs) <= bound and trace.max() <= bound)
    verdict(6, ok, f"objective {res.objective:.6f}, iterations {res.iterations}, "
                   f"largest drop {max(drop, 0):.1e}, bound {bound:.4f}")


def test_criterion_07_case1_optimizer_agreement(verdict):
    rng = np.random.default_rng(7)
    g = ArrayGeometry(13, F0)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        dr = rng.choice([-1, 1]) * rng.uniform(5, 60)
        r_b = rng.uniform(max(20, dr + 5), 150)
        sc = one_eve(rng.uniform(-0.5, 0.5), r_b, 0.0, dr, power=10 ** rng.uniform(-2, 0))
        lim = FrequencyLimits(2 * F0, 1.5 * C / abs(dr))
        res = bcd_solve(sc, g, lim, OptimizerConfig(multistart_count=4))
        worst = max(worst, rate_upper_bound(sc, g) - res.objective)
    elapsed = time.perf_counter() - start
    verdict(7, worst < 1e-3 and elapsed < 60, f"max shortfall {worst:.2e} bps/Hz, {elapsed:.2f} s")


def _table(rows):
    return {(r.sweep_value, r.scheme): r for r in rows}


def test_criterion_08_scheme_ordering(verdict):
    cfg = load_config(default_config_path())
    rows = run_sweep(cfg, output="")
    t = _table(rows)
    rate = {k: r.secrecy_bps_hz for k, r in t.items()}
    ok = all(r.converged and not r.failed for r in rows)
    for p in cfg.grid:
        ok &= rate[(p, "MA")] >= rate[(p, "FSA")] - 1e-6
        ok &= rate[(p, "FSA")] >= max(rate[(p, "FDA")], rate[(p, "FPA")]) - 1e-6
    for s in cfg.schemes:
        vals = [rate[(p, s)] for p in cfg.grid]
        ok &= all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    summary = "; ".join(f"{p:g} dBm " + " ".join(f"{s}={rate[(p, s)]:.4f}" for s in cfg.schemes)
                        for p in cfg.grid)
    verdict(8, bool(ok), summary)


def test_criterion_09_offset_sweep(verdict):
    cfg = load_config(default_config_path())
    cfg = replace(cfg, sweep_variable="max_offset_hz", grid=(0.0, 1e6, 2e6, 4e6))
    rate = {k: r.secrecy_bps_hz for k, r in _table(run_sweep(cfg, output="")).items()}
    ok = True
    for s in ("FSA", "FDA"):
        vals = [rate[(v, s)] for v in cfg.grid]
        ok &= all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    for s in ("MA", "FPA"):
        vals = [rate[(v, s)] for v in cfg.grid]
        ok &= max(vals) - min(vals) <= 1e-9
    summary = "; ".join(f"{s}: " + " ".join(f"{rate[(v, s)]:.4f}" for v in cfg.grid) for s in cfg.schemes)
    verdict(9, bool(ok), summary)


def test_criterion_10_same_angle_beam_pattern(verdict):
    f0 = 30e9
    g = ArrayGeometry(13, f0)
    details, ok = [], True
    for dr in (30.0, 35.0, 45.0):
        bob = Terminal.free_space(0.0, 30.0, f0)
        plan = FrequencyPlan.ladder(g, f0, C / (13 * dr), f0)
        w = mrt_beamformer(g, plan, bob, 1.0)
        scan = beam_pattern_scan(g, plan, w, "range", [30.0, 30.0 + dr], spatial_angle=0.0)
        ok &= abs(scan[0, 1] - 1) < 1e-12 and scan[1, 1] < 1e-8
        details.append(f"dr={dr:g} m: bob {scan[0, 1]:.12f} eve {scan[1, 1]:.1e}")
    verdict(10, bool(ok), "; ".join(details))


def test_criterion_11_deterministic_sweep(verdict, tmp_path, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"run{i}.csv"
        assert cli_main(["sweep", "--seed", "3", "--no-timing", "-q", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    timed = []
    for i in range(2):
        path = tmp_path / f"timed{i}.csv"
        assert cli_main(["sweep", "--seed", "3", "-q", "--out", str(path)]) == 0
        timed.append([line.rsplit(",", 1)[0] for line in path.read_text().splitlines()])
    capsys.readouterr()
    ok = outs[0] == outs[1] and timed[0] == timed[1]
    verdict(11, ok, f"{len(outs[0])} bytes, timing-stripped bodies equal: {timed[0] == timed[1]}")
