"""Finite-difference audits of the analytic gradients."""

from __future__ import annotations

import numpy as np

from .baselines import _MaLink, ma_region_length, project_positions
from .bcd import decompose, grad_carrier, grad_fiv, objective_from_decomposition
from .model import SPEED_OF_LIGHT, ArrayGeometry, FrequencyPlan
from .nullsteer import FrequencyLimits
from .secrecy import Scenario


def central_difference(f, x, h):
    """Central-difference gradient of scalar ``f`` at vector ``x`` with step ``h``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def relative_error(analytic, numeric) -> float:
    analytic, numeric = np.atleast_1d(analytic), np.atleast_1d(numeric)
    scale = max(np.max(np.abs(numeric)), 1e-300)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def random_interior_plan(geom: ArrayGeometry, limits: FrequencyLimits, rng) -> FrequencyPlan:
    f0, f_h = geom.base_frequency_hz, limits.carrier_max_hz
    carrier = f0 + (f_h - f0) * rng.uniform(0.05, 0.95)
    incs = limits.increment_max_hz * rng.uniform(0.05, 0.95, geom.n_antennas)
    return FrequencyPlan(carrier, incs, f_h, limits.increment_max_hz)


def random_beamformer(n: int, power_w: float, rng) -> np.ndarray:
    w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return np.sqrt(power_w) * w / np.linalg.norm(w)


def audit_gradients(scenario: Scenario, geom: ArrayGeometry, limits: FrequencyLimits,
                    n_points: int = 100, seed: int = 0, t: float = 0.0) -> dict:
    """Worst relative error of each analytic gradient over random interior points.

    Increment and carrier gradients are taken at a fixed random beamformer;
    the movable-array position gradient is taken at the optimal beamformer.
    """
    rng = np.random.default_rng(seed)
    ranges = [scenario.bob.range_m] + [e.range_m for e in scenario.eves]
    # steps keep the largest phase perturbation near 1e-4 rad
    h_inc = 1e-4 * SPEED_OF_LIGHT / (2 * np.pi * max(ranges))
    h_car = 1e-4 * SPEED_OF_LIGHT / (2 * np.pi * geom.aperture_m)
    h_pos = 1e-4 * geom.spacing_m
    worst = {"grad_fiv": 0.0, "grad_carrier": 0.0, "ma_positions": 0.0}
    link = _MaLink(scenario, geom)
    length = ma_region_length(geom, limits)
    for _ in range(n_points):
        plan = random_interior_plan(geom, limits, rng)
        w = random_beamformer(geom.n_antennas, scenario.power_budget_w, rng)

        def f_inc(d):
            return objective_from_decomposition(decompose(scenario, geom, plan.with_increments(d), w, t))

        def f_car(fc):
            return objective_from_decomposition(decompose(scenario, geom, plan.with_carrier(fc[0]), w, t))

        dec = decompose(scenario, geom, plan, w, t)
        if limits.increment_max_hz > 0:
            num = central_difference(f_inc, plan.increments_hz, h_inc)
            worst["grad_fiv"] = max(worst["grad_fiv"], relative_error(grad_fiv(dec, scenario, plan, t), num))
        num = central_difference(f_car, [plan.carrier_hz], h_car)
        worst["grad_carrier"] = max(worst["grad_carrier"],
                                    relative_error(grad_carrier(dec, scenario, geom, plan, t), num))

        # spread-out feasible layout, so the +-h probes stay feasible too
        pos = project_positions(rng.uniform(-length / 2, length / 2, geom.n_antennas),
                                length, 1.01 * geom.spacing_m)
        num = central_difference(link.objective, pos, h_pos)
        worst["ma_positions"] = max(worst["ma_positions"], relative_error(link.gradient(pos), num))
    return worst
