"""Block coordinate ascent over beamformer, frequency increments and carrier.

One outer iteration runs three blocks in order: projected gradient ascent on
the increment vector, projected gradient ascent on the carrier (both with the
beamformer held fixed), then the closed-form Rayleigh beamformer for the new
frequencies.  Every block is monotone, so the recorded objective (unclamped
``R_B - R_E``) never decreases.

Both gradient blocks work in normalized coordinates ``df / df_max`` and
``(f_c - f0) / (f_H - f0)``; raw Hz gradients differ by ten orders of
magnitude between the two blocks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import SPEED_OF_LIGHT, ArrayGeometry, FrequencyPlan, steering_phases
from .nullsteer import FrequencyLimits
from .secrecy import (
    Beamformer,
    Scenario,
    SecrecyReport,
    optimal_beamformer_rayleigh,
    rayleigh_weights,
    scenario_channels,
    secrecy_rate,
)

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
TIE_TOL = 1e-12  # a later start must beat an earlier one by this much


class StalledStep(RuntimeError):
    """Backtracking reached ``min_step`` before any step was accepted."""

    def __init__(self, x, value):
        super().__init__("line search stalled at the first iteration")
        self.x = x
        self.value = value


@dataclass(frozen=True)
class OptimizerConfig:
    max_bcd_iters: int = 200
    pga_max_iters: int = 30
    initial_step: float = 1.0
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    min_step: float = 1e-12
    objective_tol_bps_hz: float = 1e-6
    multistart_count: int = 4
    rng_seed: int = 0
    refresh_beamformer: bool = True

    def __post_init__(self):
        for name in ("max_bcd_iters", "pga_max_iters", "multistart_count"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("initial_step", "min_step", "objective_tol_bps_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("armijo_shrink", "armijo_slope"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if int(self.rng_seed) < 0:
            raise ValueError("rng_seed must be non-negative")


@dataclass
class BlockTrace:
    values: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    @property
    def gain(self) -> float:
        return self.values[-1] - self.values[0] if self.values else 0.0


@dataclass
class OptimizationTrace:
    objective: list = field(default_factory=list)
    carrier_hz: list = field(default_factory=list)
    increments_hz: list = field(default_factory=list)
    block_gains: list = field(default_factory=list)  # (increments, carrier, beamformer)
    step_sizes: list = field(default_factory=list)  # last accepted (increments, carrier)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return max(len(self.objective) - 1, 0)

    def record(self, value, plan, gains=(0.0, 0.0, 0.0), steps=(None, None)):
        self.objective.append(float(value))
        self.carrier_hz.append(float(plan.carrier_hz))
        self.increments_hz.append(plan.increments_hz.tolist())
        self.block_gains.append(tuple(float(g) for g in gains))
        self.step_sizes.append(steps)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "carrier_hz": self.carrier_hz,
            "increments_hz": self.increments_hz,
            "block_gains": self.block_gains,
            "step_sizes": self.step_sizes,
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class RealDecomposition:
    """Real-valued split of beamformer and channels.

    Row 0 of ``x``/``y`` is Bob, rows ``1..M`` the eavesdroppers, so that
    ``h_i = effective_gain[i] * (x_i + j y_i)`` and ``w = u + j v``.
    """

    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    y: np.ndarray
    effective_gain: np.ndarray
    C: np.ndarray
    D: np.ndarray
    phases: np.ndarray
    snr_scale: np.ndarray  # |effective_gain|^2 / sigma^2

    def g(self) -> np.ndarray:
        """``x^T C x + y^T C y + 2 x^T D y`` for each terminal."""
        x, y = self.x, self.y
        return (np.einsum("kn,nm,km->k", x, self.C, x)
                + np.einsum("kn,nm,km->k", y, self.C, y)
                + 2 * np.einsum("kn,nm,km->k", x, self.D, y))


def _terminals(scenario):
    return (scenario.bob,) + tuple(scenario.eves)


def decompose(scenario: Scenario, geom: ArrayGeometry, plan: FrequencyPlan, w,
              t: float = 0.0) -> RealDecomposition:
    w = w.weights if isinstance(w, Beamformer) else np.asarray(w, dtype=complex)
    terms = _terminals(scenario)
    phases = np.array([steering_phases(geom, plan, site, t) for site in terms])
    gamma = geom.base_frequency_hz / plan.carrier_hz
    eff = np.array([gamma * s.path_gain_f0
                    * np.exp(2j * np.pi * plan.carrier_hz * s.range_m / SPEED_OF_LIGHT)
                    for s in terms])
    u, v = w.real.copy(), w.imag.copy()
    return RealDecomposition(
        u=u, v=v, x=np.cos(phases), y=np.sin(phases), effective_gain=eff,
        C=np.outer(u, u) + np.outer(v, v), D=np.outer(u, v) - np.outer(v, u),
        phases=phases, snr_scale=np.abs(eff) ** 2 / scenario.noise_power_w,
    )


def _g_gradient(decomp: RealDecomposition, dphase: np.ndarray) -> np.ndarray:
    """Per-terminal gradient of ``g`` when phase ``(i, n)`` moves at rate ``dphase[i, n]``.

    ``dx = -sin * dphase`` and ``dy = cos * dphase``; ``grad_x g = 2Cx + 2Dy`` and
    ``grad_y g = 2Cy + 2D^T x``.
    """
    x, y, C, D = decomp.x, decomp.y, decomp.C, decomp.D
    grad_x = 2 * x @ C + 2 * y @ D.T
    grad_y = 2 * y @ C + 2 * x @ D
    return -y * dphase * grad_x + x * dphase * grad_y


def _combine(snr_scale, g, dg, extra=None):
    """Gradient of ``log2(1 + s_0 g_0) - log2(1 + sum_m s_m g_m)``."""
    terms = snr_scale[:, None] * dg
    if extra is not None:
        terms = terms + extra
    bob = terms[0] / (LN2 * (1 + snr_scale[0] * g[0]))
    eves = terms[1:].sum(axis=0) / (LN2 * (1 + np.dot(snr_scale[1:], g[1:])))
    return bob - eves


def objective_from_decomposition(decomp: RealDecomposition) -> float:
    g = decomp.g()
    s = decomp.snr_scale
    return float(np.log2(1 + s[0] * g[0]) - np.log2(1 + np.dot(s[1:], g[1:])))


def grad_fiv(decomp: RealDecomposition, scenario: Scenario, plan: FrequencyPlan,
             t: float = 0.0) -> np.ndarray:
    """Gradient of the unclamped secrecy rate w.r.t. each increment (per Hz)."""
    ranges = np.array([s.range_m for s in _terminals(scenario)])
    dphase = np.broadcast_to((-2 * np.pi / SPEED_OF_LIGHT * (ranges - SPEED_OF_LIGHT * t))[:, None],
                             decomp.x.shape)
    return _combine(decomp.snr_scale, decomp.g(), _g_gradient(decomp, dphase))


def grad_carrier(decomp: RealDecomposition, scenario: Scenario, geom: ArrayGeometry,
                 plan: FrequencyPlan, t: float = 0.0) -> float:
    """Derivative of the unclamped secrecy rate w.r.t. the carrier (per Hz).

    Includes the phase sensitivity of every element and the ``1/f_c^2``
    attenuation of all received powers.
    """
    angles = np.array([s.spatial_angle for s in _terminals(scenario)])
    return _carrier_gradient(decomp, angles, geom, plan.carrier_hz)


def _carrier_gradient(decomp, angles, geom, f_c):
    dphase = 2 * np.pi / SPEED_OF_LIGHT * np.outer(angles, geom.positions_m)
    g = decomp.g()
    dg = _g_gradient(decomp, dphase).sum(axis=1)
    atten = -2.0 / f_c * decomp.snr_scale * g  # d(s_i)/df_c * g_i, s_i ~ 1/f_c^2
    return float(_combine(decomp.snr_scale, g[:, None], dg[:, None], atten[:, None])[0])


def project_fiv(increments, increment_max_hz: float) -> np.ndarray:
    return np.clip(np.asarray(increments, dtype=float), 0.0, increment_max_hz)


def project_carrier(carrier_hz: float, f0_hz: float, f_h_hz: float) -> float:
    return float(min(max(carrier_hz, f0_hz), f_h_hz))


def pga_block(objective_block, gradient_fn, project_fn, x0, config: OptimizerConfig):
    """Projected gradient ascent with Armijo backtracking.

    Returns ``(x, value, BlockTrace)``.  Accepted steps satisfy
    ``f(x+) >= f(x) + slope * g.(x+ - x)``, so values never decrease.
    """
    x = project_fn(np.asarray(x0, dtype=float))
    f = objective_block(x)
    trace = BlockTrace([f], [])
    for it in range(config.pga_max_iters):
        g = gradient_fn(x)
        if not np.all(np.isfinite(g)) or not np.any(project_fn(x + g) != x):
            break
        step = config.initial_step
        while True:
            cand = project_fn(x + step * g)
            fc = objective_block(cand)
            slope = config.armijo_slope * float(np.dot(np.ravel(g), np.ravel(cand - x)))
            # max(., 0) keeps the ascent monotone under non-convex projections
            if fc >= f + max(slope, 0.0):
                break
            step *= config.armijo_shrink
            if step < config.min_step:
                if it == 0:
                    raise StalledStep(x, f)
                return x, f, trace
        improvement = fc - f
        x, f = cand, fc
        trace.values.append(f)
        trace.steps.append(step)
        if improvement < config.objective_tol_bps_hz:
            break
    return x, f, trace


@dataclass
class BcdResult:
    plan: FrequencyPlan
    beamformer: Beamformer
    objective: float
    report: SecrecyReport
    trace: OptimizationTrace
    start_index: int = 0
    runs: list = field(default_factory=list)  # final objective of each start

    @property
    def converged(self) -> bool:
        return self.trace.converged

    @property
    def iterations(self) -> int:
        return self.trace.iterations


def rate_upper_bound(scenario: Scenario, geom: ArrayGeometry) -> float:
    """``log2(1 + N P_max |g_B|^2 / sigma^2)``: Bob alone at the base frequency."""
    return float(np.log2(1 + geom.n_antennas * scenario.power_budget_w
                         * abs(scenario.bob.path_gain_f0) ** 2 / scenario.noise_power_w))


class _Link:
    """Per-terminal constants for fast evaluation inside the PGA blocks.

    Channel rows drop the common phase ``exp(j 2 pi f_c r / c)``; it changes
    neither any received power nor the Rayleigh direction's quality.
    """

    def __init__(self, scenario, geom, t=0.0):
        terms = _terminals(scenario)
        self.scenario, self.geom, self.t = scenario, geom, t
        self.angles = np.array([s.spatial_angle for s in terms])
        self.ranges = np.array([s.range_m for s in terms])
        self.gains = np.array([abs(s.path_gain_f0) for s in terms])
        self.s2 = scenario.noise_power_w
        self.p = scenario.power_budget_w
        self.f0 = geom.base_frequency_hz

    def phases(self, carrier_hz, increments):
        c = SPEED_OF_LIGHT
        return 2 * np.pi * (carrier_hz * np.outer(self.angles, self.geom.positions_m) / c
                            - np.outer(self.ranges, increments) / c
                            + increments[None, :] * self.t)

    def channels(self, carrier_hz, increments):
        amp = self.gains * (self.f0 / carrier_hz)
        return amp[:, None] * np.exp(1j * self.phases(carrier_hz, increments))

    def objective(self, w, carrier_hz, increments):
        return self.objective_h(w, self.channels(carrier_hz, increments))

    def objective_h(self, w, h):
        snr = np.abs(h.conj() @ w) ** 2 / self.s2
        return float(np.log2(1 + snr[0]) - np.log2(1 + snr[1:].sum()))

    def rayleigh(self, h):
        return rayleigh_weights(h, self.s2, self.p)

    def decomposition(self, w, carrier_hz, increments):
        ph = self.phases(carrier_hz, increments)
        u, v = w.real, w.imag
        scale = (self.gains * self.f0 / carrier_hz) ** 2 / self.s2
        return RealDecomposition(
            u=u, v=v, x=np.cos(ph), y=np.sin(ph), effective_gain=None,
            C=np.outer(u, u) + np.outer(v, v), D=np.outer(u, v) - np.outer(v, u),
            phases=ph, snr_scale=scale)


def _rayleigh(scenario, geom, plan, t):
    h_b, h_e = scenario_channels(geom, plan, scenario, t)
    return optimal_beamformer_rayleigh(scenario, h_b, h_e)


def _run_pga(objective, gradient, project, x0, config):
    try:
        x, f, bt = pga_block(objective, gradient, project, x0, config)
    except StalledStep as stall:
        x, f, bt = stall.x, stall.value, BlockTrace([stall.value], [])
    return x, f, bt


def _single_run(scenario, geom, limits, config, start, optimize_increments,
                optimize_carrier, t):
    link = _Link(scenario, geom, t)
    f0, f_h = geom.base_frequency_hz, limits.carrier_max_hz
    df_max = limits.increment_max_hz
    span = f_h - f0
    refresh = config.refresh_beamformer
    do_inc = optimize_increments and df_max > 0
    do_car = optimize_carrier and span > 0

    fc, inc = start.carrier_hz, np.array(start.increments_hz)
    w = link.rayleigh(link.channels(fc, inc))
    value = link.objective(w, fc, inc)
    trace = OptimizationTrace()
    trace.record(value, start)

    def block_w(fc_, inc_, w_fixed):
        return link.rayleigh(link.channels(fc_, inc_)) if refresh else w_fixed

    for _ in range(config.max_bcd_iters):
        start_value = value
        w_fixed = w
        inc_gain = car_gain = 0.0
        inc_step = car_step = None

        if do_inc:
            fc_now = fc

            def obj_inc(xi):
                h = link.channels(fc_now, xi * df_max)
                return link.objective_h(block_w(fc_now, xi * df_max, w_fixed), h)

            def grad_inc(xi):
                ww = block_w(fc_now, xi * df_max, w_fixed)
                d = link.decomposition(ww, fc_now, xi * df_max)
                return grad_fiv(d, scenario, None, t) * df_max

            xi, _, bt = _run_pga(obj_inc, grad_inc, lambda z: project_fiv(z, 1.0),
                                 inc / df_max, config)
            inc = xi * df_max
            inc_gain, inc_step = bt.gain, (bt.steps[-1] if bt.steps else None)

        if do_car:
            inc_now = inc

            def carrier(phi):
                return project_carrier(f0 + float(phi[0]) * span, f0, f_h)

            def obj_car(phi):
                f = carrier(phi)
                return link.objective_h(block_w(f, inc_now, w_fixed), link.channels(f, inc_now))

            def grad_car(phi):
                f = carrier(phi)
                d = link.decomposition(block_w(f, inc_now, w_fixed), f, inc_now)
                return np.array([_carrier_gradient(d, link.angles, geom, f) * span])

            phi, _, bt = _run_pga(obj_car, grad_car, lambda z: np.clip(z, 0.0, 1.0),
                                  np.array([(fc - f0) / span]), config)
            fc = carrier(phi)
            car_gain, car_step = bt.gain, (bt.steps[-1] if bt.steps else None)

        h = link.channels(fc, inc)
        before_w = link.objective_h(w_fixed, h)
        w_new = link.rayleigh(h)
        value = link.objective_h(w_new, h)
        if value < before_w:  # the closed form is optimal; guard against round-off
            w_new, value = w_fixed, before_w
        w = w_new
        plan = FrequencyPlan(fc, inc, f_h, df_max)
        trace.record(value, plan, (inc_gain, car_gain, value - before_w), (inc_step, car_step))
        if value - start_value < config.objective_tol_bps_hz:
            trace.converged = True
            break
    plan = FrequencyPlan(fc, inc, f_h, df_max)
    return plan, Beamformer(w), value, trace


def _starts(geom, limits, config, optimize_increments, optimize_carrier, extra):
    f0 = geom.base_frequency_hz
    base = FrequencyPlan.fixed(geom, limits.carrier_max_hz, limits.increment_max_hz)
    starts = [base] + list(extra or [])
    rng = np.random.default_rng(config.rng_seed)
    for _ in range(config.multistart_count - 1):
        inc = rng.uniform(0.0, limits.increment_max_hz, geom.n_antennas)
        fc = rng.uniform(f0, limits.carrier_max_hz)
        starts.append(FrequencyPlan(
            fc if optimize_carrier else f0,
            inc if optimize_increments else np.zeros(geom.n_antennas),
            limits.carrier_max_hz, limits.increment_max_hz))
    return starts


def bcd_solve(scenario: Scenario, geom: ArrayGeometry, limits: FrequencyLimits,
              config: OptimizerConfig | None = None, *, optimize_increments: bool = True,
              optimize_carrier: bool = True, initial_plans=None, t: float = 0.0) -> BcdResult:
    """Maximize the secrecy rate over (w, increments, carrier) from several starts.

    Starts: the fixed-array point (f0, no increments), any ``initial_plans``,
    then ``multistart_count - 1`` uniform random points.  The best final
    objective wins; earlier starts win ties (within ``TIE_TOL``).
    """
    config = config or OptimizerConfig()
    limits.check(geom)
    best = None
    runs = []
    for i, start in enumerate(_starts(geom, limits, config, optimize_increments,
                                      optimize_carrier, initial_plans)):
        plan, w, value, trace = _single_run(scenario, geom, limits, config, start,
                                            optimize_increments, optimize_carrier, t)
        runs.append(value)
        log.debug("start %d: objective %.9f after %d iterations", i, value, trace.iterations)
        if best is None or value > best[2] + TIE_TOL:
            best = (plan, w, value, trace, i)
    plan, w, value, trace, idx = best
    report = secrecy_rate(scenario, geom, plan, w, t)
    return BcdResult(plan, w, value, report, trace, idx, runs)
