"""Comparison arrays: fixed (FPA), frequency diverse (FDA), movable antennas (MA).

All three maximize the same unclamped secrecy objective as the switching
array.  The movable array runs at the base frequency with a range-independent
far-field response, so it cannot separate users on the same bearing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bcd import (
    BcdResult,
    OptimizerConfig,
    RealDecomposition,
    TIE_TOL,
    StalledStep,
    _combine,
    _g_gradient,
    bcd_solve,
    pga_block,
)
from .model import SPEED_OF_LIGHT, ArrayGeometry, FrequencyPlan
from .nullsteer import FrequencyLimits
from .secrecy import (
    Beamformer,
    Scenario,
    SecrecyReport,
    optimal_beamformer_rayleigh,
    rate_bob,
    rate_eves,
    rayleigh_weights,
    scenario_channels,
)


class InfeasibleSpacing(ValueError):
    pass


@dataclass(frozen=True)
class MaConfiguration:
    positions_m: np.ndarray
    region_length_m: float
    min_spacing_m: float

    def __post_init__(self):
        pos = np.array(self.positions_m, dtype=float)
        pos.setflags(write=False)
        object.__setattr__(self, "positions_m", pos)
        half = self.region_length_m / 2
        tol = 1e-9 * max(self.min_spacing_m, 1e-300)
        if np.any(pos < -half - tol) or np.any(pos > half + tol):
            raise ValueError("antenna positions leave the movable region")
        if pos.size > 1 and np.min(np.diff(pos)) < self.min_spacing_m - tol:
            raise ValueError("antenna positions violate the minimum spacing")


@dataclass
class FpaResult:
    plan: FrequencyPlan
    beamformer: Beamformer
    objective: float
    report: SecrecyReport


@dataclass
class MaTrace:
    objective: list = field(default_factory=list)
    positions_m: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return max(len(self.objective) - 1, 0)

    def record(self, value, positions_m):
        self.objective.append(float(value))
        self.positions_m.append(np.asarray(positions_m, dtype=float).tolist())

    def to_dict(self) -> dict:
        return {"objective": self.objective, "positions_m": self.positions_m,
                "converged": self.converged, "iterations": self.iterations}


@dataclass
class MaResult:
    configuration: MaConfiguration
    beamformer: Beamformer
    objective: float
    report: SecrecyReport
    trace: MaTrace
    start_index: int = 0
    runs: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.trace.converged

    @property
    def iterations(self) -> int:
        return self.trace.iterations


def fpa_solve(scenario: Scenario, geom: ArrayGeometry) -> FpaResult:
    """Half-wavelength array at ``f0`` with the optimal (Rayleigh) beamformer."""
    plan = FrequencyPlan.fixed(geom)
    h_b, h_e = scenario_channels(geom, plan, scenario)
    w = optimal_beamformer_rayleigh(scenario, h_b, h_e)
    rb, re = rate_bob(scenario, h_b, w), rate_eves(scenario, h_e, w)
    report = SecrecyReport.from_rates(rb, re)
    return FpaResult(plan, w, report.unclamped_difference, report)


def fda_solve(scenario: Scenario, geom: ArrayGeometry, limits: FrequencyLimits,
              config: OptimizerConfig | None = None, initial_plans=None) -> BcdResult:
    """Increment-only search: the carrier block is skipped (``f_c = f0``)."""
    f0 = geom.base_frequency_hz
    starts = [FrequencyPlan(f0, p.increments_hz, limits.carrier_max_hz, limits.increment_max_hz)
              for p in (initial_plans or [])]
    return bcd_solve(scenario, geom, limits, config, optimize_carrier=False,
                     initial_plans=starts)


def fsa_solve(scenario: Scenario, geom: ArrayGeometry, limits: FrequencyLimits,
              config: OptimizerConfig | None = None, initial_plans=None,
              fda: BcdResult | None = None) -> BcdResult:
    """Full switching-array search, seeded with the FDA optimum.

    The FDA point is feasible for the switching array, so seeding with it
    (and the ascent being monotone) keeps FSA >= FDA.
    """
    if fda is None:
        fda = fda_solve(scenario, geom, limits, config)
    seeds = [fda.plan] + list(initial_plans or [])
    return bcd_solve(scenario, geom, limits, config, initial_plans=seeds)


def ma_region_length(geom: ArrayGeometry, limits: FrequencyLimits) -> float:
    """Movable span matched to the switching range: ``L = (f_H / f0) N d0``."""
    return limits.carrier_max_hz / geom.base_frequency_hz * geom.aperture_m


def project_positions(positions, region_length: float, min_spacing: float) -> np.ndarray:
    """Sort, push apart left to right, then pull back inside the right edge.

    Always returns an ordered configuration with gaps >= ``min_spacing``
    inside ``[-L/2, L/2]`` when ``(N - 1) min_spacing <= L``.
    """
    half = region_length / 2
    x = np.sort(np.clip(np.asarray(positions, dtype=float), -half, half))
    for n in range(1, x.size):
        x[n] = max(x[n], x[n - 1] + min_spacing)
    if x.size:
        x[-1] = min(x[-1], half)
    for n in range(x.size - 2, -1, -1):
        x[n] = min(x[n], x[n + 1] - min_spacing)
    return x


class _MaLink:
    def __init__(self, scenario, geom):
        terms = (scenario.bob,) + tuple(scenario.eves)
        self.angles = np.array([s.spatial_angle for s in terms])
        self.gains = np.array([abs(s.path_gain_f0) for s in terms])
        self.k0 = 2 * np.pi * geom.base_frequency_hz / SPEED_OF_LIGHT
        self.s2 = scenario.noise_power_w
        self.p = scenario.power_budget_w

    def phases(self, positions):
        return self.k0 * np.outer(self.angles, positions)

    def channels(self, positions):
        return self.gains[:, None] * np.exp(1j * self.phases(positions))

    def rayleigh(self, h):
        return rayleigh_weights(h, self.s2, self.p)

    def rates(self, w, h):
        snr = np.abs(h.conj() @ w) ** 2 / self.s2
        return float(np.log2(1 + snr[0])), float(np.log2(1 + snr[1:].sum()))

    def objective(self, positions):
        h = self.channels(positions)
        rb, re = self.rates(self.rayleigh(h), h)
        return rb - re

    def gradient(self, positions):
        """Position gradient at the Rayleigh beamformer (envelope of the w block)."""
        h = self.channels(positions)
        w = self.rayleigh(h)
        ph = self.phases(positions)
        d = RealDecomposition(u=w.real, v=w.imag, x=np.cos(ph), y=np.sin(ph),
                              effective_gain=None,
                              C=np.outer(w.real, w.real) + np.outer(w.imag, w.imag),
                              D=np.outer(w.real, w.imag) - np.outer(w.imag, w.real),
                              phases=ph, snr_scale=self.gains ** 2 / self.s2)
        dphase = np.broadcast_to((self.k0 * self.angles)[:, None], ph.shape)
        return _combine(d.snr_scale, d.g(), _g_gradient(d, dphase))


def ma_channels(scenario: Scenario, geom: ArrayGeometry, positions_m):
    """Channel rows (Bob first) of a movable array at ``f0``; common phases dropped."""
    return _MaLink(scenario, geom).channels(np.asarray(positions_m, dtype=float))


def ma_secrecy(scenario: Scenario, geom: ArrayGeometry, positions_m, w) -> SecrecyReport:
    link = _MaLink(scenario, geom)
    w = w.weights if isinstance(w, Beamformer) else np.asarray(w, dtype=complex)
    rb, re = link.rates(w, link.channels(np.asarray(positions_m, dtype=float)))
    return SecrecyReport.from_rates(rb, re)


def ma_solve(scenario: Scenario, geom: ArrayGeometry, limits: FrequencyLimits,
             config: OptimizerConfig | None = None, *, region_length_m: float | None = None,
             min_spacing_m: float | None = None, initial_positions=None) -> MaResult:
    """Alternate the Rayleigh beamformer with projected ascent over positions.

    Starts: the fixed half-wavelength layout, any ``initial_positions``, then
    ``multistart_count - 1`` random feasible layouts.
    """
    config = config or OptimizerConfig()
    d0 = geom.spacing_m
    n = geom.n_antennas
    length = ma_region_length(geom, limits) if region_length_m is None else region_length_m
    spacing = d0 if min_spacing_m is None else min_spacing_m
    if n * spacing > length * (1 + 1e-12):
        raise InfeasibleSpacing(f"{n} antennas at {spacing:g} m spacing do not fit in {length:g} m")

    link = _MaLink(scenario, geom)
    # normalized coordinates: positions in units of d0
    half_n, gap_n = length / (2 * d0), spacing / d0

    def project(z):
        return project_positions(z, 2 * half_n, gap_n)

    def objective(z):
        return link.objective(z * d0)

    def gradient(z):
        # unit max-norm direction: a full step moves the farthest antenna by d0,
        # which keeps step sizes meaningful when the objective is tiny (low SNR)
        g = link.gradient(z * d0) * d0
        peak = np.max(np.abs(g))
        return g / peak if peak > 0 else g

    rng = np.random.default_rng(config.rng_seed)
    starts = [geom.positions_m / d0]
    starts += [np.asarray(p, dtype=float) / d0 for p in (initial_positions or [])]
    for _ in range(config.multistart_count - 1):
        starts.append(rng.uniform(-half_n, half_n, n))

    best, runs = None, []
    for i, z0 in enumerate(starts):
        z = project(z0)
        value = objective(z)
        trace = MaTrace()
        trace.record(value, z * d0)
        for _ in range(config.max_bcd_iters):
            try:
                z_new, v_new, _ = pga_block(objective, gradient, project, z, config)
            except StalledStep as stall:
                z_new, v_new = stall.x, stall.value
            gain = v_new - value
            z, value = z_new, max(v_new, value)
            trace.record(value, z * d0)
            if gain < config.objective_tol_bps_hz:
                trace.converged = True
                break
        runs.append(value)
        if best is None or value > best[1] + TIE_TOL:
            best = (z, value, trace, i)

    z, value, trace, idx = best
    positions = z * d0
    w = link.rayleigh(link.channels(positions))
    report = ma_secrecy(scenario, geom, positions, w)
    conf = MaConfiguration(positions, length, spacing)
    return MaResult(conf, Beamformer(w), report.unclamped_difference, report, trace, idx, runs)
