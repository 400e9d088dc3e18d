"""Closed-form null steering toward a single eavesdropper.

Regime: MRT toward Bob, one Eve, uniform increment ladder
``[df, 2 df, ..., N df]`` and a common carrier ``f_c``.  The Bob/Eve
correlation vanishes exactly when

    (f_c / f0) * du = 2 k / N + 2 dr df / c,   k mod N != 0,

with ``du = u_B - u_E`` (sine domain) and ``dr = r_B - r_E``.  The solvers
pick the admissible ``(df, f_c)`` on these null lines that has the lowest
carrier, since the received power falls as ``(f0 / f_c)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import SPEED_OF_LIGHT, ArrayGeometry, Terminal
from .secrecy import Scenario, _dirichlet_ratio, correlation_closed_form

FEASIBILITY_RTOL = 1e-9
NULL_RTOL = 1e-9

SAME_ANGLE = "SameAngle"
SAME_RANGE = "SameRange"
GENERAL_POSITIVE = "GeneralPositive"
GENERAL_NEGATIVE = "GeneralNegative"


class WrongCase(ValueError):
    """Geometry does not satisfy the solver's case preconditions."""


@dataclass(frozen=True)
class GeometryGap:
    delta_u: float
    delta_r: float

    def __post_init__(self):
        if not (math.isfinite(self.delta_u) and math.isfinite(self.delta_r)):
            raise ValueError("geometry gap must be finite")

    @classmethod
    def between(cls, bob: Terminal, eve: Terminal) -> "GeometryGap":
        return cls(bob.spatial_angle - eve.spatial_angle, bob.range_m - eve.range_m)

    @property
    def case_id(self) -> str:
        if self.delta_u == 0 and self.delta_r == 0:
            raise WrongCase("Bob and Eve coincide; no null can separate them")
        if self.delta_u == 0:
            return SAME_ANGLE
        if self.delta_r == 0:
            return SAME_RANGE
        return GENERAL_POSITIVE if self.delta_u * self.delta_r > 0 else GENERAL_NEGATIVE


@dataclass(frozen=True)
class FrequencyLimits:
    """Switching bounds: highest carrier ``f_H`` and largest increment."""

    carrier_max_hz: float
    increment_max_hz: float

    def __post_init__(self):
        if not self.carrier_max_hz > 0:
            raise ValueError("carrier_max_hz must be positive")
        if self.increment_max_hz < 0:
            raise ValueError("increment_max_hz must be non-negative")

    def check(self, geom: ArrayGeometry) -> None:
        if self.carrier_max_hz < geom.base_frequency_hz:
            raise ValueError("carrier_max_hz is below the base frequency")


@dataclass(frozen=True)
class LinkBudget:
    """Full-array SNRs at the base frequency: ``P_max N |g|^2 / sigma^2``."""

    snr_bob: float
    snr_eve: float

    @classmethod
    def from_scenario(cls, scenario: Scenario, geom: ArrayGeometry) -> "LinkBudget":
        if len(scenario.eves) != 1:
            raise ValueError("closed-form analysis covers a single eavesdropper")
        k = scenario.power_budget_w * geom.n_antennas / scenario.noise_power_w
        return cls(k * abs(scenario.bob.path_gain_f0) ** 2,
                   k * abs(scenario.eves[0].path_gain_f0) ** 2)


@dataclass(frozen=True)
class RelaxedSolution:
    """Best point when the null constraint is dropped (same-angle case only)."""

    delta_f_hz: float
    carrier_hz: float
    correlation: float
    achieved_rate_bps_hz: float | None


@dataclass(frozen=True)
class NullSolution:
    delta_f_hz: float
    carrier_hz: float
    feasible: bool
    case_id: str
    achieved_rate_bps_hz: float | None = None
    k: int | None = None
    relaxed: RelaxedSolution | None = None


def in_main_lobe(gap: GeometryGap, n_antennas: int) -> bool:
    """True when Eve sits inside the main lobe of Bob's fixed-array beam."""
    return abs(gap.delta_u) < 2.0 / n_antennas


def null_residual(geom: ArrayGeometry, gap: GeometryGap, carrier_hz: float,
                  delta_f_hz: float, k: int) -> float:
    lhs = carrier_hz / geom.base_frequency_hz * gap.delta_u
    rhs = 2.0 * k / geom.n_antennas + 2.0 * gap.delta_r * delta_f_hz / SPEED_OF_LIGHT
    return abs(lhs - rhs)


def null_condition_k(geom: ArrayGeometry, gap: GeometryGap, carrier_hz: float,
                     delta_f_hz: float) -> int | None:
    """Integer ``k`` (``k mod N != 0``) placing Eve on a null, or ``None``."""
    n = geom.n_antennas
    lhs = carrier_hz / geom.base_frequency_hz * gap.delta_u
    offset = 2.0 * gap.delta_r * delta_f_hz / SPEED_OF_LIGHT
    k = int(round(0.5 * n * (lhs - offset)))
    if k % n == 0:
        return None
    scale = max(1.0, abs(lhs), abs(offset))
    if null_residual(geom, gap, carrier_hz, delta_f_hz, k) > NULL_RTOL * scale:
        return None
    return k


def _best_on_null_lines(gap, n, max_ratio, df_max):
    """Lowest carrier ratio ``s = f_c/f0`` on any admissible null line.

    Returns ``(s, df, k)`` or ``None``.  Ties in ``s`` go to the smaller ``df``.
    """
    du, dr, c = gap.delta_u, gap.delta_r, SPEED_OF_LIGHT
    if n == 1:
        return None
    if abs(du) * max_ratio * n < 1e-12:
        # carrier has no effect: no admissible carrier moves the angle term
        # by a measurable fraction of a null spacing;
        # the first range null needs df = c / (N |dr|)
        if dr == 0:
            return None
        k = -int(math.copysign(1, dr))
        df = c / (n * abs(dr))
        if df > df_max * (1 + FEASIBILITY_RTOL):
            return None
        return 1.0, min(df, df_max) if df_max > 0 else df, k

    tol = FEASIBILITY_RTOL
    b = 2.0 * dr / (c * du)  # ds / d(df)
    corners = [0.5 * n * (s * du - 2.0 * dr * f / c)
               for s in (1.0, max_ratio) for f in (0.0, df_max)]
    k_lo = math.ceil(min(corners) - tol * max(1.0, abs(min(corners))))
    k_hi = math.floor(max(corners) + tol * max(1.0, abs(max(corners))))

    best = None
    for k in range(k_lo, k_hi + 1):
        if k % n == 0:
            continue
        a = 2.0 * k / (n * du)  # s at df = 0
        if b == 0:
            if not (1 - tol) * 1.0 <= a <= max_ratio * (1 + tol):
                continue
            cand = (a, 0.0)
        else:
            f1, f2 = (1.0 - a) / b, (max_ratio - a) / b
            lo, hi = max(min(f1, f2), 0.0), min(max(f1, f2), df_max)
            if lo > hi + tol * max(df_max, abs(hi), abs(lo), 1e-300):
                continue
            df = lo if b > 0 else hi
            df = min(max(df, 0.0), df_max)
            cand = (a + b * df, df)
        key = (round(cand[0], 12), cand[1])
        if best is None or key < (round(best[0], 12), best[1]):
            best = (cand[0], cand[1], k)
    return best


def _rate_at_null(link, carrier_ratio):
    if link is None:
        return None
    return float(np.log2(1.0 + link.snr_bob / carrier_ratio ** 2))


def _solve(gap, geom, limits, link, case_id):
    limits.check(geom)
    n, f0 = geom.n_antennas, geom.base_frequency_hz
    max_ratio = limits.carrier_max_hz / f0
    found = _best_on_null_lines(gap, n, max_ratio, limits.increment_max_hz)
    feasible = found is not None
    if not feasible:
        # report what the null would require: lift the carrier cap first,
        # then the increment cap (same-angle geometries ignore the carrier)
        need_df = (SPEED_OF_LIGHT / (n * abs(gap.delta_r)) if gap.delta_r else 0.0)
        big_ratio = max_ratio + 1.0
        if gap.delta_u:
            big_ratio += 2.0 / (n * abs(gap.delta_u))
        if not math.isfinite(big_ratio):
            return NullSolution(math.nan, math.nan, False, case_id)
        found = _best_on_null_lines(gap, n, big_ratio, limits.increment_max_hz)
        if found is None:
            found = _best_on_null_lines(gap, n, big_ratio,
                                        max(limits.increment_max_hz, need_df))
    if found is None:
        return NullSolution(math.nan, math.nan, False, case_id)
    s, df, k = found
    f_c = max(s, 1.0) * f0 if feasible else s * f0
    if feasible:
        f_c = min(f_c, limits.carrier_max_hz)
    return NullSolution(df, f_c, feasible, case_id,
                        _rate_at_null(link, f_c / f0) if feasible else None, k)


def _require(gap, expected):
    actual = gap.case_id
    if actual not in expected:
        raise WrongCase(f"geometry is case {actual}, solver handles {'/'.join(expected)}")


def solve_case_same_angle(gap: GeometryGap, geom: ArrayGeometry, limits: FrequencyLimits,
                          link: LinkBudget | None = None) -> NullSolution:
    """Bob and Eve on the same bearing: only the increments can null Eve.

    The relaxed (unconstrained-null) optimum is attached as ``relaxed``:
    ``df = min(c / (N |dr|), df_max)`` at ``f_c = f0``.
    """
    _require(gap, (SAME_ANGLE,))
    sol = _solve(gap, geom, limits, link, SAME_ANGLE)
    f0 = geom.base_frequency_hz
    df = min(SPEED_OF_LIGHT / (geom.n_antennas * abs(gap.delta_r)), limits.increment_max_hz)
    corr = correlation_closed_form(geom, f0, df, gap.delta_u, gap.delta_r)
    rate = None
    if link is not None:
        rate = max(float(np.log2((1.0 + link.snr_bob) / (1.0 + link.snr_eve * corr ** 2))), 0.0)
    relaxed = RelaxedSolution(df, f0, corr, rate)
    return NullSolution(sol.delta_f_hz, sol.carrier_hz, sol.feasible, sol.case_id,
                        sol.achieved_rate_bps_hz, sol.k, relaxed)


def solve_case_same_range(gap: GeometryGap, geom: ArrayGeometry, limits: FrequencyLimits,
                          link: LinkBudget | None = None) -> NullSolution:
    """Bob and Eve on the same circle: only carrier switching can null Eve."""
    _require(gap, (SAME_RANGE,))
    return _solve(gap, geom, limits, link, SAME_RANGE)


def solve_case_general(gap: GeometryGap, geom: ArrayGeometry, limits: FrequencyLimits,
                       link: LinkBudget | None = None) -> NullSolution:
    """Distinct angle and range; both controls are available."""
    _require(gap, (GENERAL_POSITIVE, GENERAL_NEGATIVE))
    return _solve(gap, geom, limits, link, gap.case_id)


def solve_null_steering(gap: GeometryGap, geom: ArrayGeometry, limits: FrequencyLimits,
                        link: LinkBudget | None = None) -> NullSolution:
    solver = {
        SAME_ANGLE: solve_case_same_angle,
        SAME_RANGE: solve_case_same_range,
    }.get(gap.case_id, solve_case_general)
    return solver(gap, geom, limits, link)


def fixed_array_correlation(delta_u: float, n_antennas: int) -> float:
    """Correlation of a half-wavelength fixed array, ``|sin(N pi du/2) / (N sin(pi du/2))|``."""
    return float(_dirichlet_ratio(n_antennas, 0.5 * delta_u))


@dataclass(frozen=True)
class PerformanceGaps:
    gap_vs_ma: float
    gap_vs_fpa: float
    rate_fsa: float
    rate_ma: float
    rate_fpa: float
    fpa_correlation: float
    fpa_threshold: float | None = None
    beats_fpa: bool | None = None


def performance_gaps(solution: NullSolution, scenario: Scenario,
                     geom: ArrayGeometry) -> PerformanceGaps:
    """Secrecy-rate gaps of the switching array over movable and fixed arrays.

    Movable antennas are taken with an unbounded region: they null any Eve at
    a different bearing with no carrier penalty, and cannot separate users on
    the same bearing.  The fixed array uses MRT at ``f0``.
    """
    link = LinkBudget.from_scenario(scenario, geom)
    gap = GeometryGap.between(scenario.bob, scenario.eves[0])
    if gap.case_id != solution.case_id:
        raise WrongCase("solution was computed for a different geometry case")
    f0 = geom.base_frequency_hz
    if solution.feasible:
        rate_fsa = float(np.log2(1.0 + link.snr_bob * (f0 / solution.carrier_hz) ** 2))
    elif solution.relaxed is not None:
        r = solution.relaxed
        rate_fsa = max(float(np.log2((1.0 + link.snr_bob * (f0 / r.carrier_hz) ** 2)
                                     / (1.0 + link.snr_eve * (f0 / r.carrier_hz) ** 2
                                        * r.correlation ** 2))), 0.0)
    else:
        raise WrongCase("performance gaps need a feasible null-steering solution")

    corr = fixed_array_correlation(gap.delta_u, geom.n_antennas)
    rate_fpa = max(float(np.log2((1.0 + link.snr_bob) / (1.0 + link.snr_eve * corr ** 2))), 0.0)
    if solution.case_id == SAME_ANGLE:
        rate_ma = rate_fpa
    else:
        rate_ma = float(np.log2(1.0 + link.snr_bob))

    threshold = beats = None
    if solution.case_id == SAME_RANGE:
        q = (geom.n_antennas * gap.delta_u) ** 2 / 4.0
        # gain > 0  <=>  corr^2 * snr_b * (q snr_b + 1) > snr_b (1 - q), with P_E = P_B
        threshold = (1.0 - q) / (q * link.snr_bob + 1.0)
        beats = corr ** 2 >= threshold
    return PerformanceGaps(rate_fsa - rate_ma, rate_fsa - rate_fpa, rate_fsa, rate_ma,
                           rate_fpa, corr, threshold, beats)
