"""Beamformers, secrecy rates and the Bob/Eve channel correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    SPEED_OF_LIGHT,
    ArrayGeometry,
    ChannelVector,
    FrequencyPlan,
    Terminal,
    channel_bob,
    channel_eve,
    steering_vector,
)

POWER_SLACK = 1e-9


class SingularSystem(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Bob, the cooperating eavesdroppers, noise power and power budget (watts).

    An empty ``eves`` tuple is allowed and means nobody listens (``R_E = 0``).
    """

    bob: Terminal
    eves: tuple
    noise_power_w: float
    power_budget_w: float

    def __post_init__(self):
        object.__setattr__(self, "eves", tuple(self.eves))
        if not self.noise_power_w > 0:
            raise ValueError("noise_power_w must be positive")
        if not self.power_budget_w > 0:
            raise ValueError("power_budget_w must be positive")

    def with_power(self, power_budget_w: float) -> "Scenario":
        return Scenario(self.bob, self.eves, self.noise_power_w, power_budget_w)


@dataclass(frozen=True)
class Beamformer:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=complex)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def power(self) -> float:
        return float(np.vdot(self.weights, self.weights).real)

    def check_power(self, power_budget_w: float) -> None:
        if self.power > power_budget_w + POWER_SLACK:
            raise ValueError(
                f"beamformer power {self.power:.6g} W exceeds budget {power_budget_w:.6g} W"
            )


@dataclass(frozen=True)
class SecrecyReport:
    rate_bob_bps_hz: float
    rate_eves_bps_hz: float
    secrecy_rate_bps_hz: float
    unclamped_difference: float

    @classmethod
    def from_rates(cls, rate_bob: float, rate_eves: float) -> "SecrecyReport":
        diff = rate_bob - rate_eves
        return cls(rate_bob, rate_eves, max(diff, 0.0), diff)


def _entries(h):
    return h.entries if isinstance(h, ChannelVector) else np.asarray(h, dtype=complex)


def _weights(w):
    return w.weights if isinstance(w, Beamformer) else np.asarray(w, dtype=complex)


def mrt_beamformer(geom: ArrayGeometry, plan: FrequencyPlan, bob: Terminal,
                   power_budget_w: float, t: float = 0.0) -> Beamformer:
    """Maximum ratio transmission toward Bob at full power."""
    return Beamformer(np.sqrt(power_budget_w) * steering_vector(geom, plan, bob, t))


def rate_bob(scenario: Scenario, h_b, w) -> float:
    gain = abs(np.vdot(_entries(h_b), _weights(w))) ** 2
    return float(np.log2(1.0 + gain / scenario.noise_power_w))


def rate_eves(scenario: Scenario, h_e_list, w) -> float:
    """Rate of the cooperating eavesdroppers (their received powers add up)."""
    w = _weights(w)
    leak = sum(abs(np.vdot(_entries(h), w)) ** 2 for h in h_e_list)
    return float(np.log2(1.0 + leak / scenario.noise_power_w))


def scenario_channels(geom: ArrayGeometry, plan: FrequencyPlan, scenario: Scenario,
                      t: float = 0.0):
    h_b = channel_bob(geom, plan, scenario.bob, t)
    h_e = [channel_eve(geom, plan, eve, t) for eve in scenario.eves]
    return h_b, h_e


def secrecy_rate(scenario: Scenario, geom: ArrayGeometry, plan: FrequencyPlan, w,
                 t: float = 0.0) -> SecrecyReport:
    h_b, h_e = scenario_channels(geom, plan, scenario, t)
    return SecrecyReport.from_rates(rate_bob(scenario, h_b, w), rate_eves(scenario, h_e, w))


def _dirichlet_ratio(n: int, x):
    """``|sin(N pi x) / (N sin(pi x))|`` with the removable singularities filled in."""
    x = np.asarray(x, dtype=float)
    xr = x - np.round(x)  # |ratio| is 1-periodic in x
    # sin(N pi x)/(N sin(pi x)) == sinc(N x) / sinc(x), both finite at 0
    return np.abs(np.sinc(n * xr) / np.sinc(xr))


def correlation_closed_form(geom: ArrayGeometry, carrier_hz: float, delta_f_hz: float,
                            delta_u: float, delta_r: float) -> float:
    """Bob/Eve steering correlation for the uniform increment ladder.

    ``delta_u`` is the sine-domain angle difference ``u_B - u_E`` and
    ``delta_r = r_B - r_E``.
    """
    x = (0.5 * carrier_hz / geom.base_frequency_hz * delta_u
         - delta_f_hz * delta_r / SPEED_OF_LIGHT)
    return float(_dirichlet_ratio(geom.n_antennas, x))


def correlation_bruteforce(geom: ArrayGeometry, plan: FrequencyPlan, bob: Terminal,
                           eve: Terminal, t: float = 0.0) -> float:
    a_b = steering_vector(geom, plan, bob, t)
    a_e = steering_vector(geom, plan, eve, t)
    return float(abs(np.vdot(a_b, a_e)))


def rayleigh_matrices(scenario: Scenario, h_b, h_e_list):
    """``A = h_B h_B^H / s2`` and ``B = sum_m h_m h_m^H / s2``."""
    s2 = scenario.noise_power_w
    hb = _entries(h_b)
    a = np.outer(hb, hb.conj()) / s2
    b = np.zeros_like(a)
    for h in h_e_list:
        he = _entries(h)
        b += np.outer(he, he.conj()) / s2
    return a, b


def rayleigh_objective(a: np.ndarray, b: np.ndarray, w) -> float:
    w = _weights(w)
    num = np.vdot(w, a @ w).real + 1.0
    den = np.vdot(w, b @ w).real + 1.0
    return float(num / den)


def rayleigh_weights(h_rows, noise_power_w: float, power_budget_w: float) -> np.ndarray:
    """Full-power maximizer of ``(w^H A w + 1) / (w^H B w + 1)``.

    ``h_rows`` stacks Bob's channel (row 0) over the eavesdroppers'.  On the
    sphere ``||w||^2 = P`` the ratio equals ``w^H (A + I/P) w / w^H (B + I/P) w``,
    so the answer is the top generalized eigenvector of that pencil.  The
    right-hand matrix is whitened by its Cholesky factor and the resulting
    Hermitian problem goes to ``eigh``.
    """
    h = np.atleast_2d(np.asarray(h_rows, dtype=complex))
    n = h.shape[1]
    eye = np.eye(n)
    he = h[1:]
    a = np.outer(h[0], h[0].conj()) / noise_power_w + eye / power_budget_w
    m = he.T @ he.conj() / noise_power_w + eye / power_budget_w
    try:
        chol = np.linalg.cholesky(m)
        inv = np.linalg.solve(chol, eye)
        k = inv @ a @ inv.conj().T
        _, vecs = np.linalg.eigh(0.5 * (k + k.conj().T))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    w = inv.conj().T @ vecs[:, -1]
    norm = np.linalg.norm(w)
    if not np.isfinite(norm) or norm == 0:
        raise SingularSystem("degenerate beamformer direction")
    # fix the common phase so results are reproducible across LAPACK builds
    lead = w[np.argmax(np.abs(w))]
    return np.sqrt(power_budget_w) * w / norm * (abs(lead) / lead)


def optimal_beamformer_rayleigh(scenario: Scenario, h_b, h_e_list,
                                power_budget_w: float | None = None) -> Beamformer:
    """Optimal full-power beamformer for the unclamped secrecy rate."""
    p = scenario.power_budget_w if power_budget_w is None else power_budget_w
    rows = [_entries(h_b)] + [_entries(h) for h in h_e_list]
    return Beamformer(rayleigh_weights(np.array(rows), scenario.noise_power_w, p))
