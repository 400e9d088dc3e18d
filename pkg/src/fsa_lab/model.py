"""Array geometry, frequency plans, far-field steering and channel vectors.

Angles are carried in the sine domain (``u = sin(theta)``) everywhere; the
only place degrees appear is the config loader in :mod:`fsa_lab.harness`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 3e8  # m/s
MAX_INCREMENT_RATIO = 1e-3  # increment_max_hz <= ratio * carrier_max_hz


class DegenerateAngle(ValueError):
    """Raised when the equivalent-position map is evaluated at broadside."""


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ArrayGeometry:
    """Centered, half-wavelength ULA with an odd number of elements."""

    n_antennas: int
    base_frequency_hz: float
    spacing_m: float = field(init=False)
    index_offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_antennas
        if int(n) != n or n < 1 or n % 2 == 0:
            raise ValueError(f"n_antennas must be a positive odd integer, got {n!r}")
        if not self.base_frequency_hz > 0:
            raise ValueError("base_frequency_hz must be positive")
        object.__setattr__(self, "n_antennas", int(n))
        object.__setattr__(self, "spacing_m", SPEED_OF_LIGHT / (2.0 * self.base_frequency_hz))
        idx = np.arange(1, n + 1)
        object.__setattr__(self, "index_offsets", _readonly((2 * idx - n - 1) / 2.0))

    @property
    def positions_m(self) -> np.ndarray:
        """Physical element coordinates ``delta_n * d0``."""
        return self.index_offsets * self.spacing_m

    @property
    def aperture_m(self) -> float:
        return self.n_antennas * self.spacing_m


@dataclass(frozen=True)
class FrequencyPlan:
    """Carrier frequency plus per-antenna frequency increments."""

    carrier_hz: float
    increments_hz: np.ndarray
    carrier_max_hz: float
    increment_max_hz: float

    def __post_init__(self):
        inc = np.atleast_1d(np.asarray(self.increments_hz, dtype=float))
        object.__setattr__(self, "increments_hz", _readonly(inc))
        if self.increment_max_hz < 0:
            raise ValueError("increment_max_hz must be non-negative")
        if self.increment_max_hz > MAX_INCREMENT_RATIO * self.carrier_max_hz:
            raise ValueError(
                "increment_max_hz must not exceed "
                f"{MAX_INCREMENT_RATIO:g} * carrier_max_hz"
            )
        if not self.carrier_hz <= self.carrier_max_hz:
            raise ValueError("carrier_hz exceeds carrier_max_hz")
        if np.any(inc < 0) or np.any(inc > self.increment_max_hz):
            raise ValueError("increments_hz must lie in [0, increment_max_hz]")

    @classmethod
    def fixed(cls, geom: ArrayGeometry, carrier_max_hz: float | None = None,
              increment_max_hz: float = 0.0) -> "FrequencyPlan":
        """Plan of a conventional array: carrier at f0, no increments."""
        f0 = geom.base_frequency_hz
        return cls(f0, np.zeros(geom.n_antennas),
                   f0 if carrier_max_hz is None else carrier_max_hz,
                   increment_max_hz)

    @classmethod
    def ladder(cls, geom: ArrayGeometry, carrier_hz: float, step_hz: float,
               carrier_max_hz: float | None = None) -> "FrequencyPlan":
        """Uniform increment ladder ``[step, 2 step, ..., N step]``.

        The per-antenna cap is set to ``N * step`` so the ladder is always
        admissible; callers bound ``step`` itself.
        """
        n = geom.n_antennas
        incs = step_hz * np.arange(1, n + 1)
        f_h = carrier_hz if carrier_max_hz is None else carrier_max_hz
        return cls(carrier_hz, incs, f_h, float(incs[-1]) if n else 0.0)

    def validate_for(self, geom: ArrayGeometry) -> None:
        if self.increments_hz.shape != (geom.n_antennas,):
            raise ValueError(
                f"plan has {self.increments_hz.size} increments, "
                f"array has {geom.n_antennas} antennas"
            )
        # relative slack so that f_c = f0 computed by division still passes
        if self.carrier_hz < geom.base_frequency_hz * (1 - 1e-12):
            raise ValueError("carrier_hz below the base frequency")

    def with_carrier(self, carrier_hz: float) -> "FrequencyPlan":
        return FrequencyPlan(carrier_hz, self.increments_hz,
                             self.carrier_max_hz, self.increment_max_hz)

    def with_increments(self, increments_hz) -> "FrequencyPlan":
        return FrequencyPlan(self.carrier_hz, increments_hz,
                             self.carrier_max_hz, self.increment_max_hz)


@dataclass(frozen=True)
class Terminal:
    """Single-antenna user site in the far field of the array."""

    spatial_angle: float
    range_m: float
    path_gain_f0: complex

    def __post_init__(self):
        if not self.range_m > 0:
            raise ValueError("range_m must be positive")
        if not abs(self.spatial_angle) <= 1:
            raise ValueError("spatial_angle is sin(theta) and must lie in [-1, 1]")
        object.__setattr__(self, "path_gain_f0", complex(self.path_gain_f0))

    @classmethod
    def free_space(cls, spatial_angle: float, range_m: float,
                   base_frequency_hz: float) -> "Terminal":
        return cls(spatial_angle, range_m, default_path_gain(base_frequency_hz, range_m))


@dataclass(frozen=True)
class ChannelVector:
    entries: np.ndarray
    attenuation_factor: float

    def __post_init__(self):
        object.__setattr__(self, "entries", _readonly(self.entries, complex))
        if not 0 < self.attenuation_factor <= 1 + 1e-12:
            raise ValueError("attenuation_factor must lie in (0, 1]")


def default_path_gain(f0_hz: float, range_m: float) -> complex:
    """Free-space amplitude ``c / (4 pi f0 r)`` with zero phase."""
    if not range_m > 0:
        raise ValueError("range_m must be positive")
    return complex(SPEED_OF_LIGHT / (4.0 * np.pi * f0_hz * range_m))


def steering_phases(geom: ArrayGeometry, plan: FrequencyPlan, site: Terminal,
                    t: float = 0.0) -> np.ndarray:
    """Per-antenna phase (radians) of the steering vector toward ``site``."""
    inc = plan.increments_hz
    return 2.0 * np.pi * (
        plan.carrier_hz * geom.index_offsets * geom.spacing_m * site.spatial_angle / SPEED_OF_LIGHT
        - inc * site.range_m / SPEED_OF_LIGHT
        + inc * t
    )


def steering_vector(geom: ArrayGeometry, plan: FrequencyPlan, site: Terminal,
                    t: float = 0.0) -> np.ndarray:
    """Unit-norm far-field steering vector of the frequency-switching array."""
    plan.validate_for(geom)
    return np.exp(1j * steering_phases(geom, plan, site, t)) / np.sqrt(geom.n_antennas)


def _channel(geom, plan, site, t):
    plan.validate_for(geom)
    gamma = geom.base_frequency_hz / plan.carrier_hz
    scale = (np.sqrt(geom.n_antennas) * gamma * site.path_gain_f0
             * np.exp(2j * np.pi * plan.carrier_hz * site.range_m / SPEED_OF_LIGHT))
    return ChannelVector(scale * steering_vector(geom, plan, site, t), min(gamma, 1.0))


def channel_bob(geom: ArrayGeometry, plan: FrequencyPlan, site: Terminal,
                t: float = 0.0) -> ChannelVector:
    """LoS channel to the legitimate user (received signal is ``h^H w``)."""
    return _channel(geom, plan, site, t)


def channel_eve(geom: ArrayGeometry, plan: FrequencyPlan, site_m: Terminal,
                t: float = 0.0) -> ChannelVector:
    """LoS channel to one eavesdropper; same model as :func:`channel_bob`."""
    return _channel(geom, plan, site_m, t)


def equivalent_positions(geom: ArrayGeometry, plan: FrequencyPlan, site: Terminal,
                         t: float = 0.0) -> np.ndarray:
    """Element positions of the virtual fixed-frequency array seen from ``site``.

    Carrier scaling stretches the array by ``f_c / f0``; each increment shifts
    its element by a range- and angle-dependent displacement.
    """
    u = site.spatial_angle
    if u == 0:
        raise DegenerateAngle("equivalent positions are undefined at u = 0")
    f0 = geom.base_frequency_hz
    inc = plan.increments_hz
    shift = (inc * site.range_m - inc * t * SPEED_OF_LIGHT) / (f0 * u)
    return plan.carrier_hz / f0 * geom.positions_m - shift
