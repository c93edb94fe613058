"""Unit system, trap geometry, and the time profile of the potential switch.

Internal units set hbar = 1: lengths are micrometers, times are seconds,
energies are hbar per second (numerically 1/s).  The single surviving
constant is kappa = hbar/m in um^2/s, so a wave number k (1/um) carries
kinetic energy (kappa/2) k^2.

The potential is a hard wall at x <= 0, a square well of depth v_well on
(0, d], a square barrier of height v_barrier on (d, d+b], and zero beyond.
A switch replaces one such configuration by another with the exponential
profile V(t, x) = V_init(x) + (1 - exp(-t/T)) * (V_final(x) - V_init(x));
T = 0 means a sudden switch (final values for every t > 0).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

HBAR_SI = 1.054571817e-34            # J s, CODATA 2018
ATOMIC_MASS_SI = 1.66053906660e-27   # kg, CODATA 2018
SODIUM23_MASS_AMU = 22.98976928

_M2_PER_S_TO_UM2_PER_S = 1e12


@dataclass(frozen=True)
class UnitSystem:
    """hbar = 1 working units; kappa = hbar/m in um^2/s."""

    kappa: float
    mass_amu: float

    def __post_init__(self):
        if not (self.kappa > 0.0 and math.isfinite(self.kappa)):
            raise InvalidArgumentError(f"kappa must be positive, got {self.kappa}")
        if not (self.mass_amu > 0.0 and math.isfinite(self.mass_amu)):
            raise InvalidArgumentError(f"mass_amu must be positive, got {self.mass_amu}")

    def consistency_error(self) -> float:
        """Relative deviation of kappa from hbar/(mass_amu * u)."""
        ref = HBAR_SI / (self.mass_amu * ATOMIC_MASS_SI) * _M2_PER_S_TO_UM2_PER_S
        return abs(self.kappa - ref) / ref


def make_unit_system(mass_amu: float = SODIUM23_MASS_AMU) -> UnitSystem:
    if not (mass_amu > 0.0 and math.isfinite(mass_amu)):
        raise InvalidArgumentError(f"mass_amu must be positive, got {mass_amu}")
    kappa = HBAR_SI / (mass_amu * ATOMIC_MASS_SI) * _M2_PER_S_TO_UM2_PER_S
    return UnitSystem(kappa=kappa, mass_amu=mass_amu)


def kinetic_energy(unit: UnitSystem, k):
    """Energy of wave number k, (kappa/2) k^2; accepts arrays and complex k."""
    k = np.asarray(k)
    return 0.5 * unit.kappa * k * k


def wavenumber_of_energy(unit: UnitSystem, energy):
    """Positive wave number for energy > 0 (complex input allowed)."""
    return np.sqrt(np.asarray(energy) * (2.0 / unit.kappa))


@dataclass(frozen=True)
class PotentialConfig:
    """Hard wall + square well (depth v_well) + square barrier (height v_barrier)."""

    v_well: float
    v_barrier: float
    d: float
    b: float

    def __post_init__(self):
        if not (self.d > 0.0 and math.isfinite(self.d)):
            raise InvalidArgumentError(f"well width d must be positive, got {self.d}")
        if not (self.b >= 0.0 and math.isfinite(self.b)):
            raise InvalidArgumentError(f"barrier width b must be >= 0, got {self.b}")
        for name in ("v_well", "v_barrier"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise InvalidArgumentError(f"{name} must be >= 0, got {v}")

    @property
    def outer_edge(self) -> float:
        return self.d + self.b

    def value_at(self, x: float) -> float:
        if x <= 0.0:
            return math.inf
        if x <= self.d:
            return -self.v_well
        if x <= self.d + self.b:
            return self.v_barrier
        return 0.0

    def sample(self, x: np.ndarray) -> np.ndarray:
        """Vectorized value_at; x <= 0 maps to +inf."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[x <= self.d] = -self.v_well
        out[(x > self.d) & (x <= self.d + self.b)] = self.v_barrier
        out[x <= 0.0] = np.inf
        return out


@dataclass(frozen=True)
class SwitchingSchedule:
    """Exponential interpolation between two trap configurations.

    t_switch is the time constant T; T = 0 is the tagged sudden case, for
    which the potential equals the final configuration exactly for any t > 0.
    """

    initial: PotentialConfig
    final: PotentialConfig
    t_switch: float

    def __post_init__(self):
        if not (self.t_switch >= 0.0 and math.isfinite(self.t_switch)):
            raise InvalidArgumentError(f"t_switch must be >= 0, got {self.t_switch}")

    def weight(self, t: float) -> float:
        """Mixing weight w(t) in V = V_init + w (V_final - V_init)."""
        if t < 0.0:
            raise InvalidArgumentError(f"t must be >= 0, got {t}")
        if self.t_switch == 0.0:
            return 0.0 if t == 0.0 else 1.0
        return -math.expm1(-t / self.t_switch)

    def settle_time(self, residual: float) -> float:
        """Time after which |V(t,x) - V_final(x)| < residual everywhere."""
        if not (residual > 0.0):
            raise InvalidArgumentError("residual must be positive")
        dv = max(
            abs(self.final.v_well - self.initial.v_well),
            abs(self.final.v_barrier - self.initial.v_barrier),
        )
        if self.t_switch == 0.0 or dv <= residual:
            return 0.0
        return self.t_switch * math.log(dv / residual)


def potential_at(schedule: SwitchingSchedule, t: float, x: float) -> float:
    """Pointwise potential during the switch; +inf inside the hard wall."""
    w = schedule.weight(t)
    vi = schedule.initial.value_at(x)
    if math.isinf(vi):
        return math.inf
    vf = schedule.final.value_at(x)
    return vi + w * (vf - vi)


def sample_potential(schedule: SwitchingSchedule, t: float, x: np.ndarray) -> np.ndarray:
    """Vectorized potential_at over a coordinate array."""
    w = schedule.weight(t)
    x = np.asarray(x, dtype=float)
    wall = x <= 0.0
    xs = np.where(wall, 1.0, x)  # keep the blend finite, then restore the wall
    vi = schedule.initial.sample(xs)
    vf = schedule.final.sample(xs)
    out = vi + w * (vf - vi)
    out[wall] = np.inf
    return out
