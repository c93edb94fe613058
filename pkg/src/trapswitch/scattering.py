"""Stationary scattering states of the hard-wall well-barrier potential.

With the wall at x = 0, the scattering ansatz at wave number k > 0 is

    psi_k(x) = (1/sqrt(2 pi)) * [ C1 e^{iqx}  + C2 e^{-iqx}  ]   0 <= x <= d
             = (1/sqrt(2 pi)) * [ C3 e^{iq'x} + C4 e^{-iq'x} ]   d <= x <= d+b
             = (1/sqrt(2 pi)) * [ e^{-ikx} - S(k) e^{ikx} ]      x >= d+b

with q = sqrt(k^2 + 2 v_well/kappa) and q' = sqrt(k^2 - 2 v_barrier/kappa).
Matching the wall (C2 = -C1) and the two interior joints gives, in terms of

    J(k) = d sinc(qd) cos(q'b) + b cos(qd) sinc(q'b)        (sinc z = sin z / z)
    R(k) = cos(qd) cos(q'b) - q'^2 d b sinc(qd) sinc(q'b)

the closed forms

    S(k)    = -e^{-2ikL} (kJ - iR) / (kJ + iR),   L = d + b
    Omega(k) = kJ + iR                             (pole condition, see poles.py)

J and R depend on q and q' only through their squares, so no square-root
branch can affect any observable; both are entire in k, which also covers
k at a channel threshold (q or q' = 0) through the sinc limits.  For real k
both J and R are real and |S| = 1 identically.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, RefinementError
from .model import PotentialConfig, UnitSystem

_TWO_PI_SQRT = math.sqrt(2.0 * math.pi)


def cardinal_sine(z):
    """sin(z)/z for complex arrays, with the series used near z = 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    out = np.where(small, 1.0 - z * z / 6.0 + z**4 / 120.0, np.sin(zs) / zs)
    return out


@dataclass(frozen=True)
class ChannelWavenumbers:
    """Exterior wave number k and the interior channel values q, q_prime.

    q and q_prime use the principal square root; every quantity derived
    from them downstream is even in both, so the branch is a convention
    with no physical content.
    """

    k: complex
    q: complex
    q_prime: complex


def channel_wavenumbers(config: PotentialConfig, unit: UnitSystem, k) -> ChannelWavenumbers:
    k = complex(k)
    q = cmath.sqrt(k * k + 2.0 * config.v_well / unit.kappa)
    q_prime = cmath.sqrt(k * k - 2.0 * config.v_barrier / unit.kappa)
    return ChannelWavenumbers(k=k, q=q, q_prime=q_prime)


def _interior_blocks(config: PotentialConfig, unit: UnitSystem, k):
    """Return (q2, p2, cw, sw, cb, sb) with sw = sin(qd)/q, sb = sin(q'b)/q'."""
    k = np.asarray(k, dtype=complex)
    q2 = k * k + 2.0 * config.v_well / unit.kappa
    p2 = k * k - 2.0 * config.v_barrier / unit.kappa
    q = np.sqrt(q2)
    p = np.sqrt(p2)
    cw = np.cos(q * config.d)
    sw = config.d * cardinal_sine(q * config.d)
    cb = np.cos(p * config.b)
    sb = config.b * cardinal_sine(p * config.b)
    return q2, p2, cw, sw, cb, sb


def pole_function_terms(config: PotentialConfig, unit: UnitSystem, k):
    """The two additive terms (k J, i R) whose sum vanishes at an S-matrix pole."""
    k = np.asarray(k, dtype=complex)
    _, p2, cw, sw, cb, sb = _interior_blocks(config, unit, k)
    J = sw * cb + cw * sb
    R = cw * cb - p2 * sw * sb
    return k * J, 1j * R


def pole_function_scale(config: PotentialConfig, unit: UnitSystem, k):
    """Cancellation mass of the pole function: sum of |.| of its four products.

    Near narrow resonances both k J and R vanish together, so the terms
    themselves understate the rounding floor; this bound does not.
    """
    k = np.asarray(k, dtype=complex)
    _, p2, cw, sw, cb, sb = _interior_blocks(config, unit, k)
    return np.abs(k) * (np.abs(sw * cb) + np.abs(cw * sb)) + np.abs(cw * cb) + np.abs(
        p2 * sw * sb
    )


def s_matrix(config: PotentialConfig, unit: UnitSystem, k):
    """S(k) for real k > 0 (arrays allowed); unitary by construction."""
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0.0):
        raise InvalidArgumentError("s_matrix requires k > 0")
    t1, t2 = pole_function_terms(config, unit, k)
    length = config.d + config.b
    return -np.exp(-2j * k * length) * (t1 - t2) / (t1 + t2)


@dataclass(frozen=True)
class ScatteringSolution:
    """Region coefficients, S-matrix value and phase shift at one wave number.

    delta is the principal phase, arg(S)/2 in (-pi/2, pi/2]; continuous
    curves come from phase_shift_curve.  The coefficients assume the
    principal branch of q and q_prime recorded in `channels`; the assembled
    wave function itself is branch independent.
    """

    channels: ChannelWavenumbers
    c1: complex
    c2: complex
    c3: complex
    c4: complex
    s: complex
    delta: float


def solve_scattering(config: PotentialConfig, unit: UnitSystem, k: float) -> ScatteringSolution:
    if not (np.isreal(k) and k > 0.0):
        raise InvalidArgumentError(f"solve_scattering requires real k > 0, got {k}")
    k = float(k)
    ch = channel_wavenumbers(config, unit, k)
    t1, t2 = pole_function_terms(config, unit, k)
    t1, t2 = complex(t1), complex(t2)
    length = config.d + config.b
    s = -cmath.exp(-2j * k * length) * (t1 - t2) / (t1 + t2)
    delta = 0.5 * cmath.phase(s)

    # Interior amplitude: psi_I = A sin(qx) with A q Omega = 2 k e^{-ikL}.
    q, p = ch.q, ch.q_prime
    amp_q = 2.0 * k * cmath.exp(-1j * k * length) / (t1 + t2)  # A*q, branch free
    a = amp_q / q
    c1 = a / 2j
    c2 = -c1
    half = 0.5 * a
    sin_qd, cos_qd = cmath.sin(q * config.d), cmath.cos(q * config.d)
    c3 = half * (sin_qd - 1j * (q / p) * cos_qd) * cmath.exp(-1j * p * config.d)
    c4 = half * (sin_qd + 1j * (q / p) * cos_qd) * cmath.exp(1j * p * config.d)
    return ScatteringSolution(channels=ch, c1=c1, c2=c2, c3=c3, c4=c4, s=s, delta=delta)


def evaluate_scattering_state(
    config: PotentialConfig, unit: UnitSystem, k: float, x: np.ndarray
) -> np.ndarray:
    """psi_k on an array of coordinates, delta-normalized in k.

    Evaluated region-wise from the wall outward via value/derivative
    continuation, which stays finite at channel thresholds and does not
    reference any square-root branch.
    """
    if not (k > 0.0):
        raise InvalidArgumentError("k must be positive")
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    d, b = config.d, config.b
    length = d + b

    q2, p2, cw, sw, cb, sb = _interior_blocks(config, unit, k)
    t1, t2 = pole_function_terms(config, unit, k)
    amp_q = 2.0 * k * np.exp(-1j * k * length) / (t1 + t2)  # A*q
    s = -np.exp(-2j * k * length) * (t1 - t2) / (t1 + t2)
    pref = 1.0 / _TWO_PI_SQRT

    q = np.sqrt(np.asarray(q2, dtype=complex))
    inner = (x > 0.0) & (x <= d)
    out[inner] = pref * amp_q * x[inner] * cardinal_sine(q * x[inner])

    psi_d = pref * amp_q * sw          # value at x = d
    dpsi_d = pref * amp_q * cw         # derivative at x = d
    mid = (x > d) & (x <= length)
    u = x[mid] - d
    p = np.sqrt(np.asarray(p2, dtype=complex))
    out[mid] = psi_d * np.cos(p * u) + dpsi_d * u * cardinal_sine(p * u)

    outer = x > length
    out[outer] = pref * (np.exp(-1j * k * x[outer]) - s * np.exp(1j * k * x[outer]))
    return out


def _wrap_half_pi(diff: float) -> float:
    """Reduce a phase-shift difference into (-pi/2, pi/2]."""
    return -((-diff + 0.5 * math.pi) % math.pi - 0.5 * math.pi)


def phase_shift_curve(
    config: PotentialConfig,
    unit: UnitSystem,
    k_grid: np.ndarray,
    max_depth: int = 26,
) -> np.ndarray:
    """Continuous phase shift delta(k) on an increasing grid of real k > 0.

    S = e^{2 i delta} defines delta modulo pi; the curve is anchored at the
    principal value of the first node and stitched with pi jumps removed.
    Each interval is checked by midpoint refinement: the two half-steps must
    agree with the direct step, otherwise the interval is subdivided, up to
    max_depth, after which a refinement error names the offending interval.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    if k_grid.ndim != 1 or k_grid.size < 2:
        raise InvalidArgumentError("k_grid must be a 1-d array with >= 2 nodes")
    if np.any(k_grid <= 0.0) or np.any(np.diff(k_grid) <= 0.0):
        raise InvalidArgumentError("k_grid must be strictly increasing and positive")

    def raw(k):
        return 0.5 * cmath.phase(complex(s_matrix(config, unit, np.array([k]))[0]))

    def step(ka, da, kb, db, depth):
        """Continuous increment of delta from ka to kb (raw values da, db)."""
        direct = _wrap_half_pi(db - da)
        if depth >= max_depth:
            raise RefinementError(
                f"phase unwrap did not settle on [{ka:.9g}, {kb:.9g}]",
                interval=(ka, kb),
            )
        km = 0.5 * (ka + kb)
        dm = raw(km)
        left = _wrap_half_pi(dm - da)
        right = _wrap_half_pi(db - dm)
        if abs((left + right) - direct) < 1e-9:
            return direct
        return step(ka, da, km, dm, depth + 1) + step(km, dm, kb, db, depth + 1)

    raw_vals = [raw(k) for k in k_grid]
    delta = np.empty_like(k_grid)
    delta[0] = raw_vals[0]
    for i in range(k_grid.size - 1):
        inc = step(k_grid[i], raw_vals[i], k_grid[i + 1], raw_vals[i + 1], 0)
        delta[i + 1] = delta[i] + inc
    return delta


def delay_time(config: PotentialConfig, unit: UnitSystem, k: float) -> float:
    """Wigner delay 2 hbar d delta/dE = (2/(kappa k)) d delta/dk at real k > 0.

    Central difference with relative step 1e-5 in k plus one Richardson
    extrapolation; the four phase evaluations are locally re-branched so the
    mod-pi ambiguity of delta cannot enter the derivative.
    """
    if not (k > 0.0):
        raise InvalidArgumentError("delay_time requires k > 0")
    h = 1e-5 * k

    def raw(kk):
        return 0.5 * cmath.phase(complex(s_matrix(config, unit, np.array([kk]))[0]))

    def slope(hh):
        return _wrap_half_pi(raw(k + hh) - raw(k - hh)) / (2.0 * hh)

    d1 = slope(h)
    d2 = slope(0.5 * h)
    dddk = (4.0 * d2 - d1) / 3.0
    return 2.0 / (unit.kappa * k) * dddk
