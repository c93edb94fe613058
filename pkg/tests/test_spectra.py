"""Energy-domain analysis: grids, reference profiles, fits, deviations."""

import math

import numpy as np
import pytest

from trapswitch.errors import (
    CompletenessViolationError,
    ContainmentError,
    FitFailureError,
    InsufficientDataError,
    InvalidArgumentError,
    WindowError,
)
from trapswitch.groundstate import WavefunctionGrid, ground_state
from trapswitch.poles import find_poles
from trapswitch.propagate import DecayRecord
from trapswitch.spectra import (
    EnergyDistribution,
    distribution_median,
    energy_distribution,
    energy_grid,
    exponential_deviation,
    fit_exponential_decay,
    fit_lorentzian,
    l1_difference,
    lorentzian_deviation,
    lorentzian_reference,
    lorentzian_window_weight,
    lowest_resonance,
)

from conftest import E_RES, FINAL, GAMMA_RES, INITIAL, TAU_RES


@pytest.fixture(scope="module")
def res(unit):
    return lowest_resonance(FINAL, unit)


def test_lowest_resonance_matches_frozen_pole(res):
    assert res.e_r == pytest.approx(E_RES, rel=1e-12)
    assert res.gamma == pytest.approx(GAMMA_RES, rel=1e-10)
    assert res.tau == pytest.approx(TAU_RES, rel=1e-10)


def test_energy_grid_dense_near_resonance(res):
    grid = energy_grid(res.e_r, res.gamma, 3000.0, 2000)
    assert np.all(np.diff(grid) > 0.0)
    assert grid[0] == pytest.approx(0.5)
    assert grid[-1] == pytest.approx(3000.0)
    d = np.diff(grid)
    near = (grid[:-1] > res.e_r - 5.0 * res.gamma) & (grid[:-1] < res.e_r + 5.0 * res.gamma)
    assert d[near].max() <= res.gamma / 50.0
    assert grid.size >= 2000


def test_lorentzian_reference_peak_and_weight(res):
    peak = lorentzian_reference(res, np.array([res.e_r]))[0]
    assert peak == pytest.approx(2.0 / (math.pi * res.gamma), rel=1e-12)
    grid = energy_grid(res.e_r, res.gamma, 1000.0, 2000)
    ref = lorentzian_reference(res, grid)
    assert ref.max() == pytest.approx(peak, rel=1e-3)
    lo, hi = res.e_r - 10.0 * res.gamma, res.e_r + 10.0 * res.gamma
    w = lorentzian_window_weight(res, lo, hi)
    assert w == pytest.approx(2.0 / math.pi * math.atan(20.0), rel=1e-12)
    mask = (grid >= lo) & (grid <= hi)
    assert np.trapezoid(ref[mask], grid[mask]) == pytest.approx(w, rel=1e-3)


def test_lorentzian_fit_exact_round_trip():
    e = np.linspace(100.0, 170.0, 400)
    er, g = 134.511, 2.433
    a = 2.0 / (math.pi * g)  # unit-area amplitude
    y = a * (g / 2.0) ** 2 / ((e - er) ** 2 + (g / 2.0) ** 2)
    fit = fit_lorentzian(e, y)
    assert fit.e_r == pytest.approx(er, abs=1e-8)
    assert fit.gamma == pytest.approx(g, abs=1e-8)
    assert fit.amplitude == pytest.approx(a, abs=1e-10)
    assert fit.offset == 0.0
    # the sample is itself the unit-area profile, so the shape deviation
    # against the fitted reference vanishes
    assert fit.deviation == pytest.approx(0.0, abs=1e-8)

    fit_c = fit_lorentzian(e, y + 0.013, with_offset=True)
    assert fit_c.gamma == pytest.approx(g, abs=1e-7)
    assert fit_c.offset == pytest.approx(0.013, abs=1e-9)


def test_lorentzian_fit_window_and_data_guards():
    e = np.linspace(0.0, 10.0, 50)
    y = 1.0 / ((e - 9.8) ** 2 + 0.25)
    with pytest.raises(WindowError):
        fit_lorentzian(e, y)  # peak pinned to the window edge
    with pytest.raises(InvalidArgumentError):
        fit_lorentzian(e[:6], y[:6])
    centered = 1.0 / ((e - 5.0) ** 2 + 0.25)
    fit = fit_lorentzian(e, centered)
    assert fit.e_r == pytest.approx(5.0, abs=1e-8)


def test_exponential_fit_round_trip_and_guards():
    t = np.linspace(0.0, 2.5, 1000)
    rec = DecayRecord(t, 0.9 * np.exp(-t / 0.411), np.ones_like(t))
    tau, quality, (intercept, slope) = fit_exponential_decay(rec, 0.5)
    assert tau == pytest.approx(0.411, rel=1e-12)
    assert quality < 1e-10
    assert slope == pytest.approx(-1.0 / 0.411, rel=1e-12)
    assert math.exp(intercept) == pytest.approx(0.9, rel=1e-10)

    short = DecayRecord(t[:30], np.exp(-t[:30] / 0.411), np.ones(30))
    with pytest.raises(InsufficientDataError):
        fit_exponential_decay(short, 0.0)
    rising = DecayRecord(t, np.exp(+t / 5.0), np.ones_like(t))
    with pytest.raises(FitFailureError):
        fit_exponential_decay(rising, 0.0)


def test_exponential_deviation_flags_early_history(res):
    # long enough that the late-time window itself spans several lifetimes
    t = np.linspace(0.0, 2.3, 800)
    clean = DecayRecord(t, np.exp(-t / res.tau), np.ones_like(t))
    assert exponential_deviation(clean, res.tau, t_min_late=0.8) < 1e-10
    bent = np.exp(-t / res.tau) * (1.0 + 0.3 * np.exp(-t / 0.05))
    dev = exponential_deviation(DecayRecord(t, bent, np.ones_like(t)), res.tau,
                                t_min_late=0.8)
    assert dev == pytest.approx(math.log(1.3), rel=0.05)


def test_distribution_helpers(res):
    grid = energy_grid(res.e_r, res.gamma, 1000.0, 1500)
    p = lorentzian_reference(res, grid)
    dist = EnergyDistribution(energies=grid, p=p,
                              total=float(np.trapezoid(p, grid)),
                              projection_time=0.0)
    assert distribution_median(dist) == pytest.approx(res.e_r, abs=0.05)
    assert l1_difference(dist, dist) == 0.0
    assert lorentzian_deviation(dist, res) == pytest.approx(0.0, abs=1e-12)

    shifted = EnergyDistribution(energies=grid,
                                 p=np.roll(p, 25), total=dist.total,
                                 projection_time=0.0)
    assert lorentzian_deviation(shifted, res) > 0.1

    other = EnergyDistribution(energies=grid[:-1], p=p[:-1], total=dist.total,
                               projection_time=0.0)
    with pytest.raises(InvalidArgumentError):
        l1_difference(dist, other)
    with pytest.raises(InvalidArgumentError):
        EnergyDistribution(energies=grid[::-1], p=p, total=1.0,
                           projection_time=0.0)


def test_energy_distribution_requires_unbound_final(unit, res):
    phi, _ = ground_state(INITIAL, unit, dx=0.05)
    grid = energy_grid(res.e_r, res.gamma, 400.0, 800)
    with pytest.raises(CompletenessViolationError):
        # projecting onto the trap that still binds the state drops the
        # bound component from the closure
        energy_distribution(phi, INITIAL, unit, grid)


def test_energy_distribution_flags_edge_weight(unit, res):
    grid = energy_grid(res.e_r, res.gamma, 400.0, 800)
    x = 0.05 * np.arange(2001)
    bump = np.exp(-0.5 * ((x - 95.0) / 2.0) ** 2) * np.exp(1j * 0.3 * x)
    bump[0] = 0.0
    state = WavefunctionGrid(0.0, 0.05, bump).normalized()
    with pytest.raises(ContainmentError):
        energy_distribution(state, FINAL, unit, grid)
    # same state, explicit opt-out
    energy_distribution(state, FINAL, unit, grid, contain_rtol=1.0)


def test_sudden_projection_unit_total(unit, res):
    phi, _ = ground_state(INITIAL, unit, dx=0.05)
    wide = energy_grid(res.e_r, res.gamma, 3000.0, 2600)
    dist = energy_distribution(phi, FINAL, unit, wide)
    assert abs(dist.total - 1.0) < 1e-3
    assert dist.p[np.argmax(dist.p)] == dist.p.max()
    assert abs(wide[np.argmax(dist.p)] - res.e_r) < 0.5 * res.gamma
