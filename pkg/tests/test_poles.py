"""Pole search: frozen locations, independent matching residuals, and the
argument-principle completeness certificate on random traps."""

import math

import numpy as np
import pytest

from trapswitch.errors import InvalidArgumentError
from trapswitch.model import PotentialConfig
from trapswitch.poles import (
    find_bound_states,
    find_poles,
    newton_pole,
    pole_function,
    trace_iso_resonance,
    winding_number,
)

from conftest import (
    E_BOUND,
    E_RES,
    FINAL,
    GAMMA_RES,
    INITIAL,
    KAPPA_BOUND,
    K_RES,
)


def test_release_trap_resonance_frozen_location(unit):
    k = newton_pole(FINAL, unit, complex(0.31, -0.001))
    assert k is not None
    assert k.real == pytest.approx(K_RES.real, rel=1e-10)
    assert k.imag == pytest.approx(K_RES.imag, rel=1e-8)
    e = 0.5 * unit.kappa * k * k
    assert e.real == pytest.approx(E_RES, rel=1e-12)
    assert -2.0 * e.imag == pytest.approx(GAMMA_RES, rel=1e-10)


def test_bound_state_matches_transcendental_matching(unit):
    states = find_bound_states(INITIAL, unit)
    assert len(states) == 1
    pole = states[0]
    assert pole.kind == "bound"
    kap = pole.k_res.imag
    assert kap == pytest.approx(KAPPA_BOUND, rel=1e-10)
    assert pole.e_r == pytest.approx(E_BOUND, rel=1e-12)
    assert pole.gamma == 0.0 and math.isinf(pole.tau)

    # independent check: carry the log-derivative from the wall through the
    # barrier and require the evanescent tail slope -kap outside
    q = math.sqrt(2.0 * INITIAL.v_well / unit.kappa - kap * kap)
    mu = math.sqrt(2.0 * INITIAL.v_barrier / unit.kappa + kap * kap)
    f, fp = math.sin(q * INITIAL.d), q * math.cos(q * INITIAL.d)
    ch, sh = math.cosh(mu * INITIAL.b), math.sinh(mu * INITIAL.b)
    g = f * ch + fp * sh / mu
    gp = f * mu * sh + fp * ch
    assert abs(gp / g + kap) < 1e-9


def test_release_trap_has_no_bound_state(unit):
    assert find_bound_states(FINAL, unit) == []


def test_classified_pole_fields_are_consistent(unit):
    poles = find_poles(FINAL, unit, (0.0, 0.9, -0.4, 0.0))
    for p in poles:
        e = 0.5 * unit.kappa * p.k_res * p.k_res
        assert p.e_complex == pytest.approx(e, rel=1e-14)
        assert p.e_r == pytest.approx(e.real, rel=1e-14)
        assert p.gamma == pytest.approx(-2.0 * e.imag, rel=1e-12)
        assert p.tau == pytest.approx(1.0 / p.gamma, rel=1e-12)


def test_newton_pole_residual_small(unit):
    k = newton_pole(FINAL, unit, complex(0.31, -0.001))
    # compare |Omega| with its additive terms, not with zero
    from trapswitch.scattering import pole_function_terms

    t1, t2 = pole_function_terms(FINAL, unit, k)
    scale = max(abs(complex(t1)), abs(complex(t2)))
    assert abs(complex(pole_function(FINAL, unit, k))) < 1e-9 * scale


def test_find_poles_release_trap_region(unit):
    poles = find_poles(FINAL, unit, (0.0, 0.9, -0.4, 0.0))
    kinds = [p.kind for p in poles]
    assert kinds.count("resonance") == len(poles) >= 3
    lowest = min(poles, key=lambda p: p.e_r)
    assert lowest.e_r == pytest.approx(E_RES, rel=1e-12)
    assert lowest.gamma == pytest.approx(GAMMA_RES, rel=1e-10)
    # sorted unique: no duplicate roots
    ks = np.array([p.k_res for p in poles])
    assert np.min(np.abs(np.diff(ks))) > 1e-6


def test_find_poles_skips_virtual_state_on_axis(unit):
    # the preparation trap has a zero exactly on the negative imaginary axis;
    # the fourth-quadrant search must not stall on it or report it
    poles = find_poles(INITIAL, unit, (0.0, 0.9, -0.4, 0.0))
    assert all(p.k_res.real > 0.0 for p in poles)
    assert all(p.kind == "resonance" for p in poles)


def test_find_poles_counts_match_winding_on_random_traps(unit):
    rng = np.random.default_rng(42)
    rect = (0.02, 0.8, -0.3, 0.0)
    for _ in range(20):
        cfg = PotentialConfig(
            v_well=rng.uniform(30.0, 380.0),
            v_barrier=rng.uniform(60.0, 450.0),
            d=rng.uniform(3.0, 7.0),
            b=rng.uniform(4.0, 12.0),
        )
        poles = find_poles(cfg, unit, rect)
        assert len(poles) == winding_number(cfg, unit, rect)
        for p in poles:
            assert p.kind == "resonance"
            assert rect[0] <= p.k_res.real <= rect[1]
            assert rect[2] <= p.k_res.imag <= 0.0


def test_find_poles_rejects_malformed_region(unit):
    with pytest.raises(InvalidArgumentError):
        find_poles(FINAL, unit, (0.5, 0.1, -0.3, 0.0))


def test_iso_resonance_trace_stays_on_target(unit):
    target = 53.391
    curve = trace_iso_resonance(target, unit, d=5.0, b=10.0,
                                v_well_range=(50.0, 350.0), n_points=6)
    assert curve.v_well.size >= 4
    assert np.all(np.diff(curve.v_well) > 0.0)
    for vw, vb in zip(curve.v_well, curve.v_barrier):
        cfg = PotentialConfig(v_well=float(vw), v_barrier=float(vb), d=5.0, b=10.0)
        k = newton_pole(cfg, unit, complex(math.sqrt(2.0 * target / unit.kappa), -1e-4))
        assert k is not None
        e_r = 0.5 * unit.kappa * (k * k).real
        assert abs(e_r - target) <= 1e-3 * target
    # the width swings much harder than the compensating barrier depth
    assert curve.gamma.max() / curve.gamma.min() > 2.0
