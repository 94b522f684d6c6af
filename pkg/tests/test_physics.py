import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planck2d.physics import (
    CONSTANTS,
    CalibrationParams,
    NarrowbandWarning,
    PhysicsDomainError,
    ReceiverConfig,
    bose_factor,
    crossover_temperature,
    curve_spacing,
    detected_power,
    detected_power_gradient,
    eta_to_loss_db,
    loss_db_to_eta,
    planck_power,
)

from oracles import central_difference, detected_power_mp

F0 = 5.5e9
T_CR = CONSTANTS.h * F0 / (2 * CONSTANTS.k_B)

temps = st.floats(min_value=0.0, max_value=5.0, allow_nan=False)
etas = st.floats(min_value=1e-3, max_value=1.0)


def test_constants_are_si_exact():
    assert CONSTANTS.h == 6.62607015e-34
    assert CONSTANTS.k_B == 1.380649e-23


# bose_factor


def test_bose_factor_vacuum_limit():
    assert bose_factor(F0, 0.0) == 1.0


def test_bose_factor_at_crossover():
    assert bose_factor(F0, T_CR) == pytest.approx(1 / math.tanh(1.0), rel=1e-14)
    assert bose_factor(F0, T_CR) == pytest.approx(1.3130, abs=5e-5)


def test_bose_factor_100mK():
    # direct coth evaluation with the SI-exact constants
    assert bose_factor(F0, 0.1) == pytest.approx(1.1537589726265254, rel=1e-13)


def test_bose_factor_classical_limit():
    T = 50.0
    assert bose_factor(F0, T) == pytest.approx(T / T_CR, rel=1e-4)


@pytest.mark.parametrize("f,T", [(F0, -0.1), (F0, math.nan), (0.0, 0.1), (-1.0, 0.1), (F0, math.inf)])
def test_bose_factor_domain(f, T):
    with pytest.raises(PhysicsDomainError):
        bose_factor(f, T)


def test_bose_factor_no_overflow_at_millikelvin():
    # argument hf/2kT ~ 1e4; must return exactly 1 without warnings
    with np.errstate(all="raise"):
        assert bose_factor(F0, 1e-5) == 1.0


@given(st.floats(min_value=1e-4, max_value=10.0), st.floats(min_value=1e-4, max_value=10.0))
def test_bose_factor_monotone_and_bounded(T1, T2):
    lo, hi = sorted((T1, T2))
    b_lo, b_hi = bose_factor(F0, lo), bose_factor(F0, hi)
    assert b_lo >= 1.0
    assert b_hi >= b_lo


# planck_power


def test_planck_power_vacuum(cfg):
    assert planck_power(0.0, cfg) == CONSTANTS.h * cfg.f0 * cfg.B / 2
    assert planck_power(0.0, cfg) == pytest.approx(7.29e-19, rel=1e-3)


def test_planck_power_johnson_nyquist(cfg):
    ratio = planck_power(10.0, cfg) / (CONSTANTS.k_B * 10.0 * cfg.B)
    assert abs(ratio - 1) < 1e-3
    assert planck_power(10.0, cfg) == pytest.approx(5.52e-17, rel=1e-3)


def test_planck_power_132mK(cfg):
    expected = CONSTANTS.h * cfg.f0 * cfg.B / 2 / math.tanh(T_CR / 0.132)
    assert planck_power(0.132, cfg) == pytest.approx(expected, rel=1e-14)
    assert planck_power(0.132, cfg) == pytest.approx(9.57e-19, rel=1e-3)


def test_planck_power_negative_temperature(cfg):
    with pytest.raises(PhysicsDomainError):
        planck_power(-1e-3, cfg)


@pytest.mark.parametrize("T", [0.0, 0.03, 0.132, 0.5, 3.0])
def test_exact_band_integral_matches_narrowband(cfg, T):
    # B/f0 ~ 7e-5, so the narrowband form is accurate far below 1e-6
    assert planck_power(T, cfg, exact=True) == pytest.approx(planck_power(T, cfg), rel=1e-8)


def test_exact_band_integral_against_quadrature():
    with pytest.warns(NarrowbandWarning):
        cfg = ReceiverConfig(f0=5.5e9, B=2e9, Z0=50, t_int=1)
    T = 0.08
    with mp.workdps(30):
        a = mp.mpf(CONSTANTS.h) / (2 * mp.mpf(CONSTANTS.k_B) * T)
        ref = mp.quad(lambda f: mp.mpf(CONSTANTS.h) * f / 2 * mp.coth(a * f), [cfg.f0 - cfg.B / 2, cfg.f0 + cfg.B / 2])
    assert planck_power(T, cfg, exact=True, n_points=2001) == pytest.approx(float(ref), rel=1e-6)


def test_wideband_config_warns():
    with pytest.warns(NarrowbandWarning):
        ReceiverConfig(f0=5.5e9, B=2e9)


@given(st.floats(min_value=0, max_value=5), st.floats(min_value=0, max_value=5))
def test_planck_power_monotone(cfg_T1, cfg_T2):
    cfg = ReceiverConfig()
    lo, hi = sorted((cfg_T1, cfg_T2))
    assert planck_power(hi, cfg) >= planck_power(lo, cfg)


@pytest.mark.parametrize("mult", [20, 25, 50, 200, 1000])
def test_high_temperature_limit(cfg, mult):
    T = mult * T_CR
    assert abs(planck_power(T, cfg) / (CONSTANTS.k_B * T * cfg.B) - 1) < 1e-3


# crossover


def test_crossover_temperature_5p5ghz():
    assert crossover_temperature(5.5e9) == pytest.approx(0.132, abs=0.5e-3)


def test_crossover_linear_and_8ghz():
    assert crossover_temperature(2.75e9) == pytest.approx(crossover_temperature(5.5e9) / 2, rel=1e-15)
    assert crossover_temperature(2.75e9) == pytest.approx(0.066, abs=0.5e-3)
    assert crossover_temperature(8e9) == pytest.approx(0.19197, abs=1e-5)


@pytest.mark.parametrize("f0", [0.0, -5e9, math.nan])
def test_crossover_domain(f0):
    with pytest.raises(PhysicsDomainError):
        crossover_temperature(f0)


# detected power


def test_detected_power_pure_vacuum():
    cfg = ReceiverConfig(Z0=1.0)
    p = CalibrationParams(kappa=1.0, n_H=0.0, eta=1.0)
    for T_mc in (0.0, 0.1, 2.0):
        assert detected_power(p, 0.0, T_mc, cfg) == 0.5


def test_detected_power_regression_value(truth, cfg):
    # straight-line evaluation with math.tanh, computed outside the library
    assert detected_power(truth, 0.5, 0.1, cfg) == pytest.approx(0.1868259454524858, rel=1e-13)


def test_detected_power_against_mp_oracle(truth, cfg):
    rng = np.random.default_rng(3)
    for T_att, T_mc in rng.uniform(0, 2, size=(50, 2)):
        ref = detected_power_mp(truth.kappa, truth.n_H, truth.eta, T_att, T_mc, cfg.f0, cfg.Z0)
        assert detected_power(truth, T_att, T_mc, cfg) == pytest.approx(float(ref), rel=1e-13)


@given(temps, etas, etas)
def test_detected_power_eta_free_at_equal_temperatures(T, eta1, eta2):
    cfg = ReceiverConfig()
    p1 = CalibrationParams(1.15, 6.83, eta1)
    p2 = CalibrationParams(1.15, 6.83, eta2)
    assert detected_power(p1, T, T, cfg) == pytest.approx(detected_power(p2, T, T, cfg), rel=1e-12)


@given(temps, temps, st.floats(min_value=1e-3, max_value=1 - 1e-3))
def test_detected_power_exchange_symmetry(T_att, T_mc, eta):
    cfg = ReceiverConfig()
    a = detected_power(CalibrationParams(1.15, 6.83, eta), T_att, T_mc, cfg)
    b = detected_power(CalibrationParams(1.15, 6.83, 1 - eta), T_mc, T_att, cfg)
    assert a == pytest.approx(b, rel=1e-12)


@given(temps, temps, etas, st.floats(min_value=0, max_value=50))
def test_detected_power_lower_bound(T_att, T_mc, eta, n_H):
    cfg = ReceiverConfig()
    p = CalibrationParams(2.0, n_H, eta)
    assert detected_power(p, T_att, T_mc, cfg) >= p.kappa / cfg.Z0 * (0.5 + n_H) * (1 - 1e-15)


def test_detected_power_monotone(truth, cfg):
    T = np.linspace(0.01, 2.0, 200)
    assert np.all(np.diff(detected_power(truth, T, 0.1, cfg)) > 0)
    assert np.all(np.diff(detected_power(truth, 0.3, T, cfg)) > 0)


def test_gradient_matches_extended_precision_differences(cfg):
    rng = np.random.default_rng(12)
    for _ in range(200):
        k, n, e = rng.uniform(0.1, 5), rng.uniform(0, 20), rng.uniform(0.05, 1.0)
        T_att, T_mc = rng.uniform(0.02, 2.0, size=2)
        g = detected_power_gradient(CalibrationParams(k, n, e), T_att, T_mc, cfg)[0]
        args = [k, n, e, T_att, T_mc]
        for j in range(5):
            def f(x, j=j):
                a = list(args)
                a[j] = x
                return detected_power_mp(*a, cfg.f0, cfg.Z0)
            fd = float(central_difference(f, args[j]))
            assert g[j] == pytest.approx(fd, rel=1e-6, abs=1e-12 * abs(float(f(args[j]))))


# spacing


def test_spacing_zero_when_lossless(cfg):
    p = CalibrationParams(1.15, 6.83, 1.0)
    assert curve_spacing(p, 0.05, cfg) == 0.0


def test_spacing_linear_in_dT(truth, cfg):
    assert curve_spacing(truth, 0.1, cfg) == pytest.approx(2 * curve_spacing(truth, 0.05, cfg), rel=1e-15)


@pytest.mark.parametrize("T1", [0.25, 0.3, 0.35, 0.55, 0.8, 1.5])
def test_spacing_linearization_error(truth, cfg, T1):
    dT = 0.05
    exact = detected_power(truth, 0.5, T1 + dT, cfg) - detected_power(truth, 0.5, T1, cfg)
    lin = curve_spacing(truth, dT, cfg)
    rel = (lin - exact) / exact
    # leading term of coth(x) = 1/x + x/3 - ...
    series = T_CR**2 / (3 * T1 * (T1 + dT))
    assert rel == pytest.approx(series, rel=0.1)
    if T1 >= 0.55:
        assert abs(rel) < 0.02


def test_spacing_domain(truth, cfg):
    with pytest.raises(PhysicsDomainError):
        curve_spacing(truth, 0.0, cfg)


# loss conversions


def test_loss_conversions():
    assert loss_db_to_eta(0.0) == 1.0
    assert eta_to_loss_db(1.0) == 0.0
    assert loss_db_to_eta(2.79) == pytest.approx(0.5260, abs=5e-5)
    assert loss_db_to_eta(2.18) == pytest.approx(0.6053, abs=5e-5)


@given(st.floats(min_value=0, max_value=60))
def test_loss_round_trip(L):
    eta = loss_db_to_eta(L)
    assert loss_db_to_eta(eta_to_loss_db(eta)) == pytest.approx(eta, rel=1e-12)


@pytest.mark.parametrize("bad", [0.0, -0.1, 1.0000001, math.nan])
def test_eta_domain(bad):
    with pytest.raises(PhysicsDomainError):
        eta_to_loss_db(bad)


def test_negative_loss_rejected():
    with pytest.raises(PhysicsDomainError):
        loss_db_to_eta(-1.0)


@pytest.mark.parametrize("kw", [dict(kappa=0, n_H=1, eta=0.5), dict(kappa=1, n_H=-1, eta=0.5),
                                dict(kappa=1, n_H=1, eta=0.0), dict(kappa=1, n_H=1, eta=1.2)])
def test_params_validation(kw):
    with pytest.raises(PhysicsDomainError):
        CalibrationParams(**kw)


def test_receiver_validation():
    with pytest.raises(PhysicsDomainError):
        ReceiverConfig(B=0)
