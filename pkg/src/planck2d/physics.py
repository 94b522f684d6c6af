"""Closed-form radiometric models for thermal microwave noise.

All temperatures are in kelvin and frequencies in hertz. The photon number
conversion factor ``kappa`` is carried in whatever power-equivalent unit
the caller uses (``(mV)^2`` by default); detected powers come out in
``kappa`` units divided by ohms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from . import kernels

__all__ = [
    "PhysicalConstants",
    "CONSTANTS",
    "ReceiverConfig",
    "CalibrationParams",
    "PhysicsDomainError",
    "NarrowbandWarning",
    "bose_factor",
    "bose_factor_dT",
    "planck_power",
    "crossover_temperature",
    "detected_power",
    "detected_power_gradient",
    "curve_spacing",
    "loss_db_to_eta",
    "eta_to_loss_db",
]


class PhysicsDomainError(ValueError):
    """Raised for non-finite or out-of-domain physical inputs."""


class NarrowbandWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PhysicalConstants:
    # CODATA 2018, exact by SI definition
    h: float = 6.62607015e-34
    k_B: float = 1.380649e-23


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class ReceiverConfig:
    """Detection chain context.

    Attributes
    ----------
    f0 : float
        Carrier frequency in Hz.
    B : float
        Full detection bandwidth in Hz.
    Z0 : float
        Characteristic impedance in ohms.
    t_int : float
        Integration time per power point in seconds.
    """

    f0: float = 5.5e9
    B: float = 400e3
    Z0: float = 50.0
    t_int: float = 1.0

    def __post_init__(self):
        for name in ("f0", "B", "Z0", "t_int"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise PhysicsDomainError(f"{name} must be positive and finite, got {value!r}")
        if self.B / self.f0 >= 0.01:
            warnings.warn(
                f"B/f0 = {self.B / self.f0:.3g} is not narrowband; the coth(h f0 / 2 kT) "
                "approximation degrades (use planck_power(..., exact=True))",
                NarrowbandWarning,
                stacklevel=3,
            )

    @property
    def crossover_temperature(self) -> float:
        return crossover_temperature(self.f0)

    def to_dict(self) -> dict:
        return {"f0": self.f0, "B": self.B, "Z0": self.Z0, "t_int": self.t_int}


@dataclass(frozen=True)
class CalibrationParams:
    """The fitted triple: conversion factor, amplifier noise photons, transmissivity."""

    kappa: float
    n_H: float
    eta: float

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise PhysicsDomainError(f"kappa must be > 0, got {self.kappa!r}")
        if not (math.isfinite(self.n_H) and self.n_H >= 0):
            raise PhysicsDomainError(f"n_H must be >= 0, got {self.n_H!r}")
        if not (math.isfinite(self.eta) and 0 < self.eta <= 1):
            raise PhysicsDomainError(f"eta must lie in (0, 1], got {self.eta!r}")

    @classmethod
    def from_loss_db(cls, kappa: float, n_H: float, loss_db: float) -> "CalibrationParams":
        return cls(kappa=kappa, n_H=n_H, eta=loss_db_to_eta(loss_db))

    @property
    def loss_db(self) -> float:
        return eta_to_loss_db(self.eta)

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "n_H": self.n_H, "eta": self.eta, "loss_dB": self.loss_db}


def _check_temperature(T, name="T"):
    arr = np.asarray(T, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise PhysicsDomainError(f"{name} must be finite")
    if np.any(arr < 0):
        raise PhysicsDomainError(f"{name} must be >= 0")
    return arr


def _check_frequency(f, name="f"):
    arr = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise PhysicsDomainError(f"{name} must be positive and finite")
    return arr


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def crossover_temperature(f0: float) -> float:
    """Temperature ``h f0 / 2 k_B`` separating vacuum- and thermal-dominated noise."""
    f0 = _check_frequency(f0, "f0")
    return _scalar_or_array(CONSTANTS.h * f0 / (2 * CONSTANTS.k_B))


def bose_factor(f, T):
    """``coth(h f / 2 k_B T) = 2 n(f, T) + 1``; exact limit 1 at ``T = 0``."""
    f = _check_frequency(f)
    T = _check_temperature(T)
    a = CONSTANTS.h * f / (2 * CONSTANTS.k_B)
    a, T = np.broadcast_arrays(a, T)
    return _scalar_or_array(kernels.coth_ratio(a, T))


def bose_factor_dT(f, T):
    """Derivative of :func:`bose_factor` with respect to temperature."""
    f = _check_frequency(f)
    T = _check_temperature(T)
    a = CONSTANTS.h * f / (2 * CONSTANTS.k_B)
    a, T = np.broadcast_arrays(a, T)
    return _scalar_or_array(kernels.coth_ratio_dT(a, T))


def planck_power(T_att, cfg: ReceiverConfig, exact: bool = False, n_points: int = 201):
    """Thermal noise power in watts emitted into the detection band.

    The default is the narrowband form ``(h f0 B / 2) coth(h f0 / 2 k_B T)``.
    With ``exact=True`` the integrand ``(h f / 2) coth(h f / 2 k_B T)`` is
    integrated over ``[f0 - B/2, f0 + B/2]`` by the trapezoid rule.
    """
    T = _check_temperature(T_att, "T_att")
    if not exact:
        return _scalar_or_array(CONSTANTS.h * cfg.f0 * cfg.B / 2 * bose_factor(cfg.f0, T))
    if n_points < 101:
        raise ValueError("exact band integral needs at least 101 quadrature points")
    f = np.linspace(cfg.f0 - cfg.B / 2, cfg.f0 + cfg.B / 2, n_points)
    integrand = CONSTANTS.h * f / 2 * np.asarray(bose_factor(f, T[..., None]))
    return _scalar_or_array(trapezoid(integrand, f, axis=-1))


def detected_power(p: CalibrationParams, T_att, T_mc, cfg: ReceiverConfig):
    """Power at the end of the amplification chain under the beam-splitter loss model.

    ``P = (kappa/Z0) [ eta/2 coth(hf0/2kT_att) + (1-eta)/2 coth(hf0/2kT_mc) + n_H ]``
    """
    T_att = _check_temperature(T_att, "T_att")
    T_mc = _check_temperature(T_mc, "T_mc")
    T_att, T_mc = np.broadcast_arrays(T_att, T_mc)
    model = kernels.model(
        p.kappa, p.n_H, p.eta, T_att.ravel(), T_mc.ravel(), crossover_temperature(cfg.f0), 1.0 / cfg.Z0
    )
    return _scalar_or_array(model.reshape(T_att.shape))


def detected_power_gradient(p: CalibrationParams, T_att, T_mc, cfg: ReceiverConfig) -> np.ndarray:
    """Analytic partials of :func:`detected_power`.

    Returns an array of shape ``(n, 5)`` with columns
    ``(d/dkappa, d/dn_H, d/deta, d/dT_att, d/dT_mc)``.
    """
    T_att = np.atleast_1d(_check_temperature(T_att, "T_att"))
    T_mc = np.atleast_1d(_check_temperature(T_mc, "T_mc"))
    T_att, T_mc = np.broadcast_arrays(T_att, T_mc)
    _, jac = kernels.model_and_jacobian(
        p.kappa, p.n_H, p.eta, T_att.ravel(), T_mc.ravel(), crossover_temperature(cfg.f0), 1.0 / cfg.Z0
    )
    return jac


def curve_spacing(p: CalibrationParams, dT, cfg: ReceiverConfig):
    """Linearized vertical offset between Planck curves whose bath temperatures differ by ``dT``.

    Valid only when both bath temperatures are well above the cross-over
    temperature; :func:`detected_power` differences are exact.
    """
    dT = np.asarray(dT, dtype=float)
    if not np.all(np.isfinite(dT)) or np.any(dT <= 0):
        raise PhysicsDomainError("dT must be positive and finite")
    h, k = CONSTANTS.h, CONSTANTS.k_B
    return _scalar_or_array(p.kappa / cfg.Z0 * (1 - p.eta) * k * dT / (h * cfg.f0))


def loss_db_to_eta(loss_db):
    loss_db = np.asarray(loss_db, dtype=float)
    if not np.all(np.isfinite(loss_db)) or np.any(loss_db < 0):
        raise PhysicsDomainError("loss in dB must be finite and >= 0")
    return _scalar_or_array(10.0 ** (-loss_db / 10.0))


def eta_to_loss_db(eta):
    eta = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(eta)) or np.any(eta <= 0) or np.any(eta > 1):
        raise PhysicsDomainError("transmissivity must lie in (0, 1]")
    # 0.0 rather than -0.0 at eta == 1
    return _scalar_or_array(-10.0 * np.log10(eta) + 0.0)
