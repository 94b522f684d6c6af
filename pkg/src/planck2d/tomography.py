"""Effect of photon-number miscalibration on reconstructed single-mode Gaussian states.

Quadrature variances are in units where the vacuum variance is 0.25. Only
states whose squeezed and anti-squeezed quadratures align with the measured
quadratures (diagonal covariance) are handled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .physics import CalibrationParams, ReceiverConfig

__all__ = [
    "VACUUM_VARIANCE",
    "GaussianStateSummary",
    "CalibrationPair",
    "UnphysicalStateError",
    "squeezing_level",
    "variance_from_squeezing",
    "purity",
    "state_from_squeezing",
    "miscalibrate",
    "vacuum_anchored_pair",
    "forward_moment",
    "reconstruct_variance",
    "ANCHOR_NOTE",
]

VACUUM_VARIANCE = 0.25

ANCHOR_NOTE = (
    "Miscalibration map assumes both calibrations reproduce the same measured vacuum moment "
    "(their noise offsets kappa*(1/2 + n_H) agree), so each variance maps as "
    "var' = r*var + 0.25*(1 - r) with r = kappa_true/kappa_assumed."
)


class UnphysicalStateError(ValueError):
    pass


def _positive(x, name):
    if not (math.isfinite(x) and x > 0):
        raise ValueError(f"{name} must be positive and finite, got {x!r}")


def squeezing_level(var_s: float) -> float:
    """Squeezing in dB, ``-10 log10(var_s / 0.25)``; positive below vacuum."""
    _positive(var_s, "variance")
    return -10.0 * math.log10(var_s / VACUUM_VARIANCE)


def variance_from_squeezing(S_db: float) -> float:
    return VACUUM_VARIANCE * 10.0 ** (-S_db / 10.0)


def purity(var_s: float, var_a: float) -> float:
    _positive(var_s, "var_s")
    _positive(var_a, "var_a")
    return VACUUM_VARIANCE / math.sqrt(var_s * var_a)


@dataclass(frozen=True)
class GaussianStateSummary:
    var_s: float
    var_a: float

    def __post_init__(self):
        _positive(self.var_s, "var_s")
        _positive(self.var_a, "var_a")
        if self.var_s > self.var_a:
            raise ValueError("var_s must not exceed var_a (squeezed quadrature is the smaller one)")

    @property
    def S(self) -> float:
        return squeezing_level(self.var_s)

    @property
    def A(self) -> float:
        """Anti-squeezing in dB (positive above vacuum)."""
        return -squeezing_level(self.var_a)

    @property
    def mu(self) -> float:
        return purity(self.var_s, self.var_a)

    @property
    def physical(self) -> bool:
        return self.var_s * self.var_a >= VACUUM_VARIANCE**2 * (1 - 1e-12)

    def to_dict(self) -> dict:
        return {"var_s": self.var_s, "var_a": self.var_a, "S_dB": self.S, "A_dB": self.A,
                "mu": self.mu, "physical": self.physical}


def state_from_squeezing(S_db: float, mu: float = 1.0) -> GaussianStateSummary:
    """State with squeezing ``S_db`` and purity ``mu``; raises for ``mu`` outside (0, 1]."""
    if not (math.isfinite(mu) and 0 < mu <= 1):
        raise UnphysicalStateError(f"purity must lie in (0, 1], got {mu!r}")
    if not math.isfinite(S_db) or S_db < 0:
        raise ValueError("squeezing level must be finite and >= 0 dB")
    var_s = variance_from_squeezing(S_db)
    var_a = VACUUM_VARIANCE**2 / (mu**2 * var_s)
    return GaussianStateSummary(var_s, var_a)


@dataclass(frozen=True)
class CalibrationPair:
    cal_true: CalibrationParams
    cal_assumed: CalibrationParams

    @property
    def ratio(self) -> float:
        return self.cal_true.kappa / self.cal_assumed.kappa


def vacuum_anchored_pair(cal_true: CalibrationParams, kappa_assumed: float) -> CalibrationPair:
    """Assumed calibration with the given kappa whose noise offset reproduces the
    true vacuum-level moment."""
    r = cal_true.kappa / kappa_assumed
    n_H = r * (0.5 + cal_true.n_H) - 0.5
    if n_H < 0:
        raise ValueError("no non-negative n_H reproduces the vacuum moment for this kappa")
    return CalibrationPair(cal_true, CalibrationParams(kappa_assumed, n_H, cal_true.eta))


def miscalibrate(state: GaussianStateSummary, pair: CalibrationPair) -> GaussianStateSummary:
    """Reconstruct ``state`` with the assumed calibration instead of the true one."""
    r = pair.ratio
    shift = VACUUM_VARIANCE * (1.0 - r)
    v1 = r * state.var_s + shift
    v2 = r * state.var_a + shift
    return GaussianStateSummary(min(v1, v2), max(v1, v2))


def forward_moment(var: float, cal: CalibrationParams, cfg: ReceiverConfig) -> float:
    """Second quadrature moment (power units) detected for a quadrature variance ``var``.

    ``M = (kappa/Z0) (2 var + n_H)``: a variance of 0.25 is half a photon,
    matching the vacuum term of the detected-power model.
    """
    return cal.kappa / cfg.Z0 * (2.0 * var + cal.n_H)


def reconstruct_variance(measured_moment: float, cal: CalibrationParams, cfg: ReceiverConfig) -> float:
    """Invert :func:`forward_moment`: ``var = (M Z0 / kappa - n_H) / 2``.

    The result may be nonpositive for badly miscalibrated inputs; callers
    decide whether that is acceptable.
    """
    return 0.5 * (measured_moment * cfg.Z0 / cal.kappa - cal.n_H)
