"""Estimation of (kappa, n_H, eta) from Planck sweep datasets.

The two-dimensional fit minimizes the weighted squared residuals of the
detected-power model over all curves at once; the one-dimensional fit pins
the transmissivity and bath temperature, as in conventional Planck
spectroscopy. Spacing analysis and flux-bias loss sweeps build on the same
model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import kernels
from .physics import (
    CalibrationParams,
    PhysicsDomainError,
    ReceiverConfig,
    bose_factor,
    crossover_temperature,
    eta_to_loss_db,
)
from .simulate import FluxSweepRecord, PlanckCurve, SweepDataset

__all__ = [
    "FitOptions",
    "FitResult",
    "SpacingEntry",
    "SpacingResult",
    "DriftVerdict",
    "SweepComparison",
    "FluxSweepRecord",
    "IdentifiabilityError",
    "InsufficientDataError",
    "InitialGuessWarning",
    "CONVENTION_1D",
    "initial_guess",
    "fit_2d",
    "fit_1d",
    "residual_jacobian",
    "jacobian_singular_values",
    "spacing_analysis",
    "detect_eta_drift",
    "flux_loss_sweep",
    "compare_sweeps",
]

PARAM_NAMES = ("kappa", "n_H", "eta")

CONVENTION_1D = (
    "1D convention: kappa is referenced at the reconstruction point behind a single beam "
    "splitter whose transmissivity is pinned (not fitted) and whose environment port is pinned "
    "at the stated bath temperature. n_H is the effective added-noise photon number at that "
    "reference point. A wrong pinned loss is absorbed into kappa (scaled by eta_true/eta_pinned) "
    "and into n_H; the fit residual cannot reveal it."
)


class IdentifiabilityError(ValueError):
    """The dataset cannot constrain every requested parameter."""


class InsufficientDataError(ValueError):
    pass


class InitialGuessWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FitOptions:
    max_iterations: int = 200
    convergence_tol: float = 1e-10
    eta_min: float = 1e-6
    damping_init: float = 1e-3
    weight_rule: str = "per_curve"
    linear_region_threshold: float = 2.0

    def __post_init__(self):
        if self.weight_rule not in ("per_curve", "inverse_variance", "uniform"):
            raise ValueError(f"unknown weight rule {self.weight_rule!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.eta_min < 1:
            raise ValueError("eta_min must lie in (0, 1)")


@dataclass
class FitResult:
    params: CalibrationParams
    covariance: np.ndarray
    ssr: float
    n_points: int
    converged: bool
    iterations: int
    fitted: tuple = (True, True, True)
    weight_rule: str = "per_curve"
    weight_sum: float = 1.0
    pinned: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    convention: Optional[str] = None

    @property
    def loss_dB(self) -> float:
        return self.params.loss_db

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def loss_dB_sigma(self) -> float:
        return 10.0 / math.log(10.0) * self.sigma[2] / self.params.eta

    @property
    def dof(self) -> int:
        return self.n_points - sum(self.fitted)

    @property
    def weighted_rms(self) -> float:
        """Root of the weighted mean squared residual."""
        return math.sqrt(self.ssr / self.weight_sum)

    def to_dict(self) -> dict:
        sig = self.sigma
        out = {
            "params": self.params.to_dict(),
            "sigma": {name: float(s) for name, s in zip(PARAM_NAMES, sig)},
            "loss_dB": self.loss_dB,
            "loss_dB_sigma": self.loss_dB_sigma,
            "covariance": self.covariance.tolist(),
            "fitted": dict(zip(PARAM_NAMES, self.fitted)),
            "ssr": self.ssr,
            "weighted_rms": self.weighted_rms,
            "n_points": self.n_points,
            "dof": self.dof,
            "converged": self.converged,
            "iterations": self.iterations,
            "weight_rule": self.weight_rule,
            "warnings": list(self.warnings),
        }
        if self.pinned:
            out["pinned"] = dict(self.pinned)
        if self.convention:
            out["convention"] = self.convention
        return out


# -- reparameterization -----------------------------------------------------


def _softplus(x):
    return math.log1p(math.exp(-abs(x))) + max(x, 0.0)


def _softplus_inv(y):
    y = max(y, 1e-12)
    return y + math.log(-math.expm1(-y))


def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


class _Reparam:
    """Unconstrained coordinates: log kappa, softplus^-1 n_H, logit-scaled eta."""

    def __init__(self, eta_min: float):
        self.lo = eta_min

    def to_theta(self, p: CalibrationParams) -> np.ndarray:
        u = (p.eta - self.lo) / (1.0 - self.lo)
        u = min(max(u, 1e-12), 1.0 - 1e-12)
        return np.array([math.log(p.kappa), _softplus_inv(p.n_H), math.log(u / (1.0 - u))])

    def natural(self, theta) -> tuple:
        s = _sigmoid(theta[2])
        return math.exp(theta[0]), _softplus(theta[1]), self.lo + (1.0 - self.lo) * s

    def chain(self, theta) -> np.ndarray:
        s = _sigmoid(theta[2])
        return np.array([math.exp(theta[0]), _sigmoid(theta[1]), (1.0 - self.lo) * s * (1.0 - s)])


# -- weights and residuals --------------------------------------------------


def _weights(ds: SweepDataset, rule: str) -> np.ndarray:
    if rule == "per_curve":
        return np.concatenate([np.full(len(c), 1.0 / len(c)) for c in ds.curves])
    if rule == "inverse_variance":
        return np.concatenate([1.0 / c.sigma_P**2 for c in ds.curves])
    return np.ones(ds.n_points)


def residual_jacobian(params: CalibrationParams, T_att, T_mc, P, weights, cfg: ReceiverConfig):
    """Weighted residuals ``sqrt(w) (P - model)`` and their Jacobian with
    respect to (kappa, n_H, eta), shape ``(n, 3)``."""
    return kernels.residual_and_jacobian(
        params.kappa, params.n_H, params.eta,
        np.asarray(T_att, dtype=float), np.asarray(T_mc, dtype=float),
        np.asarray(P, dtype=float), np.sqrt(np.asarray(weights, dtype=float)),
        crossover_temperature(cfg.f0), 1.0 / cfg.Z0,
    )


def jacobian_singular_values(ds: SweepDataset, params: CalibrationParams) -> np.ndarray:
    """Singular values of the column-normalized residual Jacobian (descending)."""
    T_att, T_mc, P, _, _ = ds.stacked()
    _, J = residual_jacobian(params, T_att, T_mc, P, np.ones_like(P), ds.receiver)
    norms = np.linalg.norm(J, axis=0)
    norms[norms == 0] = 1.0
    return np.linalg.svd(J / norms, compute_uv=False)


def _check_rank(J: np.ndarray, free: np.ndarray, rtol: float = 1e-9):
    Jf = J[:, free]
    norms = np.linalg.norm(Jf, axis=0)
    names = [n for n, f in zip(PARAM_NAMES, free) if f]
    if np.any(norms == 0):
        bad = names[int(np.argmin(norms))]
        raise IdentifiabilityError(f"parameter {bad!r} is not identifiable: zero sensitivity")
    _, s, vt = np.linalg.svd(Jf / norms, full_matrices=False)
    if s[-1] < rtol * s[0]:
        v = np.abs(vt[-1])
        culprits = [names[i] for i in np.argsort(v)[::-1] if v[i] > 0.3]
        raise IdentifiabilityError(
            "rank-deficient Jacobian: " + " and ".join(repr(c) for c in culprits)
            + " are not jointly identifiable from this dataset"
        )


# -- Levenberg-Marquardt core -----------------------------------------------


def _levenberg_marquardt(start, T_att, T_mc, P, w, cfg, opts, free):
    rp = _Reparam(opts.eta_min)
    theta = rp.to_theta(start)
    pinned_theta = theta.copy()
    free = np.asarray(free, dtype=bool)
    floor = (1e-14) ** 2 * float(np.sum(w * P**2))

    def evaluate(th):
        k, n, e = rp.natural(th)
        r, Jn = kernels.residual_and_jacobian(k, n, e, T_att, T_mc, P, np.sqrt(w),
                                              crossover_temperature(cfg.f0), 1.0 / cfg.Z0)
        return r, Jn

    r, Jn = evaluate(theta)
    ssr = float(r @ r)
    lam = opts.damping_init
    converged = False
    it = 0
    while it < opts.max_iterations:
        it += 1
        J = (Jn * rp.chain(theta))[:, free]
        A = J.T @ J
        g = J.T @ r
        if ssr <= floor:
            converged = True
            break
        accepted = False
        while lam < 1e16:
            M = A + lam * np.diag(np.maximum(np.diag(A), 1e-300))
            try:
                step = np.linalg.solve(M, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = theta.copy()
            trial[free] += step
            r_new, Jn_new = evaluate(trial)
            ssr_new = float(r_new @ r_new)
            if np.isfinite(ssr_new) and ssr_new <= ssr:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no downhill step at any damping: stationary to working precision
            converged = True
            break
        rel = (ssr - ssr_new) / ssr if ssr > 0 else 0.0
        small_step = np.max(np.abs(step)) <= 1e-13 * (1.0 + np.max(np.abs(theta[free])))
        theta, r, Jn, ssr = trial, r_new, Jn_new, ssr_new
        lam = max(lam / 10.0, 1e-12)
        if rel <= opts.convergence_tol or ssr <= floor or small_step:
            converged = True
            break
    theta[~free] = pinned_theta[~free]
    return theta, r, Jn, ssr, it, converged


def _result(theta, Jn, ssr, it, converged, w, opts, free, n_points, **extra):
    rp = _Reparam(opts.eta_min)
    k, n, e = rp.natural(theta)
    e = min(e, 1.0)
    free = np.asarray(free, dtype=bool)
    Jf = Jn[:, free]
    p = int(free.sum())
    dof = max(n_points - p, 1)
    cov = np.zeros((3, 3))
    try:
        inv = np.linalg.pinv(Jf.T @ Jf)
    except np.linalg.LinAlgError:
        inv = np.full((p, p), np.nan)
    # residual-variance scaling: covariance is (J^T W J)^-1 * ssr/dof
    sub = inv * (ssr / dof)
    sub = 0.5 * (sub + sub.T)
    idx = np.flatnonzero(free)
    cov[np.ix_(idx, idx)] = sub
    return FitResult(
        params=CalibrationParams(k, n, e),
        covariance=cov,
        ssr=ssr,
        n_points=n_points,
        converged=converged,
        iterations=it,
        fitted=tuple(bool(f) for f in free),
        weight_rule=opts.weight_rule,
        weight_sum=float(np.sum(w)),
        **extra,
    )


# -- initial guess ----------------------------------------------------------


def _linear_fit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef[0], coef[1]


def initial_guess(ds: SweepDataset, opts: Optional[FitOptions] = None) -> CalibrationParams:
    """Closed-form starting point for :func:`fit_2d`.

    Within each curve the power is affine in the attenuator occupation
    ``coth/2`` with slope ``kappa*eta/Z0``; across curves the intercepts are
    affine in the bath occupation with slope ``kappa*(1-eta)/Z0`` and offset
    ``kappa*n_H/Z0``. Only points above the linear-region threshold are used.
    """
    opts = opts or FitOptions()
    if len(ds.curves) < 2:
        raise IdentifiabilityError(
            "a 2D initial guess needs >= 2 curves at distinct T_mc; use fit_1d for a single curve"
        )
    cfg = ds.receiver
    Z0 = cfg.Z0
    t_lin = opts.linear_region_threshold * crossover_temperature(cfg.f0)
    slopes, intercepts, occ_mc = [], [], []
    for c in ds.curves:
        m = c.T_att >= t_lin
        if m.sum() < 3:
            continue
        occ = 0.5 * bose_factor(cfg.f0, c.T_att[m])
        s, b = _linear_fit(occ, c.P[m])
        slopes.append(s)
        intercepts.append(b)
        occ_mc.append(0.5 * bose_factor(cfg.f0, c.T_mc))

    lo = opts.eta_min
    if len(slopes) < 2 or slopes[0] <= 0:
        warnings.warn("too few linear-region points for a 2D guess; using fallback values",
                      InitialGuessWarning, stacklevel=2)
        c = ds.curves[0]
        occ = 0.5 * bose_factor(cfg.f0, c.T_att)
        s, _ = _linear_fit(occ, c.P)
        kappa = abs(s) * Z0 / 0.5 if s != 0 else 1.0
        return CalibrationParams(max(kappa, 1e-300), 10.0, 0.5)

    s_att = slopes[0]
    s_mc, offset = _linear_fit(np.array(occ_mc), np.array(intercepts))
    s_mc = max(s_mc, 0.0)
    g = s_att + s_mc
    eta = min(max(s_att / g, lo), 1.0)
    kappa = g * Z0
    n_H = max(offset / g, 0.0)
    return CalibrationParams(kappa, n_H, eta)


# -- fits --------------------------------------------------------------------


def _validate_points(ds: SweepDataset):
    for c in ds.curves:
        if not np.all(np.isfinite(c.P)):
            raise ValueError(f"curve at T_mc = {c.T_mc} K contains non-finite power values")


def fit_2d(
    ds: SweepDataset,
    opts: Optional[FitOptions] = None,
    initial: Optional[CalibrationParams] = None,
) -> FitResult:
    """Simultaneous weighted least-squares fit of kappa, n_H and eta to all curves.

    Returns the best iterate with ``converged=False`` when the iteration
    budget runs out.
    """
    opts = opts or FitOptions()
    if len(ds.curves) < 2:
        raise IdentifiabilityError(
            "'eta' is not identifiable (jointly with 'kappa') from a single bath temperature; "
            "use fit_1d"
        )
    _validate_points(ds)
    T_att, T_mc, P, _, _ = ds.stacked()
    w = _weights(ds, opts.weight_rule)
    free = (True, True, True)
    notes = []
    if initial is None:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", InitialGuessWarning)
            initial = initial_guess(ds, opts)
        notes = [str(c.message) for c in caught if issubclass(c.category, InitialGuessWarning)]

    _, J0 = residual_jacobian(initial, T_att, T_mc, P, w, ds.receiver)
    _check_rank(J0, np.array(free))
    theta, r, Jn, ssr, it, ok = _levenberg_marquardt(initial, T_att, T_mc, P, w, ds.receiver, opts, free)
    return _result(theta, Jn, ssr, it, ok, w, opts, free, P.size, warnings=notes)


def fit_1d(
    curve: PlanckCurve,
    fixed_eta: float,
    fixed_T_mc: Optional[float] = None,
    opts: Optional[FitOptions] = None,
    cfg: Optional[ReceiverConfig] = None,
) -> FitResult:
    """Conventional Planck fit: kappa and n_H free, eta and bath temperature pinned."""
    opts = opts or FitOptions()
    cfg = cfg or ReceiverConfig()
    if not (isinstance(fixed_eta, (int, float)) and math.isfinite(fixed_eta) and 0 < fixed_eta <= 1):
        raise PhysicsDomainError(f"fixed_eta must lie in (0, 1], got {fixed_eta!r}")
    T_bath = curve.T_mc if fixed_T_mc is None else float(fixed_T_mc)
    if not (math.isfinite(T_bath) and T_bath >= 0):
        raise PhysicsDomainError("fixed_T_mc must be >= 0")
    if len(curve) < 3:
        raise InsufficientDataError("1D fit needs at least 3 points")
    if not np.all(np.isfinite(curve.P)):
        raise ValueError("curve contains non-finite power values")

    T_att = curve.T_att
    T_mc = np.full(T_att.shape, T_bath)
    P = curve.P
    if opts.weight_rule == "inverse_variance":
        w = 1.0 / curve.sigma_P**2
    elif opts.weight_rule == "per_curve":
        w = np.full(P.shape, 1.0 / P.size)
    else:
        w = np.ones_like(P)

    occ_att = 0.5 * bose_factor(cfg.f0, T_att)
    occ_mc = 0.5 * float(bose_factor(cfg.f0, T_bath))
    s, b = _linear_fit(occ_att, P)
    g = max(s / fixed_eta, 1e-300)
    n0 = max(b / g - (1.0 - fixed_eta) * occ_mc, 0.0)
    start = CalibrationParams(g * cfg.Z0, n0, fixed_eta)

    free = (True, True, False)
    _, J0 = residual_jacobian(start, T_att, T_mc, P, w, cfg)
    _check_rank(J0, np.array(free))
    theta, r, Jn, ssr, it, ok = _levenberg_marquardt(start, T_att, T_mc, P, w, cfg, opts, free)
    res = _result(
        theta, Jn, ssr, it, ok, w, opts, free, P.size,
        pinned={"eta": fixed_eta, "loss_dB": eta_to_loss_db(fixed_eta), "T_mc": T_bath},
        convention=CONVENTION_1D,
    )
    # pin exactly; the logit round trip can move eta by an ulp
    res.params = CalibrationParams(res.params.kappa, res.params.n_H, fixed_eta)
    return res


# -- spacing analysis ----------------------------------------------------------


@dataclass
class SpacingEntry:
    index: int
    T_mc_pair: tuple
    delta_P: float = float("nan")
    sigma: float = float("nan")
    coupling: float = float("nan")
    coupling_sigma: float = float("nan")
    n_points: int = 0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        d = {"index": self.index, "T_mc_pair": list(self.T_mc_pair), "n_points": self.n_points}
        if self.ok:
            d.update(delta_P=self.delta_P, sigma=self.sigma, coupling=self.coupling,
                     coupling_sigma=self.coupling_sigma)
        else:
            d["error"] = self.error
        return d


@dataclass
class SpacingResult:
    """Adjacent-curve spacings.

    ``coupling`` divides each spacing by the bath-occupation difference
    ``[coth(hf0/2kT2) - coth(hf0/2kT1)] / 2`` and so estimates
    ``kappa (1 - eta) / Z0`` independently of where the bath temperatures sit
    relative to the cross-over temperature. ``covariance`` is the joint
    covariance of the valid couplings (adjacent entries share a curve).
    """

    entries: list
    covariance: Optional[np.ndarray] = None

    @property
    def valid(self) -> list:
        return [e for e in self.entries if e.ok]

    def to_dict(self) -> dict:
        d = {"entries": [e.to_dict() for e in self.entries]}
        if self.covariance is not None:
            d["coupling_covariance"] = self.covariance.tolist()
        return d


def _pair_coefficients(c1: PlanckCurve, c2: PlanckCurve, t_lin: float):
    """Coefficients expressing the mean offset of c2 over c1 as a linear
    combination of the points of each curve."""
    m1 = c1.T_att >= t_lin
    m2 = c2.T_att >= t_lin
    if m1.sum() < 2 or m2.sum() < 2:
        return None
    lo = max(c1.T_att[m1].min(), c2.T_att[m2].min())
    hi = min(c1.T_att[m1].max(), c2.T_att[m2].max())
    if hi < lo:
        return None
    in1 = m1 & (c1.T_att >= lo) & (c1.T_att <= hi)
    in2 = m2 & (c2.T_att >= lo) & (c2.T_att <= hi)
    # the curve with fewer points in the overlap supplies the grid
    sparse_is_1 = in1.sum() <= in2.sum()
    sparse, dense = (c1, c2) if sparse_is_1 else (c2, c1)
    grid_idx = np.flatnonzero(in1 if sparse_is_1 else in2)
    if grid_idx.size == 0:
        return None
    # interpolation matrix from dense points onto sparse grid
    x = dense.T_att
    rows = np.zeros((grid_idx.size, x.size))
    for r, gi in enumerate(grid_idx):
        t = sparse.T_att[gi]
        j = int(np.searchsorted(x, t))
        if j < x.size and x[j] == t:
            rows[r, j] = 1.0
        else:
            j = min(max(j, 1), x.size - 1)
            u = (t - x[j - 1]) / (x[j] - x[j - 1])
            rows[r, j - 1] = 1.0 - u
            rows[r, j] = u
    sel = np.zeros((grid_idx.size, sparse.T_att.size))
    sel[np.arange(grid_idx.size), grid_idx] = 1.0
    # per-grid-point difference d = P2 - P1 as coefficient rows
    if sparse_is_1:
        A1, A2 = -sel, rows
    else:
        A1, A2 = -rows, sel
    var_d = (A1**2) @ c1.sigma_P**2 + (A2**2) @ c2.sigma_P**2
    wgt = 1.0 / var_d
    wgt /= wgt.sum()
    return wgt @ A1, wgt @ A2, grid_idx.size


def spacing_analysis(ds: SweepDataset, linear_region_threshold: float = 2.0) -> SpacingResult:
    """Error-weighted mean vertical offset between each pair of adjacent curves.

    Only attenuator temperatures above ``linear_region_threshold`` times the
    cross-over temperature are used. The denser curve is linearly
    interpolated onto the sparser grid within the common range, and the
    uncertainty is propagated exactly from the point sigmas.
    """
    if len(ds.curves) < 2:
        raise InsufficientDataError("spacing analysis needs at least 2 curves")
    cfg = ds.receiver
    t_lin = linear_region_threshold * crossover_temperature(cfg.f0)
    curves = ds.curves
    offsets = [0]
    for c in curves:
        offsets.append(offsets[-1] + len(c))
    sig2 = np.concatenate([c.sigma_P**2 for c in curves])
    P_all = np.concatenate([c.P for c in curves])

    entries, coef_rows, scales = [], [], []
    for i in range(len(curves) - 1):
        c1, c2 = curves[i], curves[i + 1]
        entry = SpacingEntry(i + 1, (c1.T_mc, c2.T_mc))
        pc = _pair_coefficients(c1, c2, t_lin)
        if pc is None:
            entry.error = "no overlapping linear-region T_att range"
            entries.append(entry)
            continue
        a1, a2, npts = pc
        row = np.zeros(P_all.size)
        row[offsets[i]:offsets[i + 1]] = a1
        row[offsets[i + 1]:offsets[i + 2]] = a2
        d_occ = 0.5 * (bose_factor(cfg.f0, c2.T_mc) - bose_factor(cfg.f0, c1.T_mc))
        entry.delta_P = float(row @ P_all)
        entry.sigma = float(math.sqrt((row**2) @ sig2))
        entry.coupling = entry.delta_P / d_occ
        entry.coupling_sigma = entry.sigma / d_occ
        entry.n_points = npts
        entries.append(entry)
        coef_rows.append(row / d_occ)

    cov = None
    if coef_rows:
        R = np.array(coef_rows)
        cov = (R * sig2) @ R.T
    return SpacingResult(entries, cov)


@dataclass
class DriftVerdict:
    verdict: str
    statistic: float
    dof: int
    p_value: float
    weighted_mean: float
    alpha: float = 0.05

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "statistic": self.statistic, "dof": self.dof,
                "p_value": self.p_value, "weighted_mean": self.weighted_mean, "alpha": self.alpha}


def detect_eta_drift(sr: SpacingResult, alpha: float = 0.05, quantity: str = "coupling") -> DriftVerdict:
    """Chi-square test of the spacings against their (generalized) weighted mean.

    With ``quantity="coupling"`` the normalized spacings and their full
    covariance are used; ``quantity="delta_P"`` tests raw offsets with
    independent errors.
    """
    valid = sr.valid
    if len(valid) < 3:
        raise InsufficientDataError(f"drift test needs >= 3 spacing entries, got {len(valid)}")
    if quantity == "coupling":
        x = np.array([e.coupling for e in valid])
        if sr.covariance is not None and sr.covariance.shape == (len(valid), len(valid)):
            C = sr.covariance
        else:
            C = np.diag([e.coupling_sigma**2 for e in valid])
    elif quantity == "delta_P":
        x = np.array([e.delta_P for e in valid])
        C = np.diag([e.sigma**2 for e in valid])
    else:
        raise ValueError("quantity must be 'coupling' or 'delta_P'")
    Ci = np.linalg.inv(C)
    one = np.ones_like(x)
    mean = float(one @ Ci @ x / (one @ Ci @ one))
    dev = x - mean
    chi2 = float(dev @ Ci @ dev)
    dof = len(x) - 1
    p = float(stats.chi2.sf(chi2, dof))
    return DriftVerdict("drifting" if p < alpha else "constant", chi2, dof, p, mean, alpha)


# -- flux sweeps -----------------------------------------------------------------


def flux_loss_sweep(datasets: dict, opts: Optional[FitOptions] = None, fits: Optional[dict] = None) -> list:
    """Loss change ``L(I) - L(0)`` from a 2D fit at every bias point.

    ``fits`` may carry precomputed :class:`FitResult` objects keyed like
    ``datasets``. Uncertainties of the bias point and the reference add in
    quadrature.
    """
    keys = {float(k): k for k in datasets}
    if 0.0 not in keys:
        raise ValueError("flux sweep needs the zero-bias reference dataset (I_dc = 0)")
    fits = dict(fits or {})
    results = {}
    for I, key in keys.items():
        results[I] = fits.get(key) or fits.get(I) or fit_2d(datasets[key], opts)
    ref = results[0.0]
    records = []
    for I in sorted(results):
        if I == 0.0:
            records.append(FluxSweepRecord(0.0, 0.0, 0.0, "planck2d"))
            continue
        r = results[I]
        records.append(FluxSweepRecord(
            I, r.loss_dB - ref.loss_dB, math.hypot(r.loss_dB_sigma, ref.loss_dB_sigma), "planck2d"))
    return records


@dataclass
class SweepComparison:
    I_dc: np.ndarray
    a: np.ndarray
    b: np.ndarray
    diff: np.ndarray
    sigma: np.ndarray
    flagged: np.ndarray
    flag_sigma: float = 3.0

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.diff)))

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.diff**2)))

    @property
    def sigma_rms(self) -> float:
        return float(np.sqrt(np.mean(self.sigma**2)))

    @property
    def dispersion_candidates(self) -> list:
        return [float(i) for i in self.I_dc[self.flagged]]

    def to_dict(self) -> dict:
        return {
            "points": [
                {"I_dc": float(i), "a": float(x), "b": float(y), "diff": float(d),
                 "sigma": float(s), "dispersion_candidate": bool(f)}
                for i, x, y, d, s, f in zip(self.I_dc, self.a, self.b, self.diff, self.sigma, self.flagged)
            ],
            "max_abs_diff": self.max_abs,
            "rms_diff": self.rms,
            "rms_sigma": self.sigma_rms,
            "flag_sigma": self.flag_sigma,
            "dispersion_candidates": self.dispersion_candidates,
        }


def compare_sweeps(a: Sequence[FluxSweepRecord], b: Sequence[FluxSweepRecord], flag_sigma: float = 3.0
                   ) -> SweepComparison:
    """Point-by-point loss differences ``a - b`` on the grid of ``a``.

    ``b`` is linearly interpolated where its grid differs. Points with
    ``|diff| > flag_sigma * sigma`` are flagged as dispersion candidates.
    """
    if not a or not b:
        raise ValueError("both sweeps must be non-empty")
    a = sorted(a, key=lambda r: r.I_dc)
    b = sorted(b, key=lambda r: r.I_dc)
    Ia = np.array([r.I_dc for r in a])
    La = np.array([r.delta_L for r in a])
    Sa = np.array([r.sigma for r in a])
    Ib = np.array([r.I_dc for r in b])
    Lb = np.array([r.delta_L for r in b])
    Sb = np.array([r.sigma for r in b])
    keep = (Ia >= Ib[0] - 1e-9) & (Ia <= Ib[-1] + 1e-9)
    if not keep.any():
        raise ValueError("sweeps have disjoint bias grids")
    Ia, La, Sa = Ia[keep], La[keep], Sa[keep]
    Lb_i = np.interp(Ia, Ib, Lb)
    Sb_i = np.interp(Ia, Ib, Sb)
    diff = La - Lb_i
    sigma = np.hypot(Sa, Sb_i)
    flagged = np.abs(diff) > flag_sigma * sigma
    return SweepComparison(Ia, La, Lb_i, diff, sigma, flagged, flag_sigma)
