"""Pure-numpy implementations of the per-point hot loops.

Mirrors ``_ckernels.pyx`` exactly; used when the compiled extension is not
available or ``PLANCK2D_PURE_PYTHON=1`` is set.
"""

import numpy as np


def _x_terms(a, T):
    T = np.asarray(T, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), T.shape)
    hot = T > 0
    x = np.full(T.shape, np.inf)
    np.divide(a, T, out=x, where=hot)
    e = np.exp(-2.0 * x)
    d = -np.expm1(-2.0 * x)
    return T, a, hot, x, e, d


def coth_ratio(a, T):
    """coth(a / T) with the T -> 0 limit mapped to 1."""
    T, a, hot, x, e, d = _x_terms(a, T)
    return 1.0 + 2.0 * e / d


def coth_ratio_dT(a, T):
    """d/dT coth(a / T); zero at T = 0."""
    T, a, hot, x, e, d = _x_terms(a, T)
    out = np.zeros(T.shape)
    csch2 = 4.0 * e / (d * d)
    np.divide(a * csch2, T * T, out=out, where=hot & (e > 0))
    return out


def model(kappa, n_H, eta, T_att, T_mc, a, inv_z0):
    c_att = coth_ratio(a, T_att)
    c_mc = coth_ratio(a, T_mc)
    return kappa * inv_z0 * (0.5 * eta * c_att + 0.5 * (1.0 - eta) * c_mc + n_H)


def model_and_jacobian(kappa, n_H, eta, T_att, T_mc, a, inv_z0):
    """Model values and partials w.r.t. (kappa, n_H, eta, T_att, T_mc)."""
    T_att = np.asarray(T_att, dtype=float)
    T_mc = np.asarray(T_mc, dtype=float)
    c_att = coth_ratio(a, T_att)
    c_mc = coth_ratio(a, T_mc)
    g = kappa * inv_z0
    bracket = 0.5 * eta * c_att + 0.5 * (1.0 - eta) * c_mc + n_H
    jac = np.empty((T_att.size, 5))
    jac[:, 0] = inv_z0 * bracket
    jac[:, 1] = g
    jac[:, 2] = 0.5 * g * (c_att - c_mc)
    jac[:, 3] = 0.5 * g * eta * coth_ratio_dT(a, T_att)
    jac[:, 4] = 0.5 * g * (1.0 - eta) * coth_ratio_dT(a, T_mc)
    return g * bracket, jac


def residual_and_jacobian(kappa, n_H, eta, T_att, T_mc, P, sqrt_w, a, inv_z0):
    """Weighted residuals ``sqrt_w (P - model)`` and their (n, 3) Jacobian
    with respect to (kappa, n_H, eta)."""
    c_att = coth_ratio(a, T_att)
    c_mc = coth_ratio(a, T_mc)
    g = kappa * inv_z0
    bracket = 0.5 * eta * c_att + 0.5 * (1.0 - eta) * c_mc + n_H
    r = sqrt_w * (P - g * bracket)
    jac = np.empty((r.size, 3))
    jac[:, 0] = -sqrt_w * inv_z0 * bracket
    jac[:, 1] = -sqrt_w * g
    jac[:, 2] = -sqrt_w * 0.5 * g * (c_att - c_mc)
    return r, jac
