# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-point kernels; same contract as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1

cnp.import_array()


cdef inline double _coth(double a, double T) noexcept nogil:
    cdef double e, d
    if T <= 0.0:
        return 1.0
    e = exp(-2.0 * a / T)
    d = -expm1(-2.0 * a / T)
    return 1.0 + 2.0 * e / d


cdef inline double _coth_dT(double a, double T) noexcept nogil:
    cdef double e, d
    if T <= 0.0:
        return 0.0
    e = exp(-2.0 * a / T)
    if e == 0.0:
        return 0.0
    d = -expm1(-2.0 * a / T)
    return a * 4.0 * e / (d * d) / (T * T)


def coth_ratio(a, T):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tv = np.ascontiguousarray(T, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] av = np.ascontiguousarray(
        np.broadcast_to(np.asarray(a, dtype=np.float64), np.shape(T)), dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = tv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    for i in range(n):
        out[i] = _coth(av[i], tv[i])
    return out.reshape(np.shape(T))


def coth_ratio_dT(a, T):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tv = np.ascontiguousarray(T, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] av = np.ascontiguousarray(
        np.broadcast_to(np.asarray(a, dtype=np.float64), np.shape(T)), dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = tv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    for i in range(n):
        out[i] = _coth_dT(av[i], tv[i])
    return out.reshape(np.shape(T))


def model(double kappa, double n_H, double eta, T_att, T_mc, double a, double inv_z0):
    cdef const double[:] ta = np.ascontiguousarray(T_att, dtype=np.float64)
    cdef const double[:] tm = np.ascontiguousarray(T_mc, dtype=np.float64)
    cdef Py_ssize_t i, n = ta.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double g = kappa * inv_z0
    with nogil:
        for i in range(n):
            out[i] = g * (0.5 * eta * _coth(a, ta[i]) + 0.5 * (1.0 - eta) * _coth(a, tm[i]) + n_H)
    return out


def model_and_jacobian(double kappa, double n_H, double eta, T_att, T_mc, double a, double inv_z0):
    cdef const double[:] ta = np.ascontiguousarray(T_att, dtype=np.float64)
    cdef const double[:] tm = np.ascontiguousarray(T_mc, dtype=np.float64)
    cdef Py_ssize_t i, n = ta.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] jac = np.empty((n, 5))
    cdef double[:, ::1] J = jac
    cdef double g = kappa * inv_z0
    cdef double ca, cm, br
    with nogil:
        for i in range(n):
            ca = _coth(a, ta[i])
            cm = _coth(a, tm[i])
            br = 0.5 * eta * ca + 0.5 * (1.0 - eta) * cm + n_H
            out[i] = g * br
            J[i, 0] = inv_z0 * br
            J[i, 1] = g
            J[i, 2] = 0.5 * g * (ca - cm)
            J[i, 3] = 0.5 * g * eta * _coth_dT(a, ta[i])
            J[i, 4] = 0.5 * g * (1.0 - eta) * _coth_dT(a, tm[i])
    return out, jac


def residual_and_jacobian(double kappa, double n_H, double eta, T_att, T_mc, P, sqrt_w,
                          double a, double inv_z0):
    cdef const double[:] ta = np.ascontiguousarray(T_att, dtype=np.float64)
    cdef const double[:] tm = np.ascontiguousarray(T_mc, dtype=np.float64)
    cdef const double[:] pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[:] sw = np.ascontiguousarray(sqrt_w, dtype=np.float64)
    cdef Py_ssize_t i, n = ta.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] res = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] jac = np.empty((n, 3))
    cdef double[:, ::1] J = jac
    cdef double g = kappa * inv_z0
    cdef double ca, cm, br
    with nogil:
        for i in range(n):
            ca = _coth(a, ta[i])
            cm = _coth(a, tm[i])
            br = 0.5 * eta * ca + 0.5 * (1.0 - eta) * cm + n_H
            res[i] = sw[i] * (pv[i] - g * br)
            J[i, 0] = -sw[i] * inv_z0 * br
            J[i, 1] = -sw[i] * g
            J[i, 2] = -sw[i] * 0.5 * g * (ca - cm)
    return res, jac
