# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan kernels: the sequential recurrences that dominate
inference time.  Contracts match lidarsr._scan_numpy exactly."""

from libc.math cimport exp

import numpy as np

BACKEND_NAME = "cython"


def lti_scan(double[:, ::1] a_bar, double[:, ::1] b_bar, double[:, ::1] c,
             double[::1] d, double[:, ::1] x):
    cdef Py_ssize_t D = x.shape[0]
    cdef Py_ssize_t L = x.shape[1]
    cdef Py_ssize_t N = a_bar.shape[1]
    y_arr = np.empty((D, L))
    h_arr = np.empty(N)
    cdef double[:, ::1] y = y_arr
    cdef double[::1] h = h_arr
    cdef Py_ssize_t dd, t, n
    cdef double xt, acc
    with nogil:
        for dd in range(D):
            for n in range(N):
                h[n] = 0.0
            for t in range(L):
                xt = x[dd, t]
                acc = 0.0
                for n in range(N):
                    h[n] = a_bar[dd, n] * h[n] + b_bar[dd, n] * xt
                    acc += c[dd, n] * h[n]
                y[dd, t] = acc + d[dd] * xt
    return y_arr


def selective_scan(double[:, ::1] a, double[::1] d, double[:, ::1] delta,
                   double[:, ::1] b, double[:, ::1] c, double[:, ::1] x):
    cdef Py_ssize_t D = x.shape[0]
    cdef Py_ssize_t L = x.shape[1]
    cdef Py_ssize_t N = a.shape[1]
    y_arr = np.empty((D, L))
    h_arr = np.empty(N)
    cdef double[:, ::1] y = y_arr
    cdef double[::1] h = h_arr
    cdef Py_ssize_t dd, t, n
    cdef double xt, dt, dbx, acc
    with nogil:
        for dd in range(D):
            for n in range(N):
                h[n] = 0.0
            for t in range(L):
                xt = x[dd, t]
                dt = delta[dd, t]
                dbx = dt * xt
                acc = 0.0
                for n in range(N):
                    h[n] = exp(dt * a[dd, n]) * h[n] + b[n, t] * dbx
                    acc += c[n, t] * h[n]
                y[dd, t] = acc + d[dd] * xt
    return y_arr
