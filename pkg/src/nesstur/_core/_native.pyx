# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: the adaptive Dormand-Prince 4/5 stepper for the
vectorized master-equation flow, and the per-draw loop of the Haar scan.

Semantics mirror ``_fallback`` exactly; see there for the reference
implementation and documentation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, log, pow, sqrt

from nesstur.errors import IntegrationError

cnp.import_array()

ctypedef double complex dcomplex

# Dormand-Prince 5(4) tableau (stage coefficients row by row).
cdef double _A[7][6]
_A[1][0] = 1.0 / 5
_A[2][0] = 3.0 / 40;          _A[2][1] = 9.0 / 40
_A[3][0] = 44.0 / 45;         _A[3][1] = -56.0 / 15;        _A[3][2] = 32.0 / 9
_A[4][0] = 19372.0 / 6561;    _A[4][1] = -25360.0 / 2187;   _A[4][2] = 64448.0 / 6561
_A[4][3] = -212.0 / 729
_A[5][0] = 9017.0 / 3168;     _A[5][1] = -355.0 / 33;       _A[5][2] = 46732.0 / 5247
_A[5][3] = 49.0 / 176;        _A[5][4] = -5103.0 / 18656
_A[6][0] = 35.0 / 384;        _A[6][1] = 0.0;               _A[6][2] = 500.0 / 1113
_A[6][3] = 125.0 / 192;       _A[6][4] = -2187.0 / 6784;    _A[6][5] = 11.0 / 84

cdef double _B5[7]
_B5[0] = 35.0 / 384; _B5[1] = 0.0; _B5[2] = 500.0 / 1113; _B5[3] = 125.0 / 192
_B5[4] = -2187.0 / 6784; _B5[5] = 11.0 / 84; _B5[6] = 0.0

cdef double _ERR[7]
_ERR[0] = 35.0 / 384 - 5179.0 / 57600
_ERR[1] = 0.0
_ERR[2] = 500.0 / 1113 - 7571.0 / 16695
_ERR[3] = 125.0 / 192 - 393.0 / 640
_ERR[4] = -2187.0 / 6784 + 92097.0 / 339200
_ERR[5] = 11.0 / 84 - 187.0 / 2100
_ERR[6] = -1.0 / 40

DEF SAFETY = 0.9
DEF MIN_FACTOR = 0.2
DEF MAX_FACTOR = 5.0


cdef inline void _matvec(dcomplex[:, ::1] gen, dcomplex* x, dcomplex* out, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef dcomplex acc
    for i in range(m):
        acc = 0
        for j in range(m):
            acc = acc + gen[i, j] * x[j]
        out[i] = acc


cdef inline void _hermitize(dcomplex* y, int d) noexcept nogil:
    cdef int i, j
    cdef dcomplex avg
    for i in range(d):
        for j in range(i, d):
            avg = 0.5 * (y[i * d + j] + y[j * d + i].conjugate())
            y[i * d + j] = avg
            y[j * d + i] = avg.conjugate()


def integrate_rk45(gen, y0, double t_end, double rtol, double atol,
                   double max_step=np.inf, t_eval=None, int herm_dim=0):
    """Adaptive embedded 4/5 integration of dy/dt = gen @ y; see _fallback."""
    # force writable copies: callers may hold frozen (read-only) arrays
    cdef cnp.ndarray[dcomplex, ndim=2, mode="c"] gen_arr = np.array(gen, dtype=complex, order="C")
    cdef cnp.ndarray[dcomplex, ndim=1, mode="c"] y_arr = np.array(y0, dtype=complex).ravel()
    cdef dcomplex[:, ::1] gen_mv = gen_arr
    cdef Py_ssize_t m = y_arr.shape[0]
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")

    cdef cnp.ndarray[double, ndim=1, mode="c"] targets_arr
    cdef double[::1] targets = None
    cdef bint has_targets = t_eval is not None
    if has_targets:
        targets_arr = np.ascontiguousarray(t_eval, dtype=float)
        if targets_arr.size == 0 or np.any(np.diff(targets_arr) <= 0):
            raise ValueError("t_eval must be non-empty and strictly ascending")
        if targets_arr[0] < 0 or targets_arr[targets_arr.shape[0] - 1] > t_end * (1 + 1e-12):
            raise ValueError("t_eval must lie within [0, t_end]")
        targets = targets_arr

    # work buffers
    cdef cnp.ndarray[dcomplex, ndim=2, mode="c"] k_arr = np.empty((7, m), dtype=complex)
    cdef cnp.ndarray[dcomplex, ndim=1, mode="c"] ytmp_arr = np.empty(m, dtype=complex)
    cdef cnp.ndarray[dcomplex, ndim=1, mode="c"] ynew_arr = np.empty(m, dtype=complex)
    cdef dcomplex[:, ::1] k = k_arr
    cdef dcomplex* y = <dcomplex*> y_arr.data
    cdef dcomplex* ytmp = <dcomplex*> ytmp_arr.data
    cdef dcomplex* ynew = <dcomplex*> ynew_arr.data

    if herm_dim:
        _hermitize(y, herm_dim)

    ts_list = []
    ys_list = []
    cdef Py_ssize_t next_target = 0
    cdef double t = 0.0
    if not has_targets:
        ts_list.append(0.0)
        ys_list.append(y_arr.copy())
    elif targets[0] == 0.0:
        ts_list.append(0.0)
        ys_list.append(y_arr.copy())
        next_target = 1

    cdef double gen_scale = float(np.abs(gen_arr).sum(axis=1).max())
    cdef double h = min(max_step, t_end, 0.1 / gen_scale if gen_scale > 0 else t_end)
    cdef double t_final = t_end if not has_targets else targets[targets.shape[0] - 1]

    cdef Py_ssize_t i, s, j
    cdef double err, scale, gap, factor, re, im
    cdef dcomplex acc, errc

    while t < t_final * (1 - 1e-15):
        h = min(h, max_step, t_final - t)
        if has_targets and next_target < targets.shape[0]:
            gap = targets[next_target] - t
            if gap <= h * (1 + 1e-12):
                h = gap
        if h < 1e-14 * max(1.0, fabs(t)):
            raise IntegrationError(f"step size underflow at t={t!r} (h={h!r})")

        with nogil:
            _matvec(gen_mv, y, &k[0, 0], m)
            for s in range(1, 7):
                for i in range(m):
                    acc = 0
                    for j in range(s):
                        acc = acc + _A[s][j] * k[j, i]
                    ytmp[i] = y[i] + h * acc
                _matvec(gen_mv, ytmp, &k[s, 0], m)
            err = 0.0
            for i in range(m):
                acc = 0
                errc = 0
                for s in range(7):
                    acc = acc + _B5[s] * k[s, i]
                    errc = errc + _ERR[s] * k[s, i]
                ynew[i] = y[i] + h * acc
                scale = atol + rtol * max(abs(y[i]), abs(ynew[i]))
                re = h * errc.real / scale
                im = h * errc.imag / scale
                err = err + re * re + im * im
            err = sqrt(err / m)

        if err <= 1.0:
            t = t + h
            if herm_dim:
                _hermitize(ynew, herm_dim)
            for i in range(m):
                y[i] = ynew[i]
            if not has_targets:
                ts_list.append(t)
                ys_list.append(y_arr.copy())
            elif next_target < targets.shape[0] and t >= targets[next_target] * (1 - 1e-12):
                ts_list.append(float(targets[next_target]))
                ys_list.append(y_arr.copy())
                next_target += 1
            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * pow(err, -0.2)))
        else:
            factor = max(MIN_FACTOR, SAFETY * pow(err, -0.2))
        h = h * factor

    return np.array(ts_list), np.array(ys_list)


def tur_scan_records(ginibre, basis, energies, pops, double mean_cutoff):
    """Per-draw Haar-scan evaluation; see _fallback for the reference."""
    cdef cnp.ndarray[dcomplex, ndim=3, mode="c"] gin = np.array(ginibre, dtype=complex, order="C")
    cdef cnp.ndarray[dcomplex, ndim=2, mode="c"] basis_arr = np.array(basis, dtype=complex, order="C")
    cdef cnp.ndarray[double, ndim=1, mode="c"] e_arr = np.array(energies, dtype=float, order="C")
    cdef cnp.ndarray[double, ndim=1, mode="c"] p_arr = np.array(pops, dtype=float, order="C")
    cdef Py_ssize_t n = gin.shape[0]

    cdef cnp.ndarray[double, ndim=1, mode="c"] lhs_arr = np.full(n, np.nan)
    cdef cnp.ndarray[double, ndim=1, mode="c"] srel_arr = np.full(n, np.nan)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1, mode="c"] kept_arr = np.zeros(n, dtype=np.uint8)

    cdef dcomplex[:, :, ::1] g3 = gin
    cdef dcomplex[:, ::1] bas = basis_arr
    cdef double[::1] e = e_arr
    cdef double[::1] p = p_arr
    cdef double[::1] lhs = lhs_arr
    cdef double[::1] srel = srel_arr
    cdef cnp.uint8_t[::1] kept = kept_arr

    cdef double log_p[4]
    cdef double base_entropy = 0.0
    cdef double e_dot_p = 0.0
    cdef Py_ssize_t i, j, l, col, rep, idx
    for i in range(4):
        log_p[i] = log(p[i])
        base_entropy += p[i] * log_p[i]
        e_dot_p += e[i] * p[i]

    cdef dcomplex u[4][4]
    cdef dcomplex v[4]
    cdef dcomplex tmp[4][4]
    cdef dcomplex ue[4][4]
    cdef dcomplex s
    cdef double nrm, t_mn, q_m, mean, second, rel, de
    cdef double q4[4]

    with nogil:
        for idx in range(n):
            # modified Gram-Schmidt with one reorthogonalization pass; the
            # R diagonal is real positive by construction, so u is the
            # phase-fixed Haar unitary directly
            for col in range(4):
                for i in range(4):
                    v[i] = g3[idx, i, col]
                for rep in range(2):
                    for l in range(col):
                        s = 0
                        for i in range(4):
                            s = s + u[i][l].conjugate() * v[i]
                        for i in range(4):
                            v[i] = v[i] - s * u[i][l]
                nrm = 0.0
                for i in range(4):
                    nrm += v[i].real * v[i].real + v[i].imag * v[i].imag
                nrm = sqrt(nrm)
                for i in range(4):
                    u[i][col] = v[i] / nrm
            # ue = basis^dag @ u @ basis
            for i in range(4):
                for j in range(4):
                    s = 0
                    for l in range(4):
                        s = s + bas[l, i].conjugate() * u[l][j]
                    tmp[i][j] = s
            for i in range(4):
                for j in range(4):
                    s = 0
                    for l in range(4):
                        s = s + tmp[i][l] * bas[l, j]
                    ue[i][j] = s
            # moments and relative entropy from |ue|^2
            mean = 0.0
            second = 0.0
            for i in range(4):
                q_m = 0.0
                for j in range(4):
                    t_mn = ue[i][j].real * ue[i][j].real + ue[i][j].imag * ue[i][j].imag
                    q_m += t_mn * p[j]
                    de = e[i] - e[j]
                    second += t_mn * de * de * p[j]
                q4[i] = q_m
                mean += e[i] * q_m
            mean -= e_dot_p
            if fabs(mean) < mean_cutoff:
                continue
            kept[idx] = 1
            lhs[idx] = (second - mean * mean) / (mean * mean)
            rel = base_entropy
            for i in range(4):
                rel -= q4[i] * log_p[i]
            srel[idx] = rel

    return lhs_arr, srel_arr, kept_arr.view(bool)
