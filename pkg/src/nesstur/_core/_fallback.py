"""Pure-numpy implementations of the hot kernels.

Mirrors ``_native`` (the Cython extension) exactly: an adaptive embedded
Dormand-Prince 4/5 integrator for the linear master-equation flow on
vectorized density matrices, and the per-draw evaluation loop of the
Haar-unitary uncertainty scan.  The backend is selected in
``nesstur._core.__init__``.
"""

from __future__ import annotations

import numpy as np

from ..errors import IntegrationError

# Dormand-Prince 5(4) tableau.  The propagated solution is fifth order; the
# embedded fourth-order solution only feeds the error estimate.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_ERR = _B5 - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def _hermitize(y: np.ndarray, d: int) -> np.ndarray:
    m = y.reshape(d, d)
    return ((m + m.conj().T) / 2).reshape(-1)


def integrate_rk45(gen, y0, t_end, rtol, atol, max_step=np.inf, t_eval=None, herm_dim=0):
    """Integrate dy/dt = gen @ y from t=0 to t_end with an embedded 4/5 pair.

    Parameters
    ----------
    gen : (m, m) complex array
        Constant generator.
    y0 : (m,) complex array
        Initial condition.
    t_eval : ascending float array or None
        If given, results are reported exactly at these times (steps land on
        them); otherwise every accepted step is reported, including t=0.
    herm_dim : int
        If positive, y is re-Hermitized as a herm_dim x herm_dim matrix
        after every accepted step.

    Returns
    -------
    (ts, ys) : float array (n,), complex array (n, m)
    """
    gen = np.ascontiguousarray(gen, dtype=complex)
    y = np.array(y0, dtype=complex).ravel().copy()
    if herm_dim:
        y = _hermitize(y, herm_dim)
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")

    targets = None
    if t_eval is not None:
        targets = np.asarray(t_eval, dtype=float)
        if targets.size == 0 or np.any(np.diff(targets) <= 0):
            raise ValueError("t_eval must be non-empty and strictly ascending")
        if targets[0] < 0 or targets[-1] > t_end * (1 + 1e-12):
            raise ValueError("t_eval must lie within [0, t_end]")

    ts: list[float] = []
    ys: list[np.ndarray] = []
    next_target = 0
    t = 0.0
    if targets is None:
        ts.append(0.0)
        ys.append(y.copy())
    elif targets[0] == 0.0:
        ts.append(0.0)
        ys.append(y.copy())
        next_target = 1

    # First step sized against the generator's scale.
    gen_scale = np.abs(gen).sum(axis=1).max()
    h = min(max_step, t_end, 0.1 / gen_scale if gen_scale > 0 else t_end)

    k = np.empty((7, y.size), dtype=complex)
    t_final = t_end if targets is None else targets[-1]
    while t < t_final * (1 - 1e-15):
        h = min(h, max_step, t_final - t)
        if targets is not None and next_target < targets.size:
            gap = targets[next_target] - t
            if gap <= h * (1 + 1e-12):
                h = gap
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t!r} (h={h!r})")

        k[0] = gen @ y
        for s in range(1, 7):
            k[s] = gen @ (y + h * (_A[s] @ k[:s]))
        y_new = y + h * (_B5 @ k)
        err_vec = h * (_ERR @ k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean(np.abs(err_vec / scale) ** 2))

        if err <= 1.0:
            t = t + h
            if herm_dim:
                y_new = _hermitize(y_new, herm_dim)
            y = y_new
            if targets is None:
                ts.append(t)
                ys.append(y.copy())
            elif next_target < targets.size and t >= targets[next_target] * (1 - 1e-12):
                ts.append(targets[next_target])
                ys.append(y.copy())
                next_target += 1
            factor = _MAX_FACTOR if err == 0 else min(
                _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            )
        else:
            factor = max(_MIN_FACTOR, _SAFETY * err ** -0.2)
        h = h * factor

    return np.array(ts), np.array(ys)


def tur_scan_records(ginibre, basis, energies, pops, mean_cutoff):
    """Per-draw evaluation loop of the Haar scan.

    For each Ginibre sample: orthonormalize into a Haar unitary (QR with the
    R diagonal phase fixed positive), move to the energy eigenbasis, and
    evaluate the two-point-measurement relative work error together with the
    relative entropy of the quenched steady state.

    Returns (lhs, sigma_rel, kept); entries of skipped draws (quench work
    mean below ``mean_cutoff``) are NaN with kept False.
    """
    ginibre = np.asarray(ginibre, dtype=complex)
    basis = np.asarray(basis, dtype=complex)
    energies = np.asarray(energies, dtype=float)
    pops = np.asarray(pops, dtype=float)
    n = ginibre.shape[0]
    lhs = np.full(n, np.nan)
    sigma_rel = np.full(n, np.nan)
    kept = np.zeros(n, dtype=bool)

    log_pops = np.log(pops)
    base_entropy = float(pops @ log_pops)
    d_e = energies[:, None] - energies[None, :]
    d_e2 = d_e * d_e
    e_dot_pops = float(energies @ pops)
    basis_dag = basis.conj().T

    for i in range(n):
        q_mat, r_mat = np.linalg.qr(ginibre[i])
        diag = np.diagonal(r_mat)
        u = q_mat * (diag / np.abs(diag))
        u_eig = basis_dag @ u @ basis
        t_mn = np.abs(u_eig) ** 2
        q = t_mn @ pops
        mean = float(energies @ q) - e_dot_pops
        if abs(mean) < mean_cutoff:
            continue
        second = float(np.sum(t_mn * d_e2 * pops[None, :]))
        kept[i] = True
        lhs[i] = (second - mean * mean) / (mean * mean)
        sigma_rel[i] = base_entropy - float(q @ log_pops)

    return lhs, sigma_rel, kept
