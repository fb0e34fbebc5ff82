"""Hot numeric kernels.

Each kernel is plain Python over numpy arrays and scalars; ``_accel.njit``
compiles it with numba unless ``THERMOHD_NUMBA=0``. Kernels never raise:
they return an integer status so compiled and interpreted paths behave the
same, and callers translate the status into an exception.
"""

import math

import numpy as np

from ._accel import njit

OK = 0
DOMAIN = 1
NONPOSITIVE_T = 2
NONFINITE = 3

# layout of the piston parameter vector
PISTON_PARAMS = ("m", "alpha", "N0", "cv", "R", "T0", "V0", "S0", "r", "F0", "F_amp", "F_omega")


@njit
def piston_rhs(t, y, prm, out):
    """Hamilton-d'Alembert field of the ideal-gas piston, y = (q, p, S)."""
    q = y[0]
    p = y[1]
    S = y[2]
    m = prm[0]
    alpha = prm[1]
    N0 = prm[2]
    cv = prm[3]
    R = prm[4]
    if not q > 0.0:
        return DOMAIN
    T = prm[5] * (prm[6] / (alpha * q)) ** (R / cv) * math.exp((S - prm[7]) / (N0 * cv))
    if not T > 0.0:
        return NONPOSITIVE_T
    v = p / m
    fr = -prm[8] * v
    fext = prm[9] + prm[10] * math.sin(prm[11] * t)
    # -dU/dq = N0 R T / q = pressure * alpha
    out[0] = v
    out[1] = N0 * R * T / q + fext + fr
    out[2] = -(fr * v) / T
    if not (math.isfinite(out[0]) and math.isfinite(out[1]) and math.isfinite(out[2])):
        return NONFINITE
    return OK


@njit
def transfer_exchange(mu, G, flux, dN):
    """Pairwise molar exchange between compartments.

    Fills ``flux[k, l] = J^{k->l} = G[k, l] (mu_k - mu_l)`` for k < l and its
    negative for the reverse direction, ``dN[k] = sum_l J^{l->k}``, and
    returns sum_{k<l} G[k, l] (mu_k - mu_l)^2 (temperature times the
    transfer entropy production).
    """
    K = mu.shape[0]
    for k in range(K):
        dN[k] = 0.0
        flux[k, k] = 0.0
    total = 0.0
    for k in range(K):
        for l in range(k + 1, K):
            d = mu[k] - mu[l]
            j = G[k, l] * d
            flux[k, l] = j
            flux[l, k] = -j
            dN[k] -= j
            dN[l] += j
            total += j * d
    return total


@njit
def mass_action_rates(conc, nu_fwd, nu_bwd, k_fwd, k_bwd, out):
    """J_a = k+_a prod_I c_I^nu'_aI - k-_a prod_I c_I^nu''_aI. Returns status."""
    nr, ns = nu_fwd.shape
    for i in range(ns):
        if conc[i] < 0.0:
            return DOMAIN
    for a in range(nr):
        fwd = k_fwd[a]
        bwd = k_bwd[a]
        for i in range(ns):
            if nu_fwd[a, i] != 0:
                fwd *= conc[i] ** nu_fwd[a, i]
            if nu_bwd[a, i] != 0:
                bwd *= conc[i] ** nu_bwd[a, i]
        out[a] = fwd - bwd
    return OK


@njit
def rk4_step(rhs, t, y, dt, prm, k1, k2, k3, k4, tmp, out):
    """One classical RK4 step of a kernel field; returns a status code."""
    n = y.shape[0]
    s = rhs(t, y, prm, k1)
    if s != OK:
        return s
    for i in range(n):
        tmp[i] = y[i] + 0.5 * dt * k1[i]
    s = rhs(t + 0.5 * dt, tmp, prm, k2)
    if s != OK:
        return s
    for i in range(n):
        tmp[i] = y[i] + 0.5 * dt * k2[i]
    s = rhs(t + 0.5 * dt, tmp, prm, k3)
    if s != OK:
        return s
    for i in range(n):
        tmp[i] = y[i] + dt * k3[i]
    s = rhs(t + dt, tmp, prm, k4)
    if s != OK:
        return s
    for i in range(n):
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not math.isfinite(out[i]):
            return NONFINITE
    return OK


@njit(cache=False)
def rk4_run(rhs, t0, y0, dt, nsteps, stride, prm):
    """Fixed-step RK4 loop recording every ``stride`` steps and the last one.

    Returns (times, states, n_recorded, status); on a nonzero status the
    recorded arrays hold the accepted prefix.
    """
    n = y0.shape[0]
    nrec_max = nsteps // stride + 2
    ts = np.empty(nrec_max)
    ys = np.empty((nrec_max, n))
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    y = y0.copy()
    ynew = np.empty(n)
    ts[0] = t0
    ys[0, :] = y
    nrec = 1
    status = OK
    for i in range(nsteps):
        t = t0 + i * dt
        status = rk4_step(rhs, t, y, dt, prm, k1, k2, k3, k4, tmp, ynew)
        if status != OK:
            break
        for j in range(n):
            y[j] = ynew[j]
        if (i + 1) % stride == 0 or i + 1 == nsteps:
            ts[nrec] = t0 + (i + 1) * dt
            ys[nrec, :] = y
            nrec += 1
    return ts, ys, nrec, status
