"""Hot numeric kernels, numba-compiled with a pure-numpy fallback.

Backend selection: the njit kernels are used when numba imports cleanly,
unless the environment variable SEQRATE_NO_NUMBA is set to 1/true/yes, in
which case the vectorized numpy implementations take over.  Both variants
of every kernel are importable regardless of the active backend so that
tests and benchmarks can compare them; the module-level names without a
suffix are the active bindings.

The two implementations mirror each other operation for operation, so the
per-sample outputs agree bitwise: reductions are deliberately kept out of
the kernels and done identically by the callers.

Simulation kernels consume pre-generated standard normal / uniform(0,1)
draws so that random-stream handling stays in one place (the simulator)
and the kernels are pure functions.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("SEQRATE_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag in {"1", "true", "yes"}

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled by SEQRATE_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    njit = None
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# reverse-waterfilling forward pass
# ---------------------------------------------------------------------------

def waterfill_forward_py(alpha, sigma_w2, sigma_x1_2, theta):
    """One forward pass of the distortion allocation at multiplier theta.

    Returns (lam, D).  lam[0] = sigma_x1_2 and lam[t+1] = alpha[t]^2 D[t]
    + sigma_w2[t]; each D[t] is the water-level candidate clamped at lam[t].
    The candidate for t < n-1 uses the cancellation-free form
    1 / (theta (1 + sqrt(1 + 2 b^2 / theta))) with b^2 = alpha^2 / sigma_w2,
    which hits the b^2 = 0 limit 1/(2 theta) without a branch; the terminal
    candidate is 1/(2 theta).
    """
    n = alpha.shape[0]
    lam = np.empty(n, dtype=np.float64)
    D = np.empty(n, dtype=np.float64)
    lam_t = sigma_x1_2
    for t in range(n):
        lam[t] = lam_t
        if t < n - 1:
            b2 = alpha[t] * alpha[t] / sigma_w2[t]
            xi = 1.0 / (theta * (1.0 + np.sqrt(1.0 + 2.0 * b2 / theta)))
        else:
            xi = 0.5 / theta
        d = xi if xi <= lam_t else lam_t
        D[t] = d
        if t < n - 1:
            lam_t = alpha[t] * alpha[t] * d + sigma_w2[t]
    return lam, D


# ---------------------------------------------------------------------------
# DPCM simulation, estimation loop
#
# Per sample: evolve the source, form the innovation against the decoder
# prediction, pass it through either the Gaussian test channel or a scalar
# subtractive-dither quantizer, and record squared reconstruction errors,
# squared innovations, and (ECDQ only) quantizer indices.
# ---------------------------------------------------------------------------

def _sim_estimation_loop(alpha, sigma_w2, sigma_x1_2, D, h, g_x1, g_w, noise, ecdq):
    """noise holds N(0,1) draws (gaussian mode) or U(0,1) draws (ecdq mode)."""
    m = g_x1.shape[0]
    n = alpha.shape[0]
    err2 = np.empty((m, n), dtype=np.float64)
    innov2 = np.empty((m, n), dtype=np.float64)
    idx = np.zeros((m, n), dtype=np.int64)
    sx1 = np.sqrt(sigma_x1_2)
    for i in range(m):
        x = sx1 * g_x1[i]
        y_prev = 0.0
        for t in range(n):
            if t > 0:
                x = alpha[t - 1] * x + np.sqrt(sigma_w2[t - 1]) * g_w[i, t - 1]
            pred = alpha[t - 1] * y_prev if t > 0 else 0.0
            xhat = x - pred
            innov2[i, t] = xhat * xhat
            ht = h[t]
            if ht > 0.0:
                sq = np.sqrt(ht)
                if ecdq:
                    delta = np.sqrt(12.0 * D[t])
                    z = delta * (noise[i, t] - 0.5)
                    q = np.int64(np.rint((sq * xhat + z) / delta))
                    idx[i, t] = q
                    yhat = sq * (q * delta - z)
                else:
                    yhat = ht * xhat + sq * (np.sqrt(D[t]) * noise[i, t])
            else:
                yhat = 0.0
            y = yhat + pred
            e = x - y
            err2[i, t] = e * e
            y_prev = y
    return err2, innov2, idx


def sim_estimation_py(alpha, sigma_w2, sigma_x1_2, D, h, g_x1, g_w, noise, ecdq):
    """Vectorized-across-samples variant of the estimation loop."""
    m = g_x1.shape[0]
    n = alpha.shape[0]
    err2 = np.empty((m, n), dtype=np.float64)
    innov2 = np.empty((m, n), dtype=np.float64)
    idx = np.zeros((m, n), dtype=np.int64)
    x = np.sqrt(sigma_x1_2) * g_x1
    y_prev = np.zeros(m, dtype=np.float64)
    for t in range(n):
        if t > 0:
            x = alpha[t - 1] * x + np.sqrt(sigma_w2[t - 1]) * g_w[:, t - 1]
            pred = alpha[t - 1] * y_prev
        else:
            pred = np.zeros(m, dtype=np.float64)
        xhat = x - pred
        innov2[:, t] = xhat * xhat
        ht = h[t]
        if ht > 0.0:
            sq = np.sqrt(ht)
            if ecdq:
                delta = np.sqrt(12.0 * D[t])
                z = delta * (noise[:, t] - 0.5)
                q = np.rint((sq * xhat + z) / delta).astype(np.int64)
                idx[:, t] = q
                yhat = sq * (q * delta - z)
            else:
                yhat = ht * xhat + sq * (np.sqrt(D[t]) * noise[:, t])
        else:
            yhat = np.zeros(m, dtype=np.float64)
        y = yhat + pred
        e = x - y
        err2[:, t] = e * e
        y_prev = y
    return err2, innov2, idx


# ---------------------------------------------------------------------------
# DPCM simulation, closed-loop control
#
# Same coding path; the encoder innovation additionally subtracts the effect
# of the previous control input, the decoder adds it back, and the input is
# u_t = -L_t y_t.  Records the per-sample quadratic cost.
# ---------------------------------------------------------------------------

def _sim_control_loop(alpha, beta, sigma_w2, sigma_x1_2, D, h, L, Q, N,
                      g_x1, g_w, noise, ecdq):
    m = g_x1.shape[0]
    n = alpha.shape[0]
    err2 = np.empty((m, n), dtype=np.float64)
    innov2 = np.empty((m, n), dtype=np.float64)
    idx = np.zeros((m, n), dtype=np.int64)
    cost = np.zeros(m, dtype=np.float64)
    sx1 = np.sqrt(sigma_x1_2)
    for i in range(m):
        x = sx1 * g_x1[i]
        y_prev = 0.0
        u_prev = 0.0
        c = 0.0
        for t in range(n):
            if t > 0:
                x = alpha[t - 1] * x + beta[t - 1] * u_prev + np.sqrt(sigma_w2[t - 1]) * g_w[i, t - 1]
                pred = alpha[t - 1] * y_prev + beta[t - 1] * u_prev
            else:
                pred = 0.0
            xhat = x - pred
            innov2[i, t] = xhat * xhat
            ht = h[t]
            if ht > 0.0:
                sq = np.sqrt(ht)
                if ecdq:
                    delta = np.sqrt(12.0 * D[t])
                    z = delta * (noise[i, t] - 0.5)
                    q = np.int64(np.rint((sq * xhat + z) / delta))
                    idx[i, t] = q
                    yhat = sq * (q * delta - z)
                else:
                    yhat = ht * xhat + sq * (np.sqrt(D[t]) * noise[i, t])
            else:
                yhat = 0.0
            y = yhat + pred
            e = x - y
            err2[i, t] = e * e
            u = -L[t] * y
            if t < n - 1:
                c += Q[t] * x * x + N[t] * u * u
            else:
                c += Q[t] * x * x
            y_prev = y
            u_prev = u
        cost[i] = c
    return err2, innov2, idx, cost


def sim_control_py(alpha, beta, sigma_w2, sigma_x1_2, D, h, L, Q, N,
                   g_x1, g_w, noise, ecdq):
    m = g_x1.shape[0]
    n = alpha.shape[0]
    err2 = np.empty((m, n), dtype=np.float64)
    innov2 = np.empty((m, n), dtype=np.float64)
    idx = np.zeros((m, n), dtype=np.int64)
    cost = np.zeros(m, dtype=np.float64)
    x = np.sqrt(sigma_x1_2) * g_x1
    y_prev = np.zeros(m, dtype=np.float64)
    u_prev = np.zeros(m, dtype=np.float64)
    for t in range(n):
        if t > 0:
            x = alpha[t - 1] * x + beta[t - 1] * u_prev + np.sqrt(sigma_w2[t - 1]) * g_w[:, t - 1]
            pred = alpha[t - 1] * y_prev + beta[t - 1] * u_prev
        else:
            pred = np.zeros(m, dtype=np.float64)
        xhat = x - pred
        innov2[:, t] = xhat * xhat
        ht = h[t]
        if ht > 0.0:
            sq = np.sqrt(ht)
            if ecdq:
                delta = np.sqrt(12.0 * D[t])
                z = delta * (noise[:, t] - 0.5)
                q = np.rint((sq * xhat + z) / delta).astype(np.int64)
                idx[:, t] = q
                yhat = sq * (q * delta - z)
            else:
                yhat = ht * xhat + sq * (np.sqrt(D[t]) * noise[:, t])
        else:
            yhat = np.zeros(m, dtype=np.float64)
        y = yhat + pred
        e = x - y
        err2[:, t] = e * e
        u = -L[t] * y
        if t < n - 1:
            cost += Q[t] * x * x + N[t] * u * u
        else:
            cost += Q[t] * x * x
        y_prev = y
        u_prev = u
    return err2, innov2, idx, cost


if HAVE_NUMBA:
    waterfill_forward_njit = njit(cache=True)(waterfill_forward_py)
    sim_estimation_njit = njit(cache=True)(_sim_estimation_loop)
    sim_control_njit = njit(cache=True)(_sim_control_loop)

    waterfill_forward = waterfill_forward_njit
    sim_estimation = sim_estimation_njit
    sim_control = sim_control_njit
else:
    waterfill_forward_njit = None
    sim_estimation_njit = None
    sim_control_njit = None

    waterfill_forward = waterfill_forward_py
    sim_estimation = sim_estimation_py
    sim_control = sim_control_py


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
