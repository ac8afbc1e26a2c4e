"""Riccati recursions and rate-constrained control cost bounds.

The certainty-equivalent controller u_t = -L_t y_t is optimal for fixed
coding policies, and its cost splits into the communication-free floor
sigma_w2_t K_t plus a distortion term alpha_t beta_t L_t K_{t+1} D_t.
Plugging the decoupled distortion-rate curve into that split gives the
per-step lower bound; inflating the curve by 4^(1/p) (2 pi e G_p) gives the
dithered-quantization upper bound.  The inverse map from cost to rate makes
the stability floor log2|alpha_t| explicit: finite cost above the floor is
impossible at lower rates, and infeasible rates raise rather than clamp so
the physics stays visible to callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import gap_of, validate_lattice
from .model import (
    ControlModel,
    LatticeSpec,
    LqgSolution,
    Schedule,
    ValidationError,
    validate_control,
)
from .waterfill import InfeasibleRateError, distortion_rate


def riccati(cm: ControlModel) -> tuple[np.ndarray, np.ndarray]:
    """Backward Riccati recursion; returns (K, L) with K[n+1] = 0.

    K_t = alpha_t^2 (K_{t+1} - K_{t+1} beta_t^2 (beta_t^2 K_{t+1} + N_t)^{-1}
    K_{t+1}) + Q_t and L_t = (beta_t^2 K_{t+1} + N_t)^{-1} beta_t K_{t+1}
    alpha_t, as per-dimension scalars.  N_t > 0 keeps the inverse defined.
    """
    validate_control(cm)
    n = cm.n
    alpha, beta = cm.source.alpha, cm.beta
    Q, N = cm.Q, cm.N
    K = np.zeros(n + 1)
    L = np.zeros(n)
    for t in range(n - 1, -1, -1):
        Kn = K[t + 1]
        denom = beta[t] ** 2 * Kn + N[t]
        K[t] = alpha[t] ** 2 * (Kn - Kn * beta[t] ** 2 / denom * Kn) + Q[t]
        L[t] = beta[t] * Kn * alpha[t] / denom
    return K, L


def _distortion_coeff(cm: ControlModel, K: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Per-step weight alpha_t beta_t L_t K_{t+1} of the distortion term."""
    return cm.source.alpha * cm.beta * L * K[1:]


def _check_floors(cm: ControlModel, rates: np.ndarray, inflation: float,
                  label: str) -> None:
    alpha = cm.source.alpha
    bad = []
    for t in range(cm.n - 1):
        if 2.0 ** (2.0 * rates[t]) <= inflation * alpha[t] ** 2:
            floor = 0.5 * math.log2(inflation * alpha[t] ** 2)
            bad.append((t + 1, rates[t], floor))
    if bad:
        detail = "; ".join(
            f"step {t}: rate {r:.6f} <= floor {f:.6f}" for t, r, f in bad
        )
        raise InfeasibleRateError(f"infeasible rates for the {label} bound: {detail}")


def cost_lower(cm: ControlModel, rates: np.ndarray) -> np.ndarray:
    """Per-step cost lower bound at the given schedule rates.

    sigma_w2_t K_t + alpha_t beta_t L_t K_{t+1} D(R_t), where D(R) is the
    decoupled distortion-rate value; the terminal step is sigma_w2_n K_n
    because K_{n+1} = 0 kills the distortion term.
    """
    validate_control(cm)
    rates = np.asarray(rates, dtype=np.float64)
    if rates.shape != (cm.n,):
        raise ValidationError(f"rates must have shape ({cm.n},), got {rates.shape}")
    _check_floors(cm, rates, 1.0, "lower")
    K, L = riccati(cm)
    coeff = _distortion_coeff(cm, K, L)
    out = cm.source.sigma_w2 * K[:-1]
    for t in range(cm.n - 1):
        out[t] += coeff[t] * distortion_rate(rates[t], t + 1, cm.source)
    return out


def _inflation(spec: LatticeSpec) -> float:
    return 4.0 ** (1.0 / spec.p) * (2.0 * math.pi * math.e * spec.g)


def cost_upper(cm: ControlModel, rates_op: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Per-step achievable cost at the given operational rates.

    Same split as the lower bound with the distortion term inflated to
    c sigma_w2_t / (2^{2 R_t} - c alpha_t^2), c = 4^(1/p) (2 pi e G_p);
    the terminal step is again sigma_w2_n K_n.
    """
    validate_control(cm)
    validate_lattice(spec)
    rates_op = np.asarray(rates_op, dtype=np.float64)
    if rates_op.shape != (cm.n,):
        raise ValidationError(f"rates must have shape ({cm.n},), got {rates_op.shape}")
    c = _inflation(spec)
    _check_floors(cm, rates_op, c, "upper")
    K, L = riccati(cm)
    coeff = _distortion_coeff(cm, K, L)
    sw2 = cm.source.sigma_w2
    out = sw2 * K[:-1]
    for t in range(cm.n - 1):
        denom = 2.0 ** (2.0 * rates_op[t]) - c * cm.source.alpha[t] ** 2
        out[t] += coeff[t] * c * sw2[t] / denom
    return out


def rate_cost(cm: ControlModel, lqg_star: float, t: int,
              kl: Optional[tuple[np.ndarray, np.ndarray]] = None) -> float:
    """Rate (bits) needed for per-step cost lqg_star at step t < n.

    log2(alpha_t^2 + alpha_t beta_t L_t K_{t+1} sigma_w2_t /
    (lqg_star - sigma_w2_t K_t)) / 2.  Inverts the cost lower bound, and
    for |alpha_t| > 1 stays strictly above the stability floor
    log2|alpha_t| for any finite cost above the communication-free floor.
    """
    validate_control(cm)
    if not 1 <= t < cm.n:
        raise ValidationError(
            f"rate-cost inverse is defined for 1 <= t < n; the terminal rate is "
            f"independent of the terminal cost (got t = {t}, n = {cm.n})"
        )
    K, L = riccati(cm) if kl is None else kl
    floor_cost = cm.source.sigma_w2[t - 1] * K[t - 1]
    if not lqg_star > floor_cost:
        raise ValidationError(
            f"cost {lqg_star} at step {t} is at or below the communication-free "
            f"floor {floor_cost}"
        )
    coeff = cm.source.alpha[t - 1] * cm.beta[t - 1] * L[t - 1] * K[t]
    if coeff == 0.0:
        raise ValidationError(
            f"rate-cost inverse undefined at step {t}: the distortion term "
            "vanishes (alpha, Q, or K_{t+1} is zero)"
        )
    val = cm.source.alpha[t - 1] ** 2 + coeff * cm.source.sigma_w2[t - 1] / (lqg_star - floor_cost)
    return 0.5 * math.log2(val)


def rate_cost_via_weights(cm: ControlModel, lqg_star: float, t: int,
                          kl: Optional[tuple[np.ndarray, np.ndarray]] = None) -> float:
    """Gain-free form of the rate-cost inverse, using the weights directly.

    Substituting L_t = alpha_t beta_t K_{t+1} / (beta_t^2 K_{t+1} + N_t)
    gives log2(alpha_t^2 (1 + (beta_t^2 K_{t+1}^2 sigma_w2_t /
    (beta_t^2 K_{t+1} + N_t)) / (lqg_star - sigma_w2_t K_t))) / 2.  Must
    agree with rate_cost to high precision; requires alpha_t != 0.
    """
    validate_control(cm)
    if not 1 <= t < cm.n:
        raise ValidationError(f"step {t} outside 1..n-1")
    K, _ = riccati(cm) if kl is None else kl
    a = cm.source.alpha[t - 1]
    if a == 0.0:
        raise ValidationError("gain-free form requires alpha_t != 0")
    b, N = cm.beta[t - 1], cm.N[t - 1]
    sw2 = cm.source.sigma_w2[t - 1]
    floor_cost = sw2 * K[t - 1]
    if not lqg_star > floor_cost:
        raise ValidationError(f"cost {lqg_star} at or below floor {floor_cost}")
    Kn = K[t]
    x = b * b * Kn * Kn * sw2 / (b * b * Kn + N)
    return 0.5 * (math.log2(a * a) + math.log2(1.0 + x / (lqg_star - floor_cost)))


@dataclass(frozen=True)
class SteadyLqg:
    K_inf: float
    L_inf: float
    cost_lower_inf: float
    cost_upper_inf: Optional[float]


def steady_riccati(alpha: float, beta: float, Q: float, N: float) -> tuple[float, float]:
    """Fixed point of the Riccati recursion for constant parameters.

    K_inf is the positive root of beta^2 K^2 + ((1-alpha^2) N - beta^2 Q) K
    - Q N = 0 and L_inf = alpha beta K_inf / (beta^2 K_inf + N).
    """
    if beta == 0.0 or N <= 0.0 or Q < 0.0:
        raise ValidationError("steady Riccati requires beta != 0, N > 0, Q >= 0")
    fbar = (1.0 - alpha * alpha) * N - beta * beta * Q
    K = (math.sqrt(fbar * fbar + 4.0 * beta * beta * Q * N) - fbar) / (2.0 * beta * beta)
    L = alpha * beta * K / (beta * beta * K + N)
    return K, L


def steady_state_lqg(cm: ControlModel, R_inf: float,
                     spec: Optional[LatticeSpec] = None) -> SteadyLqg:
    """Steady-state gains and cost bounds at per-step rate R_inf.

    Both bounds are evaluated at the rate handed in: the lower bound needs
    2^{2R} > alpha^2, the lattice-inflated upper bound needs
    2^{2R} > 4^(1/p) (2 pi e G_p) alpha^2.  Callers that want the upper
    bound at the achievable operational rate add the ECDQ gap to R_inf
    before calling.
    """
    validate_control(cm)
    if not cm.time_invariant:
        raise ValidationError("steady-state bounds require time-invariant parameters")
    alpha = float(cm.source.alpha[0])
    beta = float(cm.beta[0])
    Q, N = float(cm.Q[0]), float(cm.N[0])
    sw2 = float(cm.source.sigma_w2[0])
    K, L = steady_riccati(alpha, beta, Q, N)

    denom = 2.0 ** (2.0 * R_inf) - alpha * alpha
    if denom <= 0.0:
        raise InfeasibleRateError(
            f"steady rate {R_inf} bits at or below the stability floor "
            f"{math.log2(abs(alpha)):.6f} bits"
        )
    lower = sw2 * K + alpha * beta * L * K * sw2 / denom

    upper = None
    if spec is not None:
        validate_lattice(spec)
        c = _inflation(spec)
        denom_up = 2.0 ** (2.0 * R_inf) - c * alpha * alpha
        if denom_up <= 0.0:
            raise InfeasibleRateError(
                f"steady rate {R_inf} bits at or below the inflated floor "
                f"{0.5 * math.log2(c * alpha * alpha):.6f} bits"
            )
        upper = sw2 * K + alpha * beta * L * K * c * sw2 / denom_up
    return SteadyLqg(K_inf=float(K), L_inf=float(L),
                     cost_lower_inf=float(lower), cost_upper_inf=upper)


def bound_table(cm: ControlModel, schedule: Schedule,
                spec: Optional[LatticeSpec] = None,
                prefix_term: bool = True) -> LqgSolution:
    """Assemble the full per-step bound table for a solved schedule.

    cost_lower uses the schedule rates; cost_upper uses those rates plus the
    ECDQ gap of the given lattice (NaN column when no lattice is supplied).
    rate_cost holds the inverse evaluated at cost_lower, which round-trips
    to the schedule rate; the terminal entry is the schedule's terminal rate
    itself, and steps with a vanishing distortion term are NaN.
    """
    validate_control(cm)
    if schedule.n != cm.n:
        raise ValidationError("schedule and control model horizons differ")
    K, L = riccati(cm)
    lower = cost_lower(cm, schedule.R)
    if spec is not None:
        rates_op = schedule.R + gap_of(spec, prefix_term=prefix_term)
        upper = cost_upper(cm, rates_op, spec)
    else:
        upper = np.full(cm.n, np.nan)
    coeff = _distortion_coeff(cm, K, L)
    rc = np.full(cm.n, np.nan)
    for t in range(cm.n - 1):
        if coeff[t] != 0.0 and lower[t] > cm.source.sigma_w2[t] * K[t]:
            rc[t] = rate_cost(cm, float(lower[t]), t + 1, kl=(K, L))
    rc[cm.n - 1] = schedule.R[cm.n - 1]
    return LqgSolution(K=K, L=L, cost_lower=lower, cost_upper=upper, rate_cost=rc)
