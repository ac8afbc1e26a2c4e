"""Reverse-waterfilling rate allocation under an average distortion budget.

The allocation equalizes the marginal rate cost of distortion across time by
tuning a single Lagrange multiplier theta: each step receives the candidate
water level xi_t(theta), clamped at the prediction-error variance lam_t
(zero rate), and lam propagates forward through the source recursion.  The
average distortion produced by a forward pass is non-increasing in theta,
so the budget is met by bisection on theta over an adaptively expanded
bracket.  Also provides the steady-state rate limit, the decoupled
distortion-rate inverse used by the control-cost bounds, and a convergence
probe for time-invariant sources.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .model import Schedule, SourceModel, ValidationError, validate_source

DEFAULT_EPS = 1e-9
MAX_BISECTIONS = 200
MAX_EXPANSIONS = 1024


class InfeasibleRateError(ValueError):
    """A requested rate sits at or below the stability floor log2|alpha|."""


class NonConvergenceError(RuntimeError):
    """The multiplier search failed; carries bracket diagnostics."""


def xi(t: int, theta: float, model: SourceModel) -> float:
    """Water-level candidate distortion at 1-based step t.

    For t < n this is (sqrt(1 + 2 b^2/theta) - 1) / (2 b^2) with
    b^2 = alpha_t^2 / sigma_w2_t, evaluated in the cancellation-free form
    1 / (theta (1 + sqrt(1 + 2 b^2/theta))); for t = n, and in the b^2 = 0
    limit, it is 1 / (2 theta).
    """
    validate_source(model)
    if not theta > 0.0:
        raise ValidationError(f"theta must be > 0, got {theta}")
    if not 1 <= t <= model.n:
        raise ValidationError(f"step {t} outside 1..{model.n}")
    if t == model.n:
        return 0.5 / theta
    b2 = model.alpha[t - 1] ** 2 / model.sigma_w2[t - 1]
    return 1.0 / (theta * (1.0 + math.sqrt(1.0 + 2.0 * b2 / theta)))


def _rates(lam: np.ndarray, D: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 0.5 * np.log2(lam / D))


def forward_pass(model: SourceModel, theta: float,
                 D_target: Optional[float] = None) -> Schedule:
    """Run the clamped allocation once at a fixed multiplier."""
    validate_source(model)
    if not (np.isfinite(theta) and theta > 0.0):
        raise ValidationError(f"theta must be finite and > 0, got {theta}")
    lam, D = _kernels.waterfill_forward(
        model.alpha, model.sigma_w2, model.sigma_x1_2, float(theta)
    )
    residual = None if D_target is None else abs(float(np.mean(D)) - D_target)
    return Schedule(
        D=D, lam=lam, R=_rates(lam, D), theta=theta,
        D_target=D_target, iterations=0, residual=residual,
    )


def _zero_rate_schedule(model: SourceModel, D_target: float) -> Schedule:
    lam = np.empty(model.n)
    lam_t = model.sigma_x1_2
    for t in range(model.n):
        lam[t] = lam_t
        if t < model.n - 1:
            lam_t = model.alpha[t] ** 2 * lam_t + model.sigma_w2[t]
    return Schedule(
        D=lam.copy(), lam=lam, R=np.zeros(model.n), theta=0.0,
        D_target=D_target, iterations=0,
        residual=abs(float(np.mean(lam)) - D_target), zero_rate=True,
    )


def solve(model: SourceModel, D_target: float, eps: float = DEFAULT_EPS) -> Schedule:
    """Find the schedule whose average distortion meets D_target within eps.

    Returns the zero-rate schedule (D = lam everywhere, flagged) when the
    budget already exceeds the average source uncertainty.  Raises
    NonConvergenceError with bracket diagnostics if the search stalls,
    which cannot happen for validated inputs.
    """
    validate_source(model)
    if not (np.isfinite(D_target) and D_target > 0.0):
        raise ValidationError(f"D_target must be finite and > 0, got {D_target}")
    if not (np.isfinite(eps) and eps > 0.0):
        raise ValidationError(f"eps must be finite and > 0, got {eps}")

    zero_rate = _zero_rate_schedule(model, D_target)
    if float(np.mean(zero_rate.D)) <= D_target:
        return zero_rate

    def mean_D(theta: float) -> float:
        _, D = _kernels.waterfill_forward(
            model.alpha, model.sigma_w2, model.sigma_x1_2, theta
        )
        return float(np.mean(D))

    # xi_t <= 1/(2 theta), so theta = 1/(2 D_target) already satisfies the
    # budget from below; expand the bracket downward for the other side.
    theta_hi = 0.5 / D_target
    f_hi = mean_D(theta_hi)
    if abs(f_hi - D_target) <= eps:
        return _finish(model, theta_hi, D_target, 0)
    theta_lo = theta_hi
    f_lo = f_hi
    expansions = 0
    while f_lo < D_target:
        theta_lo *= 0.5
        f_lo = mean_D(theta_lo)
        expansions += 1
        if expansions > MAX_EXPANSIONS:
            raise NonConvergenceError(
                "failed to bracket the multiplier: "
                f"theta_lo={theta_lo:.3e} gives mean distortion {f_lo:.6e} "
                f"< target {D_target:.6e} after {expansions} expansions"
            )
    if abs(f_lo - D_target) <= eps:
        return _finish(model, theta_lo, D_target, 0)

    for iteration in range(1, MAX_BISECTIONS + 1):
        theta_mid = 0.5 * (theta_lo + theta_hi)
        f_mid = mean_D(theta_mid)
        if abs(f_mid - D_target) <= eps:
            return _finish(model, theta_mid, D_target, iteration)
        if f_mid > D_target:
            theta_lo = theta_mid
        else:
            theta_hi = theta_mid
    raise NonConvergenceError(
        f"bisection did not reach |mean(D) - {D_target}| <= {eps} within "
        f"{MAX_BISECTIONS} iterations; bracket [{theta_lo:.17g}, {theta_hi:.17g}], "
        f"last residual {abs(f_mid - D_target):.3e}"
    )


def _finish(model: SourceModel, theta: float, D_target: float, iterations: int) -> Schedule:
    lam, D = _kernels.waterfill_forward(
        model.alpha, model.sigma_w2, model.sigma_x1_2, theta
    )
    return Schedule(
        D=D, lam=lam, R=_rates(lam, D), theta=theta, D_target=D_target,
        iterations=iterations, residual=abs(float(np.mean(D)) - D_target),
    )


def steady_state_rate(alpha: float, sigma_w2: float, D: float) -> float:
    """Infinite-horizon rate max(0, log2(alpha^2 + sigma_w2/D) / 2) in bits."""
    if not D > 0.0:
        raise ValidationError(f"D must be > 0, got {D}")
    if not sigma_w2 > 0.0:
        raise ValidationError(f"sigma_w2 must be > 0, got {sigma_w2}")
    return max(0.0, 0.5 * math.log2(alpha * alpha + sigma_w2 / D))


def distortion_rate(R: float, t: int, model: SourceModel) -> float:
    """Decoupled per-step distortion attained at rate R bits.

    sigma_w2_t / (2^{2R} - alpha_t^2) for t < n, requiring the rate to
    exceed the stability floor log2|alpha_t|; 2^{-2R} at the terminal step.
    Note this decoupled form is the inverse of R(D) = log2(alpha^2 +
    sigma_w2/D)/2, not of the coupled schedule rates.
    """
    validate_source(model)
    if not 1 <= t <= model.n:
        raise ValidationError(f"step {t} outside 1..{model.n}")
    if not (np.isfinite(R) and R >= 0.0):
        raise ValidationError(f"rate must be finite and >= 0, got {R}")
    if t == model.n:
        return 2.0 ** (-2.0 * R)
    a2 = model.alpha[t - 1] ** 2
    denom = 2.0 ** (2.0 * R) - a2
    if denom <= 0.0:
        floor = 0.5 * math.log2(a2)
        raise InfeasibleRateError(
            f"rate {R} bits at step {t} is at or below the stability floor "
            f"{floor:.6f} bits (|alpha| = {math.sqrt(a2):.6f})"
        )
    return model.sigma_w2[t - 1] / denom


def decoupled_rates(schedule: Schedule, model: SourceModel) -> np.ndarray:
    """Reattribute a schedule's distortions to per-step decoupled rates.

    These are log2(alpha_t^2 + sigma_w2_t/D_t)/2 for t < n and
    -log2(D_n)/2 at the terminal step; distortion_rate inverts them
    exactly, step by step.
    """
    validate_source(model)
    D = schedule.D
    r = np.empty(model.n)
    if model.n > 1:
        r[:-1] = 0.5 * np.log2(model.alpha[:-1] ** 2 + model.sigma_w2[:-1] / D[:-1])
    r[-1] = -0.5 * np.log2(D[-1])
    return r


def steady_state_schedule_limit(model: SourceModel, D_target: float,
                                n_values: Sequence[int],
                                eps: float = DEFAULT_EPS) -> np.ndarray:
    """Average schedule rate at each horizon, for convergence probes.

    The model must be time-invariant; each requested horizon is solved
    independently and the average rate (1/n) sum R_t reported.
    """
    validate_source(model)
    if not model.time_invariant:
        raise ValidationError("steady-state probe requires constant alpha and sigma_w2")
    alpha = float(model.alpha[0])
    sw2 = float(model.sigma_w2[0])
    out = np.empty(len(n_values))
    for i, n in enumerate(n_values):
        sub = SourceModel(
            n=int(n), p=model.p,
            alpha=np.full(int(n), alpha), sigma_w2=np.full(int(n), sw2),
            sigma_x1_2=model.sigma_x1_2,
        )
        sched = solve(sub, D_target, eps=eps)
        out[i] = float(np.mean(sched.R))
    return out
