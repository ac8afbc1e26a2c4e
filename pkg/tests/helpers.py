"""Shared test oracles and instance generators.

The waterfilling oracle here deliberately re-implements the allocation with
different arithmetic (the raw (sqrt(1+2b^2/theta)-1)/(2b^2) candidate form,
vectorized over a theta grid) so that agreement with the package is a real
cross-check rather than a tautology.
"""

from __future__ import annotations

import numpy as np

from seqrate import ControlModel, SourceModel


def oracle_mean_distortion(alpha, sigma_w2, sigma_x1_2, thetas):
    """Average distortion of the clamped allocation, vectorized over thetas."""
    th = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    n = len(alpha)
    lam = np.full(th.shape, float(sigma_x1_2))
    acc = np.zeros(th.shape)
    for t in range(n):
        if t < n - 1:
            b2 = alpha[t] ** 2 / sigma_w2[t]
            if b2 > 0.0:
                xi = (np.sqrt(1.0 + 2.0 * b2 / th) - 1.0) / (2.0 * b2)
            else:
                xi = 1.0 / (2.0 * th)
        else:
            xi = 1.0 / (2.0 * th)
        D = np.minimum(xi, lam)
        acc += D
        if t < n - 1:
            lam = alpha[t] ** 2 * D + sigma_w2[t]
    return acc / n


def grid_search_theta(model: SourceModel, D_target: float,
                      points: int = 10**6, refine_points: int = 10**4):
    """Exhaustive theta search: coarse grid over a verified bracket, refined.

    Returns (theta, mean_distortion_at_theta).
    """
    alpha, sw2, sx2 = model.alpha, model.sigma_w2, model.sigma_x1_2
    hi = 0.5 / D_target
    lo = hi
    while oracle_mean_distortion(alpha, sw2, sx2, lo)[0] < D_target:
        lo *= 0.25
    grid = np.linspace(lo, hi, points)
    mean_D = oracle_mean_distortion(alpha, sw2, sx2, grid)
    cross = int(np.argmax(mean_D <= D_target))
    lo2 = grid[max(cross - 1, 0)]
    hi2 = grid[min(cross + 1, points - 1)]
    fine = np.linspace(lo2, hi2, refine_points)
    mean_fine = oracle_mean_distortion(alpha, sw2, sx2, fine)
    best = int(np.argmin(np.abs(mean_fine - D_target)))
    return float(fine[best]), float(mean_fine[best])


def random_source(rng: np.random.Generator, n_max: int = 16,
                  alpha_low: float = 0.0, alpha_high: float = 2.0) -> SourceModel:
    n = int(rng.integers(2, n_max + 1))
    return SourceModel(
        n=n,
        p=1,
        alpha=rng.uniform(alpha_low, alpha_high, n),
        sigma_w2=rng.uniform(0.3, 3.0, n),
        sigma_x1_2=float(rng.uniform(0.3, 3.0)),
    )


def zero_rate_mean(model: SourceModel) -> float:
    lam = model.sigma_x1_2
    acc = 0.0
    for t in range(model.n):
        acc += lam
        if t < model.n - 1:
            lam = model.alpha[t] ** 2 * lam + model.sigma_w2[t]
    return acc / model.n


def random_budget(rng: np.random.Generator, model: SourceModel) -> float:
    return float(rng.uniform(0.15, 0.85)) * zero_rate_mean(model)


def random_control(rng: np.random.Generator, n_max: int = 12) -> ControlModel:
    n = int(rng.integers(2, n_max + 1))
    sign = rng.choice([-1.0, 1.0], n)
    source = SourceModel(
        n=n, p=1,
        alpha=sign * rng.uniform(0.2, 2.0, n),
        sigma_w2=rng.uniform(0.3, 2.0, n),
        sigma_x1_2=float(rng.uniform(0.3, 2.0)),
    )
    return ControlModel(
        source=source,
        beta=rng.choice([-1.0, 1.0], n) * rng.uniform(0.3, 2.0, n),
        Q=rng.uniform(0.1, 2.0, n),
        N=rng.uniform(0.1, 2.0, n),
    )


def rates_above_floor(rng: np.random.Generator, cm: ControlModel) -> np.ndarray:
    floors = np.maximum(0.0, np.log2(np.abs(cm.source.alpha)))
    return floors + rng.uniform(0.2, 1.5, cm.n)
