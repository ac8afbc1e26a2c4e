"""Quantizer second-moment constants and ECDQ rate-gap terms.

G_p denotes the dimensionless normalized second moment of a p-dimensional
quantizer cell: 1/12 for the scalar (p = 1) lattice, bounded below by the
sphere value G(S_p) and above by Zador's bound, and approaching the
Gaussian floor 1/(2 pi e) as p grows.  The achievable coding rate of
entropy-coded dithered quantization exceeds the Gaussian lower bound by
log2(2 pi e G_p)/2 plus 1/p for prefix-free coding, per dimension; the
prefix term can be switched off for synchronized encoder/decoder clocks.
"""

from __future__ import annotations

import math

import numpy as np

from .model import LatticeSpec, Schedule, ValidationError

GAUSSIAN_FLOOR = 1.0 / (2.0 * math.pi * math.e)
SCALAR_G = 1.0 / 12.0
# Leech lattice (p = 24), the best known 24-dimensional quantizer; second
# moment from Conway & Sloane, "Sphere Packings, Lattices and Groups",
# Table 2.3, kept to 6 significant digits.
LEECH_P = 24
LEECH_G = 0.065771

MODES = ("scalar", "leech", "zador-sphere", "zador-upper", "custom")


def _check_p(p: int) -> int:
    p = int(p)
    if p < 1:
        raise ValidationError(f"dimension p must be >= 1, got {p}")
    return p


def g_sphere(p: int) -> float:
    """Second moment of the p-dimensional sphere, Gamma(p/2+1)^(2/p)/((p+2) pi).

    Evaluated through log-gamma so large p cannot overflow.
    """
    p = _check_p(p)
    return math.exp((2.0 / p) * math.lgamma(0.5 * p + 1.0) - math.log((p + 2.0) * math.pi))


def g_zador_upper(p: int) -> float:
    """Zador's upper bound Gamma(p/2+1)^(2/p) Gamma(1+2/p) / (p pi)."""
    p = _check_p(p)
    return math.exp(
        (2.0 / p) * math.lgamma(0.5 * p + 1.0)
        + math.lgamma(1.0 + 2.0 / p)
        - math.log(p * math.pi)
    )


def g_known(mode: str, p: int | None = None) -> float:
    """Tabulated G_p for the quantizers with known constants."""
    if mode == "scalar":
        if p not in (None, 1):
            raise ValidationError(f"scalar lattice is one-dimensional, got p = {p}")
        return SCALAR_G
    if mode == "leech":
        if p not in (None, LEECH_P):
            raise ValidationError(f"Leech lattice requires p = {LEECH_P}, got p = {p}")
        return LEECH_G
    raise ValidationError(f"no tabulated constant for mode {mode!r}")


def make_lattice(mode: str, p: int | None = None, g: float | None = None) -> LatticeSpec:
    """Build a validated LatticeSpec for any supported mode."""
    if mode == "scalar":
        spec = LatticeSpec(p=1, mode=mode, g=g_known("scalar", p))
    elif mode == "leech":
        spec = LatticeSpec(p=LEECH_P, mode=mode, g=g_known("leech", p))
    elif mode == "zador-sphere":
        if p is None:
            raise ValidationError("zador-sphere mode requires a dimension p")
        spec = LatticeSpec(p=p, mode=mode, g=g_sphere(p))
    elif mode == "zador-upper":
        if p is None:
            raise ValidationError("zador-upper mode requires a dimension p")
        spec = LatticeSpec(p=p, mode=mode, g=g_zador_upper(p))
    elif mode == "custom":
        if p is None or g is None:
            raise ValidationError("custom mode requires both p and g")
        spec = LatticeSpec(p=_check_p(p), mode=mode, g=float(g))
    else:
        raise ValidationError(f"unknown lattice mode {mode!r}; choose from {MODES}")
    validate_lattice(spec)
    return spec


def validate_lattice(spec: LatticeSpec) -> None:
    _check_p(spec.p)
    if spec.mode not in MODES:
        raise ValidationError(f"unknown lattice mode {spec.mode!r}")
    if spec.mode == "scalar" and (spec.p != 1 or spec.g != SCALAR_G):
        raise ValidationError("scalar mode forces p = 1 and g = 1/12")
    if spec.g < GAUSSIAN_FLOOR * (1.0 - 1e-12):
        raise ValidationError(
            f"g = {spec.g} is below the Gaussian floor 1/(2*pi*e) = {GAUSSIAN_FLOOR:.9g}"
        )


def ecdq_gap(p: int, g: float, prefix_term: bool = True) -> float:
    """Rate loss of dithered lattice quantization, bits per dimension.

    log2(2 pi e g)/2 measures the divergence of the coding noise from
    Gaussianity; the optional 1/p covers prefix-free (instantaneous)
    coding and is dropped when encoder and decoder clocks are synchronized.
    """
    p = _check_p(p)
    if g < GAUSSIAN_FLOOR * (1.0 - 1e-12):
        raise ValidationError(
            f"g = {g} is below the Gaussian floor {GAUSSIAN_FLOOR:.9g}"
        )
    gap = 0.5 * math.log2(2.0 * math.pi * math.e * g)
    if prefix_term:
        gap += 1.0 / p
    return gap


def gap_of(spec: LatticeSpec, prefix_term: bool = True) -> float:
    return ecdq_gap(spec.p, spec.g, prefix_term=prefix_term)


def upper_rates(schedule: Schedule, spec: LatticeSpec, prefix_term: bool = True) -> np.ndarray:
    """Achievable per-step rates: the schedule rates plus the constant gap."""
    validate_lattice(spec)
    return schedule.R + gap_of(spec, prefix_term=prefix_term)


def steady_upper(alpha: float, sigma_w2: float, D: float, spec: LatticeSpec,
                 prefix_term: bool = True) -> float:
    """Steady-state achievable rate: the rate limit plus the constant gap."""
    from .waterfill import steady_state_rate

    validate_lattice(spec)
    return steady_state_rate(alpha, sigma_w2, D) + gap_of(spec, prefix_term=prefix_term)
