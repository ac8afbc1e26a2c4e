"""Parameter containers and allocation results shared by all solvers.

Every quantity is a per-dimension scalar sequence: the parallel system has
identically distributed spatial components, so its diagonal matrices reduce
exactly to scalars and the spatial dimension ``p`` only enters through
quantizer gap terms and the simulator width.  Time indices are 1-based in
the math and 0-based in the arrays; ``alpha[t]`` and ``sigma_w2[t]`` are the
dynamics coefficient and noise variance that drive the step from state t+1
to state t+2 of the 1-based chain.

Rates are in bits (log base 2) throughout.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml


class ValidationError(ValueError):
    """A parameter set violates a model invariant."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def _coerce_array(values, name: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: not a numeric array ({exc})") from exc
    if arr.ndim != 1:
        raise ValidationError(f"{name}: expected a 1-d sequence, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class SourceModel:
    """Parallel time-varying Gauss-Markov source.

    x_{t+1} = alpha[t] * x_t + w_t with Var(w_t) = sigma_w2[t], per spatial
    component, over t = 1..n, with x_1 ~ N(0, sigma_x1_2).
    """

    n: int
    p: int
    alpha: np.ndarray
    sigma_w2: np.ndarray
    sigma_x1_2: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _freeze(_coerce_array(self.alpha, "alpha")))
        object.__setattr__(self, "sigma_w2", _freeze(_coerce_array(self.sigma_w2, "sigma_w2")))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "sigma_x1_2", float(self.sigma_x1_2))

    @property
    def time_invariant(self) -> bool:
        return (
            self.n >= 1
            and np.all(self.alpha == self.alpha[0])
            and np.all(self.sigma_w2 == self.sigma_w2[0])
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "alpha": self.alpha.tolist(),
            "sigma_w2": self.sigma_w2.tolist(),
            "sigma_x1_2": self.sigma_x1_2,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SourceModel":
        missing = {"n", "p", "alpha", "sigma_w2", "sigma_x1_2"} - set(d)
        if missing:
            raise ValidationError(f"source model: missing keys {sorted(missing)}")
        return cls(
            n=d["n"],
            p=d["p"],
            alpha=d["alpha"],
            sigma_w2=d["sigma_w2"],
            sigma_x1_2=d["sigma_x1_2"],
        )


@dataclass(frozen=True, eq=False)
class ControlModel:
    """SourceModel plus input gains and quadratic cost weights.

    x_{t+1} = alpha[t] * x_t + beta[t] * u_t + w_t, with stage cost
    Q[t] x_t^2 + N[t] u_t^2 for t < n and terminal cost Q[n] x_n^2.
    """

    source: SourceModel
    beta: np.ndarray
    Q: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", _freeze(_coerce_array(self.beta, "beta")))
        object.__setattr__(self, "Q", _freeze(_coerce_array(self.Q, "Q")))
        object.__setattr__(self, "N", _freeze(_coerce_array(self.N, "N")))

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def time_invariant(self) -> bool:
        return (
            self.source.time_invariant
            and np.all(self.beta == self.beta[0])
            and np.all(self.Q == self.Q[0])
            and np.all(self.N == self.N[0])
        )

    def to_dict(self) -> dict:
        d = self.source.to_dict()
        d.update(
            beta=self.beta.tolist(),
            Q=self.Q.tolist(),
            N=self.N.tolist(),
        )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ControlModel":
        missing = {"beta", "Q", "N"} - set(d)
        if missing:
            raise ValidationError(f"control model: missing keys {sorted(missing)}")
        source = SourceModel.from_dict(d)
        return cls(source=source, beta=d["beta"], Q=d["Q"], N=d["N"])


@dataclass(frozen=True, eq=False)
class Schedule:
    """Per-step allocation produced by reverse waterfilling.

    ``lam[t]`` is the prediction-error variance, ``D[t]`` the assigned MSE
    distortion, ``R[t] = max(0, log2(lam[t]/D[t])/2)`` the per-dimension rate
    in bits, and ``theta`` the Lagrange multiplier that met the average
    distortion budget ``D_target``.  ``zero_rate`` marks the degenerate
    schedule D = lam returned when the budget exceeds the source uncertainty.
    """

    D: np.ndarray
    lam: np.ndarray
    R: np.ndarray
    theta: float
    D_target: Optional[float]
    iterations: int
    residual: Optional[float]
    zero_rate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "D", _freeze(_coerce_array(self.D, "D")))
        object.__setattr__(self, "lam", _freeze(_coerce_array(self.lam, "lambda")))
        object.__setattr__(self, "R", _freeze(_coerce_array(self.R, "R")))
        object.__setattr__(self, "theta", float(self.theta))
        if self.D_target is not None:
            object.__setattr__(self, "D_target", float(self.D_target))
        if self.residual is not None:
            object.__setattr__(self, "residual", float(self.residual))
        object.__setattr__(self, "iterations", int(self.iterations))
        object.__setattr__(self, "zero_rate", bool(self.zero_rate))

    @property
    def n(self) -> int:
        return self.D.shape[0]

    def to_dict(self) -> dict:
        return {
            "D": self.D.tolist(),
            "lambda": self.lam.tolist(),
            "R": self.R.tolist(),
            "theta": self.theta,
            "D_target": self.D_target,
            "iterations": self.iterations,
            "residual": self.residual,
            "zero_rate": self.zero_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        missing = {"D", "lambda", "R", "theta", "iterations"} - set(d)
        if missing:
            raise ValidationError(f"schedule: missing keys {sorted(missing)}")
        return cls(
            D=d["D"],
            lam=d["lambda"],
            R=d["R"],
            theta=d["theta"],
            D_target=d.get("D_target"),
            iterations=d["iterations"],
            residual=d.get("residual"),
            zero_rate=d.get("zero_rate", False),
        )


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    """Quantizer dimension and its dimensionless normalized second moment."""

    p: int
    mode: str
    g: float

    def __post_init__(self):
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "mode", str(self.mode))
        object.__setattr__(self, "g", float(self.g))

    def to_dict(self) -> dict:
        return {"p": self.p, "mode": self.mode, "g": self.g}


@dataclass(frozen=True, eq=False)
class LqgSolution:
    """Riccati sequence, gains, and per-step cost bounds.

    ``K`` has n+1 entries with K[n+1] = 0 (0-based: K[n] = 0).  Entries of
    ``rate_cost`` are NaN where the rate-cost inverse is undefined (terminal
    step, or cost sitting exactly on the communication-free floor).
    """

    K: np.ndarray
    L: np.ndarray
    cost_lower: np.ndarray
    cost_upper: np.ndarray
    rate_cost: np.ndarray

    def __post_init__(self):
        for name in ("K", "L", "cost_lower", "cost_upper", "rate_cost"):
            object.__setattr__(self, name, _freeze(_coerce_array(getattr(self, name), name)))


def validate_source(model: SourceModel) -> None:
    """Raise ValidationError unless all SourceModel invariants hold."""
    if model.n < 1:
        raise ValidationError(f"n must be >= 1, got {model.n}")
    if model.p < 1:
        raise ValidationError(f"p must be >= 1, got {model.p}")
    if model.alpha.shape[0] != model.n:
        raise ValidationError(
            f"alpha has length {model.alpha.shape[0]}, expected n = {model.n}"
        )
    if model.sigma_w2.shape[0] != model.n:
        raise ValidationError(
            f"sigma_w2 has length {model.sigma_w2.shape[0]}, expected n = {model.n}"
        )
    if not np.all(np.isfinite(model.alpha)):
        raise ValidationError("alpha contains non-finite values")
    if not np.all(np.isfinite(model.sigma_w2)) or np.any(model.sigma_w2 <= 0.0):
        raise ValidationError("sigma_w2 entries must be finite and > 0")
    if not np.isfinite(model.sigma_x1_2) or model.sigma_x1_2 <= 0.0:
        raise ValidationError(f"sigma_x1_2 must be finite and > 0, got {model.sigma_x1_2}")


def validate_control(model: ControlModel) -> None:
    """Raise ValidationError unless all ControlModel invariants hold."""
    validate_source(model.source)
    n = model.source.n
    for name, arr in (("beta", model.beta), ("Q", model.Q), ("N", model.N)):
        if arr.shape[0] != n:
            raise ValidationError(f"{name} has length {arr.shape[0]}, expected n = {n}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{name} contains non-finite values")
    if np.any(model.beta == 0.0):
        raise ValidationError("beta entries must be nonzero (zero input gain)")
    if np.any(model.N <= 0.0):
        raise ValidationError("N entries must be > 0 (non-positive input penalty)")
    if np.any(model.Q < 0.0):
        raise ValidationError("Q entries must be >= 0")


def validate_schedule(schedule: Schedule, model: SourceModel, eps: Optional[float] = None) -> None:
    """Check a Schedule against its defining recursions.

    With ``eps`` given, additionally require the constraint residual of a
    converged (non-degenerate) solve to be within that tolerance.
    """
    validate_source(model)
    n = model.n
    if schedule.n != n or schedule.lam.shape[0] != n or schedule.R.shape[0] != n:
        raise ValidationError("schedule arrays do not match the model horizon")
    D, lam, R = schedule.D, schedule.lam, schedule.R
    if np.any(D <= 0.0):
        raise ValidationError("distortions must be strictly positive")
    if np.any(D > lam * (1.0 + 1e-12)):
        raise ValidationError("distortion exceeds prediction-error variance")
    expected_R = np.maximum(0.0, 0.5 * np.log2(lam / D))
    if not np.allclose(R, expected_R, rtol=0.0, atol=1e-9):
        raise ValidationError("rates inconsistent with max(0, log2(lam/D)/2)")
    if abs(lam[0] - model.sigma_x1_2) > 1e-12 * max(1.0, model.sigma_x1_2):
        raise ValidationError("lambda[1] must equal sigma_x1_2")
    if n > 1:
        expected_lam = model.alpha[:-1] ** 2 * D[:-1] + model.sigma_w2[:-1]
        if not np.allclose(lam[1:], expected_lam, rtol=1e-9, atol=0.0):
            raise ValidationError("lambda recursion violated")
    if eps is not None and not schedule.zero_rate:
        if schedule.residual is None or schedule.residual > eps:
            raise ValidationError(
                f"constraint residual {schedule.residual} exceeds tolerance {eps}"
            )


def to_yaml(obj) -> str:
    """Serialize a model/schedule/report object to the config text format."""
    return yaml.safe_dump(obj.to_dict(), default_flow_style=None, sort_keys=False)


def _load_mapping(text: str) -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"malformed config text: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config text must be a key/value mapping")
    return data


def source_from_yaml(text: str) -> SourceModel:
    return SourceModel.from_dict(_load_mapping(text))


def control_from_yaml(text: str) -> ControlModel:
    return ControlModel.from_dict(_load_mapping(text))


def schedule_from_yaml(text: str) -> Schedule:
    return Schedule.from_dict(_load_mapping(text))
