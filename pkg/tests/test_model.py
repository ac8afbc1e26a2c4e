import numpy as np
import pytest
import yaml

from seqrate import (
    ControlModel,
    Schedule,
    SourceModel,
    ValidationError,
    forward_pass,
    solve,
    validate_control,
    validate_schedule,
    validate_source,
)
from seqrate.model import schedule_from_yaml, source_from_yaml, to_yaml

from helpers import random_budget, random_source


def test_validate_source_ok():
    m = SourceModel(n=2, p=1, alpha=[1.0, 1.0], sigma_w2=[1.0, 1.0], sigma_x1_2=1.0)
    validate_source(m)


def test_validate_source_zero_variance():
    m = SourceModel(n=2, p=1, alpha=[1.0, 1.0], sigma_w2=[0.0, 1.0], sigma_x1_2=1.0)
    with pytest.raises(ValidationError, match="sigma_w2"):
        validate_source(m)


def test_validate_source_length_mismatch():
    m = SourceModel(n=2, p=1, alpha=[1.0, 1.0, 1.0], sigma_w2=[1.0, 1.0], sigma_x1_2=1.0)
    with pytest.raises(ValidationError, match="length"):
        validate_source(m)


def test_validate_source_bad_horizon_and_dim():
    with pytest.raises(ValidationError, match="n must be"):
        validate_source(SourceModel(n=0, p=1, alpha=[], sigma_w2=[], sigma_x1_2=1.0))
    with pytest.raises(ValidationError, match="p must be"):
        validate_source(SourceModel(n=1, p=0, alpha=[1.0], sigma_w2=[1.0], sigma_x1_2=1.0))
    with pytest.raises(ValidationError, match="sigma_x1_2"):
        validate_source(SourceModel(n=1, p=1, alpha=[1.0], sigma_w2=[1.0], sigma_x1_2=0.0))


def _unit_control(n=2, **overrides):
    source = SourceModel(n=n, p=1, alpha=np.ones(n), sigma_w2=np.ones(n), sigma_x1_2=1.0)
    kw = dict(beta=np.ones(n), Q=np.ones(n), N=np.ones(n))
    kw.update(overrides)
    return ControlModel(source=source, **kw)


def test_validate_control_ok():
    validate_control(_unit_control())


def test_validate_control_zero_gain():
    with pytest.raises(ValidationError, match="zero input gain"):
        validate_control(_unit_control(beta=[0.0, 1.0]))


def test_validate_control_bad_penalties():
    with pytest.raises(ValidationError, match="input penalty"):
        validate_control(_unit_control(N=[0.0, 1.0]))
    with pytest.raises(ValidationError, match="Q"):
        validate_control(_unit_control(Q=[-1.0, 1.0]))


def test_validation_never_crashes_on_garbage():
    with pytest.raises(ValidationError):
        SourceModel(n=1, p=1, alpha=["what"], sigma_w2=[1.0], sigma_x1_2=1.0)
    with pytest.raises(ValidationError):
        SourceModel.from_dict({"n": 1})
    m = SourceModel(n=2, p=1, alpha=[np.nan, 1.0], sigma_w2=[1.0, 1.0], sigma_x1_2=1.0)
    with pytest.raises(ValidationError):
        validate_source(m)


def test_source_yaml_round_trip():
    rng = np.random.default_rng(3)
    m = random_source(rng)
    back = source_from_yaml(to_yaml(m))
    assert back.n == m.n and back.p == m.p
    assert np.array_equal(back.alpha, m.alpha)
    assert np.array_equal(back.sigma_w2, m.sigma_w2)
    assert back.sigma_x1_2 == m.sigma_x1_2


def test_schedule_yaml_round_trip_exact():
    rng = np.random.default_rng(4)
    for _ in range(10):
        m = random_source(rng)
        sched = solve(m, random_budget(rng, m))
        validate_schedule(sched, m, eps=1e-9)
        back = schedule_from_yaml(to_yaml(sched))
        assert np.array_equal(back.D, sched.D)
        assert np.array_equal(back.lam, sched.lam)
        assert np.array_equal(back.R, sched.R)
        assert back.theta == sched.theta
        assert back.D_target == sched.D_target
        assert back.iterations == sched.iterations
        assert back.residual == sched.residual
        assert back.zero_rate == sched.zero_rate
        validate_schedule(back, m, eps=1e-9)


def test_control_dict_round_trip_is_flat():
    cm = _unit_control()
    d = cm.to_dict()
    assert set(d) == {"n", "p", "alpha", "sigma_w2", "sigma_x1_2", "beta", "Q", "N"}
    back = ControlModel.from_dict(yaml.safe_load(yaml.safe_dump(d)))
    assert np.array_equal(back.beta, cm.beta)
    assert np.array_equal(back.source.alpha, cm.source.alpha)


def test_validate_schedule_rejects_corruption(unit_n2):
    sched = solve(unit_n2, 0.5)
    bad = Schedule(D=sched.D * 3.0, lam=sched.lam, R=sched.R, theta=sched.theta,
                   D_target=sched.D_target, iterations=sched.iterations,
                   residual=sched.residual)
    with pytest.raises(ValidationError):
        validate_schedule(bad, unit_n2)


def test_forward_pass_residual_reporting(unit_n2):
    with_target = forward_pass(unit_n2, 1.0, D_target=0.5)
    assert with_target.residual == pytest.approx(abs(float(np.mean(with_target.D)) - 0.5))
    without = forward_pass(unit_n2, 1.0)
    assert without.residual is None and without.D_target is None


def test_model_arrays_are_read_only(unit_n2):
    with pytest.raises(ValueError):
        unit_n2.alpha[0] = 5.0
