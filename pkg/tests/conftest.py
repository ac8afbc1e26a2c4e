import numpy as np
import pytest

from seqrate import SourceModel, solve


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger JIT compilation once so timed tests measure algorithm time."""
    import seqrate as sq

    model = SourceModel(n=4, p=1, alpha=[0.5, 1.0, 1.5, 0.2],
                        sigma_w2=[1.0] * 4, sigma_x1_2=1.0)
    sched = solve(model, 0.5)
    sq.simulate_estimation(model, sched, "gaussian-test-channel", 8, 0)
    sq.simulate_estimation(model, sched, "scalar-ecdq", 8, 0)
    cm = sq.ControlModel(source=model, beta=[1.0] * 4, Q=[1.0] * 4, N=[1.0] * 4)
    sq.simulate_control(cm, sched, "gaussian-test-channel", 8, 0)
    sq.simulate_control(cm, sched, "scalar-ecdq", 8, 0)


@pytest.fixture
def unit_n2():
    return SourceModel(n=2, p=1, alpha=[1.0, 1.0], sigma_w2=[1.0, 1.0], sigma_x1_2=1.0)


@pytest.fixture
def fig3_model():
    rng = np.random.default_rng(20200616)
    return SourceModel(n=200, p=1, alpha=rng.uniform(0.0, 2.0, 200),
                       sigma_w2=np.ones(200), sigma_x1_2=1.0)
