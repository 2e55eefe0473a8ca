import numpy as np
import pytest

from symot.database import make_session_factory
from symot.flow import init_model
from symot.schemas import TrainConfig

TINY_CONFIG = """\
# small moons -> circles run for command tests
experiment.name = tiny
experiment.seed = 4

data.source.kind = moons
data.source.n = 64
data.target.kind = circles
data.target.n = 64
data.test_n = 48

train.beta = 3e-2
train.epochs = 3
train.batch_size = 32
train.blocks = 2
train.subnet_width = 8
train.log_every = 0

eval.svg = false
eval.correspondence = true
"""


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_model():
    """Two blocks with nonzero subnets, so every parameter matters."""
    return init_model(2, 2, subnet_width=16, seed=3, zero_init=False)


@pytest.fixture
def identity_model():
    return init_model(2, 2, subnet_width=8, seed=0, permutations=[(0, 1), (0, 1)])


@pytest.fixture
def tiny_train_config():
    return TrainConfig(epochs=2, batch_size=16, blocks=2, subnet_width=8, seed=5, log_every=0)


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CONFIG + f"experiment.out_dir = {tmp_path / 'run'}\n")
    return path


@pytest.fixture
def session_factory():
    return make_session_factory("sqlite://")


def numerical_grad(f, array: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar f() with respect to every entry of ``array`` (modified in place)."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        up = f()
        flat[i] = saved - h
        down = f()
        flat[i] = saved
        out[i] = (up - down) / (2 * h)
    return grad
