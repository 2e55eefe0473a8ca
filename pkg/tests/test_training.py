import numpy as np
import pytest
from numpy.testing import assert_array_equal

from symot import data
from symot.autodiff import parameter
from symot.errors import DimensionError, NumericError, ParameterError, TrainingAborted
from symot.flow import init_model, save_checkpoint
from symot.kernels import KernelBank
from symot.optim import AdamW, OptimizerState, adamw_step, clip_grad_norm
from symot.schemas import DatasetSpec, TrainConfig
from symot.training import train, write_trace


def test_zero_gradient_without_decay_is_a_no_op():
    p = parameter([1.0, -2.0])
    state = OptimizerState.for_params([p])
    adamw_step([p], [np.zeros(2)], state, lr=0.1)
    assert p.data.tolist() == [1.0, -2.0]
    assert state.step == 1


def test_first_step_moves_by_lr():
    p = parameter([0.0])
    adamw_step([p], [np.ones(1)], OptimizerState.for_params([p]), lr=0.001)
    assert p.data[0] == pytest.approx(-0.001, abs=1e-10)


def test_decoupled_weight_decay():
    p = parameter([1.0])
    adamw_step([p], [np.zeros(1)], OptimizerState.for_params([p]), lr=0.01, weight_decay=0.1)
    assert p.data[0] == pytest.approx(0.999, abs=1e-15)


def test_step_rejections_leave_state_untouched():
    p = parameter([1.0, 2.0])
    state = OptimizerState.for_params([p])
    with pytest.raises(NumericError):
        adamw_step([p], [np.array([np.inf, 0.0])], state, lr=0.1)
    with pytest.raises(DimensionError):
        adamw_step([p], [np.zeros(3)], state, lr=0.1)
    assert state.step == 0
    assert p.data.tolist() == [1.0, 2.0]


def test_optimizer_arguments_are_validated():
    with pytest.raises(ParameterError):
        AdamW([parameter([1.0])], lr=-1.0)
    with pytest.raises(ParameterError):
        AdamW([parameter([1.0])], betas=(1.0, 0.999))


def test_clip_grad_norm():
    a = parameter([0.0, 0.0])
    b = parameter([0.0])
    a.grad = np.array([3.0, 0.0])
    b.grad = np.array([4.0])
    assert clip_grad_norm([a, b], 1.0) == pytest.approx(5.0)
    assert np.sqrt(np.sum(a.grad**2) + np.sum(b.grad**2)) == pytest.approx(1.0)
    assert clip_grad_norm([a, b], 10.0) == pytest.approx(1.0)


@pytest.fixture
def tiny_sets():
    x = data.generate(DatasetSpec(kind="moons", n=48, seed=0))
    z = data.generate(DatasetSpec(kind="circles", n=40, seed=1))
    return x, z


def test_zero_learning_rate_keeps_the_initial_model(tiny_sets, tiny_train_config):
    config = tiny_train_config.model_copy(update={"epochs": 1, "lr": 0.0, "weight_decay": 0.0})
    model, trace = train(*tiny_sets, config)
    fresh = init_model(2, config.blocks, config.subnet_width, config.gamma, config.seed)
    for p, q in zip(model.parameters(), fresh.parameters()):
        assert_array_equal(p.data, q.data)
    assert len(trace) == 1


def test_training_is_deterministic(tmp_path, tiny_sets, tiny_train_config):
    first, trace_a = train(*tiny_sets, tiny_train_config)
    second, trace_b = train(*tiny_sets, tiny_train_config)
    assert trace_a == trace_b
    a = save_checkpoint(first, tmp_path / "a.ckpt").read_bytes()
    b = save_checkpoint(second, tmp_path / "b.ckpt").read_bytes()
    assert a == b


def test_training_moves_the_model_and_reports_each_epoch(tiny_sets, tiny_train_config):
    model, trace = train(*tiny_sets, tiny_train_config)
    fresh = init_model(2, tiny_train_config.blocks, tiny_train_config.subnet_width, seed=tiny_train_config.seed)
    assert any(not np.array_equal(p.data, q.data) for p, q in zip(model.parameters(), fresh.parameters()))
    assert len(trace) == tiny_train_config.epochs
    for b in trace:
        assert b.total == pytest.approx(b.mmd_fwd + b.mmd_bwd + b.beta * (b.ot_fwd + b.ot_bwd))


def test_epoch_callback(tiny_sets, tiny_train_config):
    seen = []
    train(*tiny_sets, tiny_train_config, on_epoch_end=lambda epoch, model, summary: seen.append(epoch))
    assert seen == [1, 2]


def test_preconditions(tiny_sets, tiny_train_config):
    x, z = tiny_sets
    with pytest.raises(ParameterError):
        train(x, z, tiny_train_config.model_copy(update={"batch_size": 41}))
    with pytest.raises(DimensionError):
        train(x, np.zeros((0, 2)), tiny_train_config)
    with pytest.raises(DimensionError):
        train(x, np.zeros((10, 3)), tiny_train_config)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)


def test_non_finite_loss_reports_the_step(tiny_sets, tiny_train_config):
    _, z = tiny_sets
    x = np.full((48, 2), 1e200)
    with pytest.raises(TrainingAborted) as info:
        train(x, z, tiny_train_config, bank=KernelBank.single(1.0))
    assert info.value.step == 0
    assert info.value.exit_code == 3


def test_write_trace(tmp_path, tiny_sets, tiny_train_config):
    _, trace = train(*tiny_sets, tiny_train_config)
    lines = write_trace(tmp_path / "trace.csv", trace).read_text().splitlines()
    assert lines[0] == "epoch,mmd_fwd,mmd_bwd,ot_fwd,ot_bwd,total"
    assert len(lines) == 1 + len(trace)
    assert float(lines[-1].split(",")[-1]) == trace[-1].total
