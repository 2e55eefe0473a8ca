import json
import struct

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import numerical_grad
from symot.autodiff import Tensor, mul, no_grad, parameter, sum_
from symot.errors import CheckpointError, DimensionError, ParameterError
from symot.flow import (
    MAGIC,
    CouplingBlock,
    FlowModel,
    Subnet,
    init_model,
    load_checkpoint,
    roundtrip_error,
    save_checkpoint,
)
from symot.kernels import KernelBank


def constant_subnet(value: float, width: int = 4) -> Subnet:
    """1 -> width -> 1 net whose output is ``value`` for every input."""
    return Subnet(
        [
            (parameter(np.zeros((width, 1))), parameter(np.zeros(width))),
            (parameter(np.zeros((1, width))), parameter(np.full(1, value))),
        ]
    )


def scale_output_layers(model: FlowModel, factor: float) -> None:
    for block in model.blocks:
        for net in (block.s_net, block.t_net):
            w, b = net.layers[-1]
            w.data *= factor
            b.data *= factor


def test_additive_coupling_example():
    block = CouplingBlock(constant_subnet(0.0), constant_subnet(3.0), gamma=2.0, permutation=(0, 1))
    z = block.forward(Tensor([[1.0, 2.0]]))
    assert z.numpy().tolist() == [[1.0, 5.0]]
    assert block.inverse(z).numpy().tolist() == [[1.0, 2.0]]


def test_zero_subnets_are_a_pure_permutation(rng):
    model = init_model(2, 3, subnet_width=8, seed=2)
    x = rng.uniform(-3, 3, (10, 2))
    perm = list(range(2))
    for block in model.blocks:
        perm = [perm[j] for j in block.permutation]
    with no_grad():
        assert_array_equal(model.forward(x).numpy(), x[:, perm])
        assert_array_equal(model.inverse(x[:, perm]).numpy(), x)


def test_permutations_mix_channels():
    model = init_model(2, 8, subnet_width=4, seed=11)
    assert all(block.permutation == (1, 0) for block in model.blocks)


def test_random_block_roundtrip(rng):
    model = init_model(3, 1, subnet_width=16, seed=7, zero_init=False)
    x = rng.normal(size=(50, 3))
    block = model.blocks[0]
    with no_grad():
        back = block.inverse(block.forward(x)).numpy()
    assert np.max(np.abs(back - x)) < 1e-10


@pytest.mark.parametrize("seed", range(10))
def test_eight_block_roundtrip(seed):
    x = np.random.default_rng(seed).uniform(-4, 4, (1000, 2))
    assert roundtrip_error(init_model(2, 8, 128, seed=seed), x) < 1e-12

    model = init_model(2, 8, 128, seed=seed, zero_init=False)
    scale_output_layers(model, 0.1)
    assert roundtrip_error(model, x) < 1e-8


def test_single_block_model_is_the_block(rng):
    model = init_model(2, 1, subnet_width=8, seed=1, zero_init=False)
    x = rng.normal(size=(5, 2))
    with no_grad():
        assert_array_equal(model.forward(x).numpy(), model.blocks[0].forward(x).numpy())


def test_same_seed_same_parameters():
    a = init_model(2, 4, 16, seed=9, zero_init=False)
    b = init_model(2, 4, 16, seed=9, zero_init=False)
    for p, q in zip(a.parameters(), b.parameters()):
        assert_array_equal(p.data, q.data)
    assert [blk.permutation for blk in a.blocks] == [blk.permutation for blk in b.blocks]


def test_init_model_preconditions():
    with pytest.raises(DimensionError):
        init_model(1, 2)
    with pytest.raises(ParameterError):
        init_model(2, 0)


def test_wrong_input_width():
    model = init_model(2, 1, subnet_width=4)
    with pytest.raises(DimensionError):
        model.forward(np.zeros((3, 3)))


def test_inverse_path_gradient(small_model, rng):
    z = rng.uniform(-2, 2, (6, 2))
    weights = Tensor(rng.uniform(-1, 1, (6, 2)))
    w = small_model.blocks[1].t_net.layers[0][0]

    def f():
        with no_grad():
            return sum_(mul(small_model.inverse(z), weights)).item()

    sum_(mul(small_model.inverse(z), weights)).backward()
    assert_allclose(w.grad, numerical_grad(f, w.data), rtol=1e-4, atol=1e-7)


def test_reversed_flow_swaps_directions(small_model, rng):
    x = rng.normal(size=(4, 2))
    rev = small_model.reversed()
    with no_grad():
        assert_array_equal(rev.forward(x).numpy(), small_model.inverse(x).numpy())
    assert rev.reversed() is small_model


def test_checkpoint_roundtrip(tmp_path, small_model, rng):
    bank = KernelBank.from_median(1.5)
    path = save_checkpoint(small_model, tmp_path / "m.ckpt", bank, {"dataset": "moons2circles"})
    model, loaded_bank, meta = load_checkpoint(path)

    assert loaded_bank == bank
    assert meta == {"dataset": "moons2circles"}
    assert [b.permutation for b in model.blocks] == [b.permutation for b in small_model.blocks]
    for p, q in zip(model.parameters(), small_model.parameters()):
        assert_array_equal(p.data, q.data)
    x = rng.normal(size=(8, 2))
    with no_grad():
        assert_array_equal(model.forward(x).numpy(), small_model.forward(x).numpy())

    save_checkpoint(model, tmp_path / "again.ckpt", bank, {"dataset": "moons2circles"})
    assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()


def test_checkpoint_without_bank(tmp_path, small_model):
    _, bank, meta = load_checkpoint(save_checkpoint(small_model, tmp_path / "m.ckpt"))
    assert bank is None
    assert meta == {}


@pytest.mark.parametrize(
    "corrupt",
    [
        lambda raw: raw[:-8],
        lambda raw: raw + b"\0" * 8,
        lambda raw: b"NOTCKP" + raw[6:],
        lambda raw: raw[:12],
        lambda raw: raw[:10] + b"[" + raw[11:],
    ],
    ids=["short-payload", "long-payload", "bad-magic", "truncated-header", "bad-json"],
)
def test_corrupt_checkpoints(tmp_path, small_model, corrupt):
    path = save_checkpoint(small_model, tmp_path / "m.ckpt")
    path.write_bytes(corrupt(path.read_bytes()))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


@pytest.mark.parametrize("layer", [[-1, -2], [0, 2], [2, 0]], ids=["negative", "zero-out", "zero-in"])
def test_checkpoint_with_nonpositive_layer_dims(tmp_path, layer):
    header = {
        "dim": 2,
        "n_blocks": 1,
        "gamma": 2.0,
        "blocks": [{"permutation": [0, 1], "s_layers": [layer], "t_layers": [layer]}],
    }
    encoded = json.dumps(header).encode()
    out, inp = layer
    payload = np.zeros(max(2 * (out * inp + out), 0), dtype="<f8").tobytes()
    path = tmp_path / "crafted.ckpt"
    path.write_bytes(MAGIC + struct.pack("<I", len(encoded)) + encoded + payload)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_clone_is_independent(small_model):
    copy = small_model.clone()
    copy.parameters()[0].data += 1.0
    assert not np.array_equal(copy.parameters()[0].data, small_model.parameters()[0].data)
