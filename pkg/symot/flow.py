"""Affine-coupling flow T and its exact inverse, plus the checkpoint codec."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from pydantic import ValidationError

from .autodiff import (
    Tensor,
    as_tensor,
    broadcast_rows,
    concat_columns,
    exp,
    matmul,
    neg,
    no_grad,
    parameter,
    relu,
    scale,
    take_columns,
    tanh,
    transpose,
)
from .errors import CheckpointError, DimensionError, ParameterError
from .kernels import KernelBank
from .schemas import BlockShapes, CheckpointHeader, KernelBankRecord
from .seeding import rng_for

logger = logging.getLogger(__name__)

MAGIC = b"SYMOT1"
HIDDEN_LAYERS = 2


@dataclass
class Subnet:
    """Fully connected net; ReLU between layers, linear output."""

    layers: list[tuple[Tensor, Tensor]]

    def __post_init__(self):
        if not self.layers:
            raise DimensionError("a subnet needs at least one layer")
        for (w, b), (w_next, _) in zip(self.layers, self.layers[1:]):
            if w_next.shape[1] != w.shape[0]:
                raise DimensionError(f"layer shapes {w.shape} -> {w_next.shape} do not chain")
        for w, b in self.layers:
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise DimensionError(f"weight {w.shape} and bias {b.shape} do not match")

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [w.shape for w, _ in self.layers]

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer]

    def __call__(self, x: Tensor) -> Tensor:
        n = x.shape[0]
        h = x
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            h = matmul(h, transpose(w)) + broadcast_rows(b, n)
            if i < last:
                h = relu(h)
        return h


@dataclass
class CouplingBlock:
    s_net: Subnet
    t_net: Subnet
    gamma: float
    permutation: tuple[int, ...]
    inverse_permutation: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        self.permutation = tuple(int(i) for i in self.permutation)
        d = len(self.permutation)
        if d < 2:
            raise DimensionError("coupling needs at least two channels")
        if sorted(self.permutation) != list(range(d)):
            raise ParameterError(f"{self.permutation} is not a permutation of 0..{d - 1}")
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        half, rest = self.split, d - self.split
        for net in (self.s_net, self.t_net):
            if net.in_dim != half or net.out_dim != rest:
                raise DimensionError(f"subnet maps {net.in_dim}->{net.out_dim}, block needs {half}->{rest}")
        self.inverse_permutation = tuple(int(i) for i in np.argsort(self.permutation))

    @property
    def dim(self) -> int:
        return len(self.permutation)

    @property
    def split(self) -> int:
        # first ceil(d/2) channels pass through unchanged
        return (self.dim + 1) // 2

    def parameters(self) -> list[Tensor]:
        return self.s_net.parameters() + self.t_net.parameters()

    def _check(self, x) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DimensionError(f"block expects (n, {self.dim}) input, got {x.shape}")
        return x

    def _halves(self, x: Tensor) -> tuple[Tensor, Tensor]:
        return take_columns(x, range(self.split)), take_columns(x, range(self.split, self.dim))

    def _log_scale(self, x1: Tensor) -> Tensor:
        return scale(tanh(self.s_net(x1)), self.gamma)

    def forward(self, x) -> Tensor:
        x1, x2 = self._halves(self._check(x))
        z2 = x2 * exp(self._log_scale(x1)) + self.t_net(x1)
        return take_columns(concat_columns(x1, z2), self.permutation)

    def inverse(self, z) -> Tensor:
        y = take_columns(self._check(z), self.inverse_permutation)
        z1, z2 = self._halves(y)
        x2 = (z2 - self.t_net(z1)) * exp(neg(self._log_scale(z1)))
        return concat_columns(z1, x2)


@dataclass
class FlowModel:
    blocks: list[CouplingBlock]

    def __post_init__(self):
        if not self.blocks:
            raise ParameterError("a flow needs at least one block")
        dims = {b.dim for b in self.blocks}
        if len(dims) != 1:
            raise DimensionError(f"blocks disagree on dimensionality: {sorted(dims)}")

    @property
    def dim(self) -> int:
        return self.blocks[0].dim

    @property
    def split(self) -> int:
        return self.blocks[0].split

    @property
    def gamma(self) -> float:
        return self.blocks[0].gamma

    def parameters(self) -> list[Tensor]:
        """Block order; s-net before t-net; weight before bias. Also the checkpoint order."""
        return [p for block in self.blocks for p in block.parameters()]

    def forward(self, x) -> Tensor:
        for block in self.blocks:
            x = block.forward(x)
        return x

    def inverse(self, z) -> Tensor:
        for block in reversed(self.blocks):
            z = block.inverse(z)
        return z

    __call__ = forward

    def reversed(self) -> "ReversedFlow":
        return ReversedFlow(self)

    def clone(self) -> "FlowModel":
        """Independent copy of the parameters, for evaluating snapshots off the training thread."""

        def copy_net(net: Subnet) -> Subnet:
            return Subnet([(parameter(w.data), parameter(b.data)) for w, b in net.layers])

        return FlowModel(
            [CouplingBlock(copy_net(b.s_net), copy_net(b.t_net), b.gamma, b.permutation) for b in self.blocks]
        )


@dataclass
class ReversedFlow:
    """A flow whose forward direction is ``base.inverse``."""

    base: FlowModel

    @property
    def dim(self) -> int:
        return self.base.dim

    def forward(self, x) -> Tensor:
        return self.base.inverse(x)

    def inverse(self, z) -> Tensor:
        return self.base.forward(z)

    def reversed(self) -> FlowModel:
        return self.base


def _draw_permutation(rng: np.random.Generator, dim: int) -> tuple[int, ...]:
    identity = tuple(range(dim))
    perm = tuple(int(i) for i in rng.permutation(dim))
    if perm == identity:
        perm = tuple(int(i) for i in rng.permutation(dim))
    if perm == identity:
        perm = identity[::-1]
    return perm


def _init_subnet(rng: np.random.Generator, sizes: Sequence[int], zero_output: bool) -> Subnet:
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
        last = i == len(sizes) - 2
        if last and zero_output:
            w = np.zeros((fan_out, fan_in))
        else:
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        layers.append((parameter(w), parameter(np.zeros(fan_out))))
    return Subnet(layers)


def init_model(
    dim: int,
    blocks: int,
    subnet_width: int = 128,
    gamma: float = 2.0,
    seed: int = 0,
    *,
    zero_init: bool = True,
    permutations: Sequence[Sequence[int]] | None = None,
) -> FlowModel:
    """Seeded flow; with ``zero_init`` every subnet outputs 0, so T starts as a pure permutation."""
    if dim < 2:
        raise DimensionError(f"unsupported dimension {dim}: coupling needs two nonempty halves")
    if blocks < 1:
        raise ParameterError(f"blocks must be >= 1, got {blocks}")
    if permutations is not None and len(permutations) != blocks:
        raise ParameterError(f"{len(permutations)} permutations given for {blocks} blocks")

    rng = rng_for(seed, "init")
    half = (dim + 1) // 2
    sizes = [half, *([subnet_width] * HIDDEN_LAYERS), dim - half]
    built = []
    for k in range(blocks):
        perm = _draw_permutation(rng, dim)
        if permutations is not None:
            perm = tuple(permutations[k])
        s_net = _init_subnet(rng, sizes, zero_init)
        t_net = _init_subnet(rng, sizes, zero_init)
        built.append(CouplingBlock(s_net, t_net, gamma, perm))
    return FlowModel(built)


def roundtrip_error(model: FlowModel, x) -> float:
    """max |T^-1(T(x)) - x| over all entries."""
    with no_grad():
        x = as_tensor(x)
        back = model.inverse(model.forward(x))
    return float(np.max(np.abs(back.data - x.data))) if x.size else 0.0


# -- checkpoints ------------------------------------------------------------

def _header_for(model: FlowModel, bank: KernelBank | None, meta: dict[str, str] | None) -> CheckpointHeader:
    gammas = {b.gamma for b in model.blocks}
    if len(gammas) != 1:
        raise ParameterError("checkpoints store a single gamma shared by all blocks")
    return CheckpointHeader(
        dim=model.dim,
        n_blocks=len(model.blocks),
        gamma=model.gamma,
        blocks=[
            BlockShapes(permutation=list(b.permutation), s_layers=b.s_net.shapes, t_layers=b.t_net.shapes)
            for b in model.blocks
        ],
        bank=KernelBankRecord(bandwidths=list(bank.bandwidths), weights=list(bank.weights)) if bank else None,
        meta=dict(meta or {}),
    )


def save_checkpoint(model: FlowModel, path, bank: KernelBank | None = None, meta: dict[str, str] | None = None) -> Path:
    header = _header_for(model, bank, meta).model_dump_json().encode()
    payload = b"".join(p.data.astype("<f8").tobytes() for p in model.parameters())
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)
    logger.debug("wrote checkpoint %s (%d parameters)", path, len(payload) // 8)
    return path


def _read_layers(values: Iterator[np.ndarray], shapes: list[tuple[int, int]]) -> Subnet:
    layers = []
    for out, inp in shapes:
        w = next(values).reshape(out, inp)
        b = next(values)
        layers.append((parameter(w), parameter(b)))
    return Subnet(layers)


def load_checkpoint(path) -> tuple[FlowModel, KernelBank | None, dict[str, str]]:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    offset = len(MAGIC)
    if len(raw) < offset + 4:
        raise CheckpointError(f"{path}: truncated header")
    (header_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if len(raw) < offset + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = CheckpointHeader.model_validate_json(raw[offset : offset + header_len])
    except ValidationError as exc:
        raise CheckpointError(f"{path}: invalid header: {exc.errors()[0]['msg']}") from exc
    offset += header_len

    expected = header.parameter_count()
    payload = raw[offset:]
    if len(payload) != 8 * expected:
        raise CheckpointError(f"{path}: expected {expected} parameters, found {len(payload) / 8:g}")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise CheckpointError(f"{path}: non-finite parameter values")

    sizes = [n for shapes in header.blocks for out, inp in [*shapes.s_layers, *shapes.t_layers] for n in (out * inp, out)]
    values = iter(np.split(flat, np.cumsum(sizes)[:-1]))
    try:
        blocks = []
        for shapes in header.blocks:
            s_net = _read_layers(values, shapes.s_layers)
            t_net = _read_layers(values, shapes.t_layers)
            blocks.append(CouplingBlock(s_net, t_net, header.gamma, tuple(shapes.permutation)))
        model = FlowModel(blocks)
    except (DimensionError, ParameterError) as exc:
        raise CheckpointError(f"{path}: header shapes are inconsistent: {exc}") from exc
    if model.dim != header.dim:
        raise CheckpointError(f"{path}: header says dim {header.dim}, blocks have {model.dim}")

    bank = None
    if header.bank is not None:
        try:
            bank = KernelBank(tuple(header.bank.bandwidths), tuple(header.bank.weights))
        except ParameterError as exc:
            raise CheckpointError(f"{path}: invalid kernel bank: {exc}") from exc
    return model, bank, header.meta
