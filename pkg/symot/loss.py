"""Symmetric OT-regularised MMD loss and the d_MMD distance."""

import logging

from .autodiff import Tensor, as_tensor, mean, mul, no_grad, reduce, scale
from .errors import DimensionError, ParameterError
from .kernels import KernelBank, gram, mmd_distance
from .schemas import LossBreakdown

logger = logging.getLogger(__name__)


def ot_cost(a, b) -> Tensor:
    """Mean squared Euclidean distance between paired rows a_i and b_i."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape or a.ndim != 2:
        raise DimensionError(f"paired point sets must share a (n, d) shape, got {a.shape} and {b.shape}")
    diff = a - b
    return mean(reduce("sum", mul(diff, diff), axis=1))


def _constant_mean(bank: KernelBank, points: Tensor) -> float:
    with no_grad():
        return mean(gram(bank, points, points)).item()


def symot_loss(model, bank: KernelBank, x_batch, z_batch, beta: float, symmetric: bool = True) -> tuple[Tensor, LossBreakdown]:
    """Differentiable training objective plus the full breakdown.

    The returned tensor leaves out mean k(z, z') and mean k(x, x'), which do not
    depend on the model; the breakdown reports the complete squared MMDs.
    With ``symmetric=False`` the inverse-direction terms are skipped and
    reported as 0.
    """
    x = as_tensor(x_batch)
    z = as_tensor(z_batch)
    if x.ndim != 2 or z.ndim != 2 or x.shape[0] != z.shape[0]:
        raise DimensionError(f"batches must be equal-size (n, d) sets, got {x.shape} and {z.shape}")
    if beta < 0:
        raise ParameterError(f"beta must be >= 0, got {beta}")

    tx = model.forward(x)
    k_txtx = mean(gram(bank, tx, tx))
    k_txz = mean(gram(bank, tx, z))
    ot_fwd = ot_cost(x, tx)
    objective = k_txtx - scale(k_txz, 2.0) + scale(ot_fwd, beta)
    mmd_fwd = k_txtx.item() + _constant_mean(bank, z) - 2.0 * k_txz.item()

    mmd_bwd = 0.0
    ot_bwd_value = 0.0
    if symmetric:
        tz = model.inverse(z)
        k_tztz = mean(gram(bank, tz, tz))
        k_xtz = mean(gram(bank, x, tz))
        ot_bwd = ot_cost(tz, z)
        objective = objective + k_tztz - scale(k_xtz, 2.0) + scale(ot_bwd, beta)
        mmd_bwd = _constant_mean(bank, x) + k_tztz.item() - 2.0 * k_xtz.item()
        ot_bwd_value = ot_bwd.item()

    breakdown = LossBreakdown.compose(
        mmd_fwd=mmd_fwd,
        mmd_bwd=mmd_bwd,
        ot_fwd=ot_fwd.item(),
        ot_bwd=ot_bwd_value,
        beta=beta,
        objective=objective.item(),
        symmetric=symmetric,
    )
    return objective, breakdown


def d_mmd(model, bank: KernelBank, x, z) -> float:
    """MMD(T#p, q) + MMD(p, T^-1#q) on samples."""
    with no_grad():
        tx = model.forward(as_tensor(x))
        tz = model.inverse(as_tensor(z))
    return mmd_distance(bank, tx, z) + mmd_distance(bank, x, tz)
