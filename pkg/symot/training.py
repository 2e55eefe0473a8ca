"""Deterministic mini-batch training of the flow."""

import csv
import logging
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from tqdm import tqdm

from .errors import DimensionError, NumericError, ParameterError, TrainingAborted
from .flow import FlowModel, init_model, roundtrip_error
from .kernels import KernelBank, median_heuristic
from .loss import symot_loss
from .optim import AdamW, clip_grad_norm
from .schemas import LossBreakdown, TrainConfig
from .seeding import rng_for

logger = logging.getLogger(__name__)

ROUNDTRIP_TOLERANCE = 1e-8
TRACE_COLUMNS = ["epoch", "mmd_fwd", "mmd_bwd", "ot_fwd", "ot_bwd", "total"]

EpochCallback = Callable[[int, FlowModel, LossBreakdown], None]


def default_bank(x_data, z_data, config: TrainConfig) -> KernelBank:
    """Bandwidths from the median heuristic on the untransformed pools, frozen for the run."""
    median = median_heuristic(x_data, z_data, seed=config.seed)
    bank = KernelBank.from_median(median, config.kernel_scales)
    logger.info("kernel bandwidths (sigma^2): %s", ", ".join(f"{s:.4g}" for s in bank.bandwidths))
    return bank


def _check_invertible(model: FlowModel, points: np.ndarray, epoch: int) -> None:
    error = roundtrip_error(model, points)
    if not error < ROUNDTRIP_TOLERANCE:
        raise NumericError(f"roundtrip error {error:.3g} at epoch {epoch} exceeds {ROUNDTRIP_TOLERANCE:g}")


def train(
    x_data,
    z_data,
    config: TrainConfig,
    *,
    bank: Optional[KernelBank] = None,
    on_epoch_end: Optional[EpochCallback] = None,
    progress: bool = False,
) -> tuple[FlowModel, list[LossBreakdown]]:
    """Train a fresh flow from ``x_data`` towards ``z_data``.

    Each epoch shuffles both sets independently, truncates to the shorter one
    and walks equal-size batch pairs. Returns the model and one averaged
    breakdown per epoch.
    """
    x = np.asarray(x_data, dtype=np.float64)
    z = np.asarray(z_data, dtype=np.float64)
    if x.ndim != 2 or z.ndim != 2 or x.shape[1] != z.shape[1]:
        raise DimensionError(f"datasets must be (n, d) with matching d, got {x.shape} and {z.shape}")
    if len(x) == 0 or len(z) == 0:
        raise DimensionError("both datasets must be nonempty")
    n_pairs = min(len(x), len(z))
    if config.batch_size > n_pairs:
        raise ParameterError(f"batch size {config.batch_size} exceeds the smaller dataset ({n_pairs})")

    model = init_model(x.shape[1], config.blocks, config.subnet_width, config.gamma, config.seed)
    if bank is None:
        bank = default_bank(x, z, config)
    optimizer = AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    shuffle = rng_for(config.seed, "shuffle")

    trace: list[LossBreakdown] = []
    step = 0
    x_batch = x[: config.batch_size]
    for epoch in tqdm(range(1, config.epochs + 1), desc="epochs", disable=not progress):
        x_order = shuffle.permutation(len(x))[:n_pairs]
        z_order = shuffle.permutation(len(z))[:n_pairs]
        batches = []
        for start in range(0, n_pairs, config.batch_size):
            x_batch = x[x_order[start : start + config.batch_size]]
            z_batch = z[z_order[start : start + config.batch_size]]
            optimizer.zero_grad()
            try:
                objective, breakdown = symot_loss(model, bank, x_batch, z_batch, config.beta, config.symmetric)
                objective.backward()
                if config.grad_clip is not None:
                    norm = clip_grad_norm(optimizer.params, config.grad_clip)
                    if norm > config.grad_clip:
                        logger.warning("step %d: clipped gradient norm %.3g to %.3g", step, norm, config.grad_clip)
                optimizer.step()
            except NumericError as exc:
                raise TrainingAborted(step, str(exc)) from exc
            batches.append(breakdown)
            step += 1

        summary = LossBreakdown.average(batches)
        trace.append(summary)
        if config.log_every and (epoch % config.log_every == 0 or epoch == 1):
            logger.info(
                "epoch %d: total=%.6g mmd_fwd=%.3g mmd_bwd=%.3g ot_fwd=%.4g ot_bwd=%.4g",
                epoch,
                summary.total,
                summary.mmd_fwd,
                summary.mmd_bwd,
                summary.ot_fwd,
                summary.ot_bwd,
            )
        if config.checkpoint_every and epoch % config.checkpoint_every == 0:
            _check_invertible(model, x_batch, epoch)
        if on_epoch_end is not None:
            on_epoch_end(epoch, model, summary)

    _check_invertible(model, x_batch, config.epochs)
    return model, trace


def write_trace(path, trace: list[LossBreakdown]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for epoch, b in enumerate(trace, start=1):
            writer.writerow([epoch, *(f"{v:.17g}" for v in (b.mmd_fwd, b.mmd_bwd, b.ot_fwd, b.ot_bwd, b.total))])
    return path
