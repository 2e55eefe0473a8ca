"""Held-out metrics, correspondence export and the beta sweep."""

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import spearmanr

from .autodiff import as_tensor, no_grad
from .data import ExperimentData
from .errors import DimensionError, ParameterError, SweepError, SymotError
from .kernels import KernelBank, mmd_distance
from .loss import ot_cost
from .schemas import MetricsReport, MetricsRow, SweepRow, TrainConfig
from .training import default_bank, train

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ["dataset", "method", "beta", "ot_fwd", "ot_bwd", "mmd_fwd", "mmd_bwd", "seed"]
CORRESPONDENCE_COLUMNS = ["src0", "src1", "dst0", "dst1", "direction"]
SWEEP_COLUMNS = ["beta", "ot", "mmd"]


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def evaluate(model, bank: KernelBank, x_test, z_test, *, config_hash: str = "") -> MetricsReport:
    x = as_tensor(x_test)
    z = as_tensor(z_test)
    for name, t in (("x_test", x), ("z_test", z)):
        if t.ndim != 2 or t.shape[1] != model.dim or t.shape[0] == 0:
            raise DimensionError(f"{name} must be a nonempty (n, {model.dim}) set, got {t.shape}")
    with no_grad():
        tx = model.forward(x)
        tz = model.inverse(z)
        ot_fwd = ot_cost(x, tx).item()
        ot_bwd = ot_cost(tz, z).item()
    return MetricsReport(
        ot_fwd=ot_fwd,
        ot_bwd=ot_bwd,
        mmd_fwd=mmd_distance(bank, tx, z),
        mmd_bwd=mmd_distance(bank, x, tz),
        n_test=x.shape[0],
        config_hash=config_hash,
    )


def method_label(beta: float, symmetric: bool) -> str:
    if math.isnan(beta):
        return "unknown"
    label = "single_mmd" if beta == 0 else "symot"
    return label if symmetric else f"{label}_one_direction"


def metrics_row(report: MetricsReport, dataset: str, beta: float, symmetric: bool, seed: int) -> MetricsRow:
    return MetricsRow(
        dataset=dataset,
        method=method_label(beta, symmetric),
        beta=beta,
        ot_fwd=report.ot_fwd,
        ot_bwd=report.ot_bwd,
        mmd_fwd=report.mmd_fwd,
        mmd_bwd=report.mmd_bwd,
        seed=seed,
    )


def write_metrics(path, rows: Sequence[MetricsRow]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow(
                [row.dataset, row.method, _fmt(row.beta)]
                + [_fmt(v) for v in (row.ot_fwd, row.ot_bwd, row.mmd_fwd, row.mmd_bwd)]
                + [row.seed]
            )
    return path


def export_correspondence(model, x, z, path) -> Path:
    """Rows (x, T(x), fwd) then (T^-1(z), z, bwd)."""
    with no_grad():
        x = as_tensor(x)
        z = as_tensor(z)
        tx = model.forward(x).numpy()
        tz = model.inverse(z).numpy()
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CORRESPONDENCE_COLUMNS)
        for src, dst in zip(x.numpy(), tx):
            writer.writerow([*map(_fmt, src), *map(_fmt, dst), "fwd"])
        for src, dst in zip(tz, z.numpy()):
            writer.writerow([*map(_fmt, src), *map(_fmt, dst), "bwd"])
    return path


def sweep_threads() -> int:
    try:
        return max(1, int(os.environ.get("SYMOT_THREADS", "1")))
    except ValueError:
        logger.warning("ignoring non-integer SYMOT_THREADS=%r", os.environ["SYMOT_THREADS"])
        return 1


def ot_trend(rows: Sequence[SweepRow]) -> float:
    """Spearman rank correlation between beta and forward OT cost."""
    if len(rows) < 2:
        return float("nan")
    rho = spearmanr([r.beta for r in rows], [r.ot for r in rows]).statistic
    return float(rho)


def sweep_beta(
    base_config: TrainConfig,
    betas: Sequence[float],
    datasets: ExperimentData,
    *,
    bank: Optional[KernelBank] = None,
    threads: Optional[int] = None,
    on_row: Optional[Callable[[SweepRow], None]] = None,
    on_failure: Optional[Callable[[float, str], None]] = None,
) -> list[SweepRow]:
    """Train and evaluate one model per beta; everything else is shared.

    Rows come back sorted by beta whatever order the workers finish in. If any
    beta fails, SweepError carries the failures and the completed rows.
    """
    if not betas:
        raise ParameterError("the beta list is empty")
    if any(not (b >= 0 and math.isfinite(b)) for b in betas):
        raise ParameterError(f"betas must be finite and >= 0, got {list(betas)}")
    if bank is None:
        bank = default_bank(datasets.x_train, datasets.z_train, base_config)
    threads = threads or sweep_threads()

    def run_one(beta: float) -> SweepRow:
        config = base_config.model_copy(update={"beta": float(beta)})
        logger.info("sweep: training beta=%g", beta)
        model, trace = train(datasets.x_train, datasets.z_train, config, bank=bank)
        report = evaluate(model, bank, datasets.x_test, datasets.z_test)
        return SweepRow(beta=float(beta), ot=report.ot_fwd, mmd=report.mmd_fwd, total=trace[-1].total)

    completed: dict[float, SweepRow] = {}
    failures: dict[float, str] = {}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(run_one, float(b)): float(b) for b in betas}
        for future in as_completed(futures):
            beta = futures[future]
            try:
                row = future.result()
            except SymotError as exc:
                logger.error("sweep: beta=%g failed: %s", beta, exc)
                failures[beta] = str(exc)
                if on_failure is not None:
                    on_failure(beta, str(exc))
                continue
            logger.info("sweep: beta=%g ot=%.4g mmd=%.3g", beta, row.ot, row.mmd)
            completed[beta] = row
            if on_row is not None:
                on_row(row)

    rows = [completed[b] for b in sorted(completed)]
    if len(rows) >= 2:
        logger.info("sweep: spearman(beta, ot) = %.3f", ot_trend(rows))
    if failures:
        raise SweepError(failures, rows)
    return rows


def write_sweep(path, rows: Sequence[SweepRow]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.beta), _fmt(row.ot), _fmt(row.mmd)])
    return path


def format_sweep_table(rows: Sequence[SweepRow]) -> str:
    """Transposed layout: one line each for beta, OT cost, MMD distance (and total loss if known)."""
    lines = [
        ["Weight beta", *(f"{r.beta:.0e}" for r in rows)],
        ["OT cost", *(f"{r.ot:.3f}" for r in rows)],
        ["MMD distance", *(f"{r.mmd:.1e}" for r in rows)],
    ]
    if all(r.total is not None for r in rows):
        lines.append(["Total loss", *(f"{r.total:.3g}" for r in rows)])
    width = max(len(cell) for line in lines for cell in line)
    return "\n".join("  ".join(cell.rjust(width) for cell in line) for line in lines)


def scatter_arrays(model, x, z) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(x, T(x), z, T^-1(z)) as arrays, for plotting."""
    with no_grad():
        x = as_tensor(x)
        z = as_tensor(z)
        return x.numpy(), model.forward(x).numpy(), z.numpy(), model.inverse(z).numpy()
