import logging
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from .errors import ParameterError  # noqa: E402
from .schemas import SweepRow  # noqa: E402

logger = logging.getLogger(__name__)

SOURCE_COLOR = "tab:blue"
MAPPED_COLOR = "tab:orange"
LINK_COLOR = "tab:green"
OT_COLOR = "tab:red"
MMD_COLOR = "tab:blue"
TOTAL_COLOR = "tab:green"

# deterministic bytes: fixed hash salt, text kept as text
SVG_RC = {"svg.hashsalt": "symot", "svg.fonttype": "none"}


def link_segments(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """One ``(2, 2)`` segment per point, from ``src[i]`` to ``dst[i]``."""
    return np.stack([src, dst], axis=1)


def _panel(ax, src: np.ndarray, dst: np.ndarray, target: np.ndarray, title: str) -> None:
    ax.add_collection(LineCollection(link_segments(src, dst), colors=LINK_COLOR, linewidths=0.3, alpha=0.3))
    ax.scatter(target[:, 0], target[:, 1], s=3, c="0.75", label="target")
    ax.scatter(src[:, 0], src[:, 1], s=3, c=SOURCE_COLOR, label="source")
    ax.scatter(dst[:, 0], dst[:, 1], s=3, c=MAPPED_COLOR, label="mapped")
    ax.set_title(title)
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="upper right", fontsize="small", markerscale=3)


def _save(fig, path: Path) -> None:
    try:
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)


def write_scatter_svg(path, x, tx, z, tinv_z) -> Path:
    """Two-panel SVG: x -> T(x) against z, and z -> T^-1(z) against x.

    Output bytes depend only on the inputs (fixed hash salt, no date stamp).
    """
    x, tx, z, tinv_z = (np.asarray(a, dtype=np.float64) for a in (x, tx, z, tinv_z))
    path = Path(path)
    with matplotlib.rc_context(SVG_RC):
        fig, axes = plt.subplots(1, 2, figsize=(10, 5))
        _panel(axes[0], x, tx, z, "forward: x -> T(x)")
        _panel(axes[1], z, tinv_z, x, "backward: z -> T^-1(z)")
        _save(fig, path)
    logger.debug("wrote scatter plot %s", path)
    return path


def write_sweep_svg(path, rows: Sequence[SweepRow]) -> Path:
    """OT cost (red), MMD distance (blue) and final total loss (green) against beta, log x-axis."""
    if not rows:
        raise ParameterError("no sweep rows to plot")
    rows = sorted(rows, key=lambda r: r.beta)
    betas = np.array([r.beta for r in rows])
    path = Path(path)
    with matplotlib.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(betas, [r.ot for r in rows], "o-", color=OT_COLOR, label="OT cost")
        ax.plot(betas, [r.mmd for r in rows], "s-", color=MMD_COLOR, label="MMD distance")
        with_total = [r for r in rows if r.total is not None]
        if with_total:
            ax.plot([r.beta for r in with_total], [r.total for r in with_total], "^-", color=TOTAL_COLOR, label="total loss")
        positive = betas[betas > 0]
        if len(positive) == len(betas):
            ax.set_xscale("log")
        elif len(positive):
            # beta = 0 sits in the linear region around the origin
            ax.set_xscale("symlog", linthresh=float(positive.min()))
        ax.set_xlabel("beta")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize="small")
        _save(fig, path)
    logger.debug("wrote sweep plot %s", path)
    return path
