"""Read/write helpers for the sqlite run registry."""

import logging
from typing import Optional

from sqlalchemy.orm import Session

from . import models
from .schemas import MetricsReport, RunOut, SweepPointOut, SweepRow

logger = logging.getLogger(__name__)


def record_run(
    db: Session,
    *,
    name: str,
    command: str,
    method: str,
    beta: Optional[float],
    symmetric: bool,
    seed: int,
    config_hash: str = "",
    dataset: Optional[str] = None,
    checkpoint_path: Optional[str] = None,
    report: Optional[MetricsReport] = None,
) -> models.Run:
    run = models.Run(
        name=name,
        command=command,
        method=method,
        dataset=dataset,
        beta=beta,
        symmetric=symmetric,
        seed=seed,
        config_hash=config_hash,
        checkpoint_path=checkpoint_path,
    )
    if report is not None:
        run.ot_fwd = report.ot_fwd
        run.ot_bwd = report.ot_bwd
        run.mmd_fwd = report.mmd_fwd
        run.mmd_bwd = report.mmd_bwd
    db.add(run)
    db.commit()
    db.refresh(run)
    logger.debug("registered run %d (%s, %s)", run.id, name, command)
    return run


def start_sweep(db: Session, name: str, config_hash: str = "") -> models.Sweep:
    sweep = models.Sweep(name=name, config_hash=config_hash)
    db.add(sweep)
    db.commit()
    db.refresh(sweep)
    return sweep


def record_sweep_point(
    db: Session,
    sweep: models.Sweep,
    beta: float,
    row: Optional[SweepRow] = None,
    error: Optional[str] = None,
) -> models.SweepPoint:
    """Commits immediately so a sweep that dies later keeps its finished points."""
    point = models.SweepPoint(sweep_id=sweep.id, beta=beta, error=error)
    if row is not None:
        point.ot = row.ot
        point.mmd = row.mmd
        point.total = row.total
    db.add(point)
    db.commit()
    return point


def finish_sweep(db: Session, sweep: models.Sweep, failed: bool) -> None:
    sweep.status = "failed" if failed else "done"
    db.commit()


def list_runs(db: Session, limit: int = 20, name: Optional[str] = None) -> list[RunOut]:
    query = db.query(models.Run)
    if name is not None:
        query = query.filter(models.Run.name == name)
    runs = query.order_by(models.Run.created_at.desc(), models.Run.id.desc()).limit(limit).all()
    return [RunOut.model_validate(run) for run in runs]


def sweep_points(db: Session, sweep_id: int) -> list[SweepPointOut]:
    points = (
        db.query(models.SweepPoint)
        .filter(models.SweepPoint.sweep_id == sweep_id)
        .order_by(models.SweepPoint.beta)
        .all()
    )
    return [SweepPointOut.model_validate(p) for p in points]
