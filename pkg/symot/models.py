from datetime import datetime, timezone

from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import relationship

from .database import Base


def _now():
    return datetime.now(timezone.utc)


class Run(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    name = Column(String, index=True, nullable=False)
    command = Column(String, nullable=False)    # "train" or "eval"
    method = Column(String, nullable=False)     # "symot", "single_mmd", ...
    dataset = Column(String, nullable=True)
    beta = Column(Float, nullable=True)
    symmetric = Column(Boolean, nullable=False, default=True)
    seed = Column(Integer, nullable=False)
    config_hash = Column(String, nullable=False, default="")
    checkpoint_path = Column(String, nullable=True)
    ot_fwd = Column(Float, nullable=True)
    ot_bwd = Column(Float, nullable=True)
    mmd_fwd = Column(Float, nullable=True)
    mmd_bwd = Column(Float, nullable=True)

    created_at = Column(DateTime, default=_now, nullable=False)


class Sweep(Base):
    __tablename__ = "sweeps"

    id = Column(Integer, primary_key=True, index=True)
    name = Column(String, nullable=False)
    config_hash = Column(String, nullable=False, default="")
    status = Column(String, nullable=False, default="running")  # running, done, failed
    created_at = Column(DateTime, default=_now, nullable=False)

    points = relationship("SweepPoint", back_populates="sweep", cascade="all, delete-orphan")


class SweepPoint(Base):
    __tablename__ = "sweep_points"

    id = Column(Integer, primary_key=True, index=True)
    sweep_id = Column(Integer, ForeignKey("sweeps.id", ondelete="CASCADE"), nullable=False)
    beta = Column(Float, nullable=False)
    ot = Column(Float, nullable=True)
    mmd = Column(Float, nullable=True)
    total = Column(Float, nullable=True)
    error = Column(Text, nullable=True)

    sweep = relationship("Sweep", back_populates="points")
