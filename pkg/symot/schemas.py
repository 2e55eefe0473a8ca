import hashlib
from datetime import datetime
from typing import Annotated, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DatasetKind = Literal[
    "moons",
    "circles",
    "gauss_pair_a",
    "gauss_pair_b",
    "eight_gauss_a",
    "eight_gauss_b",
    "linear_gauss_a",
    "linear_gauss_b",
]


def _split_csv(value):
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


class DatasetSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: DatasetKind
    n: int = Field(2000, ge=1)
    # jitter std for moons/circles, component std for the Gaussian kinds; None = kind default
    noise: Optional[float] = Field(None, ge=0)
    seed: int = Field(0, ge=0)
    split: Literal["train", "test"] = "train"
    mean: Optional[Tuple[float, float]] = None
    radius: Optional[float] = Field(None, gt=0)
    rotation: Optional[float] = None
    components: Optional[int] = Field(None, ge=1)

    @field_validator("mean", mode="before")
    @classmethod
    def split_mean(cls, value):
        return _split_csv(value)


class DataSourceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: DatasetKind
    n: int = Field(2000, ge=1)
    noise: Optional[float] = Field(None, ge=0)
    seed: Optional[int] = Field(None, ge=0)
    mean: Optional[Tuple[float, float]] = None
    radius: Optional[float] = Field(None, gt=0)
    rotation: Optional[float] = None
    components: Optional[int] = Field(None, ge=1)
    path: Optional[str] = None
    test_path: Optional[str] = None

    @field_validator("mean", mode="before")
    @classmethod
    def split_mean(cls, value):
        return _split_csv(value)

    def to_spec(self, default_seed: int, split: str = "train", n: Optional[int] = None) -> DatasetSpec:
        return DatasetSpec(
            kind=self.kind,
            n=self.n if n is None else n,
            noise=self.noise,
            seed=default_seed if self.seed is None else self.seed,
            split=split,
            mean=self.mean,
            radius=self.radius,
            rotation=self.rotation,
            components=self.components,
        )


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    beta: float = Field(3e-2, ge=0)
    symmetric: bool = True
    epochs: int = Field(500, ge=1)
    batch_size: int = Field(200, ge=1)
    lr: float = Field(1e-3, ge=0)
    weight_decay: float = Field(1e-5, ge=0)
    seed: int = Field(0, ge=0)
    blocks: int = Field(8, ge=1)
    subnet_width: int = Field(128, ge=1)
    gamma: float = Field(2.0, gt=0)
    kernel_scales: List[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 4.0], min_length=1)
    grad_clip: Optional[float] = Field(None, gt=0)
    checkpoint_every: int = Field(0, ge=0)
    log_every: int = Field(50, ge=0)

    @field_validator("kernel_scales", mode="before")
    @classmethod
    def split_scales(cls, value):
        return _split_csv(value)

    @field_validator("kernel_scales")
    @classmethod
    def positive_scales(cls, value: List[float]) -> List[float]:
        if any(s <= 0 for s in value):
            raise ValueError("kernel scales must be positive")
        return value

    def fingerprint(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode()).hexdigest()[:12]


class ExperimentSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    seed: int = Field(0, ge=0)
    out_dir: Optional[str] = None


class DataSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: DataSourceConfig
    target: DataSourceConfig
    test_n: int = Field(2000, ge=1)


class EvalSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    svg: bool = False
    correspondence: bool = True


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    data: DataSection
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalSection = Field(default_factory=EvalSection)

    @property
    def out_dir(self) -> str:
        return self.experiment.out_dir or f"runs/{self.experiment.name}"

    def fingerprint(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode()).hexdigest()[:12]


class LossBreakdown(BaseModel):
    """Full squared-MMD and OT components of one loss evaluation.

    ``total`` is the complete objective; ``objective`` is what the optimiser
    differentiates, i.e. ``total`` without the within-set kernel means that do
    not depend on the model.
    """

    mmd_fwd: float
    mmd_bwd: float
    ot_fwd: float = Field(ge=0)
    ot_bwd: float = Field(ge=0)
    beta: float
    total: float
    objective: float
    symmetric: bool = True

    @classmethod
    def compose(
        cls,
        mmd_fwd: float,
        mmd_bwd: float,
        ot_fwd: float,
        ot_bwd: float,
        beta: float,
        objective: float,
        symmetric: bool,
    ) -> "LossBreakdown":
        total = mmd_fwd + mmd_bwd + beta * (ot_fwd + ot_bwd)
        return cls(
            mmd_fwd=mmd_fwd,
            mmd_bwd=mmd_bwd,
            ot_fwd=ot_fwd,
            ot_bwd=ot_bwd,
            beta=beta,
            total=total,
            objective=objective,
            symmetric=symmetric,
        )

    @classmethod
    def average(cls, items: List["LossBreakdown"]) -> "LossBreakdown":
        n = len(items)
        first = items[0]
        return cls.compose(
            mmd_fwd=sum(b.mmd_fwd for b in items) / n,
            mmd_bwd=sum(b.mmd_bwd for b in items) / n,
            ot_fwd=sum(b.ot_fwd for b in items) / n,
            ot_bwd=sum(b.ot_bwd for b in items) / n,
            beta=first.beta,
            objective=sum(b.objective for b in items) / n,
            symmetric=first.symmetric,
        )


class MetricsReport(BaseModel):
    ot_fwd: float = Field(ge=0)
    ot_bwd: float = Field(ge=0)
    mmd_fwd: float = Field(ge=0)
    mmd_bwd: float = Field(ge=0)
    n_test: int
    config_hash: str = ""

    @property
    def direction_gap(self) -> float:
        return abs(self.ot_fwd - self.ot_bwd) / max(self.ot_fwd, self.ot_bwd, 1e-9)


class MetricsRow(BaseModel):
    dataset: str
    method: str
    beta: float
    ot_fwd: float
    ot_bwd: float
    mmd_fwd: float
    mmd_bwd: float
    seed: int


class SweepRow(BaseModel):
    beta: float
    ot: float
    mmd: float
    total: Optional[float] = None


class KernelBankRecord(BaseModel):
    bandwidths: List[float]
    weights: List[float]


LayerDim = Annotated[int, Field(ge=1)]


class BlockShapes(BaseModel):
    permutation: List[int]
    # (out, in) per dense layer
    s_layers: List[Tuple[LayerDim, LayerDim]]
    t_layers: List[Tuple[LayerDim, LayerDim]]


class CheckpointHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int = 1
    dim: int = Field(ge=2)
    n_blocks: int = Field(ge=1)
    gamma: float = Field(gt=0)
    blocks: List[BlockShapes]
    bank: Optional[KernelBankRecord] = None
    meta: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_consistent(self) -> "CheckpointHeader":
        if len(self.blocks) != self.n_blocks:
            raise ValueError(f"header lists {len(self.blocks)} blocks, expected {self.n_blocks}")
        for shapes in self.blocks:
            if sorted(shapes.permutation) != list(range(self.dim)):
                raise ValueError("block permutation is not a bijection on the channels")
        return self

    def parameter_count(self) -> int:
        return sum(
            out * inp + out
            for shapes in self.blocks
            for out, inp in [*shapes.s_layers, *shapes.t_layers]
        )


class DatasetRecord(BaseModel):
    path: str
    sha256: str
    rows: int
    spec: Optional[DatasetSpec] = None


class RunManifest(BaseModel):
    library_version: str
    config: ExperimentConfig
    config_hash: str
    datasets: Dict[str, DatasetRecord]
    checkpoints: List[str]
    trace_path: str
    metrics_paths: List[str]
    wall_clock_seconds: float


class RunOut(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    id: int
    name: str
    command: str
    method: str
    dataset: Optional[str]
    beta: Optional[float]
    symmetric: bool
    seed: int
    config_hash: str
    ot_fwd: Optional[float]
    ot_bwd: Optional[float]
    mmd_fwd: Optional[float]
    mmd_bwd: Optional[float]
    created_at: datetime


class SweepPointOut(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    beta: float
    ot: Optional[float]
    mmd: Optional[float]
    error: Optional[str]
