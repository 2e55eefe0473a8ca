"""Seeded 2-D toy datasets and their CSV files."""

import csv
import hashlib
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.datasets import make_circles, make_moons

from .errors import DimensionError, MalformedFileError
from .schemas import DatasetSpec, ExperimentConfig
from .seeding import rng_for

logger = logging.getLogger(__name__)

HEADER = ["x0", "x1"]

KIND_IDS = {
    "moons": 1,
    "circles": 2,
    "gauss_pair_a": 3,
    "gauss_pair_b": 4,
    "eight_gauss_a": 5,
    "eight_gauss_b": 6,
    "linear_gauss_a": 7,
    "linear_gauss_b": 8,
}
SPLIT_IDS = {"train": 0, "test": 1}

JITTER_STD = 0.05
CIRCLES_FACTOR = 0.5

GAUSS_PAIR = {
    "gauss_pair_a": {"mean": (-3.0, -3.0), "std": 1.0},
    "gauss_pair_b": {"mean": (3.0, 3.0), "std": math.sqrt(0.5)},
}
EIGHT_GAUSS = {
    "eight_gauss_a": {"radius": 2.0, "std": 0.2, "rotation": 0.0},
    "eight_gauss_b": {"radius": 4.0, "std": 0.3, "rotation": math.pi / 8},
}
LINEAR_GAUSS = {
    # means evenly spaced on y = x and on y = -x + 6
    "linear_gauss_a": {"start": (-4.0, -4.0), "end": (4.0, 4.0), "std": 0.3},
    "linear_gauss_b": {"start": (-4.0, 10.0), "end": (4.0, 2.0), "std": 0.3},
}
LINEAR_COMPONENTS = 5
RING_COMPONENTS = 8


def _sklearn_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


def _ring_centers(radius: float, rotation: float) -> np.ndarray:
    angles = rotation + 2.0 * np.pi * np.arange(RING_COMPONENTS) / RING_COMPONENTS
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def generate_labeled(spec: DatasetSpec) -> tuple[np.ndarray, np.ndarray]:
    """Points of shape (n, 2) and the component each was drawn from.

    Labels: 0 = outer moon / outer circle, 1 = inner; for mixtures the
    component index; always 0 for the single Gaussians.
    """
    rng = rng_for(spec.seed, "data", KIND_IDS[spec.kind], SPLIT_IDS[spec.split])
    kind = spec.kind

    if kind in ("moons", "circles"):
        noise = JITTER_STD if spec.noise is None else spec.noise
        if kind == "moons":
            points, labels = make_moons(n_samples=spec.n, noise=noise, random_state=_sklearn_seed(rng))
        else:
            points, labels = make_circles(
                n_samples=spec.n, noise=noise, factor=CIRCLES_FACTOR, random_state=_sklearn_seed(rng)
            )
        return points.astype(np.float64), labels.astype(np.int64)

    if kind in GAUSS_PAIR:
        defaults = GAUSS_PAIR[kind]
        center = np.asarray(spec.mean if spec.mean is not None else defaults["mean"])
        std = defaults["std"] if spec.noise is None else spec.noise
        points = center + std * rng.standard_normal((spec.n, 2))
        return points, np.zeros(spec.n, dtype=np.int64)

    if kind in EIGHT_GAUSS:
        defaults = EIGHT_GAUSS[kind]
        centers = _ring_centers(
            spec.radius if spec.radius is not None else defaults["radius"],
            spec.rotation if spec.rotation is not None else defaults["rotation"],
        )
        std = defaults["std"] if spec.noise is None else spec.noise
    elif kind in LINEAR_GAUSS:
        defaults = LINEAR_GAUSS[kind]
        count = spec.components or LINEAR_COMPONENTS
        t = np.linspace(0.0, 1.0, count)[:, None]
        centers = (1.0 - t) * np.asarray(defaults["start"]) + t * np.asarray(defaults["end"])
        std = defaults["std"] if spec.noise is None else spec.noise
    else:
        raise ValueError(f"unknown dataset kind '{kind}'")

    labels = rng.integers(0, len(centers), size=spec.n)
    points = centers[labels] + std * rng.standard_normal((spec.n, 2))
    return points, labels.astype(np.int64)


def generate(spec: DatasetSpec) -> np.ndarray:
    return generate_labeled(spec)[0]


def save(path, points) -> Path:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != len(HEADER):
        raise DimensionError(f"datasets are (n, {len(HEADER)}) arrays, got {points.shape}")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        writer.writerows([f"{v:.17g}" for v in row] for row in points)
    return path


def load(path) -> np.ndarray:
    path = Path(path)
    text = path.read_text()
    if not text.endswith("\n"):
        raise MalformedFileError(f"{path}: truncated (no final newline)")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != HEADER:
        raise MalformedFileError(f"{path}: expected header {','.join(HEADER)}, got {header}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(HEADER):
            raise MalformedFileError(f"{path}:{lineno}: expected {len(HEADER)} columns, got {len(row)}")
        try:
            values = [float(v) for v in row]
        except ValueError as exc:
            raise MalformedFileError(f"{path}:{lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in values):
            raise MalformedFileError(f"{path}:{lineno}: non-finite value")
        rows.append(values)
    if not rows:
        raise MalformedFileError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def dataset_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class ExperimentData:
    x_train: np.ndarray
    z_train: np.ndarray
    x_test: np.ndarray
    z_test: np.ndarray


def prepare_data(config: ExperimentConfig) -> ExperimentData:
    """Load configured dataset files, generating whatever is not given as a path.

    Source specs default to the experiment seed, target specs to seed + 1; test
    sets come from the disjoint ``test`` stream.
    """
    seed = config.experiment.seed
    sides = {}
    for name, source, default_seed in (
        ("source", config.data.source, seed),
        ("target", config.data.target, seed + 1),
    ):
        train = load(source.path) if source.path else generate(source.to_spec(default_seed, "train"))
        if source.test_path:
            test = load(source.test_path)
        else:
            test = generate(source.to_spec(default_seed, "test", n=config.data.test_n))
        logger.debug("%s: %d train / %d test points", name, len(train), len(test))
        sides[name] = (train, test)
    return ExperimentData(
        x_train=sides["source"][0],
        z_train=sides["target"][0],
        x_test=sides["source"][1],
        z_test=sides["target"][1],
    )
