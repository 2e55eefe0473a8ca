"""Gaussian kernel banks and biased MMD estimators."""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .autodiff import Tensor, as_tensor, exp, mean, no_grad, pairwise_sqdist, scale
from .errors import DimensionError, ParameterError
from .seeding import rng_for

DEFAULT_SCALES = (0.25, 0.5, 1.0, 2.0, 4.0)
MEDIAN_MAX_POINTS = 2000


@dataclass(frozen=True)
class KernelBank:
    """Weighted Gaussian kernels; ``bandwidths`` holds sigma^2 values."""

    bandwidths: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "bandwidths", tuple(float(s) for s in self.bandwidths))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.bandwidths or len(self.bandwidths) != len(self.weights):
            raise ParameterError("a kernel bank needs matching, nonempty bandwidth and weight lists")
        if any(not (s > 0 and math.isfinite(s)) for s in self.bandwidths):
            raise ParameterError(f"bandwidths must be positive, got {self.bandwidths}")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-12:
            raise ParameterError(f"weights must be nonnegative and sum to 1, got {self.weights}")

    @classmethod
    def single(cls, sigma2: float) -> "KernelBank":
        return cls((sigma2,), (1.0,))

    @classmethod
    def from_median(cls, median: float, scales: Sequence[float] = DEFAULT_SCALES) -> "KernelBank":
        return cls(tuple(median * s for s in scales), (1.0 / len(scales),) * len(scales))


def _points(t: Tensor, name: str) -> Tensor:
    if t.ndim != 2:
        raise DimensionError(f"{name} must be an (n, d) sample set, got shape {t.shape}")
    if t.shape[0] == 0:
        raise DimensionError(f"{name} is an empty sample set")
    return t


def gram(bank: KernelBank, a, b) -> Tensor:
    """k(a_i, b_j) = sum_l w_l exp(-||a_i - b_j||^2 / (2 sigma_l^2))."""
    dist = pairwise_sqdist(as_tensor(a), as_tensor(b))
    out = None
    for sigma2, weight in zip(bank.bandwidths, bank.weights):
        term = scale(exp(scale(dist, -0.5 / sigma2)), weight)
        out = term if out is None else out + term
    return out


def median_heuristic(a, b, *, max_points: int = MEDIAN_MAX_POINTS, seed: int = 0) -> float:
    """Median pairwise squared distance of the pooled samples; 1.0 if that median is 0."""
    a = np.asarray(a.data if isinstance(a, Tensor) else a, dtype=np.float64)
    b = np.asarray(b.data if isinstance(b, Tensor) else b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DimensionError(f"cannot pool samples of shapes {a.shape} and {b.shape}")
    pooled = np.concatenate([a, b], axis=0)
    if pooled.shape[0] < 2:
        raise DimensionError("the median heuristic needs at least two pooled points")
    if pooled.shape[0] > max_points:
        keep = np.sort(rng_for(seed, "bandwidth").choice(pooled.shape[0], max_points, replace=False))
        pooled = pooled[keep]
    median = float(np.median(pdist(pooled, "sqeuclidean")))
    return median if median > 0 else 1.0


def _mmd_means(bank: KernelBank, x, z) -> tuple[Tensor, Tensor, Tensor]:
    x = _points(as_tensor(x), "x")
    z = _points(as_tensor(z), "z")
    return mean(gram(bank, x, x)), mean(gram(bank, z, z)), mean(gram(bank, x, z))


def mmd2_biased(bank: KernelBank, x, z) -> Tensor:
    k_xx, k_zz, k_xz = _mmd_means(bank, x, z)
    return k_xx + k_zz - scale(k_xz, 2.0)


def mmd2_paired(bank: KernelBank, x, z) -> Tensor:
    """Single double sum over equal-size sets: mean of k(x,x') + k(z,z') - 2k(x,z')."""
    x = _points(as_tensor(x), "x")
    z = _points(as_tensor(z), "z")
    if x.shape[0] != z.shape[0]:
        raise DimensionError(f"equal sample counts required, got {x.shape[0]} and {z.shape[0]}")
    return mean(gram(bank, x, x) + gram(bank, z, z) - scale(gram(bank, x, z), 2.0))


def mmd_distance(bank: KernelBank, x, z) -> float:
    with no_grad():
        value = mmd2_biased(bank, x, z).item()
    return math.sqrt(max(value, 0.0))
