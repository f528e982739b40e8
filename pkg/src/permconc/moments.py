"""Hoeffding centering, closed-form moments and medians of permuted-sum laws."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParameterError
from .perm_core import PermSumDistribution, as_matrix, exact_distribution, sample_distribution


def hoeffding_centering(a) -> np.ndarray:
    """d[i, j] = a[i, j] - row mean - column mean + grand mean."""
    a = as_matrix(a)
    return a - a.mean(axis=1, keepdims=True) - a.mean(axis=0, keepdims=True) + a.mean()


@dataclass(frozen=True)
class MatrixMoments:
    mean_z: float
    var_z: float
    v_second_moment: float
    max_abs: float
    max_abs_d: float
    d_ratio: float
    mean_sq_d: float

    @property
    def degenerate(self) -> bool:
        return self.mean_sq_d == 0.0

    def to_dict(self) -> dict:
        """CLI view with the short symbol names V and M."""
        return {
            "mean_z": self.mean_z,
            "var_z": self.var_z,
            "V": self.v_second_moment,
            "M": self.max_abs,
            "max_abs_d": self.max_abs_d,
            "d_ratio": self.d_ratio,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MatrixMoments":
        n_sq = d.get("mean_sq_d")
        if n_sq is None:
            # mean_sq_d is recoverable from d_ratio unless degenerate
            n_sq = (d["max_abs_d"] / d["d_ratio"]) ** 2 if d["d_ratio"] else 0.0
        return cls(d["mean_z"], d["var_z"], d["V"], d["M"], d["max_abs_d"], d["d_ratio"], n_sq)


def matrix_moments(a) -> MatrixMoments:
    a = as_matrix(a)
    n = a.shape[0]
    d = hoeffding_centering(a)
    sum_sq_d = float(np.sum(d * d))
    mean_sq_d = sum_sq_d / n
    max_abs_d = float(np.max(np.abs(d)))
    d_ratio = max_abs_d / math.sqrt(mean_sq_d) if mean_sq_d > 0 else 0.0
    return MatrixMoments(
        mean_z=float(a.sum()) / n,
        var_z=sum_sq_d / (n - 1),
        v_second_moment=float(np.sum(a * a)) / n,
        max_abs=float(np.max(np.abs(a))),
        max_abs_d=max_abs_d,
        d_ratio=d_ratio,
        mean_sq_d=mean_sq_d,
    )


def median_interval(values) -> tuple[float, float]:
    """Lower and upper sample medians of a finite multiset."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise InvalidParameterError("median of an empty distribution")
    m = v.size
    return float(v[(m + 1) // 2 - 1]), float(v[m // 2])


def distribution_median(dist) -> float:
    """Midpoint of the lower and upper medians.

    Accepts a :class:`PermSumDistribution` or a plain sequence of values.
    """
    values = dist.values if isinstance(dist, PermSumDistribution) else dist
    lo, hi = median_interval(values)
    return lo + (hi - lo) / 2.0


def is_median(values, m: float) -> bool:
    """Both half-mass conditions, compared on integer counts."""
    v = np.asarray(values, dtype=float)
    total = v.size
    return 2 * int(np.count_nonzero(v >= m)) >= total and 2 * int(np.count_nonzero(v <= m)) >= total


def median_of_squared_sum(a, mode: str = "exact", b: int | None = None,
                          seed: int | None = None) -> float:
    """Median of the permuted sum of the entrywise-squared matrix."""
    sq = as_matrix(a) ** 2
    if mode == "exact":
        dist = exact_distribution(sq)
    elif mode == "mc":
        if b is None or seed is None:
            raise InvalidParameterError("mc mode needs both B and seed")
        dist = sample_distribution(sq, b, seed)
    else:
        raise InvalidParameterError(f"unknown mode {mode!r}")
    return distribution_median(dist)


@dataclass(frozen=True)
class GapDiagnostic:
    gap: float
    sqrt_var: float
    within: bool

    def to_dict(self) -> dict:
        return asdict(self)


def mean_median_gap(dist_mean: float, dist_median: float, var: float) -> GapDiagnostic:
    if var < 0:
        raise InvalidParameterError(f"variance must be non-negative, got {var}")
    gap = abs(dist_mean - dist_median)
    root = math.sqrt(var)
    return GapDiagnostic(gap, root, gap <= root)
