"""Bounded kernels phi(x, y) for the permutation independence test.

Points are rows of a 2-D array (one column for real-valued observations).
Every kernel evaluates pairwise on two point arrays, returning the (n, m)
matrix of phi(x_i, y_j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class KernelSpec:
    name: str
    pairwise: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sup_norm: float | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, x, y) -> float:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return float(self.pairwise(x, y)[0, 0])

    def describe(self) -> dict:
        return {"name": self.name, "params": dict(self.params), "sup_norm": self.sup_norm}


def _points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def product_kernel(sup_norm: float | None = None) -> KernelSpec:
    """phi(x, y) = <x, y>; unbounded in general, so the sup-norm is user-declared."""
    return KernelSpec("product", lambda x, y: _points(x) @ _points(y).T, sup_norm)


def gaussian_kernel(bandwidth: float) -> KernelSpec:
    if not bandwidth > 0:
        raise InvalidParameterError(f"gaussian bandwidth must be > 0, got {bandwidth}")

    def f(x, y):
        x, y = _points(x), _points(y)
        sq = np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=-1)
        return np.exp(-sq / (2.0 * bandwidth * bandwidth))

    return KernelSpec("gaussian", f, 1.0, {"bandwidth": bandwidth})


def coincidence_kernel(delay: float) -> KernelSpec:
    """phi(x, y) = 1{max_k |x_k - y_k| <= delay}."""
    if delay < 0:
        raise InvalidParameterError(f"coincidence delay must be >= 0, got {delay}")

    def f(x, y):
        x, y = _points(x), _points(y)
        if x.shape[1] == 1:
            return (np.abs(x[:, :1] - y[:, 0][None, :]) <= delay).astype(float)
        gap = np.max(np.abs(x[:, None, :] - y[None, :, :]), axis=-1)
        return (gap <= delay).astype(float)

    return KernelSpec("coincidence", f, 1.0, {"delay": delay})


def _haar_detail(u: np.ndarray, level: int):
    """Index k and sign of the level-``level`` Haar wavelet covering each u in [0, 1)."""
    scaled = u * 2**level
    k = np.floor(scaled)
    inside = (u >= 0) & (u < 1)
    sign = np.where(scaled - k < 0.5, 1.0, -1.0)
    return np.where(inside, k, -1), np.where(inside, sign, 0.0)


def haar_kernel(level: int, dim: int = 1) -> KernelSpec:
    """Tensor Haar projection kernel at dyadic level j on [0, 1)^d.

    phi(x, y) = prod_c sum_k psi_jk(x_c) psi_jk(y_c), with psi_jk(u) =
    2^{j/2} psi(2^j u - k). Supports at one level are disjoint, so each factor
    is +-2^j or 0 and the sup-norm is 2^{j d}.
    """
    if int(level) != level or level < 0:
        raise InvalidParameterError(f"haar level must be a non-negative integer, got {level}")
    level = int(level)

    def f(x, y):
        x, y = _points(x), _points(y)
        out = np.ones((x.shape[0], y.shape[0]))
        for c in range(x.shape[1]):
            kx, sx = _haar_detail(x[:, c], level)
            ky, sy = _haar_detail(y[:, c], level)
            same = kx[:, None] == ky[None, :]
            out *= np.where(same, sx[:, None] * sy[None, :] * 2.0**level, 0.0)
        return out

    return KernelSpec("haar", f, haar_sup_norm(level, dim), {"level": level, "dim": dim})


def constant_kernel(value: float) -> KernelSpec:
    return KernelSpec("constant",
                      lambda x, y: np.full((_points(x).shape[0], _points(y).shape[0]), float(value)),
                      abs(float(value)), {"value": value})


def from_function(func: Callable[[np.ndarray, np.ndarray], float], sup_norm: float | None = None,
                  name: str = "custom") -> KernelSpec:
    """Wrap a scalar function of two points; evaluated pair by pair."""

    def f(x, y):
        x, y = _points(x), _points(y)
        return np.array([[float(func(xi, yj)) for yj in y] for xi in x])

    return KernelSpec(name, f, sup_norm)


def haar_sup_norm(level: int, dim: int) -> float:
    return float(2.0 ** (level * dim))


def parse_kernel(text: str, sup_norm: float | None = None, dim: int = 1) -> KernelSpec:
    """Parse ``product``, ``gaussian:s``, ``haar:j`` or ``coincidence:d``.

    ``sup_norm`` overrides the built-in value; it is required for ``product``
    only where a quantile bound needs it.
    """
    name, _, arg = text.partition(":")
    try:
        if name == "product":
            spec = product_kernel(sup_norm)
        elif name == "gaussian":
            spec = gaussian_kernel(float(arg))
        elif name == "coincidence":
            spec = coincidence_kernel(float(arg))
        elif name == "haar":
            spec = haar_kernel(int(arg), dim)
        else:
            raise InvalidParameterError(f"unknown kernel {name!r}")
    except ValueError as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise InvalidParameterError(f"bad kernel parameter in {text!r}") from None
    if sup_norm is not None and name != "product":
        if not math.isfinite(sup_norm) or sup_norm < 0:
            raise InvalidParameterError(f"sup-norm must be finite and >= 0, got {sup_norm}")
        spec = KernelSpec(spec.name, spec.pairwise, float(sup_norm), spec.params)
    return spec
