"""Uniform random permutations, exhaustive enumeration and permuted sums.

Permutations are 0-based integer arrays: ``p[i]`` is the image of ``i``. The
permuted sum of a square matrix ``A`` is ``sum_i A[i, p[i]]``.

Randomness comes from numpy's Philox generator (a counter-based 4x64 bit
generator) keyed by ``SeedSequence(seed, spawn_key=...)``. Bounded integers are
drawn with ``Generator.integers``, which rejects out-of-range candidates, so
the Fisher-Yates shuffle is unbiased. Monte Carlo draws are produced in fixed
blocks of :data:`BLOCK_SIZE`, each block with its own derived key, which keeps
results identical whatever the number of worker threads.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    EnumerationTooLargeError,
    InvalidParameterError,
    InvalidSizeError,
    MalformedInputError,
)

N_EXACT_DEFAULT = 8
N_EXACT_HARD_CAP = 10
N_EXACT_ENV = "PERMCONC_N_EXACT"
BLOCK_SIZE = 4096
SEED_MAX = 2**64


def n_exact_limit() -> int:
    """Largest n for exhaustive enumeration, read from ``PERMCONC_N_EXACT``."""
    raw = os.environ.get(N_EXACT_ENV)
    if raw is None or raw == "":
        return N_EXACT_DEFAULT
    try:
        value = int(raw)
    except ValueError:
        raise InvalidParameterError(f"{N_EXACT_ENV} must be an integer, got {raw!r}") from None
    if not 1 <= value <= N_EXACT_HARD_CAP:
        raise InvalidParameterError(
            f"{N_EXACT_ENV} must lie in [1, {N_EXACT_HARD_CAP}], got {value}"
        )
    return value


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise InvalidParameterError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < SEED_MAX:
        raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for ``seed``; ``key`` selects an independent sub-stream."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


# -- matrices -----------------------------------------------------------------

def as_matrix(a) -> np.ndarray:
    """Validate a coefficient matrix: square, side >= 2, finite entries."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"coefficient matrix must be square, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise DimensionError("coefficient matrix side must be at least 2")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError("coefficient matrix has non-finite entries")
    return arr


def read_matrix_csv(path) -> np.ndarray:
    """Read n rows of n comma-separated floats, no header."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise MalformedInputError(
                    f"{path}: line {lineno}: non-numeric token {bad.strip()!r}"
                ) from None
            if len(rows[-1]) != len(rows[0]):
                raise MalformedInputError(
                    f"{path}: line {lineno}: expected {len(rows[0])} values, got {len(rows[-1])}"
                )
    if not rows:
        raise MalformedInputError(f"{path}: empty matrix file")
    if len(rows) != len(rows[0]):
        raise MalformedInputError(
            f"{path}: matrix is not square ({len(rows)} rows of {len(rows[0])} values)"
        )
    return as_matrix(rows)


def _is_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


# -- permutations -------------------------------------------------------------

def is_permutation(p) -> bool:
    p = np.asarray(p)
    if p.ndim != 1 or p.size == 0 or not np.issubdtype(p.dtype, np.integer):
        return False
    return bool(np.array_equal(np.sort(p), np.arange(p.size)))


def check_permutation(p) -> np.ndarray:
    arr = np.asarray(p)
    if not is_permutation(arr):
        raise InvalidParameterError(f"not a permutation of 0..n-1: {arr.tolist()}")
    return arr.astype(np.intp)


def sample_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one uniform permutation of ``0..n-1`` by Fisher-Yates."""
    if n < 1:
        raise InvalidSizeError(f"permutation size must be >= 1, got {n}")
    p = np.arange(n, dtype=np.intp)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        p[i], p[j] = p[j], p[i]
    return p


def sample_permutations(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent uniform permutations as rows of a (count, n) array.

    Fisher-Yates run on all rows at once: step ``i`` draws one bounded integer
    per row.
    """
    if n < 1:
        raise InvalidSizeError(f"permutation size must be >= 1, got {n}")
    perms = np.tile(np.arange(n, dtype=np.intp), (count, 1))
    rows = np.arange(count)
    for i in range(n - 1, 0, -1):
        j = rng.integers(0, i + 1, size=count)
        tmp = perms[rows, j]
        perms[rows, j] = perms[:, i]
        perms[:, i] = tmp
    return perms


@lru_cache(maxsize=None)
def _permutation_table(n: int) -> np.ndarray:
    table = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    table.setflags(write=False)
    return table


def permutation_table(n: int, limit: int | None = None) -> np.ndarray:
    """All n! permutations in lexicographic order, one per row (read-only)."""
    if limit is None:
        limit = n_exact_limit()
    if n < 1:
        raise InvalidSizeError(f"permutation size must be >= 1, got {n}")
    if n > limit:
        raise EnumerationTooLargeError(
            f"exact enumeration limited to n <= {limit} (N_EXACT), got n = {n}"
        )
    return _permutation_table(n)


def enumerate_permutations(n: int, limit: int | None = None):
    """Yield the n! permutations of ``0..n-1`` in lexicographic order."""
    table = permutation_table(n, limit)
    for row in table:
        yield row.copy()


def permuted_sum(a, p) -> float:
    a = as_matrix(a)
    p = check_permutation(p)
    if p.size != a.shape[0]:
        raise DimensionError(f"permutation length {p.size} != matrix side {a.shape[0]}")
    return float(a[np.arange(a.shape[0]), p].sum())


def permuted_sums(a: np.ndarray, perms: np.ndarray) -> np.ndarray:
    """Vectorised permuted sums for each row of ``perms``."""
    n = a.shape[0]
    if perms.shape[1] != n:
        raise DimensionError(f"permutation length {perms.shape[1]} != matrix side {n}")
    return a[np.arange(n), perms].sum(axis=1)


# -- distributions ------------------------------------------------------------

@dataclass
class PermSumDistribution:
    """Law of the permuted sum: all n! values, or B Monte Carlo draws."""

    kind: str
    values: np.ndarray
    n: int
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in ("exact", "empirical"):
            raise InvalidParameterError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "exact" and self.values.size != math.factorial(self.n):
            raise InvalidParameterError("exact distribution must hold n! values")
        if self.kind == "empirical" and self.seed is None:
            raise InvalidParameterError("empirical distribution must record its seed")

    @property
    def sample_size(self) -> int:
        return int(self.values.size)

    def sidecar(self) -> dict:
        return {"kind": self.kind, "n": self.n, "sample_size": self.sample_size, "seed": self.seed}


def exact_distribution(a, limit: int | None = None) -> PermSumDistribution:
    a = as_matrix(a)
    n = a.shape[0]
    values = permuted_sums(a, permutation_table(n, limit))
    return PermSumDistribution("exact", values, n)


def sample_distribution(a, b: int, seed: int, workers: int = 1) -> PermSumDistribution:
    """B permuted sums from i.i.d. uniform permutations, reproducible from ``seed``."""
    a = as_matrix(a)
    if b < 1:
        raise InvalidSizeError(f"Monte Carlo sample size must be >= 1, got {b}")
    seed = check_seed(seed)
    n = a.shape[0]
    nblocks = -(-b // BLOCK_SIZE)

    def block(k: int) -> np.ndarray:
        size = min(BLOCK_SIZE, b - k * BLOCK_SIZE)
        perms = sample_permutations(n, size, make_rng(seed, k))
        return permuted_sums(a, perms)

    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(block, range(nblocks)))
    else:
        parts = [block(k) for k in range(nblocks)]
    return PermSumDistribution("empirical", np.concatenate(parts), n, seed=seed)


def write_distribution(dist: PermSumDistribution, path) -> Path:
    """Write one value per line to ``path`` and the JSON sidecar to ``path.json``."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in dist.values:
            fh.write(f"{float(v):.17g}\n")
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(dist.sidecar(), sort_keys=True) + "\n", encoding="utf-8")
    return sidecar


def read_distribution(path) -> PermSumDistribution:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text(encoding="utf-8"))
    values = np.loadtxt(path, dtype=float, ndmin=1)
    return PermSumDistribution(meta["kind"], values, int(meta["n"]), seed=meta.get("seed"))
