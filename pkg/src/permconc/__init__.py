"""Concentration bounds for permuted sums and a permutation test of independence."""

from .constants import CONSTANT_TABLE, constants_table_text
from .errors import PermConcError
from .indep_test import PairedSample, TestReport, critical_value, run_test, test_statistic
from .kernels import KernelSpec, parse_kernel
from .moments import MatrixMoments, hoeffding_centering, matrix_moments
from .perm_core import PermSumDistribution, exact_distribution, sample_distribution

__version__ = "0.1.0"

__all__ = [
    "CONSTANT_TABLE",
    "KernelSpec",
    "MatrixMoments",
    "PairedSample",
    "PermConcError",
    "PermSumDistribution",
    "TestReport",
    "constants_table_text",
    "critical_value",
    "exact_distribution",
    "hoeffding_centering",
    "matrix_moments",
    "parse_kernel",
    "run_test",
    "sample_distribution",
    "test_statistic",
]
