"""Frozen numerical constants used by the bound evaluators and the test bounds.

The table is dumped verbatim by ``permconc <cmd> --constants``; the README
documents the same bytes, and a test keeps the two in sync.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

THETA = 2.5 * math.log(3.0) - 2.0 / 3.0
C0_MEDIAN = 4.0 * math.sqrt(math.log(8.0))
# Prefactor and rate of the general-sign mean bound, read as c0*exp(-c1*x).
SMALL_C0 = 16.0 * math.exp(1.0 / 16.0)
SMALL_C1 = 1.0 / 16.0
C_PRIME = 2.0 * max(math.sqrt(2.0 / SMALL_C1), 1.0 / SMALL_C1)
C_QUANTILE = 2.0 * C_PRIME
C_DOUBLE_PRIME = 2.0 * max(C_QUANTILE, math.sqrt(8.0))

PREFACTOR_POS = 8.0 * math.exp(1.0 / 16.0)
PREFACTOR_GENERAL = 16.0 * math.exp(1.0 / 16.0)


@dataclass(frozen=True)
class Constant:
    name: str
    value: float
    expression: str
    provenance: str


CONSTANT_TABLE: tuple[Constant, ...] = (
    Constant("theta", THETA, "5/2*ln(3) - 2/3",
             "variance weight in the Bercu-Delyon-Rio permuted-sum bound"),
    Constant("C0", C0_MEDIAN, "4*sqrt(ln(8))",
             "switch point making 1/2 - 2*exp(-C0^2/16) = 1/4 in the median bound"),
    Constant("c0", SMALL_C0, "16*exp(1/16)",
             "prefactor of the general-sign mean bound, tail c0*exp(-c1*x)"),
    Constant("c1", SMALL_C1, "1/16",
             "rate of the general-sign mean bound, tail c0*exp(-c1*x)"),
    Constant("C_prime", C_PRIME, "2*max(sqrt(2/c1), 1/c1)",
             "conditional critical-value bound, solving c0*exp(-c1*x) = alpha"),
    Constant("C", C_QUANTILE, "2*C_prime",
             "quantile-of-quantile bound, Markov step on the plug-in energy"),
    Constant("C_double_prime", C_DOUBLE_PRIME, "2*max(C, sqrt(8))",
             "sharp second-kind condition, quantile term plus Chebyshev variance term"),
)


def constants_table_text() -> str:
    """Tab-separated dump: name, value (17 significant digits), expression, provenance."""
    lines = ["name\tvalue\texpression\tprovenance"]
    for c in CONSTANT_TABLE:
        lines.append(f"{c.name}\t{c.value:.17g}\t{c.expression}\t{c.provenance}")
    return "\n".join(lines) + "\n"
