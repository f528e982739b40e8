"""Closed-form evaluators for Bernstein-type bounds on permuted sums.

Tail-form families take a deviation ``t`` and return a probability bound.
Threshold-form families take a level ``x`` and return the deviation threshold
together with its probability bound. Raw bounds may exceed 1; capping is left
to the comparison harness.

Notation: ``V = (1/n) sum a_ij^2``, ``M = max a_ij`` (or ``max |a_ij|`` for
signed matrices), ``d`` the Hoeffding-centered matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as K
from .errors import DegenerateMatrixError, InvalidParameterError

FAMILIES = (
    "bernstein-classical-stat",
    "bernstein-classical-prob",
    "chatterjee",
    "bdr",
    "sqrt-median-upper",
    "sqrt-median-lower",
    "median-pos",
    "mean-pos",
    "mean-pos-prob",
    "mean-general",
    "mean-general-prob",
    "general-d-form",
    "gaussian-tail-form",
)

THRESHOLD_FAMILIES = frozenset(
    {"bernstein-classical-stat", "sqrt-median-upper", "sqrt-median-lower", "median-pos",
     "mean-pos", "mean-general"}
)

_FAMILY_CONSTANTS = {
    "bernstein-classical-stat": {"prefactor": 1.0},
    "bernstein-classical-prob": {"prefactor": 1.0, "denominator": 2.0},
    "chatterjee": {"prefactor": 2.0},
    "bdr": {"prefactor": 4.0, "denominator": 16.0, "theta": K.THETA},
    "sqrt-median-upper": {"prefactor": 2.0, "denominator": 16.0},
    "sqrt-median-lower": {"prefactor": 2.0, "denominator": 16.0},
    "median-pos": {"prefactor": 8.0, "denominator": 16.0, "C0": K.C0_MEDIAN},
    "mean-pos": {"prefactor": K.PREFACTOR_POS, "denominator": 16.0},
    "mean-pos-prob": {"prefactor": K.PREFACTOR_POS, "denominator": 16.0},
    "mean-general": {"prefactor": K.PREFACTOR_GENERAL, "denominator": 16.0},
    "mean-general-prob": {"prefactor": K.PREFACTOR_GENERAL, "denominator": 256.0},
    "general-d-form": {"prefactor": K.PREFACTOR_GENERAL, "denominator": 64.0},
    "gaussian-tail-form": {"prefactor": K.PREFACTOR_GENERAL, "denominator": 256.0},
}


@dataclass(frozen=True)
class BoundFamily:
    name: str
    constants: dict = field(default_factory=dict)

    @classmethod
    def get(cls, name: str) -> "BoundFamily":
        if name not in _FAMILY_CONSTANTS:
            raise InvalidParameterError(f"unknown bound family {name!r}")
        return cls(name, dict(_FAMILY_CONSTANTS[name]))


@dataclass
class BoundEvaluation:
    """One family at one input.

    ``threshold`` is the deviation on the Z scale at which the empirical tail is
    compared: the input ``t`` for tail forms, the computed threshold for
    threshold forms.
    """

    family: BoundFamily
    input_threshold: float
    probability_bound: float
    threshold: float
    threshold_decomposition: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def capped_bound(self) -> float:
        return min(1.0, self.probability_bound)

    def to_dict(self) -> dict:
        return {
            "family": self.family.name,
            "constants": self.family.constants,
            "input_threshold": self.input_threshold,
            "probability_bound": self.probability_bound,
            "capped_bound": self.capped_bound,
            "threshold": self.threshold,
            "threshold_decomposition": (
                list(self.threshold_decomposition) if self.threshold_decomposition else None
            ),
            "meta": self.meta,
        }


def _nonneg(**kw):
    for name, value in kw.items():
        if not math.isfinite(value) or value < 0:
            raise InvalidParameterError(f"{name} must be finite and >= 0, got {value}")


def _positive(**kw):
    for name, value in kw.items():
        if not math.isfinite(value) or value <= 0:
            raise InvalidParameterError(f"{name} must be finite and > 0, got {value}")


def _eval(name, inp, prob, threshold, decomposition=None, **meta):
    return BoundEvaluation(BoundFamily.get(name), float(inp), float(prob), float(threshold),
                           decomposition, meta)


# -- classical Bernstein (independent sums; reference only) -------------------

def bernstein_classical(v: float, c: float, x: float, mode: str = "stat") -> BoundEvaluation:
    """``stat``: P(S >= sqrt(2vx) + cx) <= e^{-x}; ``prob``: P(S >= x) <= exp(-x^2/(2(v+cx)))."""
    _positive(v=v, x=x)
    _nonneg(c=c)
    if mode == "stat":
        sub_g, lin = math.sqrt(2 * v * x), c * x
        return _eval("bernstein-classical-stat", x, math.exp(-x), sub_g + lin, (sub_g, lin))
    if mode == "prob":
        return _eval("bernstein-classical-prob", x, math.exp(-x * x / (2 * (v + c * x))), x)
    raise InvalidParameterError(f"unknown mode {mode!r}")


# -- reference bounds from the literature -------------------------------------

def chatterjee_bound(mean_z: float, max_a: float, t: float) -> BoundEvaluation:
    """Two-sided tail for non-negative entries.

    With ``max_a <= 1`` the unit-interval form 2exp(-t^2/(4 E Z + 2t)) is used;
    otherwise the entries are rescaled by ``max_a``.
    """
    _nonneg(mean_z=mean_z, max_a=max_a, t=t)
    if max_a <= 1.0:
        denom, param = 4 * mean_z + 2 * t, "unit-interval"
    else:
        denom, param = 4 * max_a * mean_z + 2 * max_a * t, "rescaled"
    prob = 2.0 if t == 0 else 2.0 * math.exp(-t * t / denom)
    return _eval("chatterjee", t, prob, t, parameterization=param)


def bdr_bound(v: float, m_a: float, t: float) -> BoundEvaluation:
    """4exp(-t^2/(16(theta V + m_a t/3))) for entries in [-m_a, m_a]."""
    _nonneg(V=v, m_a=m_a, t=t)
    denom = 16.0 * (K.THETA * v + m_a * t / 3.0)
    if v == 0 and m_a == 0:
        raise InvalidParameterError("bdr bound undefined when both V and m_a vanish")
    prob = 4.0 if t == 0 else 4.0 * math.exp(-t * t / denom)
    return _eval("bdr", t, prob, t)


# -- non-negative entries -----------------------------------------------------

def sqrt_median_bound(med_z: float, max_a: float, t: float, side: str = "upper") -> BoundEvaluation:
    """P(sqrt Z >= sqrt(med Z) + t sqrt(M)) <= 2e^{-t^2/16}, and the lower analog.

    ``threshold`` is on the Z scale. For the lower side the sqrt-scale level
    ``sqrt(med) - t sqrt(M)`` can go negative, in which case the event is empty
    and ``meta['empty']`` is set; the Z-scale threshold is clamped at 0.
    ``side='two-sided'`` returns 4e^{-t^2/16} with the upper threshold.
    """
    _nonneg(med_z=med_z, max_a=max_a, t=t)
    tail = math.exp(-t * t / 16.0)
    root, step = math.sqrt(med_z), t * math.sqrt(max_a)
    if side == "upper":
        level = root + step
        return _eval("sqrt-median-upper", t, 2 * tail, level * level, sqrt_level=level)
    if side == "lower":
        level = root - step
        return _eval("sqrt-median-lower", t, 2 * tail, max(level, 0.0) ** 2,
                     sqrt_level=level, empty=level < 0)
    if side == "two-sided":
        level = root + step
        return _eval("sqrt-median-upper", t, 4 * tail, level * level, sqrt_level=level,
                     two_sided=True)
    raise InvalidParameterError(f"unknown side {side!r}")


def median_bound_pos(med_sq: float, max_a: float, x: float) -> BoundEvaluation:
    """P(|Z - med Z| > sqrt(med_sq x) + x M) <= 8e^{-x/16} (strict event)."""
    _nonneg(med_sq=med_sq, max_a=max_a)
    _positive(x=x)
    sub_g, lin = math.sqrt(med_sq * x), x * max_a
    return _eval("median-pos", x, 8.0 * math.exp(-x / 16.0), sub_g + lin, (sub_g, lin),
                 strict=True)


def mean_bound_pos(v: float, max_a: float, x: float | None = None,
                   t: float | None = None) -> BoundEvaluation:
    """Bernstein-type bound around the mean for non-negative entries.

    Pass ``x`` for the threshold form (2sqrt(Vx) + Mx, 8e^{1/16}e^{-x/16}) or
    ``t`` for the probability form 8e^{1/16}exp(-t^2/(16(4V + 2Mt))).
    """
    _nonneg(V=v, max_a=max_a)
    if (x is None) == (t is None):
        raise InvalidParameterError("give exactly one of x (threshold form) or t (prob form)")
    if x is not None:
        _positive(x=x)
        if max_a == 0:
            return _eval("mean-pos", x, K.PREFACTOR_POS * math.exp(-x / 16), 0.0, (0.0, 0.0),
                         trivial=True)
        sub_g, lin = 2 * math.sqrt(v * x), max_a * x
        return _eval("mean-pos", x, K.PREFACTOR_POS * math.exp(-x / 16), sub_g + lin,
                     (sub_g, lin))
    _nonneg(t=t)
    if max_a == 0 or t == 0:
        return _eval("mean-pos-prob", t, K.PREFACTOR_POS, t, trivial=max_a == 0)
    prob = K.PREFACTOR_POS * math.exp(-t * t / (16 * (4 * v + 2 * max_a * t)))
    return _eval("mean-pos-prob", t, prob, t)


def mean_bound_general(v: float, max_abs_a: float, mode: str = "threshold", *,
                       x: float | None = None, t: float | None = None,
                       var_z: float | None = None, mean_sq_d: float | None = None,
                       max_abs_d: float | None = None) -> BoundEvaluation:
    """Bernstein-type bound around the mean for entries of any sign.

    Modes:

    ``threshold``
        needs ``x``; threshold 2sqrt(2Vx) + 2 max|a| x, bound 16e^{1/16}e^{-x/16}.
    ``prob_var``
        needs ``t`` and ``var_z``; 16e^{1/16}exp(-t^2/(256(Var Z + max|a| t))).
    ``prob_d``
        needs ``t``, ``mean_sq_d`` = (1/n) sum d^2 and ``max_abs_d``;
        16e^{1/16}exp(-t^2/(64(4 mean_sq_d + max|d| t))).
    """
    _nonneg(V=v, max_abs_a=max_abs_a)
    if mode == "threshold":
        if x is None:
            raise InvalidParameterError("threshold mode needs x")
        _positive(x=x)
        sub_g, lin = 2 * math.sqrt(2 * v * x), 2 * max_abs_a * x
        return _eval("mean-general", x, K.PREFACTOR_GENERAL * math.exp(-x / 16), sub_g + lin,
                     (sub_g, lin))
    if t is None:
        raise InvalidParameterError(f"{mode} mode needs t")
    _nonneg(t=t)
    if mode == "prob_var":
        if var_z is None:
            raise InvalidParameterError("prob_var mode needs var_z")
        _nonneg(var_z=var_z)
        denom = 256.0 * (var_z + max_abs_a * t)
        name = "mean-general-prob"
    elif mode == "prob_d":
        if mean_sq_d is None or max_abs_d is None:
            raise InvalidParameterError("prob_d mode needs mean_sq_d and max_abs_d")
        _nonneg(mean_sq_d=mean_sq_d, max_abs_d=max_abs_d)
        denom = 64.0 * (4 * mean_sq_d + max_abs_d * t)
        name = "general-d-form"
    else:
        raise InvalidParameterError(f"unknown mode {mode!r}")
    if t == 0:
        return _eval(name, t, K.PREFACTOR_GENERAL, t)
    if denom == 0:
        raise DegenerateMatrixError(f"{name}: zero denominator (degenerate matrix)")
    return _eval(name, t, K.PREFACTOR_GENERAL * math.exp(-t * t / denom), t)


def gaussian_tail_form(d_ratio: float, x: float) -> BoundEvaluation:
    """Bound on P(|Z - E Z| >= x sqrt(Var Z)): 16e^{1/16}exp(-x^2/(256(1 + d_ratio x)))."""
    _nonneg(d_ratio=d_ratio)
    _positive(x=x)
    prob = K.PREFACTOR_GENERAL * math.exp(-x * x / (256.0 * (1.0 + d_ratio * x)))
    return _eval("gaussian-tail-form", x, prob, x, standardized=True)


# -- h1 and the threshold <-> probability conversion --------------------------

def h1(u: float) -> float:
    """h1(u) = 1 + u - sqrt(1 + 2u) on u >= 0."""
    if u < 0:
        raise InvalidParameterError(f"h1 is defined on [0, inf), got {u}")
    # 1 + u - sqrt(1+2u) == u^2 / (1 + u + sqrt(1+2u)); cancellation-free
    return u * u / (1.0 + u + math.sqrt(1.0 + 2.0 * u))


def h1_inv(v: float) -> float:
    """Inverse of :func:`h1`: v + sqrt(2v)."""
    if v < 0:
        raise InvalidParameterError(f"h1_inv is defined on [0, inf), got {v}")
    return v + math.sqrt(2.0 * v)


def level_for_threshold(v: float, m: float, t: float) -> float:
    """Solve 2sqrt(v x) + m x = t for x >= 0.

    With a = v/m and c = m^2/v the threshold reads 2a h1^{-1}(c x / 2), so
    x = (2/c) h1(t / (2a)).
    """
    _nonneg(v=v, m=m, t=t)
    if m == 0 and v == 0:
        raise InvalidParameterError("threshold is identically zero")
    if m == 0:
        return t * t / (4.0 * v)
    if v == 0:
        return t / m
    a, c = v / m, m * m / v
    return (2.0 / c) * h1(t / (2.0 * a))


def mean_pos_h1_tail(v: float, m: float, t: float) -> float:
    """8e^{1/16} exp(-h1(t/(2a)) / (8c)) with a = V/M, c = M^2/V.

    The sharpest form the h1 argument yields; at t = 2sqrt(Vx) + Mx it equals
    the threshold form's 8e^{1/16}e^{-x/16}, and it is below the prob form.
    """
    _positive(v=v, m=m)
    _nonneg(t=t)
    a, c = v / m, m * m / v
    return K.PREFACTOR_POS * math.exp(-h1(t / (2.0 * a)) / (8.0 * c))


# -- asymptotic-normality conditions at finite n ------------------------------

def _centered_energy(d) -> tuple[np.ndarray, float]:
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    mean_sq = float(np.sum(d * d)) / n
    if mean_sq == 0:
        raise DegenerateMatrixError("centered matrix is identically zero")
    return d, mean_sq


def check_hoeffding_condition_r(d, r: float) -> float:
    """(1/n) sum |d|^r / ((1/n) sum d^2)^{r/2}; absolute values for any r."""
    if not r > 2:
        raise InvalidParameterError(f"r must exceed 2, got {r}")
    d, mean_sq = _centered_energy(d)
    n = d.shape[0]
    return float(np.sum(np.abs(d) ** r)) / n / mean_sq ** (r / 2.0)


def check_hoeffding_condition_max(d) -> float:
    """max |d| / sqrt((1/n) sum d^2)."""
    d, mean_sq = _centered_energy(d)
    return float(np.max(np.abs(d))) / math.sqrt(mean_sq)


def check_lindeberg(d, eps: float) -> float:
    """sum (d/dbar)^2 1{|d/dbar| > eps}, dbar^2 = (1/n) sum d^2."""
    _positive(eps=eps)
    d, mean_sq = _centered_energy(d)
    z = d / math.sqrt(mean_sq)
    return float(np.sum(np.where(np.abs(z) > eps, z * z, 0.0)))
