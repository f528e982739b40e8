"""Exact and Monte Carlo tail curves, and bound-domination reports."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds as B
from .errors import DegenerateMatrixError, FamilyNotApplicableError, InvalidParameterError
from .moments import MatrixMoments, distribution_median, matrix_moments, median_of_squared_sum
from .perm_core import (
    PermSumDistribution,
    as_matrix,
    check_seed,
    exact_distribution,
    sample_distribution,
)

DEFAULT_GRID_POINTS = 64
MC_SIGMAS = 3.0

NONNEG_FAMILIES = (
    "chatterjee", "mean-pos", "mean-pos-prob", "median-pos",
    "sqrt-median-upper", "sqrt-median-lower",
)
SIGNED_FAMILIES = ("bdr", "mean-general", "mean-general-prob", "general-d-form",
                   "gaussian-tail-form")
SWEEP_FAMILIES = NONNEG_FAMILIES + SIGNED_FAMILIES

EVENTS = ("abs-ge", "abs-gt", "sqrt-upper", "sqrt-lower")


@dataclass
class TailCurve:
    """Empirical tail probabilities along a grid of deviations.

    ``event`` selects the counted set: ``abs-ge`` is |v - c| >= t, ``abs-gt``
    is |v - c| > t; the sqrt events count sqrt(v) >= sqrt(c) + t*scale and
    sqrt(v) <= sqrt(c) - t*scale.
    """

    center: str
    centering_value: float
    grid: list[float]
    tail_probs: list[float]
    counts: list[int]
    sample_size: int
    source: str
    b: int | None = None
    seed: int | None = None
    event: str = "abs-ge"
    scale: float | None = None

    def to_dict(self) -> dict:
        return {
            "center": self.center, "centering_value": self.centering_value,
            "grid": list(self.grid), "tail_probs": list(self.tail_probs),
            "counts": list(self.counts), "sample_size": self.sample_size,
            "source": self.source, "B": self.b, "seed": self.seed,
            "event": self.event, "scale": self.scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TailCurve":
        return cls(d["center"], d["centering_value"], list(d["grid"]), list(d["tail_probs"]),
                   list(d["counts"]), d["sample_size"], d["source"], d.get("B"), d.get("seed"),
                   d.get("event", "abs-ge"), d.get("scale"))


def _centering(dist: PermSumDistribution, center: str) -> float:
    if center == "mean":
        return math.fsum(dist.values) / dist.sample_size
    if center == "median":
        return distribution_median(dist)
    raise InvalidParameterError(f"center must be 'mean' or 'median', got {center!r}")


def default_grid(dist: PermSumDistribution, center: str = "mean",
                 points: int = DEFAULT_GRID_POINTS, centering_value: float | None = None,
                 positive: bool = False) -> list[float]:
    """``points`` equally spaced deviations from 0 to the largest observed one.

    ``positive=True`` drops 0 and keeps ``points`` values in (0, max]. A law
    with no spread gets the unit span instead.
    """
    c = _centering(dist, center) if centering_value is None else centering_value
    top = float(np.max(np.abs(dist.values - c))) if dist.sample_size else 0.0
    if top == 0:
        top = 1.0
    if positive:
        return [float(v) for v in np.linspace(0.0, top, points + 1)[1:]]
    return [float(v) for v in np.linspace(0.0, top, points)]


def tail_curve(dist: PermSumDistribution, center: str = "mean", grid=None, *,
               event: str = "abs-ge", centering_value: float | None = None,
               scale: float | None = None) -> TailCurve:
    if dist.sample_size == 0:
        raise InvalidParameterError("empty distribution")
    if event not in EVENTS:
        raise InvalidParameterError(f"unknown event {event!r}")
    c = _centering(dist, center) if centering_value is None else float(centering_value)
    if grid is None:
        grid = default_grid(dist, center, centering_value=c)
    grid = [float(g) for g in grid]
    if not grid:
        raise InvalidParameterError("empty grid")
    if any(g < 0 for g in grid) or any(b < a for a, b in zip(grid, grid[1:])):
        raise InvalidParameterError("grid must be sorted ascending with non-negative entries")

    v = dist.values
    counts = []
    if event in ("abs-ge", "abs-gt"):
        dev = np.abs(v - c)
        for t in grid:
            counts.append(int(np.count_nonzero(dev >= t if event == "abs-ge" else dev > t)))
    else:
        if scale is None or scale < 0:
            raise InvalidParameterError("sqrt events need a non-negative scale")
        roots = np.sqrt(np.maximum(v, 0.0))
        base = math.sqrt(max(c, 0.0))
        for t in grid:
            if event == "sqrt-upper":
                counts.append(int(np.count_nonzero(roots >= base + t * scale)))
            else:
                level = base - t * scale
                counts.append(0 if level < 0 else int(np.count_nonzero(roots <= level)))
    size = dist.sample_size
    source = "exact" if dist.kind == "exact" else "mc"
    return TailCurve(center, c, grid, [k / size for k in counts], counts, size, source,
                     b=None if source == "exact" else size, seed=dist.seed, event=event,
                     scale=scale)


# -- domination ---------------------------------------------------------------

@dataclass
class DominationRow:
    t: float
    empirical_tail: float
    raw_bound: float
    capped_bound: float
    dominated: bool
    mc_margin: float
    input: float

    def to_dict(self) -> dict:
        return {"t": self.t, "input": self.input, "empirical_tail": self.empirical_tail,
                "raw_bound": self.raw_bound, "capped_bound": self.capped_bound,
                "dominated": self.dominated, "mc_margin": self.mc_margin}


@dataclass
class DominationReport:
    family: B.BoundFamily
    rows: list[DominationRow]
    source: str
    verdict: str = "all-dominated"
    violations: list[int] = field(default_factory=list)
    note: str | None = None

    @property
    def ok(self) -> bool:
        return self.verdict in ("all-dominated", "degenerate")

    def to_dict(self) -> dict:
        return {
            "family": self.family.name, "constants": self.family.constants,
            "source": self.source, "verdict": self.verdict,
            "violations": list(self.violations), "note": self.note,
            "rows": [r.to_dict() for r in self.rows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DominationReport":
        rows = [DominationRow(r["t"], r["empirical_tail"], r["raw_bound"], r["capped_bound"],
                              r["dominated"], r["mc_margin"], r["input"]) for r in d["rows"]]
        return cls(B.BoundFamily(d["family"], dict(d["constants"])), rows, d["source"],
                   d["verdict"], list(d["violations"]), d.get("note"))


def degenerate_report(family: str, source: str, note: str) -> DominationReport:
    return DominationReport(B.BoundFamily.get(family), [], source, "degenerate", [], note)


def domination_check(curve: TailCurve, evals: list[B.BoundEvaluation]) -> DominationReport:
    """Compare an empirical curve with bound evaluations aligned to its grid.

    Exact curves are compared with zero tolerance; Monte Carlo curves get a
    margin of three binomial standard deviations at each point.
    """
    if len(evals) != len(curve.grid) or not evals:
        raise InvalidParameterError(
            f"grid mismatch: {len(evals)} evaluations for {len(curve.grid)} grid points"
        )
    names = {e.family.name for e in evals}
    if len(names) != 1:
        raise InvalidParameterError(f"mixed bound families {sorted(names)}")
    rows, bad = [], []
    for k, (t, p, e) in enumerate(zip(curve.grid, curve.tail_probs, evals)):
        standardized = e.meta.get("standardized", False)
        sqrt_scale = curve.event.startswith("sqrt")
        expected = e.input_threshold if (standardized or sqrt_scale) else e.threshold
        if not standardized and not math.isclose(expected, t, rel_tol=1e-12, abs_tol=1e-300):
            raise InvalidParameterError(f"grid mismatch at row {k}: curve {t} vs bound {expected}")
        margin = 0.0 if curve.source == "exact" else MC_SIGMAS * math.sqrt(p * (1 - p) / curve.sample_size)
        capped = e.capped_bound
        ok = p <= capped + margin
        if not ok:
            bad.append(k)
        rows.append(DominationRow(t, p, e.probability_bound, capped, ok, margin, e.input_threshold))
    return DominationReport(evals[0].family, rows, curve.source,
                            "all-dominated" if not bad else "violations", bad)


# -- per-matrix family harness -------------------------------------------------

def family_report(a, family: str, dist: PermSumDistribution | None = None, *,
                  points: int = DEFAULT_GRID_POINTS, median: float | None = None,
                  med_sq: float | None = None, mom: MatrixMoments | None = None) -> DominationReport:
    """Build the right tail curve for ``family`` on matrix ``a`` and check domination.

    ``median`` overrides the median convention (any point of the median
    interval is admissible); ``med_sq`` likewise for the squared-sum median.
    """
    a = as_matrix(a)
    if dist is None:
        dist = exact_distribution(a)
    if mom is None:
        mom = matrix_moments(a)
    source = "exact" if dist.kind == "exact" else "mc"
    nonneg = bool(np.all(a >= 0))
    if family in NONNEG_FAMILIES and not nonneg:
        raise FamilyNotApplicableError(f"{family} requires non-negative entries")
    if family not in SWEEP_FAMILIES:
        raise FamilyNotApplicableError(f"{family} is not a permuted-sum bound")
    max_a = float(np.max(a)) if nonneg else mom.max_abs
    mean_c = mom.mean_z
    med = distribution_median(dist) if median is None else float(median)

    if family in ("sqrt-median-upper", "sqrt-median-lower"):
        side = family.rsplit("-", 1)[1]
        if max_a == 0:
            return degenerate_report(family, source, "zero matrix")
        top = math.sqrt(max(float(np.max(dist.values)), 0.0)) + math.sqrt(med)
        grid = list(np.linspace(0.0, top / math.sqrt(max_a), points))
        evals = [B.sqrt_median_bound(med, max_a, t, side) for t in grid]
        curve = tail_curve(dist, "median", grid, event=f"sqrt-{side}", centering_value=med,
                           scale=math.sqrt(max_a))
        return domination_check(curve, evals)

    center_value = med if family == "median-pos" else mean_c
    positive = family in ("mean-pos", "mean-general", "median-pos", "gaussian-tail-form")
    t_grid = default_grid(dist, centering_value=center_value, points=points, positive=positive)

    if family in ("mean-pos", "mean-general", "median-pos"):
        if family == "mean-pos":
            v_eff, m_eff = mom.v_second_moment, max_a
            make = lambda x: B.mean_bound_pos(mom.v_second_moment, max_a, x=x)  # noqa: E731
        elif family == "mean-general":
            v_eff, m_eff = 2 * mom.v_second_moment, 2 * mom.max_abs
            make = lambda x: B.mean_bound_general(mom.v_second_moment, mom.max_abs, x=x)  # noqa: E731
        else:
            if med_sq is None:
                med_sq = median_of_squared_sum(a) if dist.kind == "exact" else \
                    median_of_squared_sum(a, "mc", dist.sample_size, dist.seed)
            v_eff, m_eff = med_sq / 4.0, max_a
            make = lambda x: B.median_bound_pos(med_sq, max_a, x)  # noqa: E731
        if v_eff == 0 and m_eff == 0:
            return degenerate_report(family, source, "zero matrix")
        evals = [make(B.level_for_threshold(v_eff, m_eff, t)) for t in t_grid]
        grid = [e.threshold for e in evals]
        curve = tail_curve(dist, "median" if family == "median-pos" else "mean", grid,
                           event="abs-gt" if family == "median-pos" else "abs-ge",
                           centering_value=center_value)
        return domination_check(curve, evals)

    if family == "chatterjee":
        evals = [B.chatterjee_bound(mean_c, max_a, t) for t in t_grid]
    elif family == "mean-pos-prob":
        evals = [B.mean_bound_pos(mom.v_second_moment, max_a, t=t) for t in t_grid]
    elif family == "bdr":
        if mom.v_second_moment == 0 and mom.max_abs == 0:
            return degenerate_report(family, source, "zero matrix")
        evals = [B.bdr_bound(mom.v_second_moment, mom.max_abs, t) for t in t_grid]
    elif family == "mean-general-prob":
        if mom.var_z == 0 and mom.max_abs == 0:
            return degenerate_report(family, source, "zero matrix")
        evals = [B.mean_bound_general(mom.v_second_moment, mom.max_abs, "prob_var", t=t,
                                      var_z=mom.var_z) for t in t_grid]
    elif family == "general-d-form":
        if mom.degenerate:
            return degenerate_report(family, source, "centered matrix is zero")
        evals = [B.mean_bound_general(mom.v_second_moment, mom.max_abs, "prob_d", t=t,
                                      mean_sq_d=mom.mean_sq_d, max_abs_d=mom.max_abs_d)
                 for t in t_grid]
    elif family == "gaussian-tail-form":
        if mom.degenerate:
            return degenerate_report(family, source, "centered matrix is zero")
        sd = math.sqrt(mom.var_z)
        evals = [B.gaussian_tail_form(mom.d_ratio, t / sd) for t in t_grid]
    else:  # pragma: no cover - guarded above
        raise FamilyNotApplicableError(family)
    curve = tail_curve(dist, "mean", t_grid, centering_value=mean_c)
    return domination_check(curve, evals)


def evaluate_family(a, family: str, values, dist: PermSumDistribution | None = None, *,
                    mom: MatrixMoments | None = None) -> list[B.BoundEvaluation]:
    """Evaluate ``family`` for matrix ``a`` at each input (t or x, per family).

    Median-based families take their medians from ``dist``, which defaults to
    the exact law.
    """
    a = as_matrix(a)
    if family not in SWEEP_FAMILIES:
        raise FamilyNotApplicableError(f"{family} is not a permuted-sum bound")
    nonneg = bool(np.all(a >= 0))
    if family in NONNEG_FAMILIES and not nonneg:
        raise FamilyNotApplicableError(f"{family} requires non-negative entries")
    mom = matrix_moments(a) if mom is None else mom
    max_a = float(np.max(a)) if nonneg else mom.max_abs
    if family in ("sqrt-median-upper", "sqrt-median-lower", "median-pos") and dist is None:
        dist = exact_distribution(a)
    values = [float(v) for v in values]

    if family == "chatterjee":
        return [B.chatterjee_bound(mom.mean_z, max_a, t) for t in values]
    if family == "bdr":
        return [B.bdr_bound(mom.v_second_moment, mom.max_abs, t) for t in values]
    if family.startswith("sqrt-median"):
        med = distribution_median(dist)
        side = family.rsplit("-", 1)[1]
        return [B.sqrt_median_bound(med, max_a, t, side) for t in values]
    if family == "median-pos":
        med_sq = median_of_squared_sum(a) if dist.kind == "exact" else \
            median_of_squared_sum(a, "mc", dist.sample_size, dist.seed)
        return [B.median_bound_pos(med_sq, max_a, x) for x in values]
    if family == "mean-pos":
        return [B.mean_bound_pos(mom.v_second_moment, max_a, x=x) for x in values]
    if family == "mean-pos-prob":
        return [B.mean_bound_pos(mom.v_second_moment, max_a, t=t) for t in values]
    if family == "mean-general":
        return [B.mean_bound_general(mom.v_second_moment, mom.max_abs, x=x) for x in values]
    if family == "mean-general-prob":
        return [B.mean_bound_general(mom.v_second_moment, mom.max_abs, "prob_var", t=t,
                                     var_z=mom.var_z) for t in values]
    if family == "general-d-form":
        return [B.mean_bound_general(mom.v_second_moment, mom.max_abs, "prob_d", t=t,
                                     mean_sq_d=mom.mean_sq_d, max_abs_d=mom.max_abs_d)
                for t in values]
    return [B.gaussian_tail_form(mom.d_ratio, x) for x in values]


# -- sweeps -------------------------------------------------------------------

GENERATORS = {
    # name: (builder(rng, n, params), non-negative?)
    "product": (lambda rng, n, p: np.outer(rng.uniform(0, 1, n), rng.uniform(0, 1, n)), True),
    "iid-uniform": (lambda rng, n, p: rng.uniform(0, 1, (n, n)), True),
    "iid-rademacher": (lambda rng, n, p: rng.choice(np.array([-1.0, 1.0]), size=(n, n)), False),
    "sparse": (lambda rng, n, p: _sparse(rng, n), True),
    "constant": (lambda rng, n, p: np.full((n, n), float(p.get("value", 1.0))), None),
}


def _sparse(rng, n):
    a = np.zeros((n, n))
    a[np.arange(n), rng.integers(0, n, size=n)] = rng.uniform(0, 1, n)
    return a


def generator_is_nonneg(name: str, params: dict) -> bool:
    if name not in GENERATORS:
        raise InvalidParameterError(f"unknown matrix generator {name!r}")
    flag = GENERATORS[name][1]
    return float(params.get("value", 1.0)) >= 0 if flag is None else flag


def generate_matrix(name: str, n: int, seed: int, index: int, params: dict | None = None) -> np.ndarray:
    from .perm_core import make_rng

    params = params or {}
    if name not in GENERATORS:
        raise InvalidParameterError(f"unknown matrix generator {name!r}")
    return as_matrix(GENERATORS[name][0](make_rng(seed, n, index), n, params))


@dataclass
class SweepSpec:
    generator: str
    n_list: list[int]
    families: list[str]
    seed: int
    matrices_per_n: int = 1
    mode: str = "exact"
    b: int | None = None
    points: int = DEFAULT_GRID_POINTS
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"generator": self.generator, "n_list": list(self.n_list),
                "families": list(self.families), "seed": self.seed,
                "matrices_per_n": self.matrices_per_n, "mode": self.mode, "B": self.b,
                "points": self.points, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        known = {"generator", "n_list", "families", "seed", "matrices_per_n", "mode", "B",
                 "points", "params"}
        extra = set(d) - known
        if extra:
            raise InvalidParameterError(f"unknown sweep spec keys {sorted(extra)}")
        missing = {"generator", "n_list", "families", "seed"} - set(d)
        if missing:
            raise InvalidParameterError(f"sweep spec missing keys {sorted(missing)}")
        return cls(d["generator"], [int(n) for n in d["n_list"]], list(d["families"]),
                   check_seed(d["seed"]), int(d.get("matrices_per_n", 1)),
                   d.get("mode", "exact"), d.get("B"), int(d.get("points", DEFAULT_GRID_POINTS)),
                   dict(d.get("params", {})))


@dataclass
class MatrixReport:
    n: int
    index: int
    reports: list[DominationReport]

    def to_dict(self) -> dict:
        return {"n": self.n, "index": self.index, "reports": [r.to_dict() for r in self.reports]}

    @classmethod
    def from_dict(cls, d: dict) -> "MatrixReport":
        return cls(d["n"], d["index"], [DominationReport.from_dict(r) for r in d["reports"]])


@dataclass
class SweepResult:
    spec: SweepSpec
    matrices: list[MatrixReport]

    @property
    def verdict(self) -> str:
        ok = all(r.ok for m in self.matrices for r in m.reports)
        return "all-dominated" if ok else "violations"

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "reports": [m.to_dict() for m in self.matrices],
                "verdict": self.verdict}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepResult":
        return cls(SweepSpec.from_dict(d["spec"]), [MatrixReport.from_dict(m) for m in d["reports"]])


def _derived_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def sweep_experiment(spec: SweepSpec, workers: int = 1) -> SweepResult:
    nonneg = generator_is_nonneg(spec.generator, spec.params)
    for fam in spec.families:
        if fam not in SWEEP_FAMILIES:
            raise FamilyNotApplicableError(f"{fam} is not a permuted-sum bound")
        if fam in NONNEG_FAMILIES and not nonneg:
            raise FamilyNotApplicableError(
                f"{fam} needs non-negative entries; generator {spec.generator!r} is signed"
            )
    if spec.mode not in ("exact", "mc"):
        raise InvalidParameterError(f"unknown mode {spec.mode!r}")
    if spec.mode == "mc" and (spec.b is None or spec.b < 1):
        raise InvalidParameterError("mc mode needs B >= 1")

    jobs = [(n, k) for n in spec.n_list for k in range(spec.matrices_per_n)]

    def run(job):
        n, k = job
        a = generate_matrix(spec.generator, n, spec.seed, k, spec.params)
        if spec.mode == "exact":
            dist = exact_distribution(a)
        else:
            dist = sample_distribution(a, spec.b, _derived_seed(spec.seed, n, k, 1))
        mom = matrix_moments(a)
        source = "exact" if dist.kind == "exact" else "mc"
        reports = []
        for fam in spec.families:
            try:
                reports.append(family_report(a, fam, dist, points=spec.points, mom=mom))
            except DegenerateMatrixError as exc:
                reports.append(degenerate_report(fam, source, str(exc)))
        return MatrixReport(n, k, reports)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            matrices = list(pool.map(run, jobs))
    else:
        matrices = [run(j) for j in jobs]
    return SweepResult(spec, matrices)
