import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from permconc import constants as K
from permconc import indep_test as IT
from permconc.errors import (
    BoundUnavailableError,
    DimensionError,
    EnumerationTooLargeError,
    InvalidParameterError,
    InvalidSizeError,
    KernelBoundViolation,
    MalformedInputError,
)
from permconc.kernels import coincidence_kernel, constant_kernel, gaussian_kernel, product_kernel
from permconc.perm_core import make_rng, permutation_table

S3 = IT.PairedSample([1, 2, 3], [1, 2, 3])
PROD = product_kernel(9.0)


def random_sample(seed, n, dependent=False):
    rng = make_rng(seed)
    x = rng.uniform(0, 1, n)
    y = 0.6 * x + 0.4 * rng.uniform(0, 1, n) if dependent else rng.uniform(0, 1, n)
    return IT.PairedSample(x, y)


# -- construction and phi ---------------------------------------------------------

def test_paired_sample_validation():
    with pytest.raises(DimensionError):
        IT.PairedSample([1, 2, 3], [1, 2])
    with pytest.raises(InvalidSizeError):
        IT.PairedSample([1], [1])
    assert IT.PairedSample([[0, 1], [2, 3]], [[1, 1], [0, 0]]).first.shape == (2, 2)


def test_phi_matrix_examples():
    assert np.array_equal(IT.phi_matrix(S3, PROD), np.outer([1, 2, 3], [1, 2, 3]))
    assert np.all(IT.phi_matrix(S3, constant_kernel(2.0)) == 2.0)
    ints = IT.PairedSample([0, 1, 2, 3], [0, 1, 2, 3])
    assert np.array_equal(IT.phi_matrix(ints, coincidence_kernel(0)), np.eye(4))


def test_phi_matrix_sup_norm_violation():
    with pytest.raises(KernelBoundViolation):
        IT.phi_matrix(S3, product_kernel(8.0))


# -- statistic and critical value -------------------------------------------------

def test_statistic_examples():
    assert IT.test_statistic(S3, PROD) == 1.0
    assert IT.test_statistic(S3, constant_kernel(3.0)) == 0.0
    assert IT.permuted_statistic(S3, PROD, [0, 1, 2]) == 1.0
    assert IT.permuted_statistic(S3, PROD, [2, 1, 0]) == -1.0
    assert sum(IT.permuted_statistic(S3, PROD, p) for p in itertools.permutations(range(3))) == 0.0
    with pytest.raises(DimensionError):
        IT.permuted_statistic(S3, PROD, [1, 0])


def test_statistic_equals_formula():
    s = random_sample(1, 6)
    k = gaussian_kernel(0.4)
    phi = k.pairwise(s.first, s.second)
    expected = (np.trace(phi) - phi.sum() / 6) / 5
    assert IT.test_statistic(s, k) == pytest.approx(expected, abs=1e-14)


def test_critical_value_examples():
    pool = np.sort(IT.null_statistics(IT.phi_matrix(S3, PROD)))
    assert pool.tolist() == [-1, -0.5, -0.5, 0.5, 0.5, 1]
    assert IT.critical_value(S3, PROD, 0.2) == 0.5
    assert IT.critical_value(S3, PROD, 0.1) == 1.0  # alpha < 1/3! gives the maximum
    assert IT.critical_value(S3, constant_kernel(1.0), 0.2) == 0.0


def test_order_index_uses_decimal_alpha():
    assert IT.order_index(10, 0.3) == 7
    assert IT.order_index(120, 0.05) == 114
    for bad in (0, 1, -0.1, 1.5):
        with pytest.raises(InvalidParameterError):
            IT.order_index(10, bad)


def test_critical_value_errors():
    with pytest.raises(InvalidParameterError):
        IT.critical_value(S3, PROD, 1.0)
    with pytest.raises(EnumerationTooLargeError):
        IT.critical_value(random_sample(2, 12), gaussian_kernel(1.0), 0.1)
    with pytest.raises(InvalidSizeError):
        IT.critical_value(S3, PROD, 0.1, mode="mc", b=0, seed=1)
    with pytest.raises(InvalidParameterError):
        IT.critical_value(S3, PROD, 0.1, mode="mc", b=10)


def test_run_test_example():
    rep = IT.run_test(S3, PROD, 0.2)
    assert rep.statistic == 1.0 and rep.critical_value == 0.5 and rep.reject
    assert not IT.run_test(S3, constant_kernel(1.0), 0.2).reject
    assert IT.TestReport.from_dict(rep.to_dict()) == rep


@given(st.integers(0, 10**6), st.integers(3, 6), st.sampled_from([0.01, 0.05, 0.1, 0.25, 0.5]))
@settings(max_examples=40, deadline=None)
def test_exact_level_by_enumeration(seed, n, alpha):
    s = random_sample(seed, n, dependent=seed % 2 == 0)
    phi = IT.phi_matrix(s, gaussian_kernel(0.3))
    pool = IT.null_statistics(phi)
    q = IT.critical_from_pool(pool, alpha)
    assert Fraction(int(np.count_nonzero(pool > q)), pool.size) <= Fraction(repr(alpha))


@given(st.integers(0, 10**6), st.integers(3, 6))
@settings(max_examples=30, deadline=None)
def test_critical_value_invariant_to_relabeling_second_coords(seed, n):
    s = random_sample(seed, n)
    k = gaussian_kernel(0.5)
    p = make_rng(seed, 1).permutation(n)
    assert IT.critical_value(s.permuted(p), k, 0.1) == IT.critical_value(s, k, 0.1)


@given(st.integers(0, 10**6), st.integers(2, 6))
@settings(max_examples=30, deadline=None)
def test_permuted_statistics_centered(seed, n):
    s = IT.PairedSample(make_rng(seed).integers(0, 4, n), make_rng(seed, 1).integers(0, 4, n))
    k = product_kernel()
    vals = [Fraction(IT.permuted_statistic(s, k, p)) for p in itertools.permutations(range(n))]
    assert abs(sum(vals) / len(vals)) <= 1e-12


def test_identity_statistic_appears_in_pool():
    s = random_sample(3, 7)
    phi = IT.phi_matrix(s, gaussian_kernel(0.2))
    pool = IT.null_statistics(phi)
    assert pool[0] == IT.test_statistic(s, gaussian_kernel(0.2))


def test_mc_critical_value_deterministic_and_close_to_exact():
    s = random_sample(4, 7, dependent=True)
    k = gaussian_kernel(0.3)
    a = IT.critical_value(s, k, 0.1, "mc", 5000, seed=9)
    assert a == IT.critical_value(s, k, 0.1, "mc", 5000, seed=9)
    exact_pool = np.sort(IT.null_statistics(IT.phi_matrix(s, k)))
    # the MC quantile lies between nearby exact quantiles
    lo, hi = np.quantile(exact_pool, [0.85, 0.95])
    assert lo <= a <= hi
    rep = IT.run_test(s, k, 0.1, "mc", 99, seed=1)
    assert rep.b == 99 and rep.seed == 1


@pytest.mark.parametrize("b", [19, 99, 199])
def test_mc_level_under_null(b):
    trials, alpha = 400, 0.1
    rate = IT.level_simulation(IT.IndependentUniform(), gaussian_kernel(0.3), 12, alpha, trials,
                               seed=b, mode="mc", b=b)
    assert rate <= alpha + 3 * math.sqrt(alpha * (1 - alpha) / trials)


# -- quantile and variance bounds -------------------------------------------------

def test_conditional_quantile_bound():
    s = S3
    v = IT.conditional_quantile_bound(s, PROD, 0.2)
    energy = (np.outer([1, 2, 3], [1, 2, 3]) ** 2).sum() / 3
    lr = math.log(K.SMALL_C0 / 0.2)
    assert v == pytest.approx(32 / 2 * (math.sqrt(energy) * math.sqrt(lr) + 9 * lr))
    assert v >= 0.5
    assert IT.conditional_quantile_bound(s, PROD, 0.3) < v
    with pytest.raises(BoundUnavailableError):
        IT.conditional_quantile_bound(s, product_kernel(), 0.2)


def test_hoeffding_quantile_bound_examples():
    assert IT.conditional_variance(S3, PROD) == pytest.approx(0.5)
    assert IT.hoeffding_quantile_bound(S3, PROD, 0.2) == pytest.approx(math.sqrt(2))
    assert IT.hoeffding_quantile_bound(S3, constant_kernel(1.0), 0.2) == 0.0
    assert IT.hoeffding_quantile_bound(S3, PROD, 0.3) < IT.hoeffding_quantile_bound(S3, PROD, 0.2)


@given(st.integers(0, 10**6), st.integers(2, 6))
@settings(max_examples=30, deadline=None)
def test_conditional_variance_matches_enumeration(seed, n):
    s = random_sample(seed, n)
    k = gaussian_kernel(0.4)
    pool = IT.statistics_for(IT.phi_matrix(s, k), permutation_table(n))
    assert IT.conditional_variance(s, k) == pytest.approx(np.mean(pool**2), rel=1e-9, abs=1e-15)


@given(st.integers(0, 10**6), st.integers(3, 6), st.sampled_from([0.05, 0.1, 0.25]))
@settings(max_examples=30, deadline=None)
def test_bounds_dominate_exact_quantile(seed, n, alpha):
    s = random_sample(seed, n, dependent=True)
    k = gaussian_kernel(0.3)
    q = IT.critical_value(s, k, alpha)
    assert IT.conditional_quantile_bound(s, k, alpha) >= q
    assert IT.hoeffding_quantile_bound(s, k, alpha) >= q


def test_variance_bound_examples():
    vb = IT.tstat_variance_bound(1, 1, 4)
    assert (vb.sharp, vb.loose) == (2.25, 4.0)
    assert IT.tstat_variance_bound(0, 0, 10) == IT.VarianceBound(0.0, 0.0)
    with pytest.raises(InvalidSizeError):
        IT.tstat_variance_bound(1, 1, 3)


@given(st.floats(0, 100), st.floats(0, 100), st.integers(4, 10**6))
def test_sharp_variance_bound_below_loose(mp, mi, n):
    vb = IT.tstat_variance_bound(mp, mi, n)
    assert vb.sharp <= vb.loose * (1 + 1e-12)


def _exact_var_two_point(n, kernel):
    probs = np.array([0.3, 0.7])
    first, second = np.array([0.0, 1.0]), np.array([1.0, 1.0])
    phi_atoms = kernel.pairwise(first, second)
    m1 = m2 = 0.0
    for cfg in itertools.product(range(2), repeat=n):
        cfg = np.array(cfg)
        p = float(np.prod(probs[cfg]))
        t = float(IT.statistics_for(phi_atoms[np.ix_(cfg, cfg)], np.arange(n)[None, :])[0])
        m1, m2 = m1 + p * t, m2 + p * t * t
    return m2 - m1 * m1, IT.FiniteJointDistribution(first, second, np.diag(probs))


def test_two_point_variance_below_sharp_bound():
    for kernel in (product_kernel(1.0), gaussian_kernel(0.7)):
        var_t, dist = _exact_var_two_point(4, kernel)
        pm = dist.population_moments(kernel)
        assert var_t <= IT.tstat_variance_bound(pm.m_p, pm.m_indep, 4).sharp


def test_plugin_moments_examples():
    pm = IT.plugin_moments(S3, constant_kernel(3.0))
    assert pm.m_p_hat == pytest.approx(9.0) and pm.m_indep_hat == pytest.approx(9.0)
    pm = IT.plugin_moments(S3, PROD)
    off = sum((i * j) ** 2 for i in (1, 2, 3) for j in (1, 2, 3) if i != j)
    assert pm.m_p_hat == pytest.approx(98 / 3) and pm.m_indep_hat == pytest.approx(off / 6)


def test_plugin_indep_moment_converges_under_independence():
    k = gaussian_kernel(0.5)
    s = IT.IndependentUniform().sample(make_rng(3), 600)
    pm = IT.plugin_moments(s, k)
    truth = IT.estimate_population_moments(IT.IndependentUniform(), k, 200000, seed=4).m_indep
    phi2 = k.pairwise(s.first, s.second) ** 2
    sd = float(np.std(phi2))
    assert abs(pm.m_indep_hat - truth) <= 3 * sd / math.sqrt(600)


def test_quantile_of_quantile_examples():
    v = IT.quantile_of_quantile_bound(1, 1, None, 16, 0.25, 0.5, "hoeffding")
    assert v == pytest.approx(2 * math.sqrt(3) * math.sqrt(0.5))
    assert v == pytest.approx(2.449, abs=1e-3)
    for form, sup in (("hoeffding", None), ("sharp", 1.0)):
        vals = [IT.quantile_of_quantile_bound(1, 1, sup, n, 0.1, 0.2, form) for n in (10, 100, 1000)]
        assert vals[0] > vals[1] > vals[2]
    with pytest.raises(BoundUnavailableError):
        IT.quantile_of_quantile_bound(1, 1, None, 16, 0.25, 0.5, "sharp")


def test_quantile_of_quantile_sharp_formula():
    lr = math.log(K.SMALL_C0 / 0.05)
    expected = 64 * (math.sqrt(2 / 0.2 * lr) * (math.sqrt(2) / 50 + math.sqrt(3) / math.sqrt(50))
                     + 1.5 * lr / 50)
    assert IT.quantile_of_quantile_bound(2, 3, 1.5, 50, 0.05, 0.2) == pytest.approx(expected)


def test_second_kind_condition_forms():
    assert not IT.second_kind_condition(0.0, 1, 1, 1.0, 100, 0.1, 0.2, "hoeffding").satisfied
    h = IT.second_kind_condition(3.0, 1, 1, None, 100, 0.25, 0.5, "hoeffding")
    assert h.threshold == pytest.approx(8 * math.sqrt(0.08)) and h.satisfied
    lr = math.log(K.SMALL_C0 / 0.1)
    sh = IT.second_kind_condition(1.0, 1, 1, 1.0, 400, 0.1, 0.2, "sharp")
    assert sh.threshold == pytest.approx(128 * (math.sqrt(10 * (lr + 1) * 2 / 400) + lr / 400))
    ch = IT.second_kind_condition(1.0, 1, 1, None, 100, 0.1, 0.2, "chebyshev", quantile=0.2,
                                  variance=0.01)
    assert ch.threshold == pytest.approx(0.2 + math.sqrt(10 * 0.01))
    derived = IT.second_kind_condition(1.0, 1, 1, 1.0, 100, 0.1, 0.2, "chebyshev")
    qb = min(IT.quantile_of_quantile_bound(1, 1, None, 100, 0.1, 0.2, "hoeffding"),
             IT.quantile_of_quantile_bound(1, 1, 1.0, 100, 0.1, 0.2, "sharp"))
    assert derived.threshold == pytest.approx(qb + math.sqrt(10 * 9 / 100))
    with pytest.raises(BoundUnavailableError):
        IT.second_kind_condition(1.0, 1, 1, None, 100, 0.1, 0.2, "sharp")
    with pytest.raises(InvalidParameterError):
        IT.second_kind_condition(1.0, 1, 1, None, 100, 0.1, 0.2, "other")


def test_c_double_prime_resolution():
    assert K.C_DOUBLE_PRIME == 2 * max(K.C_QUANTILE, math.sqrt(8)) == 128.0


# -- generators and simulations ---------------------------------------------------

def test_finite_distribution_moments():
    d = IT.coupled_discrete(4, 1.0)
    pm = d.population_moments(coincidence_kernel(0))
    assert (pm.e_p, pm.e_indep, pm.m_p, pm.m_indep) == pytest.approx((1.0, 0.25, 1.0, 0.25))
    with pytest.raises(InvalidParameterError):
        IT.FiniteJointDistribution([0, 1], [0, 1], [[0.5, 0.5], [0.5, 0.5]])


def test_statistic_unbiased():
    d = IT.coupled_discrete(3, 0.5)
    k = coincidence_kernel(0)
    pm = d.population_moments(k)
    stats = [IT.test_statistic(d.sample(make_rng(21, r), 15), k) for r in range(3000)]
    se = np.std(stats) / math.sqrt(len(stats))
    assert abs(np.mean(stats) - pm.expected_t) <= 3 * se


def test_level_simulation_examples():
    gen = IT.IndependentUniform()
    rate = IT.level_simulation(gen, gaussian_kernel(0.3), 5, 0.1, 2000, seed=1)
    assert rate <= 0.1 + 3 * math.sqrt(0.09 / 2000)
    assert IT.level_simulation(gen, constant_kernel(1.0), 5, 0.1, 100, seed=1) == 0.0
    tiny = IT.level_simulation(gen, gaussian_kernel(0.3), 4, 0.01, 500, seed=2)
    assert tiny <= 0.01 + 3 * math.sqrt(0.0099 / 500)


def test_level_simulation_worker_independent():
    gen = IT.CorrelatedGaussian(0.0)
    a = IT.level_simulation(gen, gaussian_kernel(1.0), 6, 0.1, 200, seed=5, workers=1)
    b = IT.level_simulation(gen, gaussian_kernel(1.0), 6, 0.1, 200, seed=5, workers=4)
    assert a == b


def test_power_simulation_strong_signal():
    rep = IT.power_simulation(IT.coupled_discrete(10, 1.0), coincidence_kernel(0), 20, 0.1, 300,
                              seed=3, mode="mc", b=199)
    assert rep.rejection_rate >= 0.95
    assert set(rep.condition_verdicts) == {"chebyshev", "hoeffding", "sharp"}
    assert IT.PowerReport.from_dict(rep.to_dict()) == rep


def test_power_simulation_on_null_is_level():
    rep = IT.power_simulation(IT.coupled_discrete(5, 0.0), coincidence_kernel(0), 6, 0.1, 1000,
                              seed=8)
    assert rep.rejection_rate <= 0.1 + 3 * math.sqrt(0.09 / 1000)
    assert not rep.condition_verdicts["hoeffding"]["satisfied"]


def test_power_when_hoeffding_condition_holds():
    gen, k = IT.coupled_discrete(4, 1.0), coincidence_kernel(0)
    pm = gen.population_moments(k)
    n = next(n for n in range(4, 10**4)
             if IT.second_kind_condition(pm.expected_t, pm.m_p, pm.m_indep, 1.0, n, 0.25, 0.2).satisfied)
    rep = IT.power_simulation(gen, k, n, 0.25, 200, seed=2, mode="mc", b=19)
    assert rep.condition_verdicts["hoeffding"]["satisfied"]
    assert rep.rejection_rate >= 0.8 - 3 * math.sqrt(0.16 / 200)


def test_critical_value_quantile_estimate_below_bounds():
    gen, k = IT.coupled_discrete(3, 0.5), coincidence_kernel(0)
    pm = gen.population_moments(k)
    est = IT.critical_value_quantile_estimate(gen, k, 7, 0.1, 0.2, 300, seed=1)
    assert est <= IT.quantile_of_quantile_bound(pm.m_p, pm.m_indep, 1.0, 7, 0.1, 0.2, "hoeffding")


def test_read_paired_csv(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("1,2,3,4\n5,6,7,8\n")
    s = IT.read_paired_csv(p)
    assert s.first.tolist() == [[1, 2], [5, 6]] and s.second.tolist() == [[3, 4], [7, 8]]
    bad = tmp_path / "b.csv"
    bad.write_text("1,2\n3,4,5\n")
    with pytest.raises(MalformedInputError, match="line 2"):
        IT.read_paired_csv(bad)
    tok = tmp_path / "t.csv"
    tok.write_text("1,2\nz,4\n")
    with pytest.raises(MalformedInputError, match="line 2"):
        IT.read_paired_csv(tok)


def test_generator_from_spec():
    assert isinstance(IT.generator_from_spec({"type": "correlated-gaussian", "rho": 0.5}),
                      IT.CorrelatedGaussian)
    with pytest.raises(InvalidParameterError):
        IT.generator_from_spec({"type": "nope"})
