import math

import numpy as np
import pytest

from oracles import gamma_bivariate
from tvfrailty.config import ModelConfig
from tvfrailty.exceptions import DataError
from tvfrailty.likelihood import (
    LOGLIK_SENTINEL,
    CurrentStatusDataset,
    aic,
    deviance,
    loglik,
    loglik_status,
    model_probabilities,
    saturated_loglik,
)

GAMMA1 = ModelConfig.menu("gamma_no_trend", k=1.0)


def one_row(age, cells, m1=(0, 0), m2=(0, 0)):
    return CurrentStatusDataset([age], [cells], [m1], [m2])


# -- dataset ---------------------------------------------------------------------


def test_dataset_basics():
    d = CurrentStatusDataset([1, 2], [[1, 2, 3, 4], [0, 0, 0, 1]], [[1, 0], [0, 0]])
    assert len(d) == 2
    assert d.n_total == 12
    assert d.has_marginal
    assert d.is_integer
    assert d.to_array().shape == (2, 9)


@pytest.mark.parametrize("ages, counts, msg", [
    ([2, 1], [[1, 0, 0, 0], [1, 0, 0, 0]], "ascending"),
    ([1], [[-1, 0, 0, 0]], "nonnegative"),
    ([1], [[0, 0, 0, 0]], "no observations"),
    ([-1], [[1, 0, 0, 0]], "nonnegative"),
])
def test_dataset_validation(ages, counts, msg):
    with pytest.raises(DataError, match=msg):
        CurrentStatusDataset(ages, counts)


def test_repeated_ages_aggregate():
    d = CurrentStatusDataset([1, 1, 2], [[1, 0, 0, 0], [2, 1, 0, 0], [0, 0, 0, 3]])
    agg = d.aggregated()
    np.testing.assert_array_equal(agg.ages, [1, 2])
    np.testing.assert_array_equal(agg.counts, [[3, 1, 0, 0], [0, 0, 0, 3]])


def test_csv_round_trip(tmp_path):
    d = CurrentStatusDataset([1, 2, 3], [[5, 2, 2, 1], [0, 1, 0, 0], [7, 0, 0, 9]],
                             [[1, 0], [0, 0], [0, 2]], [[0, 0], [3, 0], [0, 0]])
    path = tmp_path / "data.csv"
    d.to_csv(path)
    back = CurrentStatusDataset.from_csv(path)
    np.testing.assert_array_equal(back.to_array(), d.to_array())
    assert path.read_text().splitlines()[0] == "age,n00,n01,n10,n11,m0x,m1x,mx0,mx1"


def test_csv_marginal_columns_optional(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("age,n00,n01,n10,n11\n1,3,0,1,0\n")
    d = CurrentStatusDataset.from_csv(path)
    assert not d.has_marginal
    np.testing.assert_array_equal(d.counts, [[3, 0, 1, 0]])


@pytest.mark.parametrize("body, pattern", [
    ("age,n00,n01,n10,n11\n1,3,x,1,0\n", r"row 2, column 'n01'"),
    ("age,n00,n01,n10,n11\n1,3,0,1,0\n2,1,0,,0\n", r"row 3, column 'n10'"),
    ("age,n00,n01,n10,n11\n1,3,0,1.5,0\n", r"row 2, column 'n10'"),
    ("age,n00,n01,n10,n11\n1,3,0,-1,0\n", r"row 2, column 'n10'"),
    ("age,n00,n01,n10\n1,3,0,1\n", "missing required column"),
    ("age,n00,n01,n10,n11,extra\n1,3,0,1,0,2\n", "unknown column"),
    ("age,n00,n01,n10,n11\n", "no data rows"),
])
def test_csv_errors_name_row_and_column(tmp_path, body, pattern):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataError, match=pattern):
        CurrentStatusDataset.from_csv(path)


def test_from_array_shape_error():
    with pytest.raises(DataError, match="5 or 9 columns"):
        CurrentStatusDataset.from_array(np.ones((2, 4)))


def test_grid_mismatch_names_age():
    d = CurrentStatusDataset([1.0, 2.5], [[1, 0, 0, 0], [1, 0, 0, 0]])
    with pytest.raises(DataError, match="2.5"):
        loglik(GAMMA1, None, d)


# -- log-likelihood ----------------------------------------------------------------


def test_model_probabilities_match_closed_form():
    ages = np.arange(0.0, 41.0, 5.0)
    probs = np.column_stack(model_probabilities(GAMMA1, None, ages))
    ref = gamma_bivariate(1.0, 0.05, 0.05, ages).T
    np.testing.assert_allclose(probs, ref, rtol=1e-9, atol=1e-14)


def test_loglik_single_cell():
    # gamma k=1 and rates 0.05 give s00(10) = 1/2
    assert loglik(GAMMA1, None, one_row(10, [1, 0, 0, 0])) == pytest.approx(math.log(0.5), rel=1e-9)


def test_loglik_closed_form_row():
    p = gamma_bivariate(1.0, 0.05, 0.05, 10.0)
    n = np.array([5, 2, 2, 1])
    expected = float(n @ np.log(p))
    assert loglik(GAMMA1, None, one_row(10, n)) == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(5 * math.log(0.5) + 5 * math.log(1 / 6), rel=1e-12)


def test_zero_counts_give_zero():
    # an all-zero row adds an empty kernel
    with_zero = CurrentStatusDataset([5, 10], [[0, 0, 0, 0], [5, 2, 2, 1]])
    assert loglik(GAMMA1, None, with_zero) == pytest.approx(
        loglik(GAMMA1, None, one_row(10, [5, 2, 2, 1])), rel=1e-14)
    only_marginal = CurrentStatusDataset([5], [[0, 0, 0, 0]], [[1, 0]])
    s1 = gamma_bivariate(1.0, 0.05, 0.05, 5.0)[:2].sum()
    assert loglik(GAMMA1, None, only_marginal) == pytest.approx(math.log(s1), rel=1e-9)


def test_row_split_invariance():
    whole = CurrentStatusDataset([10, 20], [[5, 2, 2, 1], [3, 4, 1, 6]])
    split = CurrentStatusDataset([10, 10, 20], [[2, 1, 0, 1], [3, 1, 2, 0], [3, 4, 1, 6]])
    assert loglik(GAMMA1, None, split) == pytest.approx(loglik(GAMMA1, None, whole), rel=1e-13)


@pytest.mark.parametrize("m1, m2, which", [
    ((1, 0), (0, 0), lambda p: p[0] + p[1]),
    ((0, 1), (0, 0), lambda p: p[2] + p[3]),
    ((0, 0), (1, 0), lambda p: p[0] + p[2]),
    ((0, 0), (0, 1), lambda p: p[1] + p[3]),
])
def test_marginal_observation_adds_log_p(m1, m2, which):
    base = one_row(10, [5, 2, 2, 1])
    extra = one_row(10, [5, 2, 2, 1], m1, m2)
    p = gamma_bivariate(1.0, 0.05, 0.05, 10.0)
    diff = loglik(GAMMA1, None, extra) - loglik(GAMMA1, None, base)
    assert diff == pytest.approx(math.log(which(p)), rel=1e-9)


def test_params_as_vector_dict_and_none_agree():
    cfg = ModelConfig.menu("gamma_with_trend", k=0.5, rho=0.002)
    d = CurrentStatusDataset([10, 20], [[5, 2, 2, 1], [3, 4, 1, 6]])
    a = loglik(cfg, None, d)
    assert loglik(cfg, cfg.pack(), d) == a
    assert loglik(cfg, {"k": 0.5}, d) == a


def test_sentinel_when_probability_vanishes():
    # with zero hazards nobody can be positive
    cfg = ModelConfig.menu("gamma_no_trend", rates1=[0.0], rates2=[0.0])
    d = one_row(10, [1, 0, 0, 1])
    ll, ok = loglik_status(cfg, None, d)
    assert ll == LOGLIK_SENTINEL and not ok
    assert loglik(cfg, None, one_row(10, [4, 0, 0, 0])) == 0.0


# -- deviance and AIC -----------------------------------------------------------------


def test_deviance_zero_at_empirical_proportions():
    ages = np.array([5.0, 10.0, 30.0])
    p = gamma_bivariate(1.0, 0.05, 0.05, ages).T
    d = CurrentStatusDataset(ages, 1000.0 * p)
    dev, df = deviance(GAMMA1, None, d)
    assert dev == pytest.approx(0.0, abs=1e-8)
    assert df == 3 * 3 - 3


def test_deviance_hand_formula_two_rows():
    ages = np.array([10.0, 20.0])
    n = np.array([[5.0, 2.0, 2.0, 1.0], [3.0, 4.0, 0.0, 6.0]])
    d = CurrentStatusDataset(ages, n)
    model = gamma_bivariate(1.0, 0.05, 0.05, ages).T
    emp = n / n.sum(axis=1, keepdims=True)
    pos = n > 0
    expected = 2.0 * np.sum(n[pos] * np.log(emp[pos] / model[pos]))
    dev, df = deviance(GAMMA1, None, d)
    assert dev == pytest.approx(expected, rel=1e-9)
    assert df == 6 - 3
    assert saturated_loglik(d) == pytest.approx(np.sum(n[pos] * np.log(emp[pos])), rel=1e-12)


def test_deviance_counts_marginal_cells():
    d = CurrentStatusDataset([10, 20], [[5, 2, 2, 1], [0, 0, 0, 0]], [[0, 0], [2, 1]], [[1, 1], [0, 0]])
    # 3 free cells at age 10, one per nonempty marginal group
    assert deviance(GAMMA1, None, d)[1] == 3 + 1 + 1 - 3


def test_nested_models_df_differ_by_one():
    d = CurrentStatusDataset([10, 20, 30], [[5, 2, 2, 1], [3, 4, 1, 6], [1, 2, 3, 4]])
    small = ModelConfig.menu("gamma_no_trend")
    big = ModelConfig.menu("gengamma_no_trend")
    assert big.n_params == small.n_params + 1
    assert deviance(small, None, d)[1] - deviance(big, None, d)[1] == 1


def test_deviance_nonnegative():
    d = CurrentStatusDataset([10, 20], [[5, 2, 2, 1], [3, 4, 1, 6]])
    for k in (0.3, 1.0, 4.0):
        assert deviance(GAMMA1, {"k": k}, d)[0] >= 0


@pytest.mark.parametrize("ll, n, expected", [
    (-4352.07, 14, 8732.14),
    (0.0, 0, 0.0),
    (-10.0, 3, 26.0),
])
def test_aic_examples(ll, n, expected):
    assert aic(ll, n) == pytest.approx(expected, abs=1e-9)
