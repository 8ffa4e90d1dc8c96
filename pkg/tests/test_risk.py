import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riskplan.gp import GaussianBelief
from riskplan.risk import RiskMetric, cvar, value_at_risk

from oracles import monte_carlo_tail

# frozen from monte_carlo_tail(0, 1, 0.05, n=10**7, seed=0)
MC_VAR_005 = 1.6446866376403353
MC_CVAR_005 = 2.0622211306963645


def test_frozen_monte_carlo_values_reproduce():
    var, cv = monte_carlo_tail(0.0, 1.0, 0.05, n=10**7, seed=0)
    assert var == pytest.approx(MC_VAR_005, rel=1e-12)
    assert cv == pytest.approx(MC_CVAR_005, rel=1e-12)


def test_var_median():
    assert value_at_risk(GaussianBelief(0.0, 1.0), 0.5) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("tail", ["upper", "lower"])
@pytest.mark.parametrize("beta", [0.01, 0.3, 0.9])
def test_degenerate_belief(beta, tail):
    b = GaussianBelief(4.2, 0.0)
    assert value_at_risk(b, beta, tail) == 4.2
    assert cvar(b, beta, tail) == 4.2


def test_var_cvar_against_monte_carlo():
    b = GaussianBelief(0.0, 1.0)
    assert value_at_risk(b, 0.05) == pytest.approx(MC_VAR_005, rel=5e-3)
    assert cvar(b, 0.05) == pytest.approx(MC_CVAR_005, rel=5e-3)


def test_lower_tail_mirrors_upper():
    b = GaussianBelief(3.0, 4.0)
    assert value_at_risk(b, 0.1, "lower") == pytest.approx(6.0 - value_at_risk(b, 0.1, "upper"))
    assert cvar(b, 0.1, "lower") == pytest.approx(6.0 - cvar(b, 0.1, "upper"))


def test_apply_dispatch():
    b = GaussianBelief(3.2, 9.0)
    assert RiskMetric("expected", 0.05).apply(b) == 3.2
    assert RiskMetric("var", 0.05).apply(b) == value_at_risk(b, 0.05)
    assert RiskMetric("cvar", 0.05)(b) == cvar(b, 0.05)


def test_cvar_near_one_is_close_to_mean():
    assert abs(RiskMetric("cvar", 0.999).apply(GaussianBelief(0.0, 1.0))) < 0.01


def test_cvar_affine_in_standard_case():
    std = cvar(GaussianBelief(0.0, 1.0), 0.05)
    assert cvar(GaussianBelief(10.0, 4.0), 0.05) == pytest.approx(10 + 2 * std, abs=1e-12)


def test_array_beliefs_broadcast():
    b = GaussianBelief(np.array([0.0, 1.0]), np.array([1.0, 4.0]))
    out = cvar(b, 0.05)
    assert out.shape == (2,)
    assert out[1] == pytest.approx(1 + 2 * out[0])


@pytest.mark.parametrize("beta", [0.0, 1.0, -0.1, 1.5])
def test_beta_out_of_range(beta):
    with pytest.raises(ValueError):
        value_at_risk(GaussianBelief(0, 1), beta)
    with pytest.raises(ValueError):
        cvar(GaussianBelief(0, 1), beta)
    with pytest.raises(ValueError):
        RiskMetric("cvar", beta)


def test_unknown_metric_or_tail():
    with pytest.raises(ValueError):
        RiskMetric("worst-case")
    with pytest.raises(ValueError):
        RiskMetric("var", 0.1, "left")


def test_metric_dict_roundtrip():
    m = RiskMetric("var", 0.2, "lower")
    assert RiskMetric.from_dict(m.to_dict()) == m


# -- properties ---------------------------------------------------------------

means = st.floats(-100, 100)
variances = st.floats(1e-6, 100)
betas = st.floats(0.001, 0.999)


@settings(max_examples=200)
@given(mu=means, var=variances, beta=betas, c=st.floats(-50, 50), tail=st.sampled_from(["upper", "lower"]))
def test_translation_equivariance(mu, var, beta, c, tail):
    for fn in (value_at_risk, cvar):
        a = fn(GaussianBelief(mu + c, var), beta, tail)
        b = fn(GaussianBelief(mu, var), beta, tail) + c
        assert a == pytest.approx(b, abs=1e-10 * max(1.0, abs(a)))


@settings(max_examples=200)
@given(mu=means, var=variances, beta=betas, lam=st.floats(0.01, 10))
def test_positive_homogeneity(mu, var, beta, lam):
    for fn in (value_at_risk, cvar):
        a = fn(GaussianBelief(lam * mu, lam**2 * var), beta)
        b = lam * fn(GaussianBelief(mu, var), beta)
        assert a == pytest.approx(b, abs=1e-10 * max(1.0, abs(b)))


@settings(max_examples=200)
@given(mu=means, var=variances, beta=st.floats(0.001, 0.5))
def test_cvar_above_var_above_mean(mu, var, beta):
    b = GaussianBelief(mu, var)
    assert cvar(b, beta) > value_at_risk(b, beta) >= mu - 1e-12


@settings(max_examples=200)
@given(mu=means, var=variances, b1=betas, b2=betas)
def test_cvar_monotone_in_beta(mu, var, b1, b2):
    if abs(b1 - b2) < 1e-6:
        return
    lo, hi = sorted((b1, b2))
    b = GaussianBelief(mu, var)
    assert cvar(b, lo) > cvar(b, hi)
