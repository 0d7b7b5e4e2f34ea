import math

import numpy as np
import pytest

from leki.diagnostics import (
    MetricsRecorder,
    MetricsRow,
    RiccatiParams,
    collapse_rate,
    error_matrix_R,
    max_error,
    misfit,
    obs_ratio,
    reg_ratio,
    riccati_rhs,
    riccati_solution,
    rmse,
    scaled_misfit,
    v_vector,
    v_vector_claims,
)
from leki.dynamics import InflationConfig, StepPolicy, StoppingRule, run
from leki.ensemble import Ensemble, compute_stats
from leki.errors import ConfigurationError, DomainError, UsageError
from leki.localization import LocalizationScheme, localize_cup
from leki.models import FunctionModel, LinearModel


def test_output_metrics_examples():
    assert misfit([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert misfit([3.0, 4.0], [0.0, 0.0]) == pytest.approx(math.sqrt(12.5))
    assert max_error([3.0, -4.0], [0.0, 0.0]) == 4.0
    assert rmse(np.ones(4), np.zeros(4)) == 1.0
    assert rmse([2.0, 0.0], [0.0, 0.0]) == pytest.approx(math.sqrt(2.0))
    assert scaled_misfit([2.0, 2.0], [0.0, 0.0], [2.0, 2.0]) == 1.0
    y, yh = np.array([1.0, -2.0, 5.0]), np.array([0.5, 1.0, 2.0])
    assert scaled_misfit(y, yh, np.ones(3)) == misfit(y, yh)
    with pytest.raises(ConfigurationError):
        scaled_misfit(y, yh, [1.0, 0.0, 1.0])
    with pytest.raises(ConfigurationError):
        misfit([1.0], [1.0, 2.0])


def _stats(model, members):
    ens = Ensemble(members)
    return compute_stats(ens, model.evaluate_ensemble(ens.members))


def test_error_matrix_zero_for_exact_linearization(rng):
    H = rng.standard_normal((4, 5))
    model = LinearModel(H)
    st = _stats(model, rng.standard_normal((5, 7)))
    psi = np.exp(-0.5 * (np.subtract.outer(np.arange(5), np.arange(5)) / 2.0) ** 2)
    scheme = LocalizationScheme("linearized", psi, jacobian_provider=model.jacobian)
    R = error_matrix_R(st, scheme, H)
    assert np.max(np.abs(R)) <= 1e-12
    assert np.max(np.abs(error_matrix_R(st, None, H))) <= 1e-12


def test_error_matrix_identity_centralized(rng):
    model = LinearModel.identity(3)
    st = _stats(model, rng.standard_normal((3, 5)))
    scheme = LocalizationScheme("centralized", np.eye(3), center_map=np.arange(3))
    np.testing.assert_allclose(error_matrix_R(st, scheme, np.eye(3)), 0.0, atol=1e-14)


def test_obs_ratio_identity_at_least_one(rng):
    model = LinearModel.identity(4)
    scheme = LocalizationScheme("centralized", np.eye(4), center_map=np.arange(4))
    for _ in range(20):
        st = _stats(model, rng.standard_normal((4, 6)))
        assert obs_ratio(st, localize_cup(st, scheme)) >= 1 - 1e-10


def test_ratio_degenerate_conventions(rng):
    zero = FunctionModel(lambda u: np.zeros(2), 2, 2)
    st = _stats(zero, rng.standard_normal((2, 4)))
    assert obs_ratio(st, st.cup) == 0.0 and reg_ratio(st, st.cup) == 0.0
    const = _stats(LinearModel.identity(2), np.ones((2, 3)))
    assert obs_ratio(const, const.cup) == 0.0 and reg_ratio(const, const.cup) == 0.0
    st = _stats(LinearModel.identity(1), [[0.0, 1.0, 3.0]])
    assert reg_ratio(st, st.cup) == pytest.approx(1.0)


def test_riccati_examples():
    assert riccati_solution(RiccatiParams(1.0, 0.0, 0.0, 1.0), 1.0) == pytest.approx(0.5)
    for p in (RiccatiParams(1.0), RiccatiParams(2.0, 0.5, 3.0, 0.2), RiccatiParams(0.3, 2.0, 1.0, 5.0)):
        assert riccati_solution(p, 0.0) == pytest.approx(p.y0, rel=1e-14)
    with pytest.raises(DomainError):
        RiccatiParams(1.0, y0=-1.0)
    with pytest.raises(DomainError):
        RiccatiParams(0.0)


def test_riccati_asymptote_oracle():
    # independent oracle: c_- is the negative root of c^2 + c - 1 = 0, and
    # y_t (t + 1) tends to c_- / (-a)
    c_minus = np.roots([1.0, 1.0, -1.0]).min()
    p = RiccatiParams(1.0, 0.0, 1.0, 1.0)
    t = 1e8
    assert riccati_solution(p, t) * (t + 1) == pytest.approx(-c_minus, rel=1e-6)
    assert -c_minus == pytest.approx((1 + math.sqrt(5)) / 2)


@pytest.mark.parametrize("p", [
    RiccatiParams(1.0, 0.0, 0.0, 1.0),
    RiccatiParams(1.0, 0.0, 1.0, 1.0),
    RiccatiParams(2.0, 0.5, 0.1, 3.0),
    RiccatiParams(0.5, 1.5, 2.0, 0.0),
])
def test_riccati_satisfies_ode(p):
    t = np.linspace(0.01, 50.0, 101)
    h = 1e-5
    dy = (riccati_solution(p, t + h) - riccati_solution(p, t - h)) / (2 * h)
    rhs = riccati_rhs(p, t, riccati_solution(p, t))
    np.testing.assert_allclose(dy, rhs, rtol=1e-4, atol=1e-10)


def test_riccati_against_numerical_integration():
    from scipy.integrate import solve_ivp
    p = RiccatiParams(1.5, 0.3, 0.7, 2.0)
    sol = solve_ivp(lambda t, y: riccati_rhs(p, t, y), (0, 30), [p.y0], rtol=1e-11, atol=1e-13,
                    dense_output=True)
    t = np.linspace(0, 30, 31)
    np.testing.assert_allclose(riccati_solution(p, t), sol.sol(t)[0], rtol=1e-7)


def test_riccati_envelope_identity_model(rng):
    d, J, sigma = 10, 20, 0.1
    model = LinearModel.identity(d)
    ens = Ensemble(rng.standard_normal((d, J)))
    scheme = LocalizationScheme("linearized", np.eye(d), jacobian_provider=model.jacobian)
    y0 = float(np.max(np.abs(compute_stats(ens, ens.members).cuu)))
    rows = []
    run(ens, model, scheme, np.zeros(d), InflationConfig(sigma), StepPolicy(dt=0.05), StoppingRule(400),
        callback=lambda s: rows.append((s.t, float(np.max(np.abs(s.stats.cuu))) if s.stats else None)))
    # stats are attached to the pre-step state; compare the state they describe
    p = RiccatiParams(2.0, 0.0, sigma, y0)
    for t, cmax in rows:
        if cmax is not None:
            assert cmax <= 1.05 * riccati_solution(p, t)


def test_v_vector_examples():
    np.testing.assert_allclose(v_vector(np.zeros((1, 1)), 0.5, 0), [1.0])
    v = v_vector([[0.0, 0.2], [0.2, 0.0]], 0.5, 0)
    np.testing.assert_allclose(v, [7 / 9, 2 / 9], rtol=1e-12)
    assert v.sum() == pytest.approx(1.0)
    with pytest.raises(DomainError):
        v_vector([[0.0, 0.6], [0.6, 0.0]], 0.5, 0)
    with pytest.raises(DomainError):
        v_vector([[0.0, 0.2], [0.1, 0.0]], 0.5, 0)


def test_v_vector_claims_random(rng):
    for _ in range(100):
        d = int(rng.integers(1, 8))
        phi = rng.uniform(0, 1, (d, d))
        phi = np.triu(phi, 1)
        phi = phi + phi.T
        rows = phi.sum(axis=1).max()
        if rows > 0:
            phi *= rng.uniform(0.1, 0.9) / rows
        phi0 = rng.uniform(0.01, 1.0 - phi.sum(axis=1).max())
        i = int(rng.integers(d))
        v = v_vector(phi, phi0, i)
        claims = v_vector_claims(phi, phi0, i, v)
        assert all(claims.values()), claims


def test_collapse_rate_examples():
    t = np.linspace(0, 100, 200)
    assert collapse_rate(t, 1 / (1 + t), (1, 100)) == pytest.approx(-1.0)
    assert collapse_rate(t, np.full_like(t, 3.0), (1, 100)) == pytest.approx(0.0, abs=1e-12)
    assert collapse_rate(t, (1 + t) ** -2.0, (1, 100)) == pytest.approx(-2.0)
    with pytest.raises(UsageError):
        collapse_rate(t, 1 / (1 + t), (200, 300))


def test_metrics_recorder_levels(rng):
    model = LinearModel.identity(3)
    ens = Ensemble(rng.standard_normal((3, 5)))
    y = np.ones(3)
    scheme = LocalizationScheme("linearized", np.eye(3), jacobian_provider=model.jacobian)
    rec = MetricsRecorder(model, y, truth=np.ones(3), stds=np.ones(3), scheme=scheme, level="full")
    _, record = run(ens, model, scheme, y, stop=StoppingRule(3), recorder=rec)
    row = record.rows[-1]
    assert row.r_opnorm == pytest.approx(0.0, abs=1e-12)
    assert row.max_diag >= row.min_diag >= 0
    assert row.trace_cuu >= 3 * row.min_diag - 1e-15
    basic = MetricsRecorder(model, y)
    _, record = run(ens, model, None, y, stop=StoppingRule(2), recorder=basic)
    assert record.rows[0].rmse is None and record.rows[0].obs_ratio is None
    assert MetricsRow.columns()[:3] == ["iter", "t", "misfit"]
    with pytest.raises(ConfigurationError):
        MetricsRecorder(model, y, misfit_at="median")


def test_misfit_at_modes(rng):
    model = FunctionModel(lambda u: u**2, 2, 2)
    ens = Ensemble(rng.standard_normal((2, 4)))
    y = np.zeros(2)
    _, a = run(ens, model, None, y, stop=StoppingRule(1), recorder=MetricsRecorder(model, y), record_initial=True)
    _, b = run(ens, model, None, y, stop=StoppingRule(1),
               recorder=MetricsRecorder(model, y, misfit_at="mean-prediction"), record_initial=True)
    mean = ens.mean
    assert a.rows[0].misfit == pytest.approx(misfit(y, mean**2))
    assert b.rows[0].misfit == pytest.approx(misfit(y, (ens.members**2).mean(axis=1)))
