import math

import numpy as np
import pytest

from leki.errors import ConfigurationError, DomainError, NumericFailure
from leki.models import (
    DcResistivityConfig,
    DcResistivityModel,
    FunctionModel,
    LinearModel,
    LocalCubicModel,
    Lorenz96Config,
    Lorenz96Model,
    WhitenedModel,
    apparent_resistivity,
    apparent_resistivity_quad,
    dc_forward,
    finite_difference_jacobian,
    koefoed_transform,
    l96_forward,
    l96_rhs,
    linear_eval,
    local_cubic_eval,
)
from leki.models.resistivity import layer_log_centers, layer_thicknesses, load_j1_filter


# --- linear -----------------------------------------------------------------

def test_linear_eval_examples():
    np.testing.assert_array_equal(linear_eval(np.eye(2), [3.0, -1.0]), [3.0, -1.0])
    np.testing.assert_array_equal(linear_eval(np.zeros((2, 3)), [1.0, 2.0, 3.0]), [0.0, 0.0])
    np.testing.assert_array_equal(linear_eval([[1.0, 2.0]], [1.0, 1.0]), [3.0])
    with pytest.raises(ConfigurationError):
        linear_eval(np.eye(2), [1.0, 2.0, 3.0])


def test_linear_batch_and_jacobian(rng):
    H = rng.standard_normal((3, 5))
    m = LinearModel(H)
    U = rng.standard_normal((5, 4))
    np.testing.assert_allclose(m.evaluate_ensemble(U), H @ U)
    np.testing.assert_array_equal(m.jacobian(U[:, 0]), H)
    np.testing.assert_allclose(finite_difference_jacobian(m, U[:, 0], 0.37), H, atol=1e-12)


# --- local cubic --------------------------------------------------------------

def test_local_cubic_examples():
    np.testing.assert_array_equal(local_cubic_eval(np.zeros(7)), np.zeros(7))
    assert local_cubic_eval([1.0])[0] == pytest.approx(0.98368, abs=5e-6)
    assert local_cubic_eval([1.0])[0] == pytest.approx(1 - math.sqrt(3) * 0.01 + 0.001, rel=1e-14)
    s3 = math.sqrt(3.0)
    y = local_cubic_eval(np.full(15, s3))
    uh = 1.1 * s3
    assert y[7] == pytest.approx(s3 - s3 * uh**2 + uh**3, rel=1e-13)


def test_local_cubic_matches_brute_force(rng):
    for d in (1, 3, 6, 11, 23):
        u = rng.standard_normal(d)
        uh = np.array([sum(u[k] for k in range(i - 5, i + 6) if 0 <= k < d) / 10 for i in range(d)])
        expected = u - math.sqrt(3) * uh**2 + uh**3
        np.testing.assert_allclose(local_cubic_eval(u), expected, rtol=1e-13, atol=1e-15)
        U = rng.standard_normal((d, 3))
        np.testing.assert_allclose(LocalCubicModel(d).evaluate_ensemble(U),
                                   np.column_stack([local_cubic_eval(c) for c in U.T]), atol=1e-14)


def test_local_cubic_locality_exact(rng):
    d = 30
    u = rng.standard_normal(d)
    base = local_cubic_eval(u)
    for k in (0, 7, 29):
        v = u.copy()
        v[k] += 0.9
        diff = local_cubic_eval(v) - base
        far = np.abs(np.arange(d) - k) > 5
        assert np.all(diff[far] == 0.0)
        assert np.all(diff[~far] != 0.0)
    model = LocalCubicModel(d)
    assert list(model.footprint(0)) == list(range(0, 6))
    np.testing.assert_array_equal(model.center_map, np.arange(d))


def test_local_cubic_jacobian_at_origin_is_identity():
    m = LocalCubicModel(12)
    np.testing.assert_array_equal(m.jacobian(np.zeros(12)), np.eye(12))
    np.testing.assert_allclose(finite_difference_jacobian(m, np.zeros(12)), np.eye(12), atol=1e-9)


# --- Lorenz-96 ---------------------------------------------------------------

def test_l96_rhs_examples():
    np.testing.assert_allclose(l96_rhs(np.full(6, 8.0), 8.0), 0.0, atol=1e-14)
    np.testing.assert_array_equal(l96_rhs(np.zeros(5), 3.0), np.full(5, 3.0))
    np.testing.assert_array_equal(l96_rhs(np.array([1.0, 2.0, 3.0, 4.0]), 0.0), [-5.0, -3.0, 3.0, -7.0])


def test_l96_rhs_matches_loop(rng):
    x = rng.standard_normal(9)
    d = x.size
    brute = [(x[(k + 1) % d] - x[k - 2]) * x[k - 1] - x[k] + 8.0 for k in range(d)]
    np.testing.assert_allclose(l96_rhs(x, 8.0), brute, rtol=1e-14)


def test_l96_forward_examples(rng):
    cfg = Lorenz96Config(dim=10)
    np.testing.assert_allclose(l96_forward(np.full(10, 8.0), cfg), 8.0, atol=1e-12)
    u = rng.standard_normal(10)
    np.testing.assert_array_equal(l96_forward(u, Lorenz96Config(dim=10, obs_time=0.0)), u)
    assert cfg.n_steps == 4
    with pytest.raises(NumericFailure):
        l96_forward(np.tile([1e200, -1e200], 5), cfg)


def test_l96_euler_first_order(rng):
    x0 = 8.0 + rng.standard_normal(12)
    outs = [l96_forward(x0, Lorenz96Config(dim=12, inner_dt=dt)) for dt in (0.05, 0.025, 0.0125)]
    ratio = np.linalg.norm(outs[0] - outs[1]) / np.linalg.norm(outs[1] - outs[2])
    assert ratio == pytest.approx(2.0, rel=0.15)


def test_l96_batch_marks_nonfinite_columns(rng):
    m = Lorenz96Model(Lorenz96Config(dim=6))
    U = rng.standard_normal((6, 3))
    U[:, 1] = np.tile([1e200, -1e200], 3)
    out = m.evaluate_ensemble(U)
    assert np.all(np.isfinite(out[:, [0, 2]])) and not np.all(np.isfinite(out[:, 1]))
    np.testing.assert_allclose(out[:, 0], m.evaluate(U[:, 0]), rtol=1e-13)


# --- DC resistivity -----------------------------------------------------------

def test_koefoed_examples():
    lam = np.logspace(-3, 3, 13)
    np.testing.assert_allclose(koefoed_transform(np.full(4, 7.0), [1.0, 2.0, 3.0], lam), 7.0, rtol=1e-14)
    assert koefoed_transform([1.0, 10.0], [1.0], 1.0) == pytest.approx(1.249033, abs=1e-6)
    assert koefoed_transform([3.0, 50.0, 0.5], [1.0, 1.0], 1e4) == pytest.approx(3.0, rel=1e-12)
    with pytest.raises(DomainError):
        koefoed_transform([1.0, -1.0], [1.0], 1.0)


def test_koefoed_max_principle(rng):
    lam = np.logspace(-4, 4, 50)
    for _ in range(30):
        d = int(rng.integers(2, 8))
        u = np.exp(rng.uniform(-3, 5, d))
        t = np.exp(rng.uniform(-2, 3, d - 1))
        T = koefoed_transform(u, t, lam)
        assert np.all(T >= u.min() * (1 - 1e-12)) and np.all(T <= u.max() * (1 + 1e-12))


def test_koefoed_batch_shape(rng):
    u = np.exp(rng.standard_normal((3, 4)))
    lam = np.ones((2, 5))
    T = koefoed_transform(u, [1.0, 2.0], lam)
    assert T.shape == (4, 2, 5)
    np.testing.assert_allclose(T[2], koefoed_transform(u[:, 2], [1.0, 2.0], lam))


def test_filter_data_loaded():
    base, weights = load_j1_filter()
    assert base.shape == weights.shape == (47,)
    assert np.all(np.diff(np.log(base)) > 0)


def test_homogeneous_half_space():
    s = np.logspace(0, 4, 29)
    rho = apparent_resistivity(np.full(5, 10.0), [1.0, 3.0, 10.0, 30.0], s)
    np.testing.assert_allclose(rho, 10.0, rtol=1e-3)
    cfg = DcResistivityConfig()
    np.testing.assert_allclose(dc_forward(np.full(20, 10.0), cfg), 10.0, rtol=1e-3)


def test_two_layer_asymptotes_against_quadrature():
    u, t = np.array([10.0, 100.0]), np.array([5.0])
    for s, target, tol in ((0.05, 10.0, 0.01), (5e3, 100.0, 0.02)):
        dlf = apparent_resistivity(u, t, s)
        quad = apparent_resistivity_quad(u, t, s)
        assert abs(dlf - target) / target < tol
        assert abs(quad - target) / target < tol


def test_dlf_agrees_with_quadrature():
    u, t = np.array([10.0, 100.0, 20.0]), np.array([3.0, 20.0])
    for s in (1.0, 10.0, 100.0):
        assert apparent_resistivity(u, t, s) == pytest.approx(apparent_resistivity_quad(u, t, s), rel=1e-4)


def test_dc_homogeneity_and_swap(rng):
    cfg = DcResistivityConfig()
    u = np.exp(rng.uniform(0, 4, 20))
    base = dc_forward(u, cfg)
    for c in (0.5, 2.0, 10.0):
        np.testing.assert_allclose(dc_forward(c * u, cfg), c * base, rtol=1e-6)
    small = DcResistivityConfig(thicknesses=np.array([10.0]))
    a = dc_forward([10.0, 100.0], small)
    b = dc_forward([100.0, 10.0], small)
    assert np.max(np.abs(a - b)) > 1.0


def test_dc_batch_matches_single(rng):
    m = DcResistivityModel()
    U = np.exp(rng.uniform(0, 4, (20, 3)))
    out = m.evaluate_ensemble(U)
    assert out.shape == (29, 3)
    for j in range(3):
        np.testing.assert_allclose(out[:, j], m.evaluate(U[:, j]), rtol=1e-13)


def test_layer_geometry():
    t = layer_thicknesses(20, 0.1, 1e5)
    assert t.shape == (19,) and np.all(t > 0)
    c = layer_log_centers(20, 0.1, 1e5)
    assert np.all(np.diff(c) > 0)
    m = DcResistivityModel()
    assert m.center_map.shape == (29,)
    assert np.all(np.diff(m.center_map) >= 0)


def test_dc_config_validation():
    with pytest.raises(ConfigurationError):
        DcResistivityConfig(filter="fft")
    with pytest.raises(ConfigurationError):
        DcResistivityConfig(half_spacings=np.array([-1.0]))
    with pytest.raises(ConfigurationError):
        DcResistivityConfig(layer_count=1)


# --- Jacobians ----------------------------------------------------------------

def test_fd_jacobian_square():
    m = FunctionModel(lambda u: u**2, 1, 1)
    assert finite_difference_jacobian(m, [3.0], 1e-4)[0, 0] == pytest.approx(6.0, abs=1e-6)
    bad = FunctionModel(lambda u: np.where(u > 3.0, np.nan, u), 1, 1)
    with pytest.raises(NumericFailure):
        finite_difference_jacobian(bad, [3.0], 1e-4)


@pytest.mark.parametrize("make", [
    lambda: LocalCubicModel(15),
    lambda: Lorenz96Model(Lorenz96Config(dim=10)),
])
def test_analytic_jacobians_match_fd(make, rng):
    m = make()
    for _ in range(20):
        u = rng.standard_normal(m.param_dim) * 2 + (8.0 if isinstance(m, Lorenz96Model) else 0.0)
        J = m.jacobian(u)
        fd = finite_difference_jacobian(m, u, 1e-5)
        np.testing.assert_allclose(J, fd, rtol=1e-4, atol=1e-4 * np.max(np.abs(J)))


def test_whitened_model(rng):
    base = LinearModel(rng.standard_normal((3, 2)))
    scales = np.array([1.0, 2.0, 4.0])
    w = WhitenedModel(base, scales)
    u = rng.standard_normal(2)
    np.testing.assert_allclose(w.evaluate(u), base.evaluate(u) / scales)
    np.testing.assert_allclose(w.jacobian(u), base.H / scales[:, None])
