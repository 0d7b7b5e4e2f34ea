import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from leki.dynamics import inflation_vectors
from leki.ensemble import Ensemble, compute_stats, norms, numerical_rank
from leki.localization import DistanceMetric, LocalizationKernel, build_psi, localize_cuu
from leki.models import FunctionModel
from leki.teki import extended_loss, tikhonov_loss

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def ensembles(max_d=6, max_j=6):
    return st.tuples(st.integers(1, max_d), st.integers(2, max_j)).flatmap(
        lambda s: arrays(float, s, elements=finite))


@settings(max_examples=60, deadline=None)
@given(ensembles(), st.sampled_from(["gaussian", "gaspari-cohn"]), st.floats(0.3, 5.0))
def test_schur_product_stays_psd(u, kind, radius):
    ens = Ensemble(u)
    st_ = compute_stats(ens, u)
    psi = build_psi(DistanceMetric(), LocalizationKernel(kind, radius), u.shape[0])
    loc = localize_cuu(st_, psi)
    scale = max(1.0, float(np.max(np.abs(st_.cuu))))
    assert np.linalg.eigvalsh(loc)[0] >= -1e-10 * scale


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 12), st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_localization_enriches_rank(d, J, seed):
    u = np.random.default_rng(seed).standard_normal((d, J))
    ens = Ensemble(u)
    cuu = compute_stats(ens, u).cuu
    loc = localize_cuu(cuu, np.eye(d))
    assert numerical_rank(cuu) <= J - 1
    assert numerical_rank(loc) == d


@settings(max_examples=60, deadline=None)
@given(ensembles(), st.randoms(use_true_random=False))
def test_stats_permutation_invariant(u, rnd):
    perm = list(range(u.shape[1]))
    rnd.shuffle(perm)
    a = compute_stats(Ensemble(u), u)
    b = compute_stats(Ensemble(u[:, perm]), u[:, perm])
    np.testing.assert_allclose(a.cuu, b.cuu, atol=1e-10)
    np.testing.assert_allclose(a.mean_u, b.mean_u, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(lambda s: arrays(float, s, elements=finite)))
def test_norm_inequalities(a):
    rep = norms(a)
    m, n = a.shape
    assert rep.max_norm <= rep.op_norm * (1 + 1e-9) + 1e-12
    assert rep.op_norm <= np.sqrt(m * n) * rep.max_norm * (1 + 1e-9) + 1e-12
    np.testing.assert_allclose(rep.op_norm, np.linalg.norm(a, 2), rtol=1e-6, atol=1e-9)
    if m == n and np.allclose(a, a.T):
        assert rep.op_norm <= rep.one_norm * (1 + 1e-9) + 1e-12


@settings(max_examples=60, deadline=None)
@given(ensembles())
def test_inflation_zero_mean_and_scale(u):
    ens = Ensemble(u)
    st_ = compute_stats(ens, u)
    xi = inflation_vectors(ens, st_)
    scale = max(1.0, float(np.max(np.abs(xi))))
    assert np.all(np.abs(xi.sum(axis=1)) <= 1e-9 * scale)
    d = np.diag(st_.cuu)
    keep = xi.any(axis=1)
    assert np.all(d[keep] > 1e-14 * np.max(np.abs(st_.cuu)))
    np.testing.assert_allclose(xi[keep], 0.5 * st_.deviations_u[keep] / d[keep, None], rtol=1e-9, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_tikhonov_identity(d_u, d_y, seed):
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((d_y, d_u))
    model = FunctionModel(lambda v: np.sin(H @ v), d_u, d_y)
    a = rng.standard_normal((d_u, d_u))
    c0 = a @ a.T + 0.1 * np.eye(d_u)
    y, v = rng.standard_normal(d_y), rng.standard_normal(d_u)
    l1, l2 = tikhonov_loss(model, y, c0, v), extended_loss(model, y, c0, v)
    assert abs(l1 - l2) <= 1e-9 * max(1.0, l1)
