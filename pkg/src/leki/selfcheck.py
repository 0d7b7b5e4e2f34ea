"""Fast numerical self-checks behind ``solve check``.

Each check returns ``(name, passed, detail)``. They cover the exact
identities (Tikhonov extension, inflation, zero error matrix), the norm
inequalities, the v-vector claims, the Riccati ODE residual and analytic
Jacobians against finite differences.
"""
from __future__ import annotations

from typing import Callable, List, Tuple

import numpy as np

from .diagnostics import RiccatiParams, error_matrix_R, riccati_rhs, riccati_solution, v_vector, v_vector_claims
from .dynamics import inflation_vectors
from .ensemble import Ensemble, compute_stats, norms
from .localization import DistanceMetric, LocalizationKernel, LocalizationScheme, build_psi
from .models import (
    DcResistivityConfig,
    DcResistivityModel,
    LinearModel,
    LocalCubicModel,
    Lorenz96Config,
    Lorenz96Model,
    finite_difference_jacobian,
)
from .teki import extended_loss, tikhonov_loss

__all__ = ["run_checks", "CHECKS"]

Result = Tuple[str, bool, str]


def _random_spd(rng, d):
    a = rng.standard_normal((d, d))
    return a @ a.T + d * np.eye(d)


def check_tikhonov(rng, n=100) -> Result:
    worst = 0.0
    for _ in range(n):
        d_u, d_y = rng.integers(1, 8, size=2)
        model = LinearModel(rng.standard_normal((d_y, d_u)))
        c0 = _random_spd(rng, d_u)
        y, u = rng.standard_normal(d_y), rng.standard_normal(d_u)
        a, b = tikhonov_loss(model, y, c0, u), extended_loss(model, y, c0, u)
        worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
    return "tikhonov extension", worst <= 1e-12, f"max relative gap {worst:.2e}"


def check_inflation(rng, n=100) -> Result:
    worst_sum = worst_diag = 0.0
    for _ in range(n):
        d, J = rng.integers(2, 12), rng.integers(2, 12)
        ens = Ensemble(rng.standard_normal((d, J)) * rng.uniform(0.1, 10, size=(d, 1)))
        stats = compute_stats(ens, ens.members)
        xi = inflation_vectors(ens, stats)
        worst_sum = max(worst_sum, float(np.max(np.abs(xi.sum(axis=1)))))
        dinv = np.diag(1.0 / np.diag(stats.cuu))
        sigma = 0.5 * (dinv @ stats.cuu + stats.cuu @ dinv)
        worst_diag = max(worst_diag, float(np.max(np.abs(np.diag(sigma) - 1.0))))
    ok = worst_sum <= 1e-12 and worst_diag <= 1e-10
    return "inflation identities", ok, f"|sum xi| {worst_sum:.1e}, |diag-1| {worst_diag:.1e}"


def check_error_matrix(rng, n=20) -> Result:
    worst = 0.0
    for _ in range(n):
        d_u, d_y, J = rng.integers(2, 10), rng.integers(1, 10), rng.integers(2, 8)
        H = rng.standard_normal((d_y, d_u))
        model = LinearModel(H)
        ens = Ensemble(rng.standard_normal((d_u, J)))
        stats = compute_stats(ens, model.evaluate_ensemble(ens.members))
        psi = build_psi(DistanceMetric("lattice"), LocalizationKernel("gaussian", 2.0), d_u)
        scheme = LocalizationScheme("linearized", psi, jacobian_provider=model.jacobian)
        R = error_matrix_R(stats, scheme, H)
        worst = max(worst, float(np.max(np.abs(R))))
    return "error matrix R = 0 for exact H", worst <= 1e-12, f"max |R| {worst:.1e}"


def check_norm_inequalities(rng, n=100) -> Result:
    bad = 0
    for _ in range(n):
        N = rng.integers(1, 15)
        a = rng.standard_normal((N, N)) * rng.uniform(0.01, 100)
        rep = norms(a)
        one_t = float(np.max(np.sum(np.abs(a), axis=0)))
        ok = rep.max_norm <= rep.op_norm * (1 + 1e-12) and rep.op_norm <= np.sqrt(rep.one_norm * one_t) * (1 + 1e-12)
        bad += not ok
    return "max <= op <= sqrt(1-norm products)", bad == 0, f"{bad} violations in {n}"


def check_v_vector(rng, n=100) -> Result:
    bad = 0
    for _ in range(n):
        d = rng.integers(1, 8)
        phi = np.triu(rng.uniform(0, 1, (d, d)), 1)
        phi = phi + phi.T
        rs = phi.sum(axis=1).max() if d > 1 else 0.0
        phi *= rng.uniform(0.05, 0.9) / max(rs, 1e-12)
        phi0 = rng.uniform(1e-3, 1.0 - phi.sum(axis=1).max())
        i = int(rng.integers(d))
        v = v_vector(phi, phi0, i)
        bad += not all(v_vector_claims(phi, phi0, i, v).values())
    return "v-vector claims", bad == 0, f"{bad} violations in {n}"


def check_riccati(rng, n=20) -> Result:
    worst = 0.0
    t = np.linspace(0.0, 50.0, 201)
    h = 1e-5
    for _ in range(n):
        p = RiccatiParams(a=rng.uniform(0.1, 3), b=rng.uniform(0, 2), sigma=rng.uniform(0, 2),
                          y0=rng.uniform(0, 5))
        y = riccati_solution(p, t + h)
        dy = (riccati_solution(p, t + 2 * h) - riccati_solution(p, t)) / (2 * h)
        rhs = riccati_rhs(p, t + h, y)
        scale = np.maximum(np.abs(dy), np.abs(rhs)) + 1e-12
        worst = max(worst, float(np.max(np.abs(dy - rhs) / scale)))
    return "riccati ODE residual", worst <= 1e-4, f"max relative residual {worst:.1e}"


def jacobian_models(rng):
    yield "linear", LinearModel(rng.standard_normal((6, 8))), lambda: rng.standard_normal(8)
    yield "local cubic", LocalCubicModel(15), lambda: rng.standard_normal(15)
    yield "lorenz96", Lorenz96Model(Lorenz96Config(dim=10)), lambda: 8.0 + 3.0 * rng.standard_normal(10)


def check_jacobians(rng, points=20) -> Result:
    worst = 0.0
    for name, model, draw in jacobian_models(rng):
        for _ in range(points):
            u = draw()
            ja = model.jacobian(u)
            jf = finite_difference_jacobian(model, u, 1e-5)
            worst = max(worst, float(np.max(np.abs(ja - jf)) / max(np.max(np.abs(ja)), 1e-12)))
    return "analytic vs finite-difference Jacobians", worst <= 1e-4, f"max relative gap {worst:.1e}"


def check_dc_halfspace(rng=None) -> Result:
    model = DcResistivityModel(DcResistivityConfig(half_spacings=np.logspace(0, 4, 29)))
    out = model.evaluate(np.full(model.param_dim, 10.0))
    err = float(np.max(np.abs(out / 10.0 - 1.0)))
    return "DC homogeneous half-space", err <= 1e-3, f"max relative error {err:.1e}"


CHECKS: List[Callable] = [check_tikhonov, check_inflation, check_error_matrix, check_norm_inequalities,
                          check_v_vector, check_riccati, check_jacobians, check_dc_halfspace]


def run_checks(seed: int = 0) -> List[Result]:
    rng = np.random.default_rng(seed)
    return [check(rng) for check in CHECKS]
