import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import stokes_mode_schur
from torusflow.errors import DimensionMismatch, NonZeroMean, ZeroMode
from torusflow.field import divergence, from_modes, lattice, random_field, sobolev_norm
from torusflow.stokes import (
    ESTIMATE_RTOL,
    StokesData,
    StokesOperator,
    assemble_symbol,
    global_bounds,
    mode_estimate_margins,
    residual_norms,
    solve_isotropic_mode,
    solve_mode,
    solve_stokes,
    stokes_residual,
)
from torusflow.viscosity import estimate_constants, make_isotropic, random_elliptic

# Schur-complement oracle at xi = (1, -2, 1), A = random_elliptic(1, 3)
SCHUR_U = np.array([
    0.004415819523797634 + 0.0052170904551524806j,
    0.0008675654010901963 + 0.040589150658841604j,
    -0.0026806887216172417 - 0.003616260683416948j,
])
SCHUR_P = 0.9253087044931259 + 0.014196440672778048j


class TestSymbol:
    def test_blocks(self):
        S = assemble_symbol(make_isotropic(0.0, 1.0, 2), (1, 0)).entries
        assert S.shape == (3, 3)
        # K = |xi|^2 I + xi xi^T for lambda = 0, mu = 1
        assert np.allclose(S[:2, :2], 4 * np.pi**2 * np.array([[2, 0], [0, 1]]))
        assert S[0, 2] == pytest.approx(-2j * np.pi)
        assert S[2, 0] == pytest.approx(-2j * np.pi)
        assert S[2, 2] == 0

    def test_zero_mode_and_shape(self):
        A = make_isotropic(0.0, 1.0, 2)
        with pytest.raises(ZeroMode):
            assemble_symbol(A, (0, 0))
        with pytest.raises(ZeroMode):
            solve_mode(A, (0, 0), [1, 0], 0)
        with pytest.raises(DimensionMismatch):
            solve_mode(A, (1, 0, 0), [1, 0, 0], 0)


class TestModeSolve:
    def test_pure_divergence_example(self):
        u, p = solve_mode(make_isotropic(0.0, 1.0, 2), (1, 0), [0, 0], 1.0)
        assert np.allclose(u, [-1j / (2 * np.pi), 0], atol=1e-16)
        assert p == pytest.approx(2.0)

    def test_frozen_schur_value(self):
        u, p = solve_mode(random_elliptic(1, 3), (1, -2, 1), [1, 2j, -1], 0.5)
        assert np.allclose(u, SCHUR_U, rtol=0, atol=1e-15)
        assert p == pytest.approx(SCHUR_P, abs=1e-14)

    @given(st.integers(0, 10**6), st.sampled_from([2, 3]))
    def test_matches_schur_oracle(self, seed, n):
        rng = np.random.default_rng(seed)
        A = random_elliptic(rng, n)
        xi = rng.integers(-5, 6, n)
        if not xi.any():
            xi[0] = 1
        f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        g = complex(rng.standard_normal(), rng.standard_normal())
        u, p = solve_mode(A, xi, f, g)
        uo, po = stokes_mode_schur(A.entries, xi, f, g)
        assert np.allclose(u, uo, rtol=1e-10, atol=1e-14)
        assert p == pytest.approx(po, rel=1e-10, abs=1e-14)
        # the strong equations hold at the mode
        S = assemble_symbol(A, xi).entries
        assert np.allclose(S @ np.append(u, -p), np.append(f, -g), atol=1e-12)

    def test_batch_matches_loop(self):
        A = random_elliptic(4, 2)
        rng = np.random.default_rng(0)
        xi = np.array([[1, 0], [2, -3], [0, 5]])
        f = rng.standard_normal((3, 2)) + 0j
        g = rng.standard_normal(3) + 0j
        U, P = solve_mode(A, xi, f, g)
        for k in range(3):
            u, p = solve_mode(A, xi[k], f[k], g[k])
            assert np.allclose(U[k], u) and P[k] == pytest.approx(p)

    @pytest.mark.parametrize("lam,mu", [(0.0, 1.0), (1.5, 2.0)])
    def test_isotropic_closed_form(self, lam, mu):
        A = make_isotropic(lam, mu, 3)
        rng = np.random.default_rng(1)
        for _ in range(20):
            xi = rng.integers(-4, 5, 3)
            if not xi.any():
                continue
            f = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            g = complex(rng.standard_normal())
            u, p = solve_mode(A, xi, f, g)
            ui, pi = solve_isotropic_mode(lam, mu, xi, f, g)
            assert np.allclose(u, ui, atol=1e-14) and p == pytest.approx(pi, abs=1e-12)

    def test_per_mode_uf_constant_is_tight_for_isotropic(self):
        # f parallel to the trace-free witness direction: for lambda=0, mu=1, f _|_ xi gives
        # |u| = |f| / (4 pi^2 |xi|^2) = chat_uf |f| / (2 pi |xi|)^2 with chat_uf = 1
        u, _ = solve_mode(make_isotropic(0.0, 1.0, 2), (3, 4), [4, -3], 0)
        assert np.linalg.norm(u) == pytest.approx(5 / (2 * np.pi * 5) ** 2)


class TestOperator:
    @pytest.mark.parametrize("n,M", [(2, 6), (3, 3)])
    def test_operator_matches_mode_solve(self, n, M):
        A = random_elliptic(7, n)
        f = random_field(1, 1.0, M, n, kind="vector")
        g = random_field(2, 1.0, M, n)
        u, p = StokesOperator(A, M).solve(f, g)
        xi = lattice(n, M).reshape(n, -1).T
        keep = np.any(xi != 0, axis=1)
        fu = f.coeffs.reshape(n, -1).T[keep]
        gu = g.coeffs.reshape(-1)[keep]
        U, P = solve_mode(A, xi[keep], fu, gu)
        assert np.allclose(u.coeffs.reshape(n, -1).T[keep], U, atol=1e-15)
        assert np.allclose(p.coeffs.reshape(-1)[keep], P, atol=1e-13)
        assert u.mean.any() == False and p.mean == 0  # noqa: E712

    def test_divergence_free_for_g_zero(self):
        A = random_elliptic(3, 2)
        sol = solve_stokes(A, random_field(3, 1.0, 8, 2, kind="vector"))
        assert sobolev_norm(divergence(sol.u), 0) <= 1e-14 * sobolev_norm(sol.u, 1)


class TestSolveStokes:
    @given(st.integers(0, 10**6), st.sampled_from([0.0, 1.0, 2.0]))
    def test_residual_and_bounds(self, seed, s):
        rng = np.random.default_rng(seed)
        A = random_elliptic(rng, 2)
        f = random_field(seed, 1.0, 8, 2, kind="vector")
        g = random_field(seed + 1, 1.0, 8, 2)
        sol = solve_stokes(A, StokesData(f, g), s=s)
        r = sol.report
        assert r.residual_momentum <= 1e-12 and r.residual_divergence <= 1e-12
        assert r.estimates_pass
        assert r.norm_u_Hs <= r.bound_u * (1 + ESTIMATE_RTOL)
        assert r.norm_p_Hsm1 <= r.bound_p * (1 + ESTIMATE_RTOL)
        assert r.extra["mode_margin_u"] >= -ESTIMATE_RTOL

    def test_report_dict_keys(self):
        sol = solve_stokes(make_isotropic(0, 1, 2), random_field(0, 1.0, 4, 2, kind="vector"))
        d = sol.report.to_dict()
        assert {"residual_momentum", "norm_p_Hs-1", "bound_u", "estimates_pass"} <= set(d)

    def test_nonzero_mean_rejected(self):
        f = random_field(0, 1.0, 2, 2, kind="vector")
        c = f.coeffs.copy()
        c[(slice(None), 2, 2)] = [1.0, 0.0]
        from torusflow.field import VectorField
        with pytest.raises(NonZeroMean):
            StokesData(VectorField(c, 2, zero_mean=False))

    def test_broken_solution_detected(self):
        A = make_isotropic(0.0, 1.0, 2)
        f = random_field(0, 1.0, 4, 2, kind="vector")
        sol = solve_stokes(A, f)
        rep = residual_norms(A, sol.u * 1.01, sol.p, f)
        assert rep.residual_momentum > 1e-4
        mu, _ = mode_estimate_margins(A, sol.u * 3.0, sol.p, f)
        assert np.min(mu) < 0

    def test_global_bounds_scale_linearly(self):
        A = random_elliptic(0, 2)
        f = random_field(0, 1.0, 4, 2, kind="vector")
        a = global_bounds(A, f)
        b = global_bounds(A, f * 3.0)
        assert b == pytest.approx((3 * a[0], 3 * a[1]))
        c = estimate_constants(A)
        assert a[0] == pytest.approx(c.c_uf * sobolev_norm(f, -1))

    def test_isotropic_u_bound_tight_single_shear_mode(self):
        # lambda=0, mu=1, f a single shear mode: ||u||_H1 = ||f||_H-1 / (4 pi^2) * (rho^2/|xi|^2)
        f = from_modes(2, 2, {(1, 0): [0, 1]}, kind="vector")
        sol = solve_stokes(make_isotropic(0, 1, 2), f)
        expected = sobolev_norm(f, -1) * 2 / (4 * np.pi**2)
        assert sol.report.norm_u_Hs == pytest.approx(expected, rel=1e-13)
        assert sol.report.norm_u_Hs <= sol.report.bound_u


class TestExamples:
    def test_shear_mode(self):
        u, p = solve_mode(make_isotropic(0.0, 1.0, 2), (0, 1), [1, 0], 0)
        assert np.allclose(u, [1 / (4 * np.pi**2), 0], atol=1e-17) and abs(p) <= 1e-17
        ui, pi = solve_isotropic_mode(0.0, 1.0, (0, 1), [1, 0], 0)
        assert np.allclose(ui, u) and pi == 0

    def test_gradient_forcing_only_moves_pressure(self):
        xi = np.array([2.0, -1.0])
        f = 0.7 * xi
        u, p = solve_isotropic_mode(0.3, 1.1, xi, f, 0)
        assert np.allclose(u, 0, atol=1e-17)
        assert p == pytest.approx(xi @ f / (2j * np.pi * 5))

    def test_mu_scales_solenoidal_part(self):
        xi, f = (1, 2), np.array([2.0, -1.0])  # f _|_ xi
        u1, _ = solve_isotropic_mode(0.0, 1.0, xi, f, 0)
        u2, _ = solve_isotropic_mode(0.0, 2.0, xi, f, 0)
        assert np.allclose(u2, u1 / 2)

    def test_zero_data(self):
        A = random_elliptic(0, 2)
        u, p = solve_mode(A, (1, 1), [0, 0], 0)
        assert not np.any(u) and p == 0
        sol = solve_stokes(A, random_field(0, 1.0, 3, 2, kind="vector") * 0.0)
        assert not sol.u.coeffs.any() and not sol.p.coeffs.any()

    def test_invertible_at_diagonal_mode(self):
        for seed in range(5):
            S = assemble_symbol(random_elliptic(seed, 3), (1, 1, 0)).entries
            assert abs(np.linalg.det(S)) > 0

    @pytest.mark.parametrize("n,M", [(2, 8), (3, 4)])
    def test_manufactured_recovery(self, n, M):
        from torusflow.field import gradient
        from torusflow.viscosity import apply_L
        A = random_elliptic(11, n)
        u = random_field(1, 2.0, M, n, kind="vector")
        p = random_field(2, 2.0, M, n)
        f = -apply_L(A, u) + gradient(p)
        g = divergence(u)
        sol = solve_stokes(A, StokesData(f, g))
        assert np.max(np.abs(sol.u.coeffs - u.coeffs)) <= 1e-11
        assert np.max(np.abs(sol.p.coeffs - p.coeffs)) <= 1e-11

    def test_linearity(self):
        A = random_elliptic(12, 2)
        d1 = StokesData(random_field(1, 1.0, 6, 2, kind="vector"), random_field(2, 1.0, 6, 2))
        d2 = StokesData(random_field(3, 1.0, 6, 2, kind="vector"), random_field(4, 1.0, 6, 2))
        s1, s2 = solve_stokes(A, d1), solve_stokes(A, d2)
        s = solve_stokes(A, StokesData(d1.f * 2.0 + d2.f * -0.5, d1.g * 2.0 + d2.g * -0.5))
        assert np.allclose(s.u.coeffs, 2 * s1.u.coeffs - 0.5 * s2.u.coeffs, atol=1e-12)
        assert np.allclose(s.p.coeffs, 2 * s1.p.coeffs - 0.5 * s2.p.coeffs, atol=1e-12)

    def test_residual_of_pressure_perturbation(self):
        from torusflow.field import from_modes, gradient
        A = random_elliptic(13, 2)
        f = random_field(5, 1.0, 4, 2, kind="vector")
        sol = solve_stokes(A, f)
        dp = from_modes(2, 4, {(1, 1): 1e-3})
        mom = stokes_residual(A, sol.u, sol.p + dp, f)[0]
        assert sobolev_norm(mom, -1) == pytest.approx(sobolev_norm(gradient(dp), -1), rel=1e-9)
