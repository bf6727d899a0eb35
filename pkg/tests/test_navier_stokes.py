import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusflow.errors import DimensionMismatch, NewtonFailed, NoConvergence
from torusflow.field import divergence, from_modes, random_field, sobolev_norm, zeros
from torusflow.navier_stokes import (
    apriori_bound,
    basis_field,
    decay_transfer_report,
    energy_gap,
    galerkin_basis,
    galerkin_solve,
    manufactured_forcing,
    ns_residual,
    smallness_report,
    smallness_threshold,
    solve_ns_picard,
    taylor_green,
)
from torusflow.stokes import solve_stokes
from torusflow.viscosity import ellipticity_constant, make_isotropic, random_elliptic

# embedding lower bound C_4# (q = 4, n = 2, M = 8, seed 0), frozen from the audit oracle
C4_LOWER = 0.7884030675843503


def small_forcing(A, seed, M, fraction=0.1, decay=2.0):
    f = random_field(seed, decay, M, A.dim, kind="vector")
    thr = smallness_threshold(A, C4_LOWER)
    return f * (fraction * thr / sobolev_norm(f, -1))


class TestTaylorGreen:
    def test_modes_and_forcing(self):
        u, p = taylor_green(8)
        A = make_isotropic(0.0, 1.0, 2)
        f = manufactured_forcing(A, u, p)
        # advection balances the pressure gradient, leaving -L u* = 8 pi^2 u*
        assert np.allclose(f.coeffs, 8 * np.pi**2 * u.coeffs, atol=1e-12)
        assert sobolev_norm(divergence(u), 0) == 0

    def test_recovery(self):
        u, p = taylor_green(8)
        A = make_isotropic(0.0, 1.0, 2)
        f = manufactured_forcing(A, u, p)
        us, ps, rep = solve_ns_picard(A, f)
        assert sobolev_norm(us - u, 1) <= 1e-8
        assert sobolev_norm(ps - p, 0) <= 1e-8
        assert rep.iterations <= 3

    def test_small_box_rejected(self):
        with pytest.raises(ValueError):
            taylor_green(1)


class TestPicard:
    def test_zero_forcing(self):
        A = random_elliptic(0, 2)
        u, p, rep = solve_ns_picard(A, zeros(2, 4, "vector"))
        assert not u.coeffs.any() and not p.coeffs.any() and rep.iterations == 1

    @settings(max_examples=5)
    @given(st.integers(0, 10**6))
    def test_small_data(self, seed):
        A = random_elliptic(seed, 2)
        f = small_forcing(A, seed, 8)
        u, p, rep = solve_ns_picard(A, f, tol=1e-10)
        assert rep.iterations <= 50
        assert rep.apriori_pass and rep.norm_u_H1 <= apriori_bound(A, f) + 1e-10
        assert rep.energy_gap <= 1e-9
        assert rep.residual_momentum <= 1e-9
        assert rep.residual_divergence <= 1e-12
        assert sobolev_norm(ns_residual(A, u, p, f), -1) == pytest.approx(rep.residual_momentum)

    def test_report_keys(self):
        A = random_elliptic(1, 2)
        _, _, rep = solve_ns_picard(A, small_forcing(A, 1, 4))
        d = rep.to_dict()
        assert {"picard_iterations", "energy_gap", "apriori_pass", "norm_u_Hs", "damping"} <= set(d)

    def test_large_data_does_not_converge(self):
        A = make_isotropic(0.0, 1.0, 2)
        f = random_field(0, 1.0, 8, 2, kind="vector")
        f = f * (1e6 / sobolev_norm(f, -1))
        with pytest.raises(NoConvergence):
            solve_ns_picard(A, f, max_iter=5)

    def test_bad_damping(self):
        A = make_isotropic(0.0, 1.0, 2)
        with pytest.raises(ValueError):
            solve_ns_picard(A, zeros(2, 2, "vector"), damping=0.0)

    def test_scaling_consistency(self):
        # u(eps f) / eps - Stokes(f) = O(eps) with a stable constant
        A = random_elliptic(2, 2)
        f = random_field(3, 2.0, 6, 2, kind="vector")
        us = solve_stokes(A, f).u
        consts = []
        for eps in (1e-3, 1e-4):
            u, _, _ = solve_ns_picard(A, f * eps, tol=1e-16 + 1e-12 * eps)
            consts.append(sobolev_norm(u * (1 / eps) - us, 1) / eps)
        assert consts[0] > 0
        assert consts[1] == pytest.approx(consts[0], rel=0.05)


class TestGalerkin:
    def test_basis(self):
        basis = galerkin_basis(2, M=4)
        assert len(basis) == 80  # 40 half-lattice points, one direction, cos and sin
        for b in basis[:10]:
            w = basis_field(b, 2, 4)
            assert sobolev_norm(divergence(w), 0) <= 1e-14
            assert sobolev_norm(w, 0) ** 2 == pytest.approx(0.5)
        # ordered by |xi|^2 then lexicographically
        assert [b.xi for b in basis[:4]] == [(0, 1), (0, 1), (1, 0), (1, 0)]
        W = np.array([basis_field(b, 2, 4).coeffs.ravel() for b in basis])
        assert np.linalg.matrix_rank(W) == 80

    def test_basis_3d_and_modes(self):
        basis = galerkin_basis(3, modes=[(0, 0, -1), (0, 0, 1)])
        assert len(basis) == 4  # canonical sign, two directions, cos and sin
        with pytest.raises(DimensionMismatch):
            galerkin_basis(2, modes=[(0, 0)])

    def test_single_mode_closed_form(self):
        # isotropic (0, 1), f = alpha e cos(2 pi x1): the mode is a shear flow with no
        # self-interaction, so the scalar equation reduces to 2 pi^2 eta = alpha / 2
        alpha = 3.0
        A = make_isotropic(0.0, 1.0, 2)
        f = from_modes(2, 2, {(1, 0): [0, 0.5 * alpha]}, kind="vector")
        system, u, p = galerkin_solve(A, f, modes=[(1, 0)])
        assert system.m == 2
        cos_idx = [i for i, b in enumerate(system.basis) if b.kind == "cos"][0]
        direction = system.basis[cos_idx].direction[1]
        assert system.eta[cos_idx] * direction == pytest.approx(alpha / (4 * np.pi**2), rel=1e-13)
        assert abs(system.eta[1 - cos_idx]) <= 1e-15

    def test_zero_forcing(self):
        system, u, _ = galerkin_solve(random_elliptic(0, 2), zeros(2, 2, "vector"), M=2)
        assert not system.eta.any()

    def test_energy_identity_and_radius(self):
        A = random_elliptic(4, 2)
        f = small_forcing(A, 4, 3)
        system, u, _ = galerkin_solve(A, f, M=3)
        assert energy_gap(A, u, f) <= 1e-10
        assert np.linalg.norm(system.eta) <= system.radius_rho
        assert system.residual <= 1e-12 * max(1.0, sobolev_norm(f, 0))

    def test_agrees_with_picard(self):
        A = random_elliptic(5, 2)
        f = small_forcing(A, 5, 4)
        # the Picard box equals the Galerkin mode set: all |xi|_inf <= 4
        _, ug, _ = galerkin_solve(A, f, M=4)
        up, _, _ = solve_ns_picard(A, f, tol=1e-12)
        assert sobolev_norm(ug - up, 1) <= 1e-6

    def test_too_many_coefficients(self):
        with pytest.raises(ValueError):
            galerkin_solve(random_elliptic(0, 2), zeros(2, 7, "vector"), M=7)  # 224 coefficients

    def test_newton_failure(self):
        A = make_isotropic(0.0, 1.0, 2)
        f = random_field(1, 1.0, 3, 2, kind="vector")
        f = f * (1e8 / sobolev_norm(f, -1))
        with pytest.raises(NewtonFailed):
            galerkin_solve(A, f, M=3, max_newton=3)


class TestReports:
    def test_threshold_formula(self):
        A = make_isotropic(0.0, 1.0, 2)  # C_A = 1/2
        assert smallness_threshold(A, 1.0) == pytest.approx(2 * np.sqrt(2) * np.pi**3)
        assert smallness_threshold(A, C4_LOWER) == pytest.approx(
            2 * np.sqrt(2) * np.pi**3 / C4_LOWER**2)

    def test_verdicts(self):
        A = random_elliptic(0, 2)
        z = smallness_report(A, zeros(2, 2, "vector"), C4_LOWER)
        assert z["below"] and z["smallness_verdict"].startswith("INFORMATIONAL")
        big = random_field(0, 1.0, 2, 2, kind="vector") * 1e9
        assert not smallness_report(A, big, C4_LOWER)["below"]
        with pytest.raises(DimensionMismatch):
            smallness_report(random_elliptic(0, 5), zeros(5, 1, "vector"), 1.0)

    @pytest.mark.parametrize("t_f", [0.0, 3.0])
    def test_decay_transfer_stokes(self, t_f):
        rep = decay_transfer_report(make_isotropic(0.0, 1.0, 2), t_f, 32)
        assert rep["expected"] == t_f + 2
        assert rep["max_deviation"] <= 0.3

    def test_compact_forcing_gives_compact_solution(self):
        A = random_elliptic(0, 2)
        f = from_modes(2, 8, {(1, 2): [1.0, 0.5]}, kind="vector")
        u = solve_stokes(A, f).u
        nz = np.argwhere(np.any(np.abs(u.coeffs) > 0, axis=0))
        assert {tuple(x - 8) for x in nz} <= {(1, 2), (-1, -2)}

    def test_ellipticity_used(self):
        A = random_elliptic(0, 2)
        f = random_field(0, 1.0, 4, 2, kind="vector")
        assert apriori_bound(A, f) == pytest.approx(
            ellipticity_constant(A).C_A / np.pi**2 * sobolev_norm(f, -1))
