import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import isotropic_entries, trace_free_min_eig
from torusflow.errors import DimensionMismatch, NotElliptic, SymmetryError
from torusflow.field import random_field, sobolev_norm
from torusflow.viscosity import (
    ViscosityTensor,
    apply_L,
    apply_L_divergence_form,
    check_symmetry,
    ellipticity_constant,
    estimate_constants,
    load_tensor,
    make_isotropic,
    mode_block,
    quadratic_form,
    random_elliptic,
    symmetrize,
    tensor_norm,
    trace_free_basis,
    viscous_form,
)

# frozen oracle values (projector method in tests/oracles.py)
LAMBDA_MIN_1_3 = 0.8604825869469693
NORM_1_3 = 2.387661911023787
LAMBDA_MIN_2_2 = 1.0508385387353965


class TestTensor:
    @pytest.mark.parametrize("n", [2, 3])
    def test_isotropic_matches_index_formula(self, n):
        assert np.array_equal(make_isotropic(1.5, 2.0, n).entries, isotropic_entries(1.5, 2.0, n))

    def test_symmetry_violation_reports_index(self):
        a = make_isotropic(0.0, 1.0, 2).entries.copy()
        a[0, 1, 1, 0] += 0.1
        ok, idx = check_symmetry(a)
        assert not ok and len(idx) == 4
        with pytest.raises(SymmetryError):
            ViscosityTensor(a)

    def test_symmetrize_projects(self):
        a = symmetrize(np.random.default_rng(0).standard_normal((3,) * 4))
        assert check_symmetry(a)[0]
        assert np.allclose(symmetrize(a), a)

    def test_shape_errors(self):
        with pytest.raises(DimensionMismatch):
            ViscosityTensor(np.zeros((2, 2, 2)))
        with pytest.raises(DimensionMismatch):
            ViscosityTensor.from_flat(2, np.zeros(15))

    def test_json_round_trip(self):
        A = random_elliptic(3, 3)
        B = load_tensor(json.dumps(A.to_json()))
        assert np.array_equal(A.entries, B.entries)

    def test_load_isotropic_and_missing_keys(self):
        assert np.array_equal(load_tensor({"isotropic": {"lambda": 0, "mu": 1}}, 2).entries,
                              make_isotropic(0, 1, 2).entries)
        with pytest.raises(KeyError):
            load_tensor({"isotropic": {"mu": 1}}, 2)
        with pytest.raises(KeyError):
            load_tensor({"n": 2})

    def test_norm_is_max_entry(self):
        # a_11^11 = lam + 2 mu is the largest entry
        assert tensor_norm(make_isotropic(0.0, 1.0, 2)) == 2.0
        assert tensor_norm(make_isotropic(1.5, 2.0, 3)) == 5.5


class TestEllipticity:
    def test_trace_free_basis_orthonormal(self):
        B = trace_free_basis(3)
        assert B.shape == (5, 3, 3)
        G = np.einsum("pij,qij->pq", B, B)
        assert np.allclose(G, np.eye(5))
        assert np.allclose(np.einsum("pii->p", B), 0)
        assert np.allclose(B, np.swapaxes(B, 1, 2))

    @pytest.mark.parametrize("lam,mu,n", [(0.0, 1.0, 2), (1.5, 2.0, 3), (-0.5, 0.7, 3)])
    def test_isotropic_lambda_min_is_2mu(self, lam, mu, n):
        # on trace-free symmetric matrices the lambda term vanishes
        assert ellipticity_constant(make_isotropic(lam, mu, n)).lambda_min == pytest.approx(2 * mu)

    def test_frozen_anisotropic_values(self):
        tc = ellipticity_constant(random_elliptic(1, 3))
        assert tc.lambda_min == pytest.approx(LAMBDA_MIN_1_3, rel=1e-13)
        assert tc.norm_A == pytest.approx(NORM_1_3, rel=1e-13)
        assert ellipticity_constant(random_elliptic(2, 2)).lambda_min == pytest.approx(
            LAMBDA_MIN_2_2, rel=1e-13)

    @given(st.integers(0, 10**6), st.sampled_from([2, 3]))
    def test_lambda_min_matches_projector_oracle(self, seed, n):
        A = random_elliptic(seed, n)
        tc = ellipticity_constant(A)
        assert tc.lambda_min == pytest.approx(trace_free_min_eig(A.entries), rel=1e-10)
        assert tc.lambda_min >= 0.1
        # the witness attains the minimum
        z = tc.witness
        assert quadratic_form(A, z) / np.sum(z * z) == pytest.approx(tc.lambda_min, rel=1e-10)

    def test_not_elliptic(self):
        with pytest.raises(NotElliptic):
            ellipticity_constant(make_isotropic(1.0, 0.0, 2))

    def test_isotropic_unit_constants(self):
        c = estimate_constants(make_isotropic(0.0, 1.0, 2))
        assert (c.C_A, c.norm_A) == pytest.approx((0.5, 2.0))
        assert (c.chat_uf, c.chat_ug, c.chat_pf, c.chat_pg) == pytest.approx((1, 3, 3, 6))

    @given(st.integers(0, 10**6), st.floats(0.01, 100))
    def test_scale_covariance(self, seed, t):
        A = random_elliptic(seed, 2)
        a, b = ellipticity_constant(A), ellipticity_constant(A * t)
        assert b.C_A == pytest.approx(a.C_A / t, rel=1e-12)
        assert b.norm_A == pytest.approx(a.norm_A * t, rel=1e-12)

    def test_estimate_constants_formulas(self):
        A = random_elliptic(1, 3)
        c = estimate_constants(A)
        k = 1 + 2 * c.C_A * c.norm_A
        assert c.C_A == pytest.approx(1 / LAMBDA_MIN_1_3)
        assert c.chat_uf == 2 * c.C_A
        assert c.chat_pg == pytest.approx(c.norm_A * k)
        assert c.c_uf == pytest.approx(c.C_A / np.pi**2)
        assert c.c_ug == pytest.approx(k / (np.sqrt(2) * np.pi))
        assert set(c.as_dict()) >= {"c_uf", "c_ug", "c_pf", "c_pg", "chat_uf"}


class TestOperator:
    @given(st.integers(0, 10**6))
    def test_two_routes_agree(self, seed):
        A = random_elliptic(seed, 2)
        u = random_field(seed, 2.0, 5, 2, kind="vector")
        a, b = apply_L(A, u), apply_L_divergence_form(A, u)
        assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-12 * np.max(np.abs(a.coeffs))

    def test_isotropic_operator_is_mu_laplace_plus_grad_div(self):
        # (L u) = mu Lap u + (lam + mu) grad div u; on a single shear mode only mu Lap survives
        u = random_field(4, 1.0, 3, 2, kind="vector")
        from torusflow.field import divergence, gradient, laplacian, leray_project
        w = leray_project(u)
        Lw = apply_L(make_isotropic(0.7, 1.3, 2), w)
        assert np.allclose(Lw.coeffs, 1.3 * laplacian(w).coeffs, atol=1e-12)

    def test_viscous_form_is_minus_pairing(self):
        A = random_elliptic(5, 2)
        u = random_field(6, 2.0, 4, 2, kind="vector")
        v = random_field(7, 2.0, 4, 2, kind="vector")
        from torusflow.field import dual_pairing
        assert viscous_form(A, u, v) == pytest.approx(-dual_pairing(apply_L(A, u), v), rel=1e-12)

    def test_form_coercive_on_div_free(self):
        # a(v, v) >= lambda_min ||E v||^2 and for mean-zero div-free ||E v||^2 = ||grad v||^2 / 2
        A = random_elliptic(8, 2)
        lam = ellipticity_constant(A).lambda_min
        from torusflow.field import leray_project
        v = leray_project(random_field(9, 1.0, 6, 2, kind="vector"))
        grad_sq = (2 * np.pi) ** 2 * sobolev_norm(v, 1) ** 2 - (2 * np.pi) ** 2 * sobolev_norm(v, 0) ** 2
        assert viscous_form(A, v, v) >= lam * grad_sq / 2 * (1 - 1e-12)

    def test_mode_block_symmetric(self):
        K = mode_block(random_elliptic(1, 3), 3, 2)
        assert np.allclose(K, np.swapaxes(K, 0, 1))

    def test_scaling(self):
        A = random_elliptic(1, 2)
        assert np.array_equal((A * 2.0).entries, 2.0 * A.entries)
        assert np.array_equal((2.0 * A).entries, 2.0 * A.entries)
