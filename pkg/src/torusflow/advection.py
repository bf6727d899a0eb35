"""Convective term (v1 . grad) v2 evaluated pseudospectrally with zero padding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import DimensionMismatch, NotDivergenceFree
from .field import (
    ScalarField,
    VectorField,
    divergence,
    dual_pairing,
    field_from_grid,
    gradient,
    sample_on_grid,
    sobolev_norm,
)
from .viscosity import apply_L

# relative divergence (in L2, against the H1 norm) accepted for a wind
DIV_TOL = 1e-12


@dataclass(frozen=True)
class DealiasPlan:
    """Padded grid for products of two fields on the box of radius ``M``.

    With ``N_pad >= 3M + 1`` every product mode that aliases back into the
    box comes from outside the product support, so truncation is exact.
    """

    M: int
    N_pad: int

    def __post_init__(self):
        if self.N_pad < 3 * self.M + 1:
            raise ValueError(f"N_pad={self.N_pad} < 3M+1={3 * self.M + 1}")

    @classmethod
    def for_truncation(cls, M):
        return cls(M, scipy.fft.next_fast_len(3 * M + 1))


def _check_pair(v1, v2):
    for v in (v1, v2):
        if not isinstance(v, VectorField):
            raise DimensionMismatch("convect needs vector fields")
    if v1.dim != v2.dim:
        raise DimensionMismatch("fields differ in dimension")


class Convector:
    """(U . grad) applied repeatedly with the wind sampled once."""

    def __init__(self, U, M=None):
        if not isinstance(U, VectorField):
            raise DimensionMismatch("wind must be a vector field")
        self.dim = U.dim
        self.M = max(U.M, M or 0)
        self.plan = DealiasPlan.for_truncation(self.M)
        self.U = U.resized(self.M)
        self._wind = sample_on_grid(self.U, self.plan.N_pad)
        self.real_valued = U.real_valued

    def __call__(self, v):
        if not isinstance(v, VectorField) or v.dim != self.dim:
            raise DimensionMismatch("convect needs a vector field of matching dimension")
        v = v.resized(self.M)
        G = sample_on_grid(gradient(v), self.plan.N_pad)  # G[k, j] = d_j v_k
        prod = np.einsum("j...,kj...->k...", self._wind, G)
        real = self.real_valued and v.real_valued
        if real:
            prod = prod.real
        return field_from_grid(prod, self.dim, self.M, real_valued=real, zero_mean=False)


def convect(v1, v2):
    """Galerkin projection of (v1 . grad) v2 onto the common truncation box.

    The mean coefficient is kept; it vanishes (to roundoff) when div v1 = 0.
    """
    _check_pair(v1, v2)
    M = max(v1.M, v2.M)
    return Convector(v1, M)(v2)


def trilinear(v1, v2, v3):
    """<(v1 . grad) v2, v3> as a dual pairing, real for real fields."""
    return dual_pairing(convect(v1, v2), v3)


def check_wind(U, tol=DIV_TOL):
    """Raise :class:`NotDivergenceFree` unless ||div U||_L2 <= tol ||U||_H1."""
    d = sobolev_norm(divergence(U), 0.0)
    scale = sobolev_norm(U, 1.0)
    if d > tol * max(scale, 1e-300) and d > 0:
        raise NotDivergenceFree(f"||div U|| = {d:.3e} exceeds {tol:g} * ||U||_H1")


def oseen_apply(A, U, u, p, convector=None):
    """(-L u + grad p + (U . grad) u, div u) on the truncation box of ``u``.

    ``convector`` may be a prepared :class:`Convector` for ``U`` to avoid
    resampling the wind.
    """
    if convector is None:
        check_wind(U)
        convector = Convector(U, u.M)
    M = max(u.M, p.M, convector.M)
    u, p = u.resized(M), p.resized(M)
    adv = convector(u).resized(M).without_mean()
    mom = -apply_L(A, u) + gradient(p) + adv
    return mom, divergence(u)


def oseen_apply_coeffs(A, convector, uc, pc, real_valued=True):
    """Array-level :func:`oseen_apply` used inside the Krylov driver."""
    u = VectorField(uc, A.dim, real_valued=real_valued)
    p = ScalarField(pc, A.dim, real_valued=real_valued)
    mom, div = oseen_apply(A, None, u, p, convector=convector)
    return mom.coeffs, div.coeffs
