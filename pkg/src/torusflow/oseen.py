"""Linear Oseen solves: Stokes plus a frozen advection term (U . grad) u.

The default strategy is restarted GMRES right-preconditioned by the
mode-wise Stokes inverse.  Because the Stokes inverse reproduces the
continuity row exactly, the Krylov iteration only runs on the momentum
part of the preconditioned unknown; it is weighted by rho^-1 so the
Euclidean norm is the H^-1 norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .advection import Convector, check_wind, oseen_apply, trilinear
from .errors import DimensionMismatch, NoConvergence, NonZeroMean
from .field import (
    ScalarField,
    VectorField,
    _weights,
    divergence,
    dual_pairing,
    random_field,
    sobolev_norm,
)
from .stokes import ESTIMATE_RTOL, SolveReport, StokesOperator, StokesSolution
from .viscosity import ellipticity_constant, estimate_constants, viscous_form

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500
RESTART = 60


@dataclass(frozen=True)
class OseenProblem:
    A: object
    U: VectorField
    f: VectorField
    g: ScalarField | None = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if self.U.dim != self.A.dim or self.f.dim != self.A.dim:
            raise DimensionMismatch("wind, forcing and tensor differ in dimension")
        if np.any(self.f.mean) or np.any(self.U.mean):
            raise NonZeroMean("forcing and wind must have zero mean")
        if self.g is not None and self.g.mean != 0:
            raise NonZeroMean("divergence data must have zero mean")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")
        check_wind(self.U)

    @property
    def M(self):
        return max(self.U.M, self.f.M, 0 if self.g is None else self.g.M)


def data_norm(f, g=None):
    """Combined H^-1 x H^0 norm of (f, g)."""
    nf = sobolev_norm(f, -1.0)
    ng = 0.0 if g is None else sobolev_norm(g, 0.0)
    return float(np.hypot(nf, ng))


def oseen_residual(A, U, u, p, f, g=None, convector=None):
    """Combined H^-1 x H^0 norm of S_U(u, p) - (f, g)."""
    mom, div = oseen_apply(A, U, u, p, convector=convector)
    rm = mom - f.resized(mom.M)
    rd = div if g is None else div - g.resized(div.M)
    return float(np.hypot(sobolev_norm(rm, -1.0), sobolev_norm(rd, 0.0)))


def _gmres(problem, op, conv, real):
    A, n, M = problem.A, problem.A.dim, op.M
    box = (2 * M + 1,) * n
    shape = (n,) + box
    w = np.sqrt(_weights(n, M, -1.0))  # rho^-1
    f = problem.f.resized(M).coeffs
    g = np.zeros(box, dtype=complex) if problem.g is None else problem.g.resized(M).coeffs
    zero_f = np.zeros(shape, dtype=complex)
    zero_g = np.zeros(box, dtype=complex)

    def advect(uc):
        return conv(VectorField(uc, n, real_valued=real)).without_mean().coeffs

    u_g, _ = op.apply_inverse_coeffs(zero_f, g)
    rhs = (f - advect(u_g)) * w

    def matvec(z):
        y = z.reshape(shape) / w
        u, _ = op.apply_inverse_coeffs(y, zero_g)
        return (z.reshape(shape) + advect(u) * w).ravel()

    size = rhs.size
    lin = spla.LinearOperator((size, size), matvec=matvec, dtype=complex)
    target = 0.5 * problem.tol * data_norm(problem.f, problem.g)
    count = [0]

    def cb(_):
        count[0] += 1

    restart = min(RESTART, size)
    cycles = max(1, -(-problem.max_iter // restart))
    if target == 0.0:
        z = np.zeros(size, dtype=complex)
    else:
        z, _ = spla.gmres(
            lin, rhs.ravel(), rtol=0.0, atol=target, restart=restart, maxiter=cycles,
            callback=cb, callback_type="pr_norm",
        )
    y = z.reshape(shape) / w
    uc, pc = op.apply_inverse_coeffs(y, g)
    return uc, pc, count[0]


def _picard(problem, op, conv, real):
    A, n, M = problem.A, problem.A.dim, op.M
    f = problem.f.resized(M)
    g = None if problem.g is None else problem.g.resized(M)
    scale = data_norm(problem.f, problem.g)
    u, p = op.solve(f, g)
    for k in range(1, problem.max_iter + 1):
        if oseen_residual(A, problem.U, u, p, f, g, convector=conv) <= problem.tol * scale:
            return u.coeffs, p.coeffs, k - 1
        adv = conv(u).resized(M).without_mean()
        u, p = op.solve(f - adv, g)
    return u.coeffs, p.coeffs, problem.max_iter


def solve_oseen(problem, strategy="gmres", operator=None):
    """Solve S_U (u, p) = (f, g) on the common truncation box.

    Raises :class:`NoConvergence` when the combined residual stays above
    ``tol * ||(f, g)||``.  The report adds ``iterations``, ``strategy`` and
    ``oseen_bound_pass``; the bound on ||u||_H1 is asserted only for g = 0.
    """
    A = problem.A
    ellipticity_constant(A)
    M = problem.M
    op = operator if operator is not None and operator.M == M else StokesOperator(A, M)
    real = problem.U.real_valued and problem.f.real_valued and (
        problem.g is None or problem.g.real_valued
    )
    conv = Convector(problem.U, M)
    if strategy == "gmres":
        uc, pc, its = _gmres(problem, op, conv, real)
    elif strategy == "picard":
        uc, pc, its = _picard(problem, op, conv, real)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    u = VectorField(uc, A.dim, real_valued=real)
    p = ScalarField(pc, A.dim, real_valued=real)
    f, g = problem.f, problem.g
    scale = data_norm(f, g)
    res = oseen_residual(A, problem.U, u, p, f, g, convector=conv)
    if res > problem.tol * scale:
        raise NoConvergence(its, res / scale if scale else res)

    mom, div = oseen_apply(A, problem.U, u, p, convector=conv)
    rm = sobolev_norm(mom - f.resized(M), -1.0)
    rd = sobolev_norm(div if g is None else div - g.resized(M), 0.0)
    consts = estimate_constants(A)
    nu = sobolev_norm(u, 1.0)
    nf = sobolev_norm(f, -1.0)
    bound = consts.c_uf_oseen * nf
    if g is None or sobolev_norm(g, 0.0) == 0.0:
        bound_pass = bool(nu <= bound * (1 + ESTIMATE_RTOL))
    else:
        bound_pass = None  # constant for the g-term is not explicit
    report = SolveReport(
        residual_momentum=rm / scale if scale else rm,
        residual_divergence=rd / scale if scale else rd,
        norm_u_Hs=nu,
        norm_p_Hsm1=sobolev_norm(p, 0.0),
        bound_u=bound,
        bound_p=float("nan"),
        estimates_pass=bool(bound_pass) if bound_pass is not None else True,
        s=1.0,
    )
    report.extra.update(
        iterations=int(its),
        strategy=strategy,
        oseen_bound_pass=bound_pass,
        residual=res / scale if scale else res,
        bound_ratio=nu / bound if bound > 0 else 0.0,
    )
    return StokesSolution(u, p, report)


def oseen_form(A, U, u, v):
    """a_U(u, v) = <a E(u), E(v)> + <(U . grad) u, v>."""
    return viscous_form(A, u, v) + trilinear(U, u, v)


def weak_residual(A, U, u, p, f, g=None, trials=8, seed=0):
    """Largest normalized violation of the mixed variational equations.

    For random test fields v and q this evaluates
    a_U(u, v) + b(v, p) - <f, v> and b(u, q) + <g, q> with
    b(v, q) = -<div v, q>, divided by ||v||_H1 and ||q||_L2.
    """
    rng = np.random.default_rng(seed)
    M = max(u.M, p.M, f.M)
    n = A.dim
    worst = 0.0
    for _ in range(trials):
        v = random_field(rng, 1.0, M, n, kind="vector")
        q = random_field(rng, 0.0, M, n, kind="scalar")
        r1 = oseen_form(A, U, u, v) - dual_pairing(divergence(v), p) - dual_pairing(f, v)
        r2 = -dual_pairing(divergence(u), q)
        if g is not None:
            r2 += dual_pairing(g, q)
        worst = max(worst, abs(r1) / sobolev_norm(v, 1.0), abs(r2) / sobolev_norm(q, 0.0))
    return float(worst)
