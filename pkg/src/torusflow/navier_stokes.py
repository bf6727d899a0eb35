"""Stationary Navier-Stokes: Picard (Oseen-wind) iteration and a Galerkin oracle.

The Picard driver freezes the wind at the previous iterate and solves an
Oseen problem; the Galerkin oracle solves the finite quadratic system for
the coefficients of u in a real divergence-free trigonometric basis by
Newton's method with load stepping.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field

import numpy as np

from .advection import Convector, convect, oseen_apply
from .errors import DimensionMismatch, NewtonFailed, NoConvergence, NonZeroMean
from .field import (
    ScalarField,
    VectorField,
    _reflect,
    decay_slope,
    divergence,
    dual_pairing,
    from_modes,
    random_field,
    sobolev_norm,
)
from .oseen import OseenProblem, solve_oseen
from .stokes import ESTIMATE_RTOL, StokesOperator
from .viscosity import apply_L, ellipticity_constant, estimate_constants, viscous_form

DAMPING_FLOOR = 1.0 / 16.0
HOMOTOPY_STEPS = 8


@dataclass
class NsReport:
    iterations: int
    residual_momentum: float
    residual_divergence: float
    energy_gap: float
    apriori_pass: bool
    norm_u_H1: float
    apriori_bound: float
    damping: float = 1.0
    smallness_threshold: float | None = None
    smallness_verdict: str | None = None
    decay_slope: float | None = None
    extra: dict = dc_field(default_factory=dict)

    def to_dict(self):
        out = {
            "picard_iterations": self.iterations,
            "residual_momentum": self.residual_momentum,
            "residual_divergence": self.residual_divergence,
            "energy_gap": self.energy_gap,
            "apriori_pass": bool(self.apriori_pass),
            "norm_u_Hs": self.norm_u_H1,
            "bound_u": self.apriori_bound,
            "damping": self.damping,
            "smallness_threshold": self.smallness_threshold,
            "smallness_verdict": self.smallness_verdict,
            "decay_slope": self.decay_slope,
        }
        out.update(self.extra)
        return out


def ns_residual(A, u, p, f):
    """-L u + grad p + (u . grad) u - f on the box of ``u``."""
    mom, _ = oseen_apply(A, u, u, p)
    return mom - f.resized(mom.M)


def energy_gap(A, u, f):
    """|<a E(u), E(u)> - <f, u>| / (||f||_H-1 ||u||_H1)."""
    scale = sobolev_norm(f, -1.0) * sobolev_norm(u, 1.0)
    gap = abs(viscous_form(A, u, u) - dual_pairing(f.resized(u.M), u))
    return gap / scale if scale > 0 else gap


def recover_pressure(A, u, f, operator=None):
    """Pressure from the Stokes problem with right side f - (u . grad) u."""
    M = max(u.M, f.M)
    op = operator if operator is not None and operator.M == M else StokesOperator(A, M)
    rhs = f.resized(M) - convect(u, u).resized(M).without_mean()
    _, p = op.solve(rhs)
    return p


def apriori_bound(A, f):
    return estimate_constants(A).c_uf_oseen * sobolev_norm(f, -1.0)


def _finish(A, u, p, f, its, tol, damping, op):
    M = u.M
    res = ns_residual(A, u, p, f)
    nu = sobolev_norm(u, 1.0)
    bound = apriori_bound(A, f)
    return NsReport(
        iterations=its,
        residual_momentum=sobolev_norm(res, -1.0),
        residual_divergence=sobolev_norm(divergence(u), 0.0),
        energy_gap=energy_gap(A, u, f) if nu > 0 else 0.0,
        apriori_pass=bool(nu <= bound + tol),
        norm_u_H1=nu,
        apriori_bound=bound,
        damping=damping,
        extra={"M": M},
    )


def solve_ns_picard(A, f, tol=1e-10, max_iter=100, damping=1.0, oseen_tol=None):
    """Damped Picard iteration u <- (1 - d) u + d * Oseen(U = u).

    Stops when ||u^(k+1) - u^k||_H1 <= tol.  The damping halves whenever the
    step grows, down to 1/16.  Raises :class:`NoConvergence` otherwise.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    if not isinstance(f, VectorField) or f.dim != A.dim:
        raise DimensionMismatch("forcing must be a vector field of the tensor's dimension")
    if np.any(f.mean):
        raise NonZeroMean("forcing must have zero mean")
    ellipticity_constant(A)
    M = f.M
    op = StokesOperator(A, M)
    u, p = op.solve(f)
    if sobolev_norm(f, -1.0) == 0.0:
        return u, p, _finish(A, u, p, f, 1, tol, damping, op)
    if oseen_tol is None:
        oseen_tol = float(np.clip(1e-3 * tol / max(sobolev_norm(u, 1.0), 1e-300), 1e-14, 1e-10))
    d = damping
    prev_step = np.inf
    for k in range(1, max_iter + 1):
        sol = solve_oseen(OseenProblem(A, u, f, tol=oseen_tol), operator=op)
        new = u * (1.0 - d) + sol.u * d if d < 1.0 else sol.u
        step = sobolev_norm(new - u, 1.0)
        if not np.isfinite(step):
            raise NoConvergence(k, step)
        if step > prev_step and d > DAMPING_FLOOR:
            d = max(0.5 * d, DAMPING_FLOOR)
        prev_step = step
        u = new
        if step <= tol:
            p = recover_pressure(A, u, f, op)
            return u, p, _finish(A, u, p, f, k, tol, d, op)
    raise NoConvergence(max_iter, prev_step)


# -- Galerkin oracle -------------------------------------------------------
def _half_lattice(n, M):
    """Lattice points with |xi|_inf <= M whose first nonzero entry is positive."""
    pts = []
    for xi in itertools.product(range(-M, M + 1), repeat=n):
        nz = [k for k in xi if k != 0]
        if nz and nz[0] > 0:
            pts.append(xi)
    return sorted(pts, key=lambda x: (sum(k * k for k in x), x))


def _orthogonal_directions(xi):
    """Orthonormal basis of the complement of xi (Gram-Schmidt on unit vectors)."""
    n = len(xi)
    x = np.asarray(xi, dtype=float)
    vecs = [x / np.linalg.norm(x)]
    out = []
    for e in np.eye(n):
        w = e - sum((e @ v) * v for v in vecs)
        if np.linalg.norm(w) > 1e-8:
            w = w / np.linalg.norm(w)
            vecs.append(w)
            out.append(w)
        if len(out) == n - 1:
            break
    return out


@dataclass(frozen=True)
class BasisFunction:
    xi: tuple
    direction: tuple
    kind: str  # "cos" or "sin"


def galerkin_basis(n, M=None, modes=None):
    """Real divergence-free trigonometric fields e cos(2 pi xi.x), e sin(2 pi xi.x).

    Either all half-lattice points in the box of radius ``M`` or an explicit
    list of ``modes`` is used, ordered by |xi| then lexicographically.
    """
    if modes is None:
        if M is None:
            raise ValueError("give M or modes")
        modes = _half_lattice(n, M)
    else:
        canon = []
        for xi in modes:
            xi = tuple(int(k) for k in xi)
            if len(xi) != n or not any(xi):
                raise DimensionMismatch(f"bad mode {xi}")
            nz = [k for k in xi if k != 0]
            canon.append(xi if nz[0] > 0 else tuple(-k for k in xi))
        modes = sorted(set(canon), key=lambda x: (sum(k * k for k in x), x))
    basis = []
    for xi in modes:
        for e in _orthogonal_directions(xi):
            for kind in ("cos", "sin"):
                basis.append(BasisFunction(xi, tuple(float(c) for c in e), kind))
    return basis


def basis_field(b, n, M):
    e = np.array(b.direction)
    c = 0.5 * e if b.kind == "cos" else -0.5j * e
    return from_modes(n, M, {b.xi: c}, kind="vector")


@dataclass
class GalerkinSystem:
    basis: list
    eta: np.ndarray
    radius_rho: float
    M: int
    residual: float = 0.0
    newton_iterations: int = 0
    homotopy_used: bool = False

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)

    @property
    def m(self):
        return len(self.basis)


class _GalerkinOps:
    def __init__(self, A, basis, M):
        self.A, self.n, self.M = A, A.dim, M
        self.W = np.array([basis_field(b, self.n, M).coeffs for b in basis])
        self.Wr = _reflect(self.W, self.n)
        LW = np.array([apply_L(A, VectorField(w, self.n)).coeffs for w in self.W])
        m = len(self.W)
        self._Wr = self.Wr.reshape(m, -1)
        self.K = -(self._Wr @ LW.reshape(m, -1).T).real

    def field(self, eta):
        return VectorField(np.tensordot(eta, self.W, axes=1), self.n)

    def project(self, v):
        """Coefficients <v, w_l> for a field on the basis box."""
        return (self._Wr @ v.resized(self.M).coeffs.ravel()).real

    def Q(self, eta, F):
        u = self.field(eta)
        return self.K @ eta + self.project(convect(u, u)) - F

    def J(self, eta):
        u = self.field(eta)
        cu = Convector(u)
        cols = []
        for w in self.W:
            wf = VectorField(w, self.n)
            cols.append(self.project(convect(wf, u) + cu(wf)))
        return self.K + np.array(cols).T


def _newton(ops, eta, F, tol, max_iter):
    for k in range(max_iter + 1):
        q = ops.Q(eta, F)
        r = float(np.linalg.norm(q))
        if r <= tol:
            return eta, r, k
        try:
            eta = eta - np.linalg.solve(ops.J(eta), q)
        except np.linalg.LinAlgError:
            return None, np.inf, k
        if not np.all(np.isfinite(eta)):
            return None, np.inf, k
    return None, r, max_iter


def galerkin_solve(A, f, M=None, modes=None, newton_tol=1e-12, max_newton=30, max_coeffs=200):
    """Solve the Galerkin system K eta + B(eta, eta) = F on a divergence-free basis.

    Newton starts from the Stokes solution; if it fails, the load is stepped
    through 8 geometrically spaced factors up to 1.  The tolerance is
    applied to ||Q(eta)|| relative to max(1, ||F||).  Returns the system and
    the recovered (u, p).
    """
    ellipticity_constant(A)
    n = A.dim
    basis = galerkin_basis(n, M=M, modes=modes)
    if len(basis) > max_coeffs:
        raise ValueError(f"{len(basis)} coefficients exceed the limit {max_coeffs}")
    Mb = max(max(abs(k) for k in b.xi) for b in basis) if basis else 1
    if M is not None:
        Mb = max(Mb, M)
    ops = _GalerkinOps(A, basis, Mb)
    F = ops.project(f.resized(Mb))
    tol = newton_tol * max(1.0, float(np.linalg.norm(F)))
    rho_min = min(np.sqrt(1.0 + sum(k * k for k in b.xi)) for b in basis)
    radius = np.sqrt(2.0) * apriori_bound(A, f) / rho_min

    eta0 = np.linalg.solve(ops.K, F)
    eta, r, its = _newton(ops, eta0, F, tol, max_newton)
    homotopy = False
    if eta is None:
        homotopy = True
        eta = np.zeros(len(basis))
        its = 0
        for t in np.geomspace(1.0 / 2 ** (HOMOTOPY_STEPS - 1), 1.0, HOMOTOPY_STEPS):
            eta, r, k = _newton(ops, eta, t * F, tol, max_newton)
            its += k
            if eta is None:
                raise NewtonFailed(f"Newton failed at load factor {t:.4g} (residual {r:.3e})")
    system = GalerkinSystem(basis, eta, float(radius), Mb, residual=r,
                            newton_iterations=its, homotopy_used=homotopy)
    u = ops.field(eta)
    p = recover_pressure(A, u, f.resized(Mb))
    return system, u, p


# -- smallness and regularity reports ------------------------------------
def smallness_threshold(A, c4):
    """pi^3 / sqrt(2) * C_A^-2 * c4^-2."""
    C = ellipticity_constant(A).C_A
    return float(np.pi**3 / np.sqrt(2.0) / C**2 / c4**2)


def smallness_report(A, f, embedding):
    """Compare ||f||_H-1 with the uniqueness threshold using a lower bound on C_4#.

    ``embedding`` is an embedding estimate (with ``c_lower``) or a number.
    A lower bound on the embedding constant over-estimates the threshold,
    so the verdict is informational only.
    """
    if A.dim not in (2, 3, 4):
        raise DimensionMismatch("smallness threshold is stated for n in {2, 3, 4}")
    c4 = float(getattr(embedding, "c_lower", embedding))
    thr = smallness_threshold(A, c4)
    nf = sobolev_norm(f, -1.0)
    return {
        "threshold": thr,
        "norm_f_H-1": nf,
        "ratio": nf / thr,
        "c4_lower": c4,
        "below": bool(nf < thr),
        "smallness_verdict": "INFORMATIONAL: " + ("below threshold" if nf < thr else "above threshold"),
    }


def decay_exponent(u):
    """Positive decay exponent -slope of the shell-averaged spectrum."""
    return -decay_slope(u)


def decay_transfer_report(A, t_f, M, trials=1, seed=0, solver="stokes", scale=None, tol=1e-10):
    """Fitted decay exponents of solutions for forcing with decay rho^-t_f.

    ``solver`` is "stokes" or "ns"; for "ns" the forcing is rescaled to
    H^-1 norm ``scale`` (default 1) so Picard stays in the small-data regime.
    """
    rng = np.random.default_rng(seed)
    n = A.dim
    op = StokesOperator(A, M)
    slopes = []
    for _ in range(trials):
        f = random_field(rng, t_f, M, n, kind="vector")
        if solver == "stokes":
            u, _ = op.solve(f)
        elif solver == "ns":
            f = f * ((1.0 if scale is None else scale) / sobolev_norm(f, -1.0))
            u, _, _ = solve_ns_picard(A, f, tol=tol)
        else:
            raise ValueError(f"unknown solver {solver!r}")
        slopes.append(decay_exponent(u))
    slopes = np.array(slopes)
    expected = t_f + 2.0
    return {
        "solver": solver,
        "t_f": t_f,
        "M": M,
        "expected": expected,
        "slopes": slopes.tolist(),
        "max_deviation": float(np.max(np.abs(slopes - expected))),
    }


# -- Taylor-Green manufactured solution -------------------------------------
def taylor_green(M=8):
    """u* = (sin 2pi x cos 2pi y, -cos 2pi x sin 2pi y), p* = (cos 4pi x + cos 4pi y) / 4.

    (u* . grad) u* = -grad p*, so with the isotropic tensor (0, 1) the
    forcing is f = -L u* = 8 pi^2 u*.
    """
    if M < 2:
        raise ValueError("Taylor-Green needs M >= 2")
    u = from_modes(2, M, {(1, 1): [-0.25j, 0.25j], (1, -1): [-0.25j, -0.25j]}, kind="vector")
    p = from_modes(2, M, {(2, 0): 0.125, (0, 2): 0.125})
    return u, p


def manufactured_forcing(A, u, p):
    """f = -L u + grad p + (u . grad) u, built by the forward operator."""
    mom, _ = oseen_apply(A, u, u, p)
    return mom
