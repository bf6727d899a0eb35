"""Mode-by-mode solution of the anisotropic Stokes system.

For every nonzero lattice point the Fourier coefficients satisfy

    4 pi^2 xi_a a_kj^(ab) xi_b u_j + 2 pi i xi_k p = f_k,
    2 pi i xi_j u_j = g,

a dense (n+1) x (n+1) linear system.  The assembled symbol uses the sign
pattern -2 pi i xi in the pressure row and column; it is related to the
system above by D S D with D = diag(1, ..., 1, -1), which is how
:func:`solve_mode` uses it.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DimensionMismatch, NonZeroMean, SingularSymbol, ZeroMode
from .field import (
    TWO_PI,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    lattice,
    origin_index,
    sobolev_norm,
)
from .viscosity import apply_L, ellipticity_constant, estimate_constants, mode_block

# roundoff slack on the explicit estimates, relative to the bound
ESTIMATE_RTOL = 1e-12


@dataclass(frozen=True)
class SymbolMatrix:
    xi: tuple
    entries: np.ndarray


def _check_xi(xi, n):
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (n,):
        raise DimensionMismatch(f"lattice index must have {n} components")
    if not np.any(xi):
        raise ZeroMode("symbol is undefined at xi = 0")
    return xi


def assemble_symbol(A, xi):
    """(n+1) x (n+1) symbol with blocks 4 pi^2 xi a xi, -2 pi i xi, 0."""
    n = A.dim
    x = _check_xi(xi, n)
    S = np.zeros((n + 1, n + 1), dtype=complex)
    S[:n, :n] = 4 * np.pi**2 * np.einsum("ljab,a,b->lj", A.entries, x, x)
    S[:n, n] = -1j * TWO_PI * x
    S[n, :n] = -1j * TWO_PI * x
    return SymbolMatrix(tuple(int(k) for k in xi), S)


def solve_mode(A, xi, fhat, ghat):
    """Velocity and pressure coefficients at nonzero modes.

    ``xi`` is one lattice point of shape (n,) or a batch (K, n) with
    ``fhat`` of shape (K, n) and ``ghat`` of shape (K,).  The assembled
    symbol S is solved as S (u, -p) = (f, -g).
    """
    n = A.dim
    ellipticity_constant(A)
    x = np.asarray(xi, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != n:
        raise DimensionMismatch(f"lattice index must have {n} components")
    if np.any(np.all(x == 0, axis=1)):
        raise ZeroMode("symbol is undefined at xi = 0")
    f = np.asarray(fhat, dtype=complex).reshape(len(x), -1)
    g = np.asarray(ghat, dtype=complex).reshape(len(x))
    if f.shape[1] != n:
        raise DimensionMismatch("fhat must have n components")
    S = np.zeros((len(x), n + 1, n + 1), dtype=complex)
    S[:, :n, :n] = 4 * np.pi**2 * np.einsum("ljab,ka,kb->klj", A.entries, x, x)
    S[:, :n, n] = -1j * TWO_PI * x
    S[:, n, :n] = -1j * TWO_PI * x
    rhs = np.concatenate([f, -g[:, None]], axis=1)
    try:
        sol = np.linalg.solve(S, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularSymbol("symbol singular") from exc
    u, p = sol[:, :n], -sol[:, n]
    return (u[0], p[0]) if single else (u, p)


def solve_isotropic_mode(lam, mu, xi, fhat, ghat):
    """Closed-form isotropic solution (pressure from the xi-projection, then u).

    Accepts one lattice point or a batch like :func:`solve_mode`.
    """
    x = np.asarray(xi, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if np.any(np.all(x == 0, axis=1)):
        raise ZeroMode("xi = 0")
    f = np.asarray(fhat, dtype=complex).reshape(x.shape)
    g = np.asarray(ghat, dtype=complex).reshape(len(x))
    sq = np.sum(x * x, axis=1)
    xf = np.sum(x * f, axis=1)
    p = xf / (1j * TWO_PI * sq) + (lam + 2 * mu) * g
    u = ((f - x * (xf / sq)[:, None]) / (4 * np.pi**2 * mu * sq[:, None])
         + x * (g / (1j * TWO_PI * sq))[:, None])
    return (u[0], p[0]) if single else (u, p)


class StokesOperator:
    """Per-mode inverses of the Stokes system on a truncation box.

    ``apply_inverse`` maps (f_hat, g_hat) to (u_hat, p_hat) for all modes at
    once; the mean mode is mapped to zero.
    """

    def __init__(self, A, M):
        self.A = A
        self.dim = A.dim
        self.M = M
        n = A.dim
        ellipticity_constant(A)
        K = 4 * np.pi**2 * mode_block(A, n, M)
        xi = lattice(n, M)
        box = xi.shape[1:]
        P = np.zeros(box + (n + 1, n + 1), dtype=complex)
        P[..., :n, :n] = np.moveaxis(K, (0, 1), (-2, -1))
        P[..., :n, n] = 1j * TWO_PI * np.moveaxis(xi, 0, -1)
        P[..., n, :n] = 1j * TWO_PI * np.moveaxis(xi, 0, -1)
        o = origin_index(n, M)
        P[o] = np.eye(n + 1)
        try:
            inv = np.linalg.inv(P)
        except np.linalg.LinAlgError as exc:
            raise SingularSymbol("Stokes symbol singular on the truncation box") from exc
        if not np.all(np.isfinite(inv)):
            raise SingularSymbol("Stokes symbol inverse not finite")
        inv[o] = 0.0
        self._inv = inv

    def apply_inverse_coeffs(self, fc, gc):
        """Array-level inverse; ``fc`` is (n, box...), ``gc`` is (box...)."""
        rhs = np.concatenate([fc, gc[None]], axis=0)
        sol = np.einsum("...ij,j...->i...", self._inv, rhs)
        return sol[: self.dim], sol[self.dim]

    def solve(self, f, g=None):
        n = self.dim
        fc = f.resized(self.M).coeffs
        gc = np.zeros(fc.shape[1:], dtype=complex) if g is None else g.resized(self.M).coeffs
        uc, pc = self.apply_inverse_coeffs(fc, gc)
        real = f.real_valued and (g is None or g.real_valued)
        return VectorField(uc, n, real_valued=real), ScalarField(pc, n, real_valued=real)


@dataclass
class SolveReport:
    residual_momentum: float
    residual_divergence: float
    norm_u_Hs: float
    norm_p_Hsm1: float
    bound_u: float = float("nan")
    bound_p: float = float("nan")
    estimates_pass: bool = True
    s: float = 1.0
    extra: dict = dc_field(default_factory=dict)

    def to_dict(self):
        out = {
            "residual_momentum": self.residual_momentum,
            "residual_divergence": self.residual_divergence,
            "norm_u_Hs": self.norm_u_Hs,
            "norm_p_Hs-1": self.norm_p_Hsm1,
            "bound_u": self.bound_u,
            "bound_p": self.bound_p,
            "estimates_pass": bool(self.estimates_pass),
            "s": self.s,
        }
        out.update(self.extra)
        return out


@dataclass(frozen=True)
class StokesData:
    f: VectorField
    g: ScalarField | None = None

    def __post_init__(self):
        if self.f.mean.any() or (self.g is not None and self.g.mean != 0):
            raise NonZeroMean("Stokes data must have zero mean")
        if self.g is not None and (self.g.dim != self.f.dim):
            raise DimensionMismatch("f and g differ in dimension")


@dataclass(frozen=True)
class StokesSolution:
    u: VectorField
    p: ScalarField
    report: SolveReport


def stokes_residual(A, u, p, f, g=None):
    """Residual fields (-L u + grad p - f, div u - g)."""
    M = max(u.M, p.M, f.M, 0 if g is None else g.M)
    u, p, f = u.resized(M), p.resized(M), f.resized(M)
    mom = -apply_L(A, u) + gradient(p) - f
    div = divergence(u)
    if g is not None:
        div = div - g.resized(M)
    return mom, div


def residual_norms(A, u, p, f, g=None, s=1.0):
    """Relative Sobolev norms of the Stokes residuals in H^(s-2) and H^(s-1)."""
    mom, div = stokes_residual(A, u, p, f, g)
    scale_f = sobolev_norm(f, s - 2)
    scale_g = 0.0 if g is None else sobolev_norm(g, s - 1)
    scale = scale_f + scale_g
    rm = sobolev_norm(mom, s - 2)
    rd = sobolev_norm(div, s - 1)
    if scale > 0:
        rm, rd = rm / scale, rd / scale
    return SolveReport(
        residual_momentum=rm,
        residual_divergence=rd,
        norm_u_Hs=sobolev_norm(u, s),
        norm_p_Hsm1=sobolev_norm(p, s - 1),
        s=s,
    )


def mode_estimate_margins(A, u, p, f, g=None, consts=None):
    """Per-mode slack of the explicit coefficient estimates.

    Returns two arrays over the nonzero modes:
    (bound - |u_hat|) / bound and (bound - |p_hat|) / bound (0 where bound = 0
    and the coefficient vanishes).
    """
    consts = consts or estimate_constants(A)
    n, M = u.dim, u.M
    xi = lattice(n, M)
    r = np.sqrt(np.sum(xi**2, axis=0))
    nz = r > 0
    fa = np.sqrt(np.sum(np.abs(f.resized(M).coeffs) ** 2, axis=0))[nz]
    ga = np.zeros_like(fa) if g is None else np.abs(g.resized(M).coeffs)[nz]
    ua = np.sqrt(np.sum(np.abs(u.coeffs) ** 2, axis=0))[nz]
    pa = np.abs(p.resized(M).coeffs)[nz]
    rr = r[nz]
    bu = consts.chat_uf * fa / (TWO_PI * rr) ** 2 + consts.chat_ug * ga / (TWO_PI * rr)
    bp = consts.chat_pf * fa / (TWO_PI * rr) + consts.chat_pg * ga
    return _margin(bu, ua), _margin(bp, pa)


def _margin(bound, value):
    with np.errstate(invalid="ignore", divide="ignore"):
        m = (bound - value) / bound
    m = np.where(bound > 0, m, np.where(value > 0, -np.inf, 1.0))
    return m


def global_bounds(A, f, g=None, s=1.0, consts=None):
    consts = consts or estimate_constants(A)
    nf = sobolev_norm(f, s - 2)
    ng = 0.0 if g is None else sobolev_norm(g, s - 1)
    return consts.c_uf * nf + consts.c_ug * ng, consts.c_pf * nf + consts.c_pg * ng


def solve_stokes(A, data, s=1.0, operator=None):
    """Solve the Stokes system on the truncation box of the data.

    ``data`` is a :class:`StokesData` or a bare forcing field.  The report
    records relative residuals, the global bounds, and whether both the
    global and per-mode estimates hold.
    """
    if isinstance(data, VectorField):
        data = StokesData(data)
    f, g = data.f, data.g
    if f.dim != A.dim:
        raise DimensionMismatch("data and tensor differ in dimension")
    M = f.M if g is None else max(f.M, g.M)
    op = operator if operator is not None and operator.M == M else StokesOperator(A, M)
    u, p = op.solve(f.resized(M), None if g is None else g.resized(M))
    report = residual_norms(A, u, p, f, g, s)
    consts = estimate_constants(A)
    bu, bp = global_bounds(A, f, g, s, consts)
    mu_, mp_ = mode_estimate_margins(A, u, p, f, g, consts)
    report.bound_u, report.bound_p = bu, bp
    ok_global = (report.norm_u_Hs <= bu * (1 + ESTIMATE_RTOL)) and (
        report.norm_p_Hsm1 <= bp * (1 + ESTIMATE_RTOL)
    )
    ok_mode = bool(np.all(mu_ >= -ESTIMATE_RTOL) and np.all(mp_ >= -ESTIMATE_RTOL))
    report.estimates_pass = bool(ok_global and ok_mode)
    report.extra["mode_margin_u"] = float(np.min(mu_)) if mu_.size else 1.0
    report.extra["mode_margin_p"] = float(np.min(mp_)) if mp_.size else 1.0
    return StokesSolution(u, p, report)
