"""Constant viscosity tensors a[k, j, alpha, beta] and their estimate constants."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotElliptic, SymmetryError
from .field import TWO_PI, MatrixField, VectorField, divergence, lattice, strain

# relative tolerance for tensors read from files
INGEST_RTOL = 1e-14


class ViscosityTensor:
    """Viscosity coefficients ``entries[k, j, alpha, beta]`` = a_kj^(alpha beta).

    Construction validates the index symmetries
    a[k,j,a,b] = a[a,j,k,b] = a[k,b,a,j] to ``rtol`` (exact by default).
    """

    def __init__(self, entries, rtol=0.0, validate=True):
        a = np.array(entries, dtype=float)
        if a.ndim != 4 or len(set(a.shape)) != 1:
            raise DimensionMismatch(f"viscosity tensor must have shape (n,n,n,n), got {a.shape}")
        if a.shape[0] < 2:
            raise DimensionMismatch("dimension must be at least 2")
        if validate:
            ok, index = check_symmetry(a, rtol=rtol)
            if not ok:
                raise SymmetryError(index)
        a.flags.writeable = False
        self.entries = a
        self.dim = a.shape[0]

    @classmethod
    def from_flat(cls, n, flat, rtol=INGEST_RTOL):
        flat = np.asarray(flat, dtype=float)
        if flat.size != n**4:
            raise DimensionMismatch(f"expected {n**4} entries for n={n}, got {flat.size}")
        return cls(flat.reshape((n,) * 4), rtol=rtol)

    def to_json(self):
        return {"n": self.dim, "entries": self.entries.ravel().tolist()}

    def __mul__(self, t):
        return ViscosityTensor(self.entries * t)

    __rmul__ = __mul__

    def __repr__(self):
        return f"ViscosityTensor(n={self.dim}, norm={tensor_norm(self):.6g})"


def make_isotropic(lam, mu, n):
    """a = lam d_ka d_jb + mu (d_aj d_bk + d_ab d_kj)."""
    d = np.eye(n)
    a = lam * np.einsum("ka,jb->kjab", d, d) + mu * (
        np.einsum("aj,bk->kjab", d, d) + np.einsum("ab,kj->kjab", d, d)
    )
    return ViscosityTensor(a)


def check_symmetry(A, rtol=0.0):
    """Return ``(True, None)`` or ``(False, first violating (k, j, alpha, beta))``."""
    a = A.entries if isinstance(A, ViscosityTensor) else np.asarray(A, dtype=float)
    n = a.shape[0]
    tol = rtol * float(np.max(np.abs(a))) if a.size else 0.0
    swap_ka = np.transpose(a, (2, 1, 0, 3))
    swap_jb = np.transpose(a, (0, 3, 2, 1))
    bad = (np.abs(a - swap_ka) > tol) | (np.abs(a - swap_jb) > tol)
    if not np.any(bad):
        return True, None
    index = tuple(int(i) for i in np.argwhere(bad)[0])
    assert len(index) == 4 and all(i < n for i in index)
    return False, index


def symmetrize(a, major=True):
    """Average over the index symmetry group.

    The group is generated by swapping (k, alpha) and (j, beta); with
    ``major`` the pair swap (k, alpha) <-> (j, beta) is included as well, which
    makes the per-mode symbol block symmetric.
    """
    a = np.asarray(a, dtype=float)
    perms = [(0, 1, 2, 3), (2, 1, 0, 3), (0, 3, 2, 1), (2, 3, 0, 1)]
    if major:
        perms = perms + [(p[1], p[0], p[3], p[2]) for p in perms]
    avg = sum(np.transpose(a, p) for p in perms) / len(perms)
    # orbit maximum makes the result exactly invariant despite summation order
    return np.max([np.transpose(avg, p) for p in perms], axis=0)


def tensor_norm(A):
    """Max-entry norm."""
    return float(np.max(np.abs(A.entries)))


def trace_free_basis(n):
    """Orthonormal basis (Frobenius) of symmetric trace-free n x n matrices.

    Off-diagonal pairs (e_ka + e_ak)/sqrt(2) followed by normalized diagonal
    differences (e_11 + ... + e_mm - m e_(m+1)(m+1)) / sqrt(m(m+1)).
    """
    basis = []
    for k, a in itertools.combinations(range(n), 2):
        z = np.zeros((n, n))
        z[k, a] = z[a, k] = 1.0 / np.sqrt(2.0)
        basis.append(z)
    for m in range(1, n):
        z = np.zeros((n, n))
        z[np.arange(m), np.arange(m)] = 1.0
        z[m, m] = -float(m)
        basis.append(z / np.sqrt(m * (m + 1)))
    return np.array(basis)


@dataclass(frozen=True)
class TensorConstants:
    C_A: float
    norm_A: float
    lambda_min: float
    witness: np.ndarray  # trace-free symmetric matrix attaining lambda_min


def quadratic_form(A, zeta):
    """a_kj^(alpha beta) zeta_k alpha zeta_j beta."""
    return float(np.einsum("kjab,ka,jb->", A.entries, zeta, zeta))


def ellipticity_constant(A):
    """Smallest admissible C_A = 1 / lambda_min on symmetric trace-free matrices."""
    n = A.dim
    B = trace_free_basis(n)
    G = np.einsum("kjab,pka,qjb->pq", A.entries, B, B)
    G = 0.5 * (G + G.T)
    w, V = np.linalg.eigh(G)
    lam = float(w[0])
    if not lam > 0.0:
        raise NotElliptic(lam)
    zeta = np.einsum("p,pka->ka", V[:, 0], B)
    return TensorConstants(C_A=1.0 / lam, norm_A=tensor_norm(A), lambda_min=lam, witness=zeta)


@dataclass(frozen=True)
class EstimateConstants:
    C_A: float
    norm_A: float
    chat_uf: float
    chat_ug: float
    chat_pf: float
    chat_pg: float
    c_uf: float
    c_ug: float
    c_pf: float
    c_pg: float
    c_uf_oseen: float

    def as_dict(self):
        return dict(self.__dict__)


def estimate_constants(A):
    tc = ellipticity_constant(A)
    C, N = tc.C_A, tc.norm_A
    k = 1.0 + 2.0 * C * N
    return EstimateConstants(
        C_A=C,
        norm_A=N,
        chat_uf=2.0 * C,
        chat_ug=k,
        chat_pf=k,
        chat_pg=N * k,
        c_uf=C / np.pi**2,
        c_ug=k / (np.sqrt(2.0) * np.pi),
        c_pf=k / (np.sqrt(2.0) * np.pi),
        c_pg=N * k,
        c_uf_oseen=C / np.pi**2,
    )


def mode_block(A, dim, M):
    """K[l, j, ...] = xi_alpha a_lj^(alpha beta) xi_beta on the truncation box."""
    xi = lattice(dim, M)
    return np.einsum("ljab,a...,b...->lj...", A.entries, xi, xi)


def apply_L(A, u):
    """(L u)_k = d_alpha(a_kj^(alpha beta) d_beta u_j) mode by mode."""
    if not isinstance(u, VectorField) or u.dim != A.dim:
        raise DimensionMismatch("apply_L needs a vector field of the tensor's dimension")
    K = mode_block(A, u.dim, u.M)
    out = -(TWO_PI**2) * np.einsum("kj...,j...->k...", K, u.coeffs)
    return VectorField(out, u.dim, real_valued=u.real_valued, zero_mean=True)


def apply_L_divergence_form(A, u):
    """Same operator via strain, stress contraction, then divergence."""
    if not isinstance(u, VectorField) or u.dim != A.dim:
        raise DimensionMismatch("apply_L needs a vector field of the tensor's dimension")
    E = strain(u).coeffs
    stress = np.einsum("kjab,jb...->ka...", A.entries, E)
    return divergence(MatrixField(stress, u.dim, real_valued=u.real_valued, zero_mean=True))


def viscous_form(A, u, v):
    """<a_ij^(alpha beta) E_jb(u), E_ia(v)> on the torus."""
    M = max(u.M, v.M)
    Eu = strain(u.resized(M)).coeffs
    Ev = strain(v.resized(M)).coeffs
    stress = np.einsum("ijab,jb...->ia...", A.entries, Eu)
    Evr = Ev[(Ellipsis,) + (slice(None, None, -1),) * u.dim]
    val = complex(np.sum(stress * Evr))
    return val.real if (u.real_valued and v.real_valued) else val


def random_elliptic(seed, n, min_lambda=0.1, eps=0.5):
    """isotropic(0, 1) + eps * Sym(G), eps halved until lambda_min >= min_lambda."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    base = make_isotropic(0.0, 1.0, n).entries
    G = symmetrize(rng.standard_normal((n,) * 4))
    while True:
        A = ViscosityTensor(base + eps * G)
        try:
            if ellipticity_constant(A).lambda_min >= min_lambda:
                return A
        except NotElliptic:
            pass
        eps *= 0.5


def load_tensor(spec, n=None):
    """Parse a tensor JSON object (``{"n", "entries"}`` or ``{"isotropic": {...}}``)."""
    if isinstance(spec, (str, bytes)):
        spec = json.loads(spec)
    if not isinstance(spec, dict):
        raise ValueError("tensor description must be a JSON object")
    if "isotropic" in spec:
        iso = spec["isotropic"]
        if not isinstance(iso, dict):
            raise KeyError("isotropic")
        for key in ("lambda", "mu"):
            if key not in iso:
                raise KeyError(f"isotropic.{key}")
        dim = spec.get("n", n)
        if dim is None:
            raise KeyError("n")
        return make_isotropic(float(iso["lambda"]), float(iso["mu"]), int(dim))
    if "entries" not in spec:
        raise KeyError("entries")
    if "n" not in spec:
        raise KeyError("n")
    return ViscosityTensor.from_flat(int(spec["n"]), spec["entries"])
