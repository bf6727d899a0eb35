"""Truncated Fourier fields on the flat torus [0, 1)^n.

A field stores the coefficients g_hat(xi) for every lattice point with
|xi|_inf <= M in a dense array.  Spatial axes come last; the array position
of xi along an axis is xi + M.  Leading axes index components: none for a
scalar field, one (length n) for a vector field, two for a matrix field.

Conventions follow g(x) = sum_xi g_hat(xi) exp(2 pi i x.xi), so the
coefficient of a derivative d_j g is 2 pi i xi_j g_hat(xi).
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import AliasingError, DimensionMismatch, NonZeroMean

TWO_PI = 2.0 * np.pi

# relative size below which a mean coefficient counts as roundoff
MEAN_TOL = 1e-12


def fft_workers():
    """Worker count for FFTs, capped by ``TORUSFLOW_THREADS`` when set."""
    value = os.environ.get("TORUSFLOW_THREADS")
    if not value:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        return 1


@functools.lru_cache(maxsize=64)
def lattice(dim, M):
    """Integer lattice of the truncation box as a float array (dim, 2M+1, ...)."""
    axis = np.arange(-M, M + 1, dtype=float)
    xi = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"))
    xi.flags.writeable = False
    return xi


@functools.lru_cache(maxsize=64)
def _xi_sq(dim, M):
    sq = np.sum(lattice(dim, M) ** 2, axis=0)
    sq.flags.writeable = False
    return sq


def rho(xi):
    """Bessel-potential weight (1 + |xi|^2)^(1/2); ``xi`` has components first."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(1.0 + np.sum(xi**2, axis=0))


def origin_index(dim, M):
    return (M,) * dim


class SpectralField:
    """Immutable truncated Fourier field.

    Parameters
    ----------
    coeffs : array_like
        Complex coefficients, component axes first then ``dim`` spatial axes
        of length ``2M + 1``.
    dim : int
        Spatial dimension n.
    real_valued : bool
        Enforce Hermitian symmetry g_hat(-xi) = conj(g_hat(xi)).  The stored
        coefficients are projected onto that symmetry.
    zero_mean : bool
        Require g_hat(0) = 0.  A mean coefficient above roundoff raises
        :class:`NonZeroMean`; roundoff is zeroed.
    """

    rank = None

    def __init__(self, coeffs, dim, real_valued=True, zero_mean=True):
        c = np.array(coeffs, dtype=complex)
        if c.ndim < dim:
            raise DimensionMismatch(f"coefficient array has {c.ndim} axes, need at least {dim}")
        box = c.shape[c.ndim - dim :]
        if len(set(box)) != 1 or box[0] % 2 != 1:
            raise DimensionMismatch(f"spatial axes must all have odd equal length, got {box}")
        comp = c.shape[: c.ndim - dim]
        if self.rank is not None:
            if len(comp) != self.rank or any(k != dim for k in comp):
                raise DimensionMismatch(
                    f"{type(self).__name__} needs component shape {(dim,) * self.rank}, got {comp}"
                )
        if real_valued:
            c = 0.5 * (c + np.conj(_reflect(c, dim)))
        o = (Ellipsis,) + (box[0] // 2,) * dim
        if zero_mean:
            mean = np.abs(c[o])
            scale = np.max(np.abs(c)) if c.size else 0.0
            if np.any(mean > MEAN_TOL * scale + 1e-300):
                raise NonZeroMean(f"mean coefficient {np.max(mean):.3e} on a zero-mean field")
            c[o] = 0.0
        c.flags.writeable = False
        self._c = c
        self.dim = int(dim)
        self.M = box[0] // 2
        self.real_valued = bool(real_valued)
        self.zero_mean = bool(zero_mean)

    # -- basic accessors --------------------------------------------------
    @property
    def coeffs(self):
        return self._c

    @property
    def component_shape(self):
        return self._c.shape[: self._c.ndim - self.dim]

    @property
    def mean(self):
        return self._c[(Ellipsis,) + origin_index(self.dim, self.M)]

    def coefficient(self, xi):
        """Coefficient(s) at lattice point ``xi``; zero outside the box."""
        xi = tuple(int(k) for k in xi)
        if len(xi) != self.dim:
            raise DimensionMismatch("lattice index has wrong length")
        if max(abs(k) for k in xi) > self.M:
            return np.zeros(self.component_shape, dtype=complex)
        return self._c[(Ellipsis,) + tuple(k + self.M for k in xi)]

    def _new(self, coeffs, real_valued=None, zero_mean=None, cls=None):
        cls = cls or _class_for_rank(coeffs.ndim - self.dim)
        return cls(
            coeffs,
            self.dim,
            real_valued=self.real_valued if real_valued is None else real_valued,
            zero_mean=self.zero_mean if zero_mean is None else zero_mean,
        )

    def resized(self, M):
        """Zero-extend or truncate to box radius ``M``."""
        if M == self.M:
            return self
        comp = self.component_shape
        out = np.zeros(comp + (2 * M + 1,) * self.dim, dtype=complex)
        k = min(M, self.M)
        src = (Ellipsis,) + (slice(self.M - k, self.M + k + 1),) * self.dim
        dst = (Ellipsis,) + (slice(M - k, M + k + 1),) * self.dim
        out[dst] = self._c[src]
        return self._new(out)

    def without_mean(self):
        c = self._c.copy()
        c[(Ellipsis,) + origin_index(self.dim, self.M)] = 0.0
        return self._new(c, zero_mean=True)

    def conj_reflect(self):
        """Field with coefficients conj(g_hat(-xi)) (complex conjugate in x)."""
        return self._new(np.conj(_reflect(self._c, self.dim)))

    def __getitem__(self, k):
        if not self.component_shape:
            raise TypeError("scalar field has no components")
        return self._new(self._c[k])

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.dim != self.dim or other.component_shape != self.component_shape:
            raise DimensionMismatch("fields differ in dimension or component shape")
        M = max(self.M, other.M)
        return self.resized(M), other.resized(M)

    def __add__(self, other):
        pair = self._coerce(other)
        if pair is NotImplemented:
            return NotImplemented
        a, b = pair
        return a._new(
            a._c + b._c,
            real_valued=a.real_valued and b.real_valued,
            zero_mean=a.zero_mean and b.zero_mean,
        )

    def __sub__(self, other):
        pair = self._coerce(other)
        if pair is NotImplemented:
            return NotImplemented
        a, b = pair
        return a._new(
            a._c - b._c,
            real_valued=a.real_valued and b.real_valued,
            zero_mean=a.zero_mean and b.zero_mean,
        )

    def __mul__(self, alpha):
        if not np.isscalar(alpha):
            return NotImplemented
        real = self.real_valued and np.isrealobj(alpha)
        return self._new(self._c * alpha, real_valued=real)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __truediv__(self, alpha):
        return self * (1.0 / alpha)

    def __repr__(self):
        return (
            f"{type(self).__name__}(dim={self.dim}, M={self.M}, "
            f"real_valued={self.real_valued}, zero_mean={self.zero_mean})"
        )


class ScalarField(SpectralField):
    rank = 0


class VectorField(SpectralField):
    rank = 1


class MatrixField(SpectralField):
    """n x n array of scalar fields, e.g. a strain or velocity gradient."""

    rank = 2


def _class_for_rank(rank):
    return {0: ScalarField, 1: VectorField, 2: MatrixField}.get(rank, SpectralField)


def _reflect(c, dim):
    """Map coefficient array at xi to the one at -xi."""
    idx = (Ellipsis,) + (slice(None, None, -1),) * dim
    return c[idx]


def zeros(dim, M, kind="scalar", real_valued=True, zero_mean=True):
    comp = {"scalar": (), "vector": (dim,), "matrix": (dim, dim)}[kind]
    cls = {"scalar": ScalarField, "vector": VectorField, "matrix": MatrixField}[kind]
    return cls(np.zeros(comp + (2 * M + 1,) * dim), dim, real_valued, zero_mean)


def from_modes(dim, M, modes, kind="scalar", real_valued=True, zero_mean=True):
    """Build a field from ``{xi: coefficient}``.

    For real-valued fields the conjugate partner -xi is filled in
    automatically unless it is given explicitly.
    """
    comp = {"scalar": (), "vector": (dim,)}[kind]
    c = np.zeros(comp + (2 * M + 1,) * dim, dtype=complex)
    given = {tuple(int(k) for k in xi) for xi in modes}
    for xi, val in modes.items():
        xi = tuple(int(k) for k in xi)
        if len(xi) != dim or max(abs(k) for k in xi) > M:
            raise DimensionMismatch(f"mode {xi} outside the truncation box M={M}")
        c[(Ellipsis,) + tuple(k + M for k in xi)] += val
        neg = tuple(-k for k in xi)
        if real_valued and neg not in given:
            c[(Ellipsis,) + tuple(k + M for k in neg)] += np.conj(val)
    # explicit projection would halve unpaired entries; they are already paired
    cls = ScalarField if kind == "scalar" else VectorField
    return cls(c, dim, real_valued, zero_mean)


# -- norms and pairing ----------------------------------------------------
def _weights(dim, M, s):
    return (1.0 + _xi_sq(dim, M)) ** s


def sobolev_norm(g, s, seminorm=False):
    """Bessel-potential norm (sum rho^(2s) |g_hat|^2)^(1/2), summed over components.

    With ``seminorm=True`` the xi = 0 term is omitted.
    """
    w = _weights(g.dim, g.M, s)
    sq = np.abs(g.coeffs) ** 2
    sq = sq.reshape((-1,) + w.shape).sum(axis=0)
    if seminorm:
        sq = sq.copy()
        sq[origin_index(g.dim, g.M)] = 0.0
    return float(np.sqrt(np.sum(w * sq)))


def dual_pairing(g, f):
    """Bilinear pairing sum_xi g_hat(xi) f_hat(-xi), summed over components."""
    if g.dim != f.dim:
        raise DimensionMismatch("pairing fields of different dimension")
    if g.component_shape != f.component_shape:
        raise DimensionMismatch("pairing fields of different component shape")
    M = max(g.M, f.M)
    a = g.resized(M).coeffs
    b = _reflect(f.resized(M).coeffs, g.dim)
    val = complex(np.sum(a * b))
    if g.real_valued and f.real_valued:
        return val.real
    return val


def l2_inner(g, f):
    """Hermitian L2 product, sum g_hat conj(f_hat)."""
    M = max(g.M, f.M)
    return complex(np.sum(g.resized(M).coeffs * np.conj(f.resized(M).coeffs)))


# -- differential operators ----------------------------------------------
def gradient(g):
    """Spectral gradient.

    A scalar field maps to a vector field; a vector field v maps to the
    matrix field G with G[k, j] = d_j v_k.
    """
    xi = lattice(g.dim, g.M)
    c = g.coeffs
    comp = g.component_shape
    exp_c = c.reshape(comp + (1,) + c.shape[len(comp):])
    out = 1j * TWO_PI * exp_c * xi
    return g._new(out, zero_mean=True)


def divergence(v):
    """Divergence of a vector field (or row-wise divergence of a matrix field)."""
    if not v.component_shape or v.component_shape[-1] != v.dim:
        raise DimensionMismatch("divergence needs a vector or matrix field")
    xi = lattice(v.dim, v.M)
    out = 1j * TWO_PI * np.sum(v.coeffs * xi, axis=len(v.component_shape) - 1)
    return v._new(out, zero_mean=True)


def strain(u):
    """Symmetric gradient E_jb = (d_j u_b + d_b u_j) / 2 as a matrix field."""
    if u.component_shape != (u.dim,):
        raise DimensionMismatch("strain needs a vector field")
    G = gradient(u).coeffs  # G[b, j] = d_j u_b
    E = 0.5 * (G + np.swapaxes(G, 0, 1))
    return MatrixField(E, u.dim, real_valued=u.real_valued, zero_mean=True)


def leray_project(v):
    """Orthogonal projection onto mean-free divergence-free fields."""
    if v.component_shape != (v.dim,):
        raise DimensionMismatch("Leray projection needs a vector field")
    xi = lattice(v.dim, v.M)
    sq = _xi_sq(v.dim, v.M).copy()
    sq[origin_index(v.dim, v.M)] = 1.0
    c = v.coeffs.copy()
    c[(Ellipsis,) + origin_index(v.dim, v.M)] = 0.0
    dot = np.sum(xi * c, axis=0)
    out = c - xi * (dot / sq)
    return v._new(out, zero_mean=True)


def laplacian(g):
    return g._new(-(TWO_PI**2) * _xi_sq(g.dim, g.M) * g.coeffs, zero_mean=True)


def trace(E):
    if E.component_shape != (E.dim, E.dim):
        raise DimensionMismatch("trace needs a matrix field")
    return ScalarField(np.trace(E.coeffs, axis1=0, axis2=1), E.dim, E.real_valued, E.zero_mean)


# -- grid transforms ------------------------------------------------------
def _fold_to_grid(c, dim, M, N):
    """Place box coefficients on an N-point FFT grid, summing aliases."""
    comp = c.shape[: c.ndim - dim]
    full = np.zeros(comp + (N,) * dim, dtype=complex)
    idx = np.arange(-M, M + 1) % N
    if N >= 2 * M + 1:
        full[(Ellipsis,) + np.ix_(*([idx] * dim))] = c
    else:
        flat = full.reshape((-1,) + (N,) * dim)
        cf = c.reshape((-1,) + (2 * M + 1,) * dim)
        for k in range(flat.shape[0]):
            np.add.at(flat[k], np.ix_(*([idx] * dim)), cf[k])
    return full


def sample_on_grid(field, N):
    """Evaluate the Fourier series at the points k/N, k = 0..N-1 per axis.

    Sampling is exact for any N; coarse grids only matter for the inverse
    map :func:`field_from_grid`.  Real-valued fields return real arrays.
    """
    dim = field.dim
    full = _fold_to_grid(field.coeffs, dim, field.M, N)
    axes = tuple(range(full.ndim - dim, full.ndim))
    vals = scipy.fft.ifftn(full, axes=axes, norm="forward", workers=fft_workers())
    if field.real_valued:
        return vals.real
    return vals


def field_from_grid(values, dim, M, real_valued=None, zero_mean=False, kind=None):
    """Discrete Fourier analysis of equispaced samples, truncated to box ``M``.

    Raises :class:`AliasingError` when N < 2M + 1.
    """
    values = np.asarray(values)
    N = values.shape[-1]
    if N < 2 * M + 1:
        raise AliasingError(f"grid of {N} points cannot resolve truncation M={M} (need >= {2 * M + 1})")
    axes = tuple(range(values.ndim - dim, values.ndim))
    hat = scipy.fft.fftn(values, axes=axes, norm="forward", workers=fft_workers())
    idx = np.arange(-M, M + 1) % N
    c = hat[(Ellipsis,) + np.ix_(*([idx] * dim))]
    if real_valued is None:
        real_valued = np.isrealobj(values)
    if zero_mean:
        c = c.copy()
        c[(Ellipsis,) + origin_index(dim, M)] = 0.0
    cls = _class_for_rank(c.ndim - dim)
    return cls(c, dim, real_valued=real_valued, zero_mean=zero_mean)


def grid_points(dim, N):
    axis = np.arange(N) / N
    return np.stack(np.meshgrid(*([axis] * dim), indexing="ij"))


def product(g, h, M=None):
    """Exact pointwise product of two scalar fields.

    The result lives on the box of radius ``g.M + h.M`` (or is truncated to
    ``M`` when given); a grid of at least 2(g.M + h.M) + 1 points makes the
    transform exact.
    """
    if g.component_shape or h.component_shape:
        raise DimensionMismatch("product is defined for scalar fields")
    Mp = g.M + h.M
    N = scipy.fft.next_fast_len(2 * Mp + 1)
    real = g.real_valued and h.real_valued
    a = sample_on_grid(g, N)
    b = sample_on_grid(h, N)
    out = field_from_grid(a * b, g.dim, Mp, real_valued=real, zero_mean=False)
    return out if M is None else out.resized(M)


def lq_norm(field, q, N=None):
    """L_q norm of |v| (Euclidean over components) by trapezoidal quadrature.

    The default grid has at least 4M + 1 points per axis.  For even integer q
    the rule is exact; otherwise it is spectrally accurate for trigonometric
    integrands.
    """
    if N is None:
        N = scipy.fft.next_fast_len(max(4 * field.M + 1, 8))
    vals = sample_on_grid(field, N)
    ncomp = int(np.prod(field.component_shape)) if field.component_shape else 1
    vals = vals.reshape((ncomp,) + vals.shape[vals.ndim - field.dim :])
    mag = np.sqrt(np.sum(np.abs(vals) ** 2, axis=0))
    if np.isinf(q):
        return float(np.max(mag))
    return float(np.mean(mag**q) ** (1.0 / q))


# -- random test data -----------------------------------------------------
def random_field(seed, t, M, dim, kind="scalar", real_valued=True, zero_mean=True,
                 div_free=False, amplitude=1.0):
    """Random field with coefficients rho(xi)^(-t) times unit-modulus noise.

    ``seed`` may be an int or a :class:`numpy.random.Generator`.  Real-valued
    fields are Hermitian-symmetrized, zero-mean fields have their mean
    removed, and ``div_free`` applies the Leray projection.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    comp = {"scalar": (), "vector": (dim,)}[kind]
    shape = comp + (2 * M + 1,) * dim
    phase = rng.uniform(0.0, TWO_PI, size=shape)
    c = amplitude * np.exp(1j * phase) * _weights(dim, M, -0.5 * t)
    if zero_mean:
        c[(Ellipsis,) + origin_index(dim, M)] = 0.0
    cls = ScalarField if kind == "scalar" else VectorField
    out = cls(c, dim, real_valued=real_valued, zero_mean=zero_mean)
    if div_free:
        if kind != "vector":
            raise DimensionMismatch("div_free applies to vector fields")
        out = leray_project(out)
    return out


# -- spectral diagnostics -------------------------------------------------
def shell_spectrum(field, shells="dyadic", min_radius=1.0):
    """Shell averages of |g_hat| (Euclidean over components).

    Returns ``(radius, mean_abs)`` where ``radius`` is the mean rho over each
    shell.  Dyadic shells are 2^k <= |xi| < 2^(k+1); integer shells use
    k - 1/2 <= |xi| < k + 1/2.  Only shells lying entirely inside the box
    (outer radius <= M) and starting at ``min_radius`` or beyond are used.
    """
    dim, M = field.dim, field.M
    r = np.sqrt(_xi_sq(dim, M))
    mag = np.abs(field.coeffs) ** 2
    mag = np.sqrt(mag.reshape((-1,) + r.shape).sum(axis=0))
    if shells == "dyadic":
        edges = [2.0**k for k in range(int(np.floor(np.log2(max(M, 1)))) + 2)]
    else:
        edges = [k - 0.5 for k in range(1, M + 2)]
    radius, avg = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo < min_radius or hi > M + 1e-9:
            continue
        sel = (r >= lo) & (r < hi)
        if not np.any(sel):
            continue
        radius.append(float(np.mean(np.sqrt(1.0 + r[sel] ** 2))))
        avg.append(float(np.mean(mag[sel])))
    return np.array(radius), np.array(avg)


def decay_slope(field, shells="dyadic", min_radius=2.0):
    """Least-squares slope of log(shell-average |g_hat|) against log(rho).

    The innermost shell is skipped by default: there rho and |xi| differ by
    up to a factor sqrt(2), which biases the asymptotic exponent.
    """
    radius, avg = shell_spectrum(field, shells, min_radius)
    keep = avg > 0
    if np.count_nonzero(keep) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(radius[keep]), np.log(avg[keep]), 1)
    return float(slope)
