"""Periodic horizontal torus times a bounded density interval.

Fields are plain ``numpy`` arrays. A scalar field has shape ``grid.shape``,
that is the horizontal node counts followed by ``nrho + 1`` density nodes.
Vector fields carry their ``d`` components on a leading axis. All operators
act on the trailing ``d + 1`` axes, so any number of leading batch axes is
allowed.

Horizontal calculus is pseudo-spectral (real FFTs); vertical calculus uses
second-order finite differences and composite trapezoid quadrature on a
uniform density grid.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import FieldError

__all__ = ["Grid"]


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Discrete domain :math:`\\mathbb{T}^d \\times (\\rho_0, \\rho_1)`.

    Parameters
    ----------
    nx : int
        Horizontal nodes along x (power of two, at least 4).
    nrho : int
        Number of density intervals (at least 4).
    d : int
        Horizontal dimension, 1 or 2.
    ny : int
        Horizontal nodes along y, used only when ``d == 2``.
    lx, ly : float
        Horizontal periods.
    rho0, rho1 : float
        Surface and bottom densities, ``0 < rho0 < rho1``.
    dealias_fraction : float
        Fraction of the Nyquist wavenumber retained by :meth:`dealias`.
    """

    nx: int
    nrho: int
    d: int = 1
    ny: int = 1
    lx: float = 2 * np.pi
    ly: float = 2 * np.pi
    rho0: float = 1.0
    rho1: float = 2.0
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("d must be 1 or 2")
        counts = (self.nx, self.ny) if self.d == 2 else (self.nx,)
        for n in counts:
            if n < 4 or not _is_pow2(n):
                raise ValueError("horizontal node counts must be powers of two >= 4")
        if self.nrho < 4:
            raise ValueError("nrho must be >= 4")
        if not 0 < self.rho0 < self.rho1:
            raise ValueError("densities must satisfy 0 < rho0 < rho1")
        if min(self.lengths) <= 0:
            raise ValueError("horizontal periods must be positive")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    # ------------------------------------------------------------------ layout
    @property
    def counts(self):
        return (self.nx, self.ny) if self.d == 2 else (self.nx,)

    @property
    def lengths(self):
        return (self.lx, self.ly) if self.d == 2 else (self.lx,)

    @property
    def hshape(self):
        return self.counts

    @property
    def shape(self):
        return self.counts + (self.nrho + 1,)

    @property
    def haxes(self):
        return tuple(range(-(self.d + 1), -1))

    @property
    def size(self):
        return int(np.prod(self.shape))

    @cached_property
    def rho(self):
        """Density nodes, shape ``(nrho + 1,)``."""
        return self.rho0 + self.drho * np.arange(self.nrho + 1)

    @property
    def drho(self):
        return (self.rho1 - self.rho0) / self.nrho

    @cached_property
    def weights(self):
        """Composite trapezoid weights over the density nodes."""
        w = np.full(self.nrho + 1, self.drho)
        w[0] = w[-1] = 0.5 * self.drho
        return w

    @cached_property
    def m_weights(self):
        """Density weights making the discrete Montgomery operator self-adjoint.

        Equal to :attr:`weights` except at the surface node, which is scaled
        by ``1 + drho / (2 rho0)``. With these weights the quadratic form of
        :meth:`isoflow.montgomery.apply_M` is exactly symmetric.
        """
        w = self.weights.copy()
        w[0] *= 1.0 + 0.5 * self.drho / self.rho0
        return w

    @property
    def cell_area(self):
        """Horizontal area represented by one node."""
        return float(np.prod([L / n for L, n in zip(self.lengths, self.counts)]))

    @property
    def area(self):
        return float(np.prod(self.lengths))

    @property
    def volume(self):
        return self.area * (self.rho1 - self.rho0)

    @cached_property
    def x(self):
        """Horizontal coordinates, each broadcastable against ``shape``."""
        out = []
        for ax, (L, n) in enumerate(zip(self.lengths, self.counts)):
            s = [1] * (self.d + 1)
            s[ax] = n
            out.append((L / n * np.arange(n)).reshape(s))
        return tuple(out)

    @cached_property
    def rho_b(self):
        """Density nodes shaped to broadcast against a field."""
        return self.rho.reshape((1,) * self.d + (-1,))

    # ------------------------------------------------------------ wavenumbers
    @cached_property
    def _index(self):
        # integer mode numbers along each axis, shaped for the half spectrum
        idx = []
        for ax, n in enumerate(self.counts):
            last = ax == self.d - 1
            m = np.arange(n // 2 + 1) if last else np.fft.fftfreq(n, 1.0 / n)
            s = [1] * (self.d + 1)
            s[ax] = m.size
            idx.append(m.reshape(s))
        return tuple(idx)

    @cached_property
    def k(self):
        """Wavenumber arrays per axis, Nyquist entries kept."""
        return tuple(2 * np.pi / L * m for L, m in zip(self.lengths, self._index))

    @cached_property
    def k_deriv(self):
        """Wavenumbers used for odd derivatives (Nyquist zeroed)."""
        out = []
        for kk, m, n in zip(self.k, self._index, self.counts):
            out.append(np.where(np.abs(m) == n // 2, 0.0, kk))
        return tuple(out)

    @cached_property
    def ksq(self):
        return sum(kk**2 for kk in self.k)

    @cached_property
    def dealias_mask(self):
        mask = True
        for m, n in zip(self._index, self.counts):
            mask = mask & (np.abs(m) <= np.floor(self.dealias_fraction * n / 2))
        return mask

    @property
    def k_max(self):
        """Largest horizontal wavenumber magnitude retained after dealiasing."""
        return float(
            np.sqrt(
                sum(
                    (2 * np.pi / L * np.floor(self.dealias_fraction * n / 2)) ** 2
                    for L, n in zip(self.lengths, self.counts)
                )
            )
        )

    # ------------------------------------------------------------- transforms
    def check(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape[f.ndim - self.d - 1:] != self.shape:
            raise FieldError(f"field shape {f.shape} does not end with {self.shape}")
        if not np.all(np.isfinite(f)):
            raise FieldError("field contains non-finite values")
        return f

    def to_spectral(self, f):
        """Half-spectrum Fourier coefficients over the horizontal axes."""
        return np.fft.rfftn(self.check(f), axes=self.haxes)

    def to_physical(self, F):
        """Inverse of :meth:`to_spectral`."""
        return np.fft.irfftn(F, s=self.counts, axes=self.haxes)

    def apply_multiplier(self, f, mult):
        """Apply a Fourier multiplier over the horizontal axes."""
        return self._multiply(self.check(f), mult)

    def _multiply(self, f, mult):
        return np.fft.irfftn(mult * np.fft.rfftn(f, axes=self.haxes), s=self.counts, axes=self.haxes)

    # ------------------------------------------------------ horizontal calculus
    def ddx(self, f, axis=0):
        """Spectral derivative along horizontal ``axis``."""
        return self.apply_multiplier(f, 1j * self.k_deriv[axis])

    def grad(self, f):
        """Horizontal gradient, components stacked on a new leading axis."""
        F = np.fft.rfftn(self.check(f), axes=self.haxes)
        return np.stack(
            [np.fft.irfftn(1j * kk * F, s=self.counts, axes=self.haxes) for kk in self.k_deriv]
        )

    def div(self, v):
        """Horizontal divergence of a vector field with components on axis 0."""
        v = self.check(v)
        F = sum(1j * kk * np.fft.rfftn(v[i], axes=self.haxes) for i, kk in enumerate(self.k_deriv))
        return np.fft.irfftn(F, s=self.counts, axes=self.haxes)

    def laplacian(self, f):
        return self.apply_multiplier(f, -self.ksq)

    def lambda_s(self, f, s):
        """Apply the multiplier ``(1 + |xi|^2)^(s/2)``."""
        if s == 0:
            return np.array(f, dtype=float)
        return self.apply_multiplier(f, (1.0 + self.ksq) ** (0.5 * s))

    def heat_propagate(self, f, alpha, dt):
        """Exact heat semigroup ``exp(alpha dt Laplacian)``."""
        if alpha < 0 or dt < 0:
            raise ValueError("alpha and dt must be nonnegative")
        if alpha == 0 or dt == 0:
            return np.array(f, dtype=float)
        return self.apply_multiplier(f, np.exp(-alpha * dt * self.ksq))

    def dealias(self, f):
        """Zero coefficients above the dealiasing cutoff."""
        return self.apply_multiplier(f, self.dealias_mask)

    def product(self, *factors):
        """Pointwise product, dealiased after every multiplication."""
        out = factors[0]
        for g in factors[1:]:
            out = self.dealias(out * g)
        return out

    def hmean(self, f):
        """Horizontal mean at each density node."""
        return np.mean(f, axis=self.haxes)

    # -------------------------------------------------------- vertical calculus
    def ddrho(self, f):
        """Second-order differences, one-sided at both ends."""
        return np.gradient(f, self.drho, axis=-1, edge_order=2)

    def ddrho4(self, f):
        """Fourth-order differences: five-point centered, one-sided near the ends."""
        f = np.asarray(f, dtype=float)
        out = np.empty_like(f)
        c = 1.0 / (12.0 * self.drho)
        out[..., 2:-2] = c * (f[..., :-4] - 8 * f[..., 1:-3] + 8 * f[..., 3:-1] - f[..., 4:])
        s0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0])
        s1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0])
        out[..., 0] = c * (f[..., :5] @ s0)
        out[..., 1] = c * (f[..., :5] @ s1)
        out[..., -1] = -c * (f[..., -1:-6:-1] @ s0)
        out[..., -2] = -c * (f[..., -1:-6:-1] @ s1)
        return out

    def integrate_rho_lower(self, f):
        """Trapezoid integral from the surface density to each node."""
        return cumulative_trapezoid(f, dx=self.drho, axis=-1, initial=0.0)

    def integrate_rho_upper(self, f):
        """Trapezoid integral from each node to the bottom density."""
        g = cumulative_trapezoid(np.flip(f, -1), dx=self.drho, axis=-1, initial=0.0)
        return np.flip(g, -1)

    def integrate_rho(self, f):
        """Full trapezoid integral over density; drops the last axis."""
        return np.asarray(f) @ self.weights

    # ----------------------------------------------------------- inner products
    def integral(self, f):
        """Domain integral by rectangle rule in x and trapezoid in density."""
        return float(np.sum(self.integrate_rho(f)) * self.cell_area)

    def l2_inner(self, f, g):
        return self.integral(np.asarray(f) * np.asarray(g))

    def l2_norm(self, f):
        """Discrete L2 norm; vector fields sum over their components."""
        f = np.asarray(f)
        if f.ndim == self.d + 1:
            return float(np.sqrt(self.integral(f * f)))
        return float(np.sqrt(sum(self.integral(c * c) for c in f)))

    def surface_norm(self, f, s=0.0):
        """Horizontal H^s norm of the trace of ``f`` at the surface density."""
        g = np.asarray(f, dtype=float)[..., :1]
        if s != 0:
            g = self._multiply(g, (1.0 + self.ksq) ** (0.5 * s))
        return float(np.sqrt(np.sum(g * g) * self.cell_area))

    # ------------------------------------------------------------ constructors
    def zeros(self, components=None):
        shape = self.shape if components is None else (components,) + self.shape
        return np.zeros(shape)
