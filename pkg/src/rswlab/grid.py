"""Periodic 1D grid with Fourier spectral calculus.

Everything here works on numpy arrays whose *last* axis is the spatial
axis, so a ``(3, n)`` state and a ``(M, 3, n)`` trajectory go through the
same code paths.  The :class:`Field` / :class:`Spectrum` wrappers are thin
and exist for the public, grid-checked API.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridMismatch

__all__ = [
    "Grid",
    "Field",
    "Spectrum",
    "to_spectrum",
    "from_spectrum",
    "derivative",
    "heat_propagate",
    "sobolev_norm",
    "n_norm",
    "h2_norm",
    "dealias",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, length)`` with ``n`` samples."""

    n: int
    length: float = 2 * np.pi

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError(f"grid size must be even and >= 8, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"grid length must be positive, got {self.length}")

    @cached_property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @cached_property
    def k(self) -> np.ndarray:
        """Wavenumbers in ``np.fft.fft`` order; the Nyquist entry is +n/2."""
        j = np.fft.fftfreq(self.n, d=1.0 / self.n)
        j[self.n // 2] = self.n // 2
        return 2 * np.pi * j / self.length

    @cached_property
    def rk(self) -> np.ndarray:
        """Wavenumbers of the real transform (0 .. Nyquist)."""
        return 2 * np.pi * np.arange(self.n // 2 + 1) / self.length

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask for the real transform: keep |j| <= n/3."""
        j = np.arange(self.n // 2 + 1)
        return (3 * j <= self.n).astype(float)

    # -- transforms on raw arrays ---------------------------------------
    def rfft(self, a):
        return np.fft.rfft(a, axis=-1)

    def irfft(self, ah):
        return np.fft.irfft(ah, n=self.n, axis=-1)

    def multiplier(self, order: int) -> np.ndarray:
        m = (1j * self.rk) ** order
        if order % 2:
            m[-1] = 0.0
        return m

    def diff(self, a, order: int = 1):
        if order == 0:
            return np.array(a, dtype=float, copy=True)
        return self.irfft(self.rfft(a) * self.multiplier(order))

    def heat_factor(self, eps: float, t) -> np.ndarray:
        """exp(-eps t k^2); ``t`` may be an array (broadcast on leading axes)."""
        t = np.asarray(t, dtype=float)
        return np.exp(-eps * t[..., None] * self.rk**2)

    def heat(self, a, eps: float, t: float):
        if eps == 0 or t == 0:
            return np.array(a, dtype=float, copy=True)
        return self.irfft(self.rfft(a) * self.heat_factor(eps, t))

    def project(self, a):
        """Zero the top third of the spectrum."""
        return self.irfft(self.rfft(a) * self.dealias_mask)

    def product(self, a, b):
        """Dealiased product P(Pa * Pb).  Symmetric under <., .> in either slot."""
        return self.project(self.project(a) * self.project(b))

    def inner(self, a, b) -> float:
        """Discrete L2 inner product summed over every axis."""
        return float(np.sum(np.asarray(a) * np.asarray(b)) * self.dx)

    def norm_sq(self, a, m: int = 0) -> float:
        """Squared H^m norm with spectral weights 1 + k^2 + ... + k^2m.

        Summed over every leading axis (component norms add up).
        """
        ah = self.rfft(a)
        w = sum(self.rk ** (2 * j) for j in range(m + 1))
        # real-transform bookkeeping: interior modes appear twice in the full spectrum
        c = np.full(self.n // 2 + 1, 2.0)
        c[0] = 1.0
        c[-1] = 1.0
        return float(np.sum(c * w * np.abs(ah) ** 2) * self.length / self.n**2)

    def seminorm_sq(self, a, order: int) -> float:
        """||d^order a / dx^order||^2 computed spectrally (Nyquist dropped for odd order)."""
        ah = self.rfft(a) * self.multiplier(order)
        c = np.full(self.n // 2 + 1, 2.0)
        c[0] = 1.0
        c[-1] = 1.0
        return float(np.sum(c * np.abs(ah) ** 2) * self.length / self.n**2)


def _same_grid(a: Grid, b: Grid):
    if a != b:
        raise GridMismatch(f"{a} != {b}")


@dataclass(frozen=True)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        return cls(grid, fn(grid.x))


@dataclass(frozen=True)
class Spectrum:
    """Full complex spectrum in ``np.fft`` order, normalized so mode 0 is the mean."""

    grid: Grid
    coeffs: np.ndarray

    def asymmetry(self) -> float:
        c = self.coeffs
        mirrored = np.conj(np.roll(c[::-1], 1))
        scale = max(np.max(np.abs(c)), 1e-300)
        return float(np.max(np.abs(c - mirrored)) / scale)


def to_spectrum(f: Field) -> Spectrum:
    return Spectrum(f.grid, np.fft.fft(f.values) / f.grid.n)


def from_spectrum(s: Spectrum) -> Field:
    return Field(s.grid, np.real(np.fft.ifft(s.coeffs * s.grid.n)))


def derivative(f: Field, order: int = 1) -> Field:
    if order not in (1, 2, 3):
        raise ValueError(f"derivative order must be 1, 2 or 3, got {order}")
    return Field(f.grid, f.grid.diff(f.values, order))


def heat_propagate(f: Field, eps: float, t: float) -> Field:
    """Exact solution operator of W_t = eps W_xx applied for a duration ``t``."""
    if eps < 0 or t < 0:
        raise ValueError(f"viscosity and duration must be >= 0 (eps={eps}, t={t})")
    return Field(f.grid, f.grid.heat(f.values, eps, t))


def sobolev_norm(f: Field, m: int = 0) -> float:
    if m not in (0, 1, 2):
        raise ValueError(f"Sobolev order must be 0, 1 or 2, got {m}")
    return float(np.sqrt(f.grid.norm_sq(f.values, m)))


def n_norm(V, E) -> float:
    """sqrt(||V - E||^2 + ||V_xx||^2), the H2-equivalent norm without the V_x term.

    ``V`` and ``E`` are any objects with ``grid`` and ``data`` attributes
    (normally :class:`rswlab.model.State3`).
    """
    _same_grid(V.grid, E.grid)
    g = V.grid
    w = V.data - E.data
    return float(np.sqrt(g.norm_sq(w, 0) + g.seminorm_sq(V.data, 2)))


def h2_norm(V, E) -> float:
    """Full H2 norm of V - E (includes the first-derivative term)."""
    _same_grid(V.grid, E.grid)
    return float(np.sqrt(V.grid.norm_sq(V.data - E.data, 2)))


def dealias(s: Spectrum) -> Spectrum:
    j = np.abs(s.grid.k) * s.grid.length / (2 * np.pi)
    keep = 3 * np.rint(j) <= s.grid.n
    return Spectrum(s.grid, np.where(keep, s.coeffs, 0.0))
