"""Periodic grids and spectral fields on the torus [-pi, pi).

Fourier coefficients follow the convention

    c(k) = (1 / 2 pi) * integral_T f(x) exp(-i k x) dx,   f(x) = sum_k c(k) exp(i k x),

so ``c(0)`` is the mean of ``f``. Coefficients are stored for ``k = 0 .. n/2``
(real fields only); ``c(-k) = conj(c(k))``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError

__all__ = [
    "PeriodicGrid",
    "SpectralField",
    "analyze",
    "synthesize",
    "multiply_dealiased",
    "derivative",
    "decay_rate",
    "DecayReport",
    "write_profile_csv",
    "read_profile_csv",
    "write_coeffs_csv",
]


@dataclass(frozen=True)
class PeriodicGrid:
    """Equispaced grid ``x_j = -pi + 2 pi j / n`` on the torus."""

    n: int

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise DomainError(f"grid size must be even and >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * np.pi / self.n

    @cached_property
    def points(self) -> np.ndarray:
        x = -np.pi + self.h * np.arange(self.n)
        x.setflags(write=False)
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        k = np.arange(self.n // 2 + 1, dtype=float)
        k.setflags(write=False)
        return k

    def index_of(self, x: float) -> int:
        """Index of the grid point nearest to ``x`` (mod 2 pi)."""
        return int(np.rint((x + np.pi) / self.h)) % self.n


def _phase(n_coef):
    # (-1)^k accounts for the grid starting at -pi instead of 0
    return np.where(np.arange(n_coef) % 2 == 0, 1.0, -1.0)


def analyze(values, n: int | None = None) -> np.ndarray:
    """Fourier coefficients ``c(0..n/2)`` of grid samples."""
    values = np.asarray(values, dtype=float)
    if n is not None and values.shape[-1] != n:
        raise DomainError(f"expected {n} samples, got {values.shape[-1]}")
    m = values.shape[-1]
    c = np.fft.rfft(values, axis=-1) / m
    return c * _phase(c.shape[-1])


def synthesize(coeffs, n: int) -> np.ndarray:
    """Grid samples on an ``n``-point grid from coefficients ``c(0..)``.

    Coefficients beyond ``n/2`` are dropped, missing ones are zero.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    nc = n // 2 + 1
    c = np.zeros(coeffs.shape[:-1] + (nc,), dtype=complex)
    k = min(nc, coeffs.shape[-1])
    c[..., :k] = coeffs[..., :k]
    return np.fft.irfft(c * _phase(nc) * n, n=n, axis=-1)


class SpectralField:
    """A real 2 pi-periodic function stored as grid values and coefficients.

    Instances are immutable: the value array is read-only and the
    coefficient array is computed once on first access.
    """

    def __init__(self, grid: PeriodicGrid, values):
        values = np.array(values, dtype=float)
        if values.shape != (grid.n,):
            raise DomainError(f"expected {grid.n} samples, got shape {values.shape}")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def from_function(cls, grid: PeriodicGrid, func) -> "SpectralField":
        return cls(grid, func(np.asarray(grid.points)))

    @classmethod
    def from_coeffs(cls, grid: PeriodicGrid, coeffs) -> "SpectralField":
        f = cls(grid, synthesize(coeffs, grid.n))
        return f

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "SpectralField":
        return cls(grid, np.zeros(grid.n))

    @cached_property
    def coeffs(self) -> np.ndarray:
        c = analyze(self.values)
        c.setflags(write=False)
        return c

    def coef(self, k: int) -> complex:
        """Coefficient ``c(k)`` for signed ``k`` with ``|k| <= n/2``."""
        if abs(k) > self.grid.n // 2:
            raise DomainError(f"|k| = {abs(k)} exceeds n/2 = {self.grid.n // 2}")
        c = self.coeffs[abs(k)]
        return complex(c if k >= 0 else np.conj(c))

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def mean(self) -> float:
        return float(self.coeffs[0].real)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    # -- arithmetic ---------------------------------------------------------
    def _check(self, other):
        if other.grid != self.grid:
            raise DomainError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.values + other.values)
        return SpectralField(self.grid, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.values - other.values)
        return SpectralField(self.grid, self.values - float(other))

    def __neg__(self):
        return SpectralField(self.grid, -self.values)

    def __mul__(self, alpha):
        if isinstance(alpha, SpectralField):
            return multiply_dealiased(self, alpha)
        return SpectralField(self.grid, float(alpha) * self.values)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SpectralField(n={self.n}, max|f|={self.max_abs():.3g})"

    # -- spectral operations ------------------------------------------------
    def _band_coeffs(self):
        """Coefficients with the Nyquist mode removed."""
        c = np.array(self.coeffs)
        c[-1] = 0.0
        return c

    def evaluate(self, points) -> np.ndarray:
        """Trigonometric interpolant evaluated at arbitrary points."""
        pts = np.asarray(points, dtype=float)
        c = self.coeffs
        nyq = self.n // 2
        k = np.arange(1, nyq)
        flat = pts.ravel()
        out = np.full(flat.shape, c[0].real)
        chunk = max(1, 2**22 // max(1, nyq))
        for s in range(0, flat.size, chunk):
            e = np.exp(1j * np.outer(flat[s:s + chunk], k))
            out[s:s + chunk] += 2.0 * (e @ c[1:nyq]).real
        out += c[nyq].real * np.cos(nyq * flat)
        return out.reshape(pts.shape)

    def shift(self, tau: float) -> "SpectralField":
        """The translate ``x -> f(x - tau)`` (Nyquist mode dropped)."""
        c = self._band_coeffs() * np.exp(-1j * self.grid.wavenumbers * tau)
        return SpectralField.from_coeffs(self.grid, c)

    def reflect(self, lam: float) -> "SpectralField":
        """The reflection ``x -> f(2 lam - x)`` (Nyquist mode dropped)."""
        c = np.conj(self._band_coeffs()) * np.exp(-2j * self.grid.wavenumbers * lam)
        return SpectralField.from_coeffs(self.grid, c)

    def resample(self, n: int) -> "SpectralField":
        """Spectral interpolation onto an ``n``-point grid."""
        grid = PeriodicGrid(n)
        c = self._band_coeffs()
        if n < self.n:
            c = c[: n // 2 + 1].copy()
            c[-1] = 0.0
        return SpectralField.from_coeffs(grid, c)

    def derivative(self) -> "SpectralField":
        return derivative(self)


def multiply_dealiased(f: SpectralField, g: SpectralField) -> SpectralField:
    """Product ``f g`` computed on a 3/2-padded grid.

    Nyquist modes of the inputs and of the result are set to zero; all
    retained modes ``|k| < n/2`` are free of aliasing.
    """
    f._check(g)
    return SpectralField.from_coeffs(f.grid, _dealiased_product_coeffs(f._band_coeffs(), g._band_coeffs(), f.n))


def _dealiased_product_coeffs(cf, cg, n):
    m = 3 * n // 2
    if m % 2:
        m += 1
    pf = synthesize(cf, m)
    pg = synthesize(cg, m)
    c = analyze(pf * pg)[..., : n // 2 + 1].copy()
    c[..., -1] = 0.0
    return c


def derivative(f: SpectralField) -> SpectralField:
    """Spectral derivative; the Nyquist mode is zeroed."""
    c = f._band_coeffs() * (1j * f.grid.wavenumbers)
    return SpectralField.from_coeffs(f.grid, c)


@dataclass(frozen=True)
class DecayReport:
    slope: float | None
    resolved: bool
    window: tuple

    def to_dict(self):
        return {"slope": self.slope, "resolved_to_machine_precision": self.resolved,
                "window": list(self.window)}


def decay_rate(f: SpectralField, floor: float = 1e-14) -> DecayReport:
    """Algebraic decay exponent of ``|c(k)|`` fitted over ``k in [n/8, n/4]``.

    Coefficients below ``floor`` are ignored. If fewer than three remain,
    the field is reported as resolved to machine precision.
    """
    n = f.n
    k = np.arange(n // 8, n // 4 + 1)
    a = np.abs(f.coeffs[k])
    keep = a > floor
    if keep.sum() < 3:
        return DecayReport(None, True, (int(k[0]), int(k[-1])))
    slope = np.polyfit(np.log(k[keep]), np.log(a[keep]), 1)[0]
    return DecayReport(float(slope), False, (int(k[0]), int(k[-1])))


# -- CSV export ---------------------------------------------------------------

def write_profile_csv(path, f: SpectralField):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for x, v in zip(f.grid.points, f.values):
            w.writerow([repr(float(x)), repr(float(v))])


def read_profile_csv(path) -> SpectralField:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "value" not in rows[0]:
        raise DomainError(f"{path}: expected header 'x,value'")
    values = np.array([float(r["value"]) for r in rows])
    return SpectralField(PeriodicGrid(len(values)), values)


def write_coeffs_csv(path, f: SpectralField):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "re", "im"])
        for k, c in enumerate(f.coeffs):
            w.writerow([k, repr(float(c.real)), repr(float(c.imag))])
