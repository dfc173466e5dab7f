"""Convolution kernels ``K(x) = sum_k m(k) cos(k x)`` and the operator L.

Kernel series are summed on a periodic grid by folding the truncated
coefficient sequence modulo ``n`` and applying one FFT, which reproduces the
partial sum ``K_M`` exactly at the grid points. The remaining tail
``sum_{k > M}`` is approximated by repeated summation by parts,

    sum_{k >= N} a_k z^k = z^N / (1 - z) * sum_{j < p} (z / (1 - z))^j Delta^j a_N + ...,

which converges geometrically in ``1 / (N |x|)`` away from ``x = 0``.

Convolutions follow ``(K * f)(x) = integral_T K(x - y) f(y) dy``. With the
coefficient convention of :mod:`nwl.spectral` this equals ``2 pi (L f)(x)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .spectral import PeriodicGrid, SpectralField
from .symbols import MeasureAtoms, Symbol, SymbolKind, from_atoms

__all__ = [
    "KernelTable",
    "build_kernel",
    "kernel_derivative",
    "kernel_values",
    "default_truncation",
    "theta3",
    "kernel_from_atoms",
    "MonotoneVerdict",
    "check_monotone_half_period",
    "OriginReport",
    "check_origin_behaviour",
    "apply_L",
    "symbol_on_grid",
    "quadrature_convolve",
    "convolve_at",
    "gp_values",
    "gp_positivity",
]

TAIL_TERMS = 4
ABEL_Q = 1.0 - 1e-6
_CHUNK = 1 << 20


def default_truncation(n: int) -> int:
    return max(100_000, 100 * n)


def _coefficients(s: Symbol, k0: int, k1: int, weight: int = 0) -> np.ndarray:
    k = np.arange(k0, k1, dtype=float)
    a = np.asarray(s.func(k), dtype=float)
    if weight:
        a = a * k**weight
    return a


def _degenerate(s: Symbol) -> bool:
    if s.kind is not SymbolKind.ATOMS:
        return False
    return bool(np.isfinite(s.order) and s.order >= 0)


def _tail(s: Symbol, x, M: int, weight: int, p: int = TAIL_TERMS):
    """Tail ``sum_{k > M} k^weight m(k) z^k`` at ``z = exp(i x)``, plus last-term size."""
    N = M + 1
    a = _coefficients(s, N, N + p, weight)
    d = [a[0]]
    row = a
    for _ in range(1, p):
        row = np.diff(row)
        d.append(row[0])
    z = np.exp(1j * np.asarray(x, dtype=float))
    q = z / (1.0 - z)
    lead = z**N / (1.0 - z)
    total = np.zeros_like(z)
    term = lead
    for j in range(p):
        total = total + term * d[j]
        last = np.abs(term * d[j])
        term = term * q
    return total, last


@dataclass(frozen=True)
class KernelTable:
    """Samples of a kernel (or its derivative) on a periodic grid.

    ``values[singular_index]`` is the sample at ``x = 0``; it is the truncated
    sum only and must not be used as a point value of ``K`` when the symbol
    is not summable.
    """

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)
    truncation: int
    symbol: Symbol
    includes_zero_mode: bool
    method: str = "corrected"
    tail_estimate: float = 0.0
    degenerate: bool = False
    derivative: int = 0

    @property
    def singular_index(self) -> int:
        return self.grid.n // 2

    @property
    def zero_mode(self) -> float:
        """The constant ``c_h``: ``m(0)`` for inhomogeneous symbols, else 0."""
        if not self.includes_zero_mode or self.derivative:
            return 0.0
        return float(self.symbol.func(np.array([0.0]))[0])

    def at_offset(self, d):
        """Kernel value at ``x = d * h`` for integer offsets ``d`` (vectorised)."""
        return self.values[(np.asarray(d) + self.grid.n // 2) % self.grid.n]

    def mirror_defect(self) -> float:
        n = self.grid.n
        d = np.arange(1, n // 2)
        kp, km = self.at_offset(d), self.at_offset(-d)
        if self.derivative % 2:
            return float(np.max(np.abs(kp + km)))
        return float(np.max(np.abs(kp - km)))

    def to_dict(self):
        return {
            "symbol": self.symbol.to_config() or self.symbol.label,
            "n": self.grid.n,
            "truncation": self.truncation,
            "method": self.method,
            "tail_estimate": self.tail_estimate,
            "includes_zero_mode": self.includes_zero_mode,
            "degenerate": self.degenerate,
        }


def _fold_series(s, n, M, weight, abel_q=None):
    """``sum_{k=1}^{M} (-1)^k w_k a_k exp(2 pi i j k / n)`` for j = 0..n-1."""
    folded = np.zeros(n, dtype=float)
    for k0 in range(1, M + 1, _CHUNK):
        k1 = min(M + 1, k0 + _CHUNK)
        a = _coefficients(s, k0, k1, weight)
        k = np.arange(k0, k1)
        if abel_q is not None:
            a = a * np.power(abel_q, k.astype(float))
        a = np.where(k % 2 == 0, a, -a)
        folded += np.bincount(k % n, weights=a, minlength=n)
    return np.fft.ifft(folded) * n


def build_kernel(s: Symbol, grid: PeriodicGrid, M: int | None = None,
                 method: str = "corrected", derivative: int = 0) -> KernelTable:
    """Sample ``K_M(x) = c_h + 2 sum_{k=1}^M m(k) cos(k x)`` on ``grid``.

    Parameters
    ----------
    method : {"corrected", "partial", "abel"}
        ``partial`` is the plain truncated sum. ``corrected`` adds the
        summation-by-parts tail estimate at every ``x != 0``. ``abel`` damps
        coefficients by ``q^k`` with ``q = 1 - 1e-6`` and raises ``M`` until
        ``q^M < 1e-16``.
    derivative : {0, 1}
        With 1, the table holds ``K'(x) = -2 sum k m(k) sin(k x)``.
    """
    n = grid.n
    M = default_truncation(n) if M is None else int(M)
    if M < n:
        raise DomainError(f"truncation M = {M} must be at least n = {n}")
    if derivative not in (0, 1):
        raise DomainError("only K and K' are supported")
    if np.isfinite(s.order) and s.order >= -0.1 and not _degenerate(s) and method == "partial":
        warnings.warn(f"{s.label}: order {s.order} >= -0.1, partial sums converge slowly; "
                      "use method='corrected' or 'abel'", RuntimeWarning, stacklevel=2)
    abel_q = None
    if method == "abel":
        abel_q = ABEL_Q
        M = max(M, int(math.ceil(math.log(1e-16) / math.log(ABEL_Q))))
    elif method not in ("corrected", "partial"):
        raise DomainError(f"unknown summation method {method!r}")

    S = _fold_series(s, n, M, derivative, abel_q)
    inhom = not s.homogeneous
    if derivative:
        values = -2.0 * S.imag
    else:
        c_h = float(s.func(np.array([0.0]))[0]) if inhom else 0.0
        values = c_h + 2.0 * S.real

    tail_est = 0.0
    x = np.asarray(grid.points)
    if method == "corrected":
        nz = np.abs(np.sin(x / 2.0)) > 1e-300
        nz[n // 2] = False
        T, last = _tail(s, x[nz], M, derivative)
        values[nz] += -2.0 * T.imag if derivative else 2.0 * T.real
        tail_est = float(2.0 * np.max(last)) if last.size else 0.0
    if derivative == 0 and np.isfinite(s.order) and s.order < -1:
        # absolute bound 2 sum_{k>M} |m(k)| <= 2 C M^(r+1) / (|r| - 1)
        mM = abs(float(s.func(np.array([float(M)]))[0]))
        bound = 2.0 * mM * M / (abs(s.order) - 1.0)
        tail_est = bound if method == "partial" else min(bound, tail_est) if tail_est else bound
    values.setflags(write=False)
    return KernelTable(grid, values, M, s, inhom, method, tail_est, _degenerate(s), derivative)


def kernel_derivative(s: Symbol, grid: PeriodicGrid, M: int | None = None) -> KernelTable:
    """Table of ``K'`` (see :func:`build_kernel`)."""
    return build_kernel(s, grid, M, derivative=1)


def kernel_values(s: Symbol, x, M: int = 100_000, method: str = "corrected") -> np.ndarray:
    """``K_M`` at arbitrary points by direct summation (few points only)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    c_h = 0.0 if s.homogeneous else float(s.func(np.array([0.0]))[0])
    out = np.full(x.shape, c_h)
    step = max(1, _CHUNK // max(1, x.size))
    for k0 in range(1, M + 1, step):
        k = np.arange(k0, min(M + 1, k0 + step), dtype=float)
        out += 2.0 * (np.cos(np.outer(x, k)) @ s.func(k))
    if method == "corrected":
        nz = np.abs(np.sin(x / 2.0)) > 0
        T, _ = _tail(s, x[nz], M, 0)
        out[nz] += 2.0 * T.real
    elif method != "partial":
        raise DomainError(f"unknown summation method {method!r}")
    return out


# -- theta representation ------------------------------------------------------------

def theta3(z, u: float):
    """Third theta function ``sum_k u^(k^2) exp(2 i z k) = 1 + 2 sum_k u^(k^2) cos(2 z k)``.

    The series is cut once ``u^(k^2) < 1e-16``.
    """
    if not 0.0 <= u < 1.0:
        raise DomainError(f"theta3 needs 0 <= u < 1, got {u}")
    z = np.asarray(z, dtype=float)
    if u == 0.0:
        return np.ones_like(z) if z.ndim else 1.0
    kmax = max(1, int(math.ceil(math.sqrt(math.log(1e-16) / math.log(u)))))
    k = np.arange(1, kmax + 1, dtype=float)
    out = 1.0 + 2.0 * (np.cos(2.0 * np.multiply.outer(z, k)) @ u ** (k * k))
    return float(out) if out.ndim == 0 else out


def kernel_from_atoms(a: MeasureAtoms, grid: PeriodicGrid) -> KernelTable:
    """``K(x) = sum_j w_j theta3(x / 2, t_j)`` for an atomic measure.

    An atom at ``t = 1`` with positive weight contributes a constant symbol
    whose kernel is a Dirac mass; handle that mode separately.
    """
    x = np.asarray(grid.points)
    values = np.zeros(grid.n)
    for t, w in a.atoms:
        if w == 0.0:
            continue
        if t >= 1.0:
            raise DomainError("atom at t = 1 gives a constant symbol (Dirac kernel); "
                              "treat the constant mode separately")
        values += w * theta3(x / 2.0, t)
    values.setflags(write=False)
    return KernelTable(grid, values, 0, from_atoms(a), True, "theta")


# -- structural checks -------------------------------------------------------------

@dataclass(frozen=True)
class MonotoneVerdict:
    passed: bool
    status: str
    worst_violation: float
    worst_at: float | None
    tolerance: float
    delta: float

    def to_dict(self):
        return dict(self.__dict__)


def check_monotone_half_period(kt: KernelTable, delta: float | None = None,
                               rel_tolerance: float = 1e-8) -> MonotoneVerdict:
    """Check that ``K`` decreases on ``[delta, pi]`` at the grid points.

    Violations are measured as ``K(x_{j+1}) - K(x_j)``; the allowance is
    ``rel_tolerance * max |K|`` over the tested range.
    """
    h = kt.grid.h
    delta = 4 * h if delta is None else float(delta)
    if delta <= 0:
        raise DomainError("the exclusion radius must be positive")
    if kt.degenerate:
        return MonotoneVerdict(False, "excluded", 0.0, None, 0.0, delta)
    x = np.asarray(kt.grid.points)
    sel = np.nonzero((x >= delta - 1e-12) & (x <= np.pi))[0]
    # x = pi is stored at the grid point -pi
    vals = np.append(kt.values[sel], kt.values[0])
    xs = np.append(x[sel], np.pi)
    tol = rel_tolerance * float(np.max(np.abs(vals)))
    inc = np.diff(vals)
    j = int(np.argmax(inc))
    worst = float(inc[j])
    ok = worst < tol
    return MonotoneVerdict(ok, "passed" if ok else "failed", worst, float(xs[j]), tol, delta)


@dataclass(frozen=True)
class OriginReport:
    sup_sin_k: dict
    sup_spread: float
    x_samples: tuple
    x_k: tuple
    strictly_decreasing: bool
    fitted_exponent: float
    passed: bool

    def to_dict(self):
        return {
            "sup_sin_k": {str(k): v for k, v in self.sup_sin_k.items()},
            "sup_spread": self.sup_spread,
            "x_samples": list(self.x_samples),
            "x_k": list(self.x_k),
            "strictly_decreasing": self.strictly_decreasing,
            "fitted_exponent": self.fitted_exponent,
            "passed": self.passed,
        }


def check_origin_behaviour(s: Symbol, truncations=(10_000, 100_000, 1_000_000),
                           x_samples=(0.1, 0.01, 0.001), n: int = 1024,
                           spread_tolerance: float = 0.1) -> OriginReport:
    """Boundedness of ``sin(x) K_M(x)`` across truncations and ``x K(x) -> 0``.

    ``sup |sin(x) K_M(x)|`` is taken over the grid using plain partial sums;
    the relative spread across ``truncations`` must stay below
    ``spread_tolerance``. ``|x K(x)|`` is evaluated at ``x_samples`` with
    ``M = max(100 / x, 10^4)`` terms; it must decrease strictly and its fitted
    power law must have a positive exponent.
    """
    xs = np.sort(np.asarray(x_samples, dtype=float))[::-1]
    if xs[0] > np.pi / 4 or xs[-1] <= 0:
        raise DomainError("x_samples must lie in (0, pi/4]")
    grid = PeriodicGrid(n)
    x = np.asarray(grid.points)
    sups = {}
    for M in truncations:
        kt = build_kernel(s, grid, int(M), method="partial") if M >= n else None
        vals = kt.values.copy()
        vals[grid.n // 2] = 0.0  # sin(0) K_M(0) = 0
        sups[int(M)] = float(np.max(np.abs(np.sin(x) * vals)))
    sv = np.array(list(sups.values()))
    spread = float((sv.max() - sv.min()) / sv.min())
    xk = np.array([abs(xv * kernel_values(s, [xv], max(10_000, int(math.ceil(100 / xv))))[0])
                   for xv in xs])
    dec = bool(np.all(np.diff(xk) < 0))
    beta = float(np.polyfit(np.log(xs), np.log(xk), 1)[0])
    ok = spread <= spread_tolerance and dec and beta > 0
    return OriginReport(sups, spread, tuple(xs.tolist()), tuple(xk.tolist()), dec, beta, ok)


# -- the operator L ---------------------------------------------------------------------

def symbol_on_grid(s: Symbol, n: int) -> np.ndarray:
    """Multipliers ``m(k)`` for ``k = 0..n/2``; k = 0 (homogeneous) and Nyquist set to 0."""
    k = np.arange(n // 2 + 1, dtype=float)
    mk = np.zeros_like(k)
    k0 = 1 if s.homogeneous else 0
    mk[k0:] = s.func(k[k0:])
    mk[-1] = 0.0
    return mk


def apply_L(s: Symbol, f: SpectralField, mean_tolerance: float = 1e-12) -> SpectralField:
    """``(L f)^(k) = m(k) f^(k)``.

    Homogeneous symbols require a zero-mean field.
    """
    if s.homogeneous and abs(f.mean) > mean_tolerance * max(1.0, f.max_abs()):
        raise DomainError(f"homogeneous symbol applied to a field with mean {f.mean:.3e}")
    return SpectralField.from_coeffs(f.grid, symbol_on_grid(s, f.n) * f.coeffs)


def _quadrature_sum(kt: KernelTable, F: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """``h sum_{d != 0} K(d h) [F(c - d) - F(c)] + 2 pi c_h F(c)`` on the kernel grid."""
    n = kt.grid.n
    h = kt.grid.h
    d = np.arange(-(n // 2), n // 2)
    d = d[d != 0]
    Kd = kt.at_offset(d)
    out = np.empty(centers.size)
    block = max(1, (1 << 22) // n)
    for s0 in range(0, centers.size, block):
        c = centers[s0:s0 + block]
        idx = (c[:, None] - d[None, :]) % n
        Fc = F[c]
        out[s0:s0 + block] = h * ((F[idx] - Fc[:, None]) @ Kd) + 2.0 * np.pi * kt.zero_mode * Fc
    return out


def quadrature_convolve(kt: KernelTable, f: SpectralField) -> SpectralField:
    """``(K * f)(x_i)`` by quadrature against the sampled kernel.

    ``f`` is interpolated spectrally onto the kernel grid (whose size must be a
    multiple of ``f.n``); the kernel sample at ``x = 0`` is never used: the
    integrand ``K(s) [f(x - s) - f(x)]`` vanishes there and the subtracted
    term is restored from the mean of ``K``.
    """
    nK, n = kt.grid.n, f.n
    if nK % n:
        raise DomainError(f"kernel grid {nK} is not a multiple of field grid {n}")
    if kt.derivative:
        raise DomainError("quadrature_convolve needs a kernel table, not K'")
    F = f.resample(nK).values if nK != n else np.asarray(f.values)
    centers = np.arange(n) * (nK // n)
    return SpectralField(f.grid, _quadrature_sum(kt, F, centers))


def convolve_at(kt: KernelTable, f: SpectralField, t: float) -> float:
    """``(K * f)(t)`` at an arbitrary point ``t`` by the same quadrature."""
    if kt.grid.n % f.n:
        raise DomainError(f"kernel grid {kt.grid.n} is not a multiple of field grid {f.n}")
    # g(s) = f(t + s); K even, so (K*f)(t) = integral K(s) g(s) ds
    F = f.shift(-t).resample(kt.grid.n).values
    return float(_quadrature_sum(kt, F, np.array([kt.grid.n // 2]))[0])


# -- touching-lemma kernel difference ---------------------------------------------------

def gp_values(kt: KernelTable, lam_index: int, xbar_index: int) -> np.ndarray:
    """``G_p(y) = K(xbar - y) - K(xbar + y - 2 lam)`` for grid ``y`` in ``[lam, lam + pi]``.

    All three points are kernel-grid points, so no interpolation is involved.
    The first and last entries are the endpoints ``y = lam`` and ``y = lam + pi``.
    """
    n = kt.grid.n
    a, b = int(lam_index), int(xbar_index)
    c = a + np.arange(0, n // 2 + 1)
    return kt.at_offset(b - c) - kt.at_offset(b + c - 2 * a)


def gp_positivity(kt: KernelTable, pairs: int = 50, seed: int = 0) -> dict:
    """Minimum of ``G_p`` over the open interval for random grid-aligned ``(lam, xbar)``."""
    rng = np.random.default_rng(seed)
    n = kt.grid.n
    mins, ends = [], []
    for _ in range(pairs):
        a = int(rng.integers(0, n))
        b = a + int(rng.integers(1, n // 2))
        g = gp_values(kt, a, b)
        mins.append(float(np.min(g[1:-1])))
        ends.append(max(abs(g[0]), abs(g[-1])))
    return {"pairs": pairs, "seed": seed, "min_interior": min(mins),
            "max_endpoint": max(ends), "passed": min(mins) > 0}
