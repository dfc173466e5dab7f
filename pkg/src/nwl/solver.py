"""Periodic traveling waves of ``u_t + (u^2 + L u)_x = 0``.

Profiles ``u = phi(x - c t)`` satisfy the steady equation

    -c phi + L phi + phi^2 = B_h,

with ``B_h = 0`` for inhomogeneous symbols and, for homogeneous symbols
(mean-zero ``phi``), ``B_h = mean(phi^2)``. The crest is pinned at ``x = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import (CapabilityError, ConvergenceError, DomainError, FoldError,
                     HighestWaveError)
from .kernel import KernelTable, build_kernel, quadrature_convolve, symbol_on_grid
from .spectral import PeriodicGrid, SpectralField, analyze, synthesize
from .symbols import Symbol

__all__ = [
    "WaveProfile",
    "Branch",
    "Termination",
    "HolderFit",
    "residual",
    "general_residual",
    "residual_by_quadrature",
    "galilean_shift",
    "fixed_point_solve",
    "newton_solve",
    "small_amplitude_init",
    "continue_branch",
    "profile_at_ratio",
    "holder_exponent_at_crest",
    "crest_index",
]

SOLVE_TOLERANCE = 1e-10
RADICAND_SAFEGUARD = 1e-12


def crest_index(grid: PeriodicGrid) -> int:
    """Grid index of ``x = 0``."""
    return grid.n // 2


def _L(s: Symbol, phi: SpectralField) -> np.ndarray:
    return synthesize(symbol_on_grid(s, phi.n) * phi.coeffs, phi.n)


def _square(phi: SpectralField) -> np.ndarray:
    return (phi * phi).values


def _bh(s: Symbol, phi: SpectralField) -> float:
    return float(np.mean(_square(phi))) if s.homogeneous else 0.0


@dataclass(frozen=True)
class WaveProfile:
    """A solution candidate ``(phi, c, B_h)`` for symbol ``symbol``."""

    phi: SpectralField
    c: float
    b: float
    symbol: Symbol
    residual_norm: float = field(default=float("nan"))

    @classmethod
    def build(cls, s: Symbol, phi: SpectralField, c: float, b: float | None = None):
        b = _bh(s, phi) if b is None else float(b)
        r = _residual_values(s, phi, c, b)
        return cls(phi, float(c), b, s, float(np.max(np.abs(r))))

    @property
    def height(self) -> float:
        return float(self.phi.values[crest_index(self.phi.grid)])

    @property
    def max_phi(self) -> float:
        return float(np.max(self.phi.values))

    @property
    def height_ratio(self) -> float:
        """``max phi / (c / 2)``; equals 1 for the highest wave."""
        return self.max_phi / (self.c / 2.0)

    def recompute_residual(self) -> float:
        return float(residual(self).max_abs())

    def summary(self) -> dict:
        return {"c": self.c, "b": self.b, "height": self.height, "max_phi": self.max_phi,
                "height_ratio": self.height_ratio, "residual_norm": self.residual_norm,
                "n": self.phi.n, "mean": self.phi.mean}


def _residual_values(s, phi, c, b):
    return -c * np.asarray(phi.values) + _L(s, phi) + _square(phi) - b


def residual(p: WaveProfile) -> SpectralField:
    """``-c phi + L phi + phi^2 - b`` on the grid (dealiased square)."""
    return SpectralField(p.phi.grid, _residual_values(p.symbol, p.phi, p.c, p.b))


def general_residual(s: Symbol, phi: SpectralField, c: float, B: float) -> SpectralField:
    """Residual of ``-c phi + L phi + phi^2 = B`` for an arbitrary constant ``B``."""
    return SpectralField(phi.grid, _residual_values(s, phi, c, B))


def residual_by_quadrature(p: WaveProfile, kernel: KernelTable | None = None,
                           n_kernel: int | None = None, M: int = 1_000_000) -> SpectralField:
    """The residual with ``L phi`` replaced by ``(K * phi) / 2 pi`` by quadrature."""
    n = p.phi.n
    if kernel is None:
        n_kernel = n_kernel or max(16384, n)
        kernel = build_kernel(p.symbol, PeriodicGrid(n_kernel), max(M, n_kernel))
    phi = p.phi
    shift = 0.0
    if p.symbol.homogeneous:
        shift = phi.mean
        phi = phi - shift
    Lq = quadrature_convolve(kernel, phi).values / (2.0 * np.pi)
    vals = -p.c * np.asarray(p.phi.values) + Lq + _square(p.phi) - p.b
    return SpectralField(p.phi.grid, vals)


def galilean_shift(p: WaveProfile, gamma: float) -> WaveProfile:
    """``(phi, c, B) -> (phi + gamma, c + 2 gamma, B + gamma (m(0) - c - gamma))``."""
    s = p.symbol
    if s.homogeneous:
        raise DomainError("Galilean shift changes the mean; not available for homogeneous symbols")
    m0 = float(s.func(np.array([0.0]))[0])
    phi = p.phi + gamma
    c = p.c + 2.0 * gamma
    b = p.b + gamma * (m0 - p.c - gamma)
    r = _residual_values(s, phi, c, b)
    return WaveProfile(phi, c, b, s, float(np.max(np.abs(r))))


# -- fixed-point iteration ------------------------------------------------------------

def fixed_point_solve(s: Symbol, c: float, init: SpectralField, tol: float = 1e-12,
                      max_iter: int = 5000) -> WaveProfile:
    """Iterate ``phi <- c/2 - sqrt(B_h + c^2/4 - L phi)`` to a fixed point.

    Raises
    ------
    HighestWaveError
        if the radicand drops below ``1e-12 c^2`` somewhere.
    ConvergenceError
        if the update does not fall below ``tol`` within ``max_iter`` steps.
    """
    if c <= 0:
        raise DomainError("wave speed must be positive")
    phi = init - init.mean if s.homogeneous else init
    grid = phi.grid
    x = np.asarray(grid.points)
    for _ in range(max_iter):
        b = _bh(s, phi)
        rad = b + c * c / 4.0 - _L(s, phi)
        j = int(np.argmin(rad))
        if rad[j] <= RADICAND_SAFEGUARD * c * c:
            raise HighestWaveError(f"radicand {rad[j]:.3e} at x = {x[j]:.6f}: approaching the "
                                   "highest wave", last=WaveProfile.build(s, phi, c), point=float(x[j]))
        new = c / 2.0 - np.sqrt(rad)
        if s.homogeneous:
            new = new - new.mean()
        step = float(np.max(np.abs(new - phi.values)))
        phi = SpectralField(grid, new)
        if step < tol:
            return WaveProfile.build(s, phi, c)
    raise ConvergenceError(f"fixed-point iteration did not converge in {max_iter} steps "
                           f"(last update {step:.3e})", last=WaveProfile.build(s, phi, c))


# -- Newton iteration -----------------------------------------------------------------

def _pad_matrices(n):
    """Matrices ``E`` (grid n -> grid 3n/2, Nyquist dropped) and ``T`` (back, truncated)."""
    m = 3 * n // 2 + (3 * n // 2) % 2
    eye = np.eye(n)
    c = analyze(eye)  # rows: coefficients of unit vectors
    c[:, -1] = 0.0
    E = synthesize(c, m).T
    eye_m = np.eye(m)
    cm = analyze(eye_m)[:, : n // 2 + 1].copy()
    cm[:, -1] = 0.0
    T = synthesize(cm, n).T
    return E, T


def _operator_matrix(s, n):
    eye = np.eye(n)
    return synthesize(symbol_on_grid(s, n) * analyze(eye), n).T


def _derivative_row(n, j):
    """Row ``r`` with ``r @ values = phi'(x_j)`` (spectral, Nyquist dropped)."""
    eye = np.eye(n)
    c = analyze(eye)
    c[:, -1] = 0.0
    k = np.arange(n // 2 + 1)
    d = synthesize(1j * k * c, n)
    return d[:, j]


class _Newton:
    def __init__(self, s: Symbol, grid: PeriodicGrid):
        n = grid.n
        self.s, self.grid, self.n = s, grid, n
        self.Lmat = _operator_matrix(s, n)
        self.E, self.T = _pad_matrices(n)
        self.j0 = crest_index(grid)
        self.drow = _derivative_row(n, self.j0)

    def F(self, phi_vals, c):
        phi = SpectralField(self.grid, phi_vals)
        b = _bh(self.s, phi)
        return _residual_values(self.s, phi, c, b)

    def jac(self, phi_vals, c):
        n = self.n
        Q = 2.0 * (self.T * (self.E @ phi_vals)) @ self.E
        if self.s.homogeneous:
            # B_h = mean(phi^2) moves with phi
            Q -= Q.mean(axis=0)[None, :]
        return self.Lmat - c * np.eye(n) + Q


def newton_solve(s: Symbol, p0: WaveProfile, constraint: str = "fix_speed",
                 height: float | None = None, tol: float = SOLVE_TOLERANCE,
                 max_iter: int = 30, _ctx: _Newton | None = None) -> WaveProfile:
    """Newton refinement of a profile with the crest pinned at ``x = 0``.

    Parameters
    ----------
    constraint : {"fix_speed", "fix_height"}
        With ``fix_height`` the speed ``c`` is an unknown and ``phi(0) = height``
        is appended.
    tol : float
        Target for the max-norm residual.

    Notes
    -----
    The translation mode is removed by the extra condition ``phi'(0) = 0``,
    bordered with a slack unknown multiplying the column ``(d/dx at 0)^T``.
    For homogeneous symbols one residual row is replaced by ``mean(phi) = 0``.
    """
    if constraint not in ("fix_speed", "fix_height"):
        raise DomainError(f"unknown constraint {constraint!r}")
    fix_h = constraint == "fix_height"
    if fix_h and height is None:
        raise DomainError("fix_height needs a target height")
    if p0.residual_norm > 0.1 * p0.c**2:
        raise DomainError(f"initial residual {p0.residual_norm:.3e} exceeds 0.1 c^2")
    grid = p0.phi.grid
    n = grid.n
    ctx = _ctx or _Newton(s, grid)
    phi = np.array(p0.phi.values)
    if s.homogeneous:
        phi -= phi.mean()
    c = p0.c
    size = n + 1 + int(fix_h)
    hist = []
    for it in range(max_iter + 1):
        F = ctx.F(phi, c)
        rnorm = float(np.max(np.abs(F)))
        gauge = float(ctx.drow @ phi)
        hres = float(phi[ctx.j0] - height) if fix_h else 0.0
        hist.append(rnorm)
        if rnorm <= tol and abs(gauge) <= tol and abs(hres) <= tol:
            out = SpectralField(grid, phi)
            return WaveProfile.build(s, out, c)
        if it == max_iter:
            break
        if it > 3 and rnorm > 1e3 * hist[0] + 1.0:
            break
        A = np.zeros((size, size))
        rhs = np.zeros(size)
        A[:n, :n] = ctx.jac(phi, c)
        rhs[:n] = F
        if s.homogeneous:
            A[0, :n] = 1.0 / n
            A[0, n:] = 0.0
            rhs[0] = phi.mean()
        A[:n, n] = ctx.drow
        A[n, :n] = ctx.drow
        rhs[n] = gauge
        if fix_h:
            A[:n, n + 1] = -phi
            if s.homogeneous:
                A[0, n + 1] = 0.0
            A[n + 1, ctx.j0] = 1.0
            rhs[n + 1] = hres
        try:
            lu = scipy.linalg.lu_factor(A, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise FoldError(f"Jacobian factorisation failed: {exc}",
                            last=WaveProfile.build(s, SpectralField(grid, phi), c)) from exc
        piv = np.abs(np.diag(lu[0]))
        if piv.min() <= 1e-14 * piv.max():
            raise FoldError("singular Jacobian (fold or bifurcation point)",
                            last=WaveProfile.build(s, SpectralField(grid, phi), c))
        delta = scipy.linalg.lu_solve(lu, rhs)
        phi = phi - delta[:n]
        if fix_h:
            c = c - delta[n + 1]
        if not np.all(np.isfinite(phi)) or not math.isfinite(c) or c <= 0:
            break
    raise ConvergenceError(f"Newton iteration failed (residual history {hist[-5:]})",
                           last=WaveProfile.build(s, SpectralField(grid, phi), c)
                           if np.all(np.isfinite(phi)) and math.isfinite(c) else None)


def small_amplitude_init(s: Symbol, eps: float, n: int = 256):
    """``(eps cos x, m(1))``: the linear wave at the bifurcation speed."""
    m1 = float(s.func(np.array([1.0]))[0])
    if not 0.0 < eps < 0.1 * m1:
        raise DomainError(f"eps must lie in (0, 0.1 m(1)) = (0, {0.1 * m1:.4g})")
    grid = PeriodicGrid(n)
    return SpectralField.from_function(grid, lambda x: eps * np.cos(x)), m1


# -- continuation -----------------------------------------------------------------------

class Termination(str, Enum):
    TARGET_HEIGHT = "target_height"
    STEP_FAILURE = "step_failure"
    HIGHEST_WAVE_PROXIMITY = "highest_wave_proximity"


@dataclass
class Branch:
    profiles: list
    height_param: list
    terminated_reason: Termination
    symbol: Symbol | None = None

    @property
    def speeds(self):
        return [p.c for p in self.profiles]

    def rows(self):
        return [{"step": i, "height": h, "c": p.c, "residual": p.residual_norm}
                for i, (h, p) in enumerate(zip(self.height_param, self.profiles))]


def continue_branch(s: Symbol, theta: float = 0.9, n: int = 256, eps: float = 0.01,
                    step: float | None = None, min_step: float = 1e-7, max_steps: int = 2000,
                    tol: float = SOLVE_TOLERANCE, max_step: float | None = None) -> Branch:
    """Follow the branch of waves bifurcating at ``c = m(1)`` by crest height.

    Heights increase by adaptive steps (doubled after easy solves, halved on
    failure); a secant predictor extrapolates ``(phi, c)`` in height. The run
    stops once ``max phi >= theta c / 2``.
    """
    if not 0.0 < theta < 1.0:
        raise DomainError("theta must lie in (0, 1)")
    phi0, c0 = small_amplitude_init(s, eps, n)
    ctx = _Newton(s, phi0.grid)
    p = newton_solve(s, WaveProfile.build(s, phi0, c0), "fix_height", height=eps, tol=tol, _ctx=ctx)
    profiles, heights = [p], [p.height]
    m1 = c0
    step = step or 0.01 * m1
    max_step = max_step or 0.015 * m1
    failures = 0
    reason = Termination.STEP_FAILURE
    while len(profiles) < max_steps:
        if profiles[-1].max_phi >= theta * profiles[-1].c / 2.0:
            reason = Termination.TARGET_HEIGHT
            break
        last = profiles[-1]
        # stay below the target by shrinking the step when the ratio is close
        h_new = heights[-1] + step
        if len(profiles) >= 2:
            a = (h_new - heights[-1]) / (heights[-1] - heights[-2])
            guess_phi = last.phi + (last.phi - profiles[-2].phi) * a
            guess_c = last.c + a * (last.c - profiles[-2].c)
        else:
            guess_phi = last.phi * (h_new / heights[-1]) if heights[-1] else last.phi
            guess_c = last.c
        try:
            guess = WaveProfile.build(s, guess_phi, guess_c)
            q = newton_solve(s, guess, "fix_height", height=h_new, tol=tol, max_iter=12, _ctx=ctx)
            if q.max_phi >= q.c / 2.0 or q.height <= heights[-1]:
                raise ConvergenceError("left the admissible range")
            if q.max_phi > q.height + 1e-12:
                raise ConvergenceError("crest moved away from x = 0")
        except (ConvergenceError, DomainError):
            step /= 2.0
            failures += 1
            if step < min_step:
                reason = (Termination.HIGHEST_WAVE_PROXIMITY
                          if last.height_ratio > 0.95 else Termination.STEP_FAILURE)
                break
            continue
        profiles.append(q)
        heights.append(q.height)
        step = min(step * 1.5, max_step)
    return Branch(profiles, heights, reason, s)


def profile_at_ratio(branch: Branch, ratio: float, tol: float = 1e-8,
                     max_iter: int = 20) -> WaveProfile:
    """Branch profile with ``max phi / (c/2) = ratio``, by secant iteration in height."""
    prof = branch.profiles
    r = [q.height_ratio for q in prof]
    idx = [i for i in range(1, len(prof)) if r[i - 1] <= ratio <= r[i]]
    if not idx:
        raise DomainError(f"ratio {ratio} is outside the computed branch [{r[0]:.3f}, {r[-1]:.3f}]")
    i = idx[0]
    s = branch.symbol or prof[0].symbol
    ctx = _Newton(s, prof[0].phi.grid)
    (h0, q0), (h1, q1) = (prof[i - 1].height, prof[i - 1]), (prof[i].height, prof[i])
    f0, f1 = q0.height_ratio - ratio, q1.height_ratio - ratio
    for _ in range(max_iter):
        if abs(f1) <= tol:
            return q1
        h2 = h1 - f1 * (h1 - h0) / (f1 - f0)
        a = (h2 - h1) / (h1 - h0)
        guess = WaveProfile.build(s, q1.phi + (q1.phi - q0.phi) * a, q1.c + a * (q1.c - q0.c))
        q2 = newton_solve(s, guess, "fix_height", height=h2, _ctx=ctx)
        (h0, q0, f0), (h1, q1, f1) = (h1, q1, f1), (h2, q2, q2.height_ratio - ratio)
    raise ConvergenceError(f"height ratio {ratio} not reached", last=q1)


# -- crest regularity -------------------------------------------------------------------

@dataclass(frozen=True)
class HolderFit:
    alpha: float
    fit_residual: float
    points: int
    reference: str
    window: tuple

    def to_dict(self):
        return dict(self.__dict__, window=list(self.window))


def holder_exponent_at_crest(p, reference: str = "half_speed", window=(None, 0.3),
                             c: float | None = None, require_near_highest: bool = True) -> HolderFit:
    """Fit ``alpha`` in ``D(x) ~ |x|^alpha`` near a crest at ``x = 0``.

    ``D = c/2 - phi`` (``reference="half_speed"``) or ``D = phi(0) - phi``
    (``reference="crest"``). Both sides of the crest are used, over
    ``4 h <= |x| <= 0.3`` by default.

    ``p`` may be a :class:`WaveProfile` or a bare field together with ``c``.
    """
    if isinstance(p, WaveProfile):
        phi, c = p.phi, p.c
    else:
        phi = p
        if c is None and reference == "half_speed":
            raise DomainError("a bare field needs the speed c")
    grid = phi.grid
    x = np.asarray(grid.points)
    v = np.asarray(phi.values)
    j0 = crest_index(grid)
    if int(np.argmax(v)) != j0:
        raise DomainError("crest is not at x = 0; translate the profile first")
    if reference == "half_speed":
        if require_near_highest and c / 2.0 - v[j0] > 0.02 * c:
            raise DomainError(f"c/2 - max phi = {c / 2 - v[j0]:.3e} exceeds 0.02 c")
        D = c / 2.0 - v
    elif reference == "crest":
        D = v[j0] - v
    else:
        raise DomainError(f"unknown reference {reference!r}")
    lo = 4 * grid.h if window[0] is None else window[0]
    hi = window[1]
    sel = (np.abs(x) >= lo - 1e-12) & (np.abs(x) <= hi + 1e-12) & (D > 0)
    if sel.sum() < 8:
        raise CapabilityError(f"only {int(sel.sum())} fit points in [{lo:.3g}, {hi:.3g}]; refine the grid")
    X, Y = np.log(np.abs(x[sel])), np.log(D[sel])
    (alpha, const), res, *_ = np.polyfit(X, Y, 1, full=True)
    rms = float(np.sqrt(res[0] / sel.sum())) if res.size else 0.0
    return HolderFit(float(alpha), rms, int(sel.sum()), reference, (float(lo), float(hi)))
