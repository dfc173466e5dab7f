"""Time integration of ``u_t + (u^2 + L u)_x = 0`` by RK4 in Fourier space."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InstabilityError
from .kernel import symbol_on_grid
from .spectral import SpectralField, _dealiased_product_coeffs, synthesize
from .symbols import Symbol

__all__ = ["rhs", "step_rk4", "stable_dt", "integrate", "EvolutionRun",
           "traveling_check", "self_convergence"]

BLOWUP_FACTOR = 1e3


class _Rhs:
    def __init__(self, s: Symbol, n: int, nonlinear: bool = True):
        self.n = n
        self.ik = 1j * np.arange(n // 2 + 1)
        self.ik[-1] = 0.0
        self.m = symbol_on_grid(s, n)
        self.nonlinear = nonlinear

    def __call__(self, c):
        flux = self.m * c
        if self.nonlinear:
            flux = flux + _dealiased_product_coeffs(c, c, self.n)
        return -self.ik * flux


def _check_mean(s, u):
    if s.homogeneous and abs(u.mean) > 1e-12 * max(1.0, u.max_abs()):
        raise DomainError("homogeneous symbols need zero-mean data")


def rhs(u: SpectralField, s: Symbol, nonlinear: bool = True) -> SpectralField:
    """``-d/dx (u^2 + L u)`` with a dealiased square."""
    _check_mean(s, u)
    c = u._band_coeffs()
    return SpectralField.from_coeffs(u.grid, _Rhs(s, u.n, nonlinear)(c))


def _rk4(f, c, dt):
    k1 = f(c)
    k2 = f(c + 0.5 * dt * k1)
    k3 = f(c + 0.5 * dt * k2)
    k4 = f(c + dt * k3)
    return c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(u: SpectralField, s: Symbol, dt: float, nonlinear: bool = True) -> SpectralField:
    """One classical Runge-Kutta step."""
    _check_mean(s, u)
    c = _rk4(_Rhs(s, u.n, nonlinear), u._band_coeffs(), dt)
    return SpectralField.from_coeffs(u.grid, c)


def stable_dt(u: SpectralField, s: Symbol, cfl: float = 1.0) -> float:
    """Largest ``dt`` with ``dt max_k |k m(k) + 2 k max|u|| <= cfl``."""
    k = np.arange(u.n // 2)
    m = symbol_on_grid(s, u.n)[: u.n // 2]
    rate = float(np.max(np.abs(k * m + 2.0 * k * u.max_abs())))
    return cfl / rate if rate > 0 else math.inf


@dataclass
class EvolutionRun:
    symbol: Symbol
    initial: SpectralField
    dt: float
    t_end: float
    steps: int
    snapshots: list = field(default_factory=list)
    times: list = field(default_factory=list)
    means: list = field(default_factory=list)
    energies: list = field(default_factory=list)

    @property
    def final(self) -> SpectralField:
        return self.snapshots[-1][1]

    @property
    def mean_drift(self) -> float:
        return float(np.max(np.abs(np.asarray(self.means) - self.means[0])))


def integrate(u0: SpectralField, s: Symbol, dt: float | None = None, t_end: float = 1.0,
              snapshot_every: int | None = None, nonlinear: bool = True) -> EvolutionRun:
    """Integrate to ``t_end`` with RK4.

    ``dt`` is reduced so that an integer number of steps lands on ``t_end``;
    by default it is :func:`stable_dt`. Snapshots are kept every
    ``snapshot_every`` steps and at ``t_end``.

    Raises
    ------
    InstabilityError
        if ``max|u|`` exceeds ``1e3 max|u0|``.
    """
    _check_mean(s, u0)
    if t_end < 0:
        raise DomainError("t_end must be nonnegative")
    dt = stable_dt(u0, s) if dt is None else float(dt)
    if not dt > 0:
        raise DomainError("dt must be positive")
    steps = max(1, int(math.ceil(t_end / dt - 1e-12))) if t_end > 0 else 0
    dt = t_end / steps if steps else dt
    f = _Rhs(s, u0.n, nonlinear)
    c = u0._band_coeffs()
    limit = BLOWUP_FACTOR * max(u0.max_abs(), 1e-300)
    run = EvolutionRun(s, u0, dt, t_end, steps)

    def record(t, c):
        u = SpectralField.from_coeffs(u0.grid, c)
        run.snapshots.append((t, u))
        run.times.append(t)
        run.means.append(float(c[0].real))
        run.energies.append(float(np.mean(u.values ** 2)))

    record(0.0, c)
    for i in range(1, steps + 1):
        c = _rk4(f, c, dt)
        # |c_0| + 2 sum |c_k| bounds max|u|; synthesize only when the bound is large
        bound = float(np.abs(c[0]) + 2.0 * np.sum(np.abs(c[1:])))
        if not bound <= limit:
            umax = float(np.max(np.abs(synthesize(c, u0.n)))) if math.isfinite(bound) else math.inf
            if umax > limit:
                raise InstabilityError(f"max|u| = {umax:.3e} exceeds {limit:.3e}", time=i * dt)
        if i == steps or (snapshot_every and i % snapshot_every == 0):
            record(i * dt, c)
    return run


def traveling_check(p, periods: int = 1, dt: float | None = None) -> dict:
    """Evolve a steady profile for ``periods`` travel periods ``2 pi / c`` and
    measure ``max |u(T) - phi(x - c T)|``."""
    phi, c, s = p.phi, p.c, p.symbol
    T = periods * 2.0 * np.pi / c
    if phi.max_abs() == 0.0:
        return {"drift": 0.0, "t_end": T, "steps": 0, "dt": 0.0, "mean_drift": 0.0}
    run = integrate(phi, s, dt, T)
    exact = phi.shift(c * T)
    drift = float(np.max(np.abs(run.final.values - exact.values)))
    return {"drift": drift, "t_end": T, "steps": run.steps, "dt": run.dt,
            "mean_drift": run.mean_drift}


def self_convergence(u0: SpectralField, s: Symbol, t_end: float, dt: float,
                     nonlinear: bool = True) -> dict:
    """Error ratio of RK4 runs at ``dt`` and ``dt/2`` against a ``dt/4`` reference."""
    runs = [integrate(u0, s, dt / q, t_end, nonlinear=nonlinear).final for q in (1, 2, 4)]
    e1 = float(np.max(np.abs(runs[0].values - runs[2].values)))
    e2 = float(np.max(np.abs(runs[1].values - runs[2].values)))
    ratio = e1 / e2 if e2 > 0 else math.inf
    return {"dt": dt, "error_dt": e1, "error_half_dt": e2, "ratio": ratio,
            "order": math.log2(ratio) if ratio > 0 else float("nan")}
