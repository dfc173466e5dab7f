"""Fourier multiplier symbols, finite differences and complete monotonicity.

A symbol ``m`` acts on a periodic function through ``(Lf)^(k) = m(k) f^(k)``.
Symbols here are real and even; they are stored as a function of ``|k|``
that also accepts non-integer arguments when a real-line extension exists.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CapabilityError, DomainError

__all__ = [
    "SymbolKind",
    "Symbol",
    "MeasureAtoms",
    "CMReport",
    "OrderReport",
    "eval_symbol",
    "difference",
    "difference_recursive",
    "symbol_order_check",
    "cm_test",
    "assumption_S_check",
    "from_atoms",
    "fkdv",
    "whitham",
    "bessel",
    "symbol_from_config",
    "DIFFERENCE_CAP",
    "CM_TOLERANCE",
]

DIFFERENCE_CAP = 40
CM_TOLERANCE = 1e-12
_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny  # below this, relative tolerances underflow


class SymbolKind(str, enum.Enum):
    HOMOGENEOUS = "homogeneous"
    INHOMOGENEOUS = "inhomogeneous"
    ATOMS = "atom_synthesized"


@dataclass(frozen=True)
class Symbol:
    """An even, real dispersion symbol.

    ``func`` maps nonnegative reals (numpy arrays) to ``m``; it is only ever
    called with ``|k|``. ``order`` is the decay order ``r`` (``-inf`` for
    symbols decaying faster than any power).
    """

    kind: SymbolKind
    order: float
    label: str
    func: Callable = field(repr=False, compare=False)
    config: dict = field(default_factory=dict, compare=False, repr=False)
    real_extension: bool = True

    @property
    def homogeneous(self) -> bool:
        return self.kind is SymbolKind.HOMOGENEOUS

    @property
    def k_min(self) -> int:
        """Smallest admissible integer argument of difference sequences."""
        return 1 if self.homogeneous else 0

    def __call__(self, k):
        return eval_symbol(self, k)

    def eval_real(self, x):
        """Real-argument extension ``m(|x|)``."""
        if not self.real_extension:
            raise CapabilityError(f"symbol {self.label!r} has no real-argument extension")
        x = np.abs(np.asarray(x, dtype=float))
        if self.homogeneous and np.any(x == 0):
            raise DomainError(f"homogeneous symbol {self.label!r} is undefined at 0")
        out = self.func(x)
        return float(out) if np.ndim(out) == 0 else out

    def to_config(self) -> dict:
        return dict(self.config)


def eval_symbol(s: Symbol, k):
    """``m(|k|)`` for integer ``k`` (scalar or array)."""
    k = np.asarray(k)
    if k.dtype.kind not in "iu":
        if not np.all(np.equal(np.mod(k, 1), 0)):
            raise DomainError("eval_symbol takes integer wavenumbers; use eval_real")
    ka = np.abs(k).astype(float)
    if s.homogeneous and np.any(ka == 0):
        raise DomainError(f"homogeneous symbol {s.label!r} is undefined at k = 0")
    out = s.func(ka)
    return float(out) if np.ndim(out) == 0 else out


# -- finite differences ------------------------------------------------------

def _seq(s):
    if isinstance(s, Symbol):
        return lambda j: float(eval_symbol(s, j))
    return lambda j: float(s(j))


def _window(s, k, n):
    """``[m(k), ..., m(k + n)]`` with a single vectorised call for symbols."""
    if isinstance(s, Symbol):
        return [float(v) for v in eval_symbol(s, np.arange(k, k + n + 1))]
    return [float(s(j)) for j in range(k, k + n + 1)]


def _binomial_terms(seq, n, k):
    return [(-1) ** j * math.comb(n, j) * seq(k + n - j) for j in range(n + 1)]


def difference(s, n: int, k: int) -> float:
    """``Delta^n m(k) = sum_j (-1)^j C(n, j) m(k + n - j)``.

    ``s`` is a :class:`Symbol` or any callable on integers. Orders above
    ``DIFFERENCE_CAP`` raise :class:`CapabilityError`: the binomial weights
    then exceed 2**53 and the result carries no significant digits.
    """
    if n < 0:
        raise DomainError("difference order must be nonnegative")
    if n > DIFFERENCE_CAP:
        raise CapabilityError(f"difference order {n} exceeds cap {DIFFERENCE_CAP}")
    if isinstance(s, Symbol) and k < s.k_min:
        raise DomainError(f"k = {k} reaches m(0) of a homogeneous symbol")
    vals = _window(s, k, n)
    return math.fsum((-1) ** j * math.comb(n, j) * vals[n - j] for j in range(n + 1))


def difference_recursive(s, n: int, k: int) -> float:
    """``Delta^n m(k)`` through ``Delta^{n+1} m(k) = Delta^n m(k+1) - Delta^n m(k)``."""
    row = _window(s, k, n)
    for _ in range(n):
        row = [row[j + 1] - row[j] for j in range(len(row) - 1)]
    return row[0]


# -- symbol classes ------------------------------------------------------------

@dataclass(frozen=True)
class OrderReport:
    order: float
    slopes: dict
    constants: dict
    vanishing: tuple
    window: tuple
    slope_tolerance: float
    passed: bool

    def to_dict(self):
        return {
            "order": self.order,
            "slopes": {str(n): v for n, v in self.slopes.items()},
            "constants": {str(n): v for n, v in self.constants.items()},
            "vanishing": list(self.vanishing),
            "window": list(self.window),
            "slope_tolerance": self.slope_tolerance,
            "passed": self.passed,
        }


def symbol_order_check(s: Symbol, n_max: int = 4, k_max: int = 200,
                       slope_tolerance: float = 0.1, order: float | None = None) -> OrderReport:
    """Fit ``log |Delta^n m(k)|`` against ``log(1 + k)`` on ``[k_max/2, k_max]``.

    Order ``n`` passes when the fitted slope is at most ``r - n + slope_tolerance``.
    Orders whose differences vanish identically pass trivially.
    """
    if n_max > DIFFERENCE_CAP:
        raise CapabilityError(f"n_max {n_max} exceeds cap {DIFFERENCE_CAP}")
    r = s.order if order is None else order
    k = np.arange(max(k_max // 2, s.k_min, 1), k_max + 1)
    slopes, consts, vanishing, ok = {}, {}, [], True
    for n in range(n_max + 1):
        d = np.abs([difference(s, n, int(j)) for j in k])
        if np.all(d == 0):
            vanishing.append(n)
            continue
        keep = d > 0
        slope, icpt = np.polyfit(np.log1p(k[keep]), np.log(d[keep]), 1)
        slopes[n] = float(slope)
        consts[n] = float(np.exp(icpt))
        ok &= bool(slope <= r - n + slope_tolerance)
    return OrderReport(float(r), slopes, consts, tuple(vanishing),
                       (int(k[0]), int(k[-1])), slope_tolerance, ok)


@dataclass(frozen=True)
class CMReport:
    max_order_tested: int
    max_index_tested: int
    min_signed_difference: float
    passed: bool
    status: str
    start_index: int
    worst: tuple
    indeterminate: int = 0

    def to_dict(self):
        return {
            "max_order_tested": self.max_order_tested,
            "max_index_tested": self.max_index_tested,
            "min_signed_difference": self.min_signed_difference,
            "passed": self.passed,
            "status": self.status,
            "start_index": self.start_index,
            "worst": list(self.worst),
            "indeterminate": self.indeterminate,
            "cm_tolerance": CM_TOLERANCE,
        }


def cm_test(seq, n_max: int = 8, k_max: int = 50, start: int = 0,
            tolerance: float = CM_TOLERANCE) -> CMReport:
    """Check ``(-1)^n Delta^n n_k >= 0`` for ``n <= n_max``, ``start <= k <= k_max``.

    ``seq`` is a callable on integers or an indexable sequence. An entry
    fails when it is below ``-tolerance`` times the largest term of its
    alternating sum. Failures small enough to be explained by cancellation
    (below ``1e3 * eps * sum|terms|``) make the result ``indeterminate``
    rather than ``failed``.
    """
    if n_max > DIFFERENCE_CAP:
        raise CapabilityError(f"n_max {n_max} exceeds cap {DIFFERENCE_CAP}")
    f = seq if callable(seq) else seq.__getitem__
    cache = {}

    def val(j):
        if j not in cache:
            cache[j] = float(f(j))
        return cache[j]

    worst_val, worst = math.inf, (0, start)
    failed = indeterminate = 0
    for n in range(n_max + 1):
        for k in range(start, k_max + 1):
            terms = _binomial_terms(val, n, k)
            signed = (-1) ** n * math.fsum(terms)
            if signed < worst_val:
                worst_val, worst = signed, (n, k)
            if signed >= -tolerance * max(abs(t) for t in terms) - _TINY:
                continue
            if abs(signed) < 1e3 * _EPS * sum(abs(t) for t in terms):
                indeterminate += 1
            else:
                failed += 1
    status = "failed" if failed else ("indeterminate" if indeterminate else "passed")
    return CMReport(n_max, k_max, float(worst_val), status == "passed", status,
                    start, worst, indeterminate)


def assumption_S_check(s: Symbol, n_max: int = 8, k_max: int = 50) -> CMReport:
    """Complete monotonicity of ``k -> m(sqrt(k))`` for an inhomogeneous symbol.

    The sequence is tested from ``k = 0`` because ``m(0)`` exists for every
    inhomogeneous symbol; ``start_index`` in the report records this.
    """
    if s.homogeneous:
        raise DomainError("assumption (S) concerns inhomogeneous symbols")
    if not s.real_extension:
        raise CapabilityError(f"symbol {s.label!r} has no real-argument extension")
    return cm_test(lambda j: s.eval_real(math.sqrt(j)), n_max, k_max, start=0)


# -- measures and built-ins --------------------------------------------------------

@dataclass(frozen=True)
class MeasureAtoms:
    """A purely atomic nondecreasing measure on [0, 1]: pairs ``(t_j, w_j)``."""

    atoms: tuple

    def __init__(self, atoms: Sequence):
        pairs = tuple((float(t), float(w)) for t, w in atoms)
        if not pairs:
            raise DomainError("a measure needs at least one atom")
        ts = [t for t, _ in pairs]
        if len(set(ts)) != len(ts):
            raise DomainError("atom locations must be distinct")
        if any(not 0.0 <= t <= 1.0 for t in ts):
            raise DomainError("atom locations must lie in [0, 1]")
        if any(w < 0 for _, w in pairs):
            raise DomainError("atom weights must be nonnegative")
        object.__setattr__(self, "atoms", pairs)

    @property
    def t(self):
        return np.array([p[0] for p in self.atoms])

    @property
    def w(self):
        return np.array([p[1] for p in self.atoms])

    def to_config(self):
        return [{"t": t, "w": w} for t, w in self.atoms]


def from_atoms(a: MeasureAtoms) -> Symbol:
    """Symbol ``m(x) = sum_j w_j t_j^(x^2)`` with ``0^0 = 1``."""
    t, w = a.t, a.w

    def func(x):
        x = np.asarray(x, dtype=float)
        e = np.multiply.outer(x * x, np.ones_like(t))
        return np.power(t, e) @ w

    has_one = bool(np.any((t == 1.0) & (w > 0)))
    order = 0.0 if has_one else -math.inf
    return Symbol(SymbolKind.ATOMS, order, f"atoms{list(a.atoms)}", func,
                  {"kind": "atoms", "atoms": a.to_config()})


def _check_order(name, r, strict):
    if strict and r >= 0:
        raise DomainError(f"{name}(r) needs r < 0, got r = {r}")


def fkdv(r: float, strict: bool = True) -> Symbol:
    """Fractional KdV symbol ``|k|^r`` (homogeneous).

    ``r = -1`` gives Burgers-Hilbert, ``r = -2`` the reduced Ostrovsky equation.
    """
    _check_order("fkdv", r, strict)
    r = float(r)
    return Symbol(SymbolKind.HOMOGENEOUS, r, f"fkdv({r:g})",
                  lambda x: np.power(x, r), {"kind": "fkdv", "r": r})


def _whitham(x):
    x = np.asarray(x, dtype=float)
    small = x < 1e-6
    safe = np.where(small, 1.0, x)
    # tanh(x)/x = 1 - x^2/3 + O(x^4)
    return np.where(small, np.sqrt(1.0 - np.minimum(x, 1e-6) ** 2 / 3.0), np.sqrt(np.tanh(safe) / safe))


def whitham() -> Symbol:
    """Whitham symbol ``sqrt(tanh(k) / k)`` with the limit value ``m(0) = 1``."""
    return Symbol(SymbolKind.INHOMOGENEOUS, -0.5, "whitham", _whitham, {"kind": "whitham"})


def bessel(r: float, strict: bool = True) -> Symbol:
    """Inhomogeneous symbol ``(1 + k^2)^(r/2)``.

    ``strict=False`` admits ``r >= 0``, which is only useful as a negative control.
    """
    _check_order("bessel", r, strict)
    r = float(r)
    return Symbol(SymbolKind.INHOMOGENEOUS, r, f"bessel({r:g})",
                  lambda x: np.power(1.0 + np.asarray(x) ** 2, r / 2.0),
                  {"kind": "bessel", "r": r})


def symbol_from_config(cfg: dict) -> Symbol:
    """Build a symbol from ``{"kind": ..., "r": ..., "atoms": [...]}``."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise DomainError("symbol config must be an object with a 'kind' field")
    kind = cfg["kind"]
    if kind == "whitham":
        return whitham()
    if kind in ("fkdv", "bessel"):
        if "r" not in cfg:
            raise DomainError(f"symbol kind {kind!r} needs 'r'")
        return (fkdv if kind == "fkdv" else bessel)(float(cfg["r"]))
    if kind == "atoms":
        atoms = cfg.get("atoms")
        if not atoms:
            raise DomainError("symbol kind 'atoms' needs a nonempty 'atoms' list")
        return from_atoms(MeasureAtoms([(a["t"], a["w"]) for a in atoms]))
    raise DomainError(f"unknown symbol kind {kind!r}")
