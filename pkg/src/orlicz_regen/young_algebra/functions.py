"""Young functions stored in log-log coordinates.

Every function ``f`` on ``[0, inf)`` is represented through
``F(u) = log f(exp(u))``.  Working with ``F`` keeps exponential families
(``exp(x**a) - 1`` at ``x = 1e3`` is far beyond float range) and the
counterexample sequences (arguments near ``2**1000``) representable, while
``f`` itself is still available through ``__call__``.

The value ``+inf`` (``math.inf``) is the infinity marker: a generalized Young
function returns it beyond its ``ceiling`` and it propagates through every
arithmetic operation used here.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np
from scipy.optimize import brentq

from ..errors import DomainError, PreconditionError, RangeError

INF = math.inf
LOG2 = math.log(2.0)

# log-x bracket used by numeric inverses; exp(+-800) covers every float
_U_MIN, _U_MAX = -800.0, 800.0


def _log_expm1(z):
    """log(exp(z) - 1) for z >= 0 without overflow."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        small = np.log(np.expm1(np.minimum(z, 30.0)))
        large = z + np.log1p(-np.exp(-z))
    return np.where(z > 30.0, large, small)


def bisect_loginv(logf, w, iters: int = 90):
    """Smallest ``u`` with ``logf(u) >= w`` (left-continuous inverse in log-log form).

    Returns ``+inf`` where the level is never reached and ``-inf`` for ``w = -inf``.
    """
    w = np.asarray(w, dtype=float)
    lo = np.full(w.shape, _U_MIN)
    hi = np.full(w.shape, _U_MAX)
    with np.errstate(invalid="ignore"):
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            ok = logf(mid) >= w
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        never = ~(logf(np.full(w.shape, _U_MAX)) >= w)
    out = np.where(never, INF, hi)
    return np.where(w == -INF, -INF, out)


def _scalar_or_array(a):
    a = np.asarray(a, dtype=float)
    return float(a) if a.ndim == 0 else a


class YoungFunction:
    """Nondecreasing function with value 0 at 0, evaluated through its log-log form.

    Subclasses implement :meth:`logf`; the numeric inverse and the public
    ``__call__``/``inverse`` wrappers are shared.
    """

    family = "abstract"
    ceiling: float | None = None

    def logf(self, u):
        raise NotImplementedError

    def loginv(self, w):
        """``log f^{-1}(exp(w))`` with the generalized inverse ``inf{x : f(x) >= y}``."""
        return bisect_loginv(self.logf, w)

    @property
    def slope_at_infinity(self) -> float:
        """``lim f(x)/x`` as ``x -> inf`` (``inf`` for superlinear functions)."""
        return INF

    @property
    def is_generalized(self) -> bool:
        return self.ceiling is not None

    def log_value(self, x):
        """``log f(x)``; finite even where ``f(x)`` itself overflows."""
        x = self._check_domain(x)
        with np.errstate(divide="ignore"):
            return _scalar_or_array(self.logf(np.log(x)))

    def __call__(self, x):
        x = self._check_domain(x)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.exp(self.logf(np.log(x)))
        return _scalar_or_array(out)

    def inverse(self, y):
        """Generalized inverse ``inf{x : f(x) >= y}``."""
        y = np.asarray(y, dtype=float)
        if np.any(np.isnan(y)) or np.any(y < 0):
            raise DomainError("inverse needs y >= 0")
        with np.errstate(divide="ignore"):
            w = np.log(y)
        if self.ceiling is not None:
            top = float(self.logf(np.array(math.log(self.ceiling))))
            if np.any(w > top + 1e-12 * max(1.0, abs(top))):
                raise RangeError(
                    f"value exceeds sup f = {math.exp(top):.6g} below the ceiling {self.ceiling:g}"
                )
        with np.errstate(over="ignore"):
            out = np.exp(self.loginv(w))
        if np.any(np.isinf(out) & np.isfinite(y)):
            raise RangeError("value not attained by the function")
        return _scalar_or_array(out)

    def conjugate(self, **kwargs) -> "YoungFunction":
        from .transforms import conjugate

        return conjugate(self, **kwargs)

    def to_config(self) -> dict[str, Any]:
        raise NotImplementedError(f"{type(self).__name__} has no declarative form")

    @staticmethod
    def _check_domain(x):
        x = np.asarray(x, dtype=float)
        if np.any(np.isnan(x)) or np.any(x < 0):
            raise DomainError("Young functions are defined on [0, inf)")
        return x

    def __repr__(self) -> str:
        try:
            params = ", ".join(f"{k}={v!r}" for k, v in self.to_config().items() if k != "family")
        except NotImplementedError:
            params = ""
        return f"{type(self).__name__}({params})"


class Power(YoungFunction):
    """``scale * x**p`` with ``p >= 1``."""

    family = "power"

    def __init__(self, p: float, scale: float = 1.0):
        if not p >= 1.0:
            raise PreconditionError(f"Power needs p >= 1, got {p}")
        if not scale > 0.0:
            raise PreconditionError("Power needs a positive scale")
        self.p = float(p)
        self.scale = float(scale)
        self._logscale = math.log(self.scale)

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        return self._logscale + self.p * u

    def loginv(self, w):
        w = np.asarray(w, dtype=float)
        return (w - self._logscale) / self.p

    @property
    def slope_at_infinity(self) -> float:
        return INF if self.p > 1.0 else self.scale

    def to_config(self):
        cfg = {"family": self.family, "p": self.p}
        if self.scale != 1.0:
            cfg["scale"] = self.scale
        return cfg


class Linear(Power):
    """The identity ``x -> x`` (or ``scale * x``)."""

    family = "linear"

    def __init__(self, scale: float = 1.0):
        super().__init__(1.0, scale)

    def to_config(self):
        cfg = {"family": self.family}
        if self.scale != 1.0:
            cfg["scale"] = self.scale
        return cfg


class Barrier(YoungFunction):
    """0 on ``[0, ceiling]`` and ``+inf`` beyond: the conjugate of ``ceiling * x``."""

    family = "barrier"

    def __init__(self, ceiling: float):
        if not ceiling > 0:
            raise PreconditionError("barrier ceiling must be positive")
        self.ceiling = float(ceiling)
        self._lc = math.log(self.ceiling)

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u > self._lc, INF, -INF)

    def loginv(self, w):
        w = np.asarray(w, dtype=float)
        return np.where(w == -INF, -INF, self._lc)

    @property
    def slope_at_infinity(self) -> float:
        return INF

    def to_config(self):
        return {"family": self.family, "ceiling": self.ceiling}


def _exp_power_tangent(alpha: float) -> float:
    """Root ``z > 0`` of ``alpha * z = 1 - exp(-z)``: the tangent-from-origin point in ``z = x**alpha``."""
    g = lambda z: alpha * z + math.expm1(-z)
    return brentq(g, 1e-12 + (1 - alpha), 2.0 / alpha + 10.0, xtol=1e-15, rtol=1e-15)


class ExpPower(YoungFunction):
    """``exp(x**alpha) - 1``.

    For ``alpha < 1`` the nominal formula is concave near 0; the stored function
    replaces it on ``[0, x_patch]`` by the chord from the origin to the point
    where that chord is tangent to the curve.  The result is the largest convex
    minorant of the formula and agrees with it beyond ``x_patch``.
    ``patch=False`` keeps the raw formula (used by the ``psi_alpha`` quasi-norm).
    """

    family = "exp_power"

    def __init__(self, alpha: float, patch: bool = True):
        if not alpha > 0.0:
            raise PreconditionError(f"ExpPower needs alpha > 0, got {alpha}")
        self.alpha = float(alpha)
        self.patch = bool(patch)
        self.x_patch = 0.0
        self._up = -INF
        self._Fp = -INF
        if self.patch and self.alpha < 1.0:
            z = _exp_power_tangent(self.alpha)
            self.x_patch = z ** (1.0 / self.alpha)
            self._up = math.log(self.x_patch)
            self._Fp = float(_log_expm1(z))

    def _raw(self, u):
        with np.errstate(over="ignore"):
            z = np.exp(self.alpha * np.asarray(u, dtype=float))
        return _log_expm1(z)

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        raw = self._raw(u)
        if self._up == -INF:
            return raw
        return np.where(u < self._up, self._Fp + (u - self._up), raw)

    def loginv(self, w):
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore"):
            raw = np.log(np.logaddexp(0.0, w)) / self.alpha
        if self._up == -INF:
            return raw
        return np.where(w < self._Fp, self._up + (w - self._Fp), raw)

    def to_config(self):
        cfg = {"family": self.family, "alpha": self.alpha}
        if not self.patch:
            cfg["patch"] = False
        return cfg


class PowerLog(YoungFunction):
    """``x**p * log(e + x)**c``, patched near 0 by a chord when needed.

    Only meant up to equivalence (slope tests and domination targets).
    """

    family = "power_log"

    def __init__(self, p: float, c: float):
        if not p >= 1.0:
            raise PreconditionError("PowerLog needs p >= 1")
        if p == 1.0 and c < 0:
            raise PreconditionError("x * log(e + x)**c with c < 0 is sublinear, not a Young function")
        self.p = float(p)
        self.c = float(c)
        self._up = -INF
        self._Fp = -INF
        # chord patch where F(u) - u fails to be nondecreasing
        u = np.linspace(-40.0, 40.0, 16001)
        g = self._raw(u) - u
        j = int(np.argmin(g))
        if j > 0:
            self._up = float(u[j])
            self._Fp = float(self._raw(np.array(u[j])))
        # convexity of the patched function on a linear grid
        x = np.linspace(0.0, 50.0, 5001)[1:]
        vals = np.exp(self.logf(np.log(x)))
        if np.any(np.diff(vals, 2) < -1e-9 * np.abs(vals[2:])):
            raise PreconditionError(f"PowerLog({p}, {c}) is not convex even after patching")

    def _raw(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return self.p * u + self.c * np.log(np.logaddexp(1.0, u))

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        raw = self._raw(u)
        if self._up == -INF:
            return raw
        return np.where(u < self._up, self._Fp + (u - self._up), raw)

    @property
    def slope_at_infinity(self) -> float:
        return INF if (self.p > 1.0 or self.c > 0) else 1.0

    def to_config(self):
        return {"family": self.family, "p": self.p, "c": self.c}


def _second_diff(u, Y):
    """Divided second differences of ``Y`` at the interior knots, padded to the knot count."""
    s = np.diff(Y) / np.diff(u)
    d2 = np.abs(2.0 * np.diff(s) / (u[2:] - u[:-2]))
    return np.concatenate([d2[:1], d2, d2[-1:]])


def _geometric_intervals(u, F):
    """Intervals where interpolating ``log F`` beats interpolating ``F``.

    Linear interpolation of ``Y`` errs by about ``|Y''| h**2 / 8``; in ``F``
    units the ``log F`` scheme errs by ``F |(log F)''| h**2 / 8``.  Power laws
    (``F`` linear in ``u``) keep the plain scheme, exponential laws
    (``log F`` linear in ``u``) switch.
    """
    n = u.size
    if n < 3:
        return np.zeros(max(n - 1, 0), dtype=bool)
    pos = F > 0
    G = np.log(np.where(pos, F, 1.0))
    cF = _second_diff(u, F)
    cG = _second_diff(u, G)
    bad = ~pos
    bad_win = bad | np.concatenate([bad[1:], [False]]) | np.concatenate([[False], bad[:-1]])
    cG = np.where(bad_win, INF, cG)
    cFi = np.maximum(cF[:-1], cF[1:])
    cGi = np.maximum(cG[:-1], cG[1:])
    Fmid = np.maximum(F[:-1], F[1:])
    with np.errstate(invalid="ignore"):
        return pos[:-1] & pos[1:] & (Fmid * cGi < cFi)


def _interp_knots(u, uk, Fk, geo):
    """Piecewise interpolation through ``(uk, Fk)`` using the scheme chosen per interval."""
    i = np.clip(np.searchsorted(uk, u, side="right") - 1, 0, uk.size - 2)
    t = (u - uk[i]) / (uk[i + 1] - uk[i])
    lin = Fk[i] + t * (Fk[i + 1] - Fk[i])
    g = geo[i]
    a = np.log(np.where(g, Fk[i], 1.0))
    b = np.log(np.where(g, Fk[i + 1], 1.0))
    return np.where(g, np.exp(a + t * (b - a)), lin)


def _interp_knots_inv(w, uk, Fk, geo):
    """Inverse of :func:`_interp_knots` for strictly increasing ``Fk``."""
    i = np.clip(np.searchsorted(Fk, w, side="right") - 1, 0, Fk.size - 2)
    lin = (w - Fk[i]) / (Fk[i + 1] - Fk[i])
    g = geo[i] & (w > 0)
    a = np.log(np.where(g, Fk[i], 1.0))
    b = np.log(np.where(g, Fk[i + 1], 1.0))
    lw = np.log(np.where(g, w, 1.0))
    t = np.where(g, (lw - a) / np.where(g, b - a, 1.0), lin)
    return uk[i] + t * (uk[i + 1] - uk[i])


class Tabulated(YoungFunction):
    """Function known at knots, interpolated in log-log space.

    Between knots either ``F = log f`` or ``log F`` is interpolated linearly,
    whichever is locally straighter, so both power and exponential growth are
    reproduced accurately.  Knots may start with zero values (``F = -inf``);
    between the last zero knot and the first positive one the interpolation is
    linear in ``(x, f)``.  Outside the knot range the end log-log slopes are
    extended.
    """

    family = "tabulated"

    def __init__(self, u, F, ceiling: float | None = None, label: str = "tabulated", flags=None):
        u = np.asarray(u, dtype=float)
        F = np.asarray(F, dtype=float)
        if u.ndim != 1 or u.shape != F.shape or u.size < 2:
            raise PreconditionError("tabulated knots must be two matching 1-d arrays of length >= 2")
        if np.any(np.isnan(u)) or np.any(np.isnan(F)) or np.any(np.isinf(u)) or np.any(F == INF):
            raise PreconditionError("tabulated knots must be finite (zeros allowed as -inf logs)")
        if np.any(np.diff(u) <= 0):
            raise PreconditionError("tabulated abscissae must be strictly increasing")
        finite = np.isfinite(F)
        if finite.sum() < 2:
            raise PreconditionError("tabulated function needs at least two positive values")
        first = int(np.argmax(finite))
        if not finite[first:].all() or np.any(np.diff(F[first:]) < 0):
            raise PreconditionError("tabulated values must be nondecreasing")
        self._u = u
        self._F = F
        self._first = first
        self.ceiling = None if ceiling is None else float(ceiling)
        self.label = label
        self.flags = dict(flags or {})
        uf, Ff = u[first:], F[first:]
        self._uf, self._Ff = uf, Ff
        self._s0 = (Ff[1] - Ff[0]) / (uf[1] - uf[0])
        self._sN = (Ff[-1] - Ff[-2]) / (uf[-1] - uf[-2])
        # strictly increasing subsequence for the inverse, first occurrence of ties
        keep = np.concatenate(([True], np.diff(Ff) > 0))
        self._inv_F, self._inv_u = Ff[keep], uf[keep]
        self._geo = _geometric_intervals(uf, Ff)
        self._inv_geo = _geometric_intervals(self._inv_u, self._inv_F) if self._inv_F.size >= 2 else self._geo

    @classmethod
    def from_knots(cls, knots, ceiling=None, label="tabulated"):
        """Build from ``(x, y)`` pairs with ``x >= 0``, ``y >= 0`` (a knot at ``x = 0`` must have ``y = 0``)."""
        arr = np.asarray(knots, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise PreconditionError("knots must be (x, y) pairs")
        if np.any(arr < 0):
            raise PreconditionError("knots must be nonnegative")
        zero = arr[:, 0] == 0
        if np.any(arr[zero, 1] != 0):
            raise PreconditionError("a Young function vanishes at 0")
        arr = arr[~zero]
        with np.errstate(divide="ignore"):
            return cls(np.log(arr[:, 0]), np.log(arr[:, 1]), ceiling=ceiling, label=label)

    @property
    def knots(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.column_stack([np.exp(self._u), np.exp(self._F)])

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        uf, Ff = self._uf, self._Ff
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            out = _interp_knots(u, uf, Ff, self._geo)
            right = Ff[-1] + self._sN * (u - uf[-1])
            out = np.where(u > uf[-1], right, out)
            if self._first == 0:
                left = Ff[0] + self._s0 * (u - uf[0])
                out = np.where(u < uf[0], left, out)
            else:
                xl, xr = math.exp(self._u[self._first - 1]), math.exp(uf[0])
                frac = (np.exp(u) - xl) / (xr - xl)
                lin = np.where(frac > 0, Ff[0] + np.log(np.where(frac > 0, frac, 1.0)), -INF)
                out = np.where(u < uf[0], lin, out)
            out = np.where(u == -INF, -INF, out)
        if self.ceiling is not None:
            out = np.where(u > math.log(self.ceiling), INF, out)
        return out

    def loginv(self, w):
        w = np.asarray(w, dtype=float)
        Fi, ui = self._inv_F, self._inv_u
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            if Fi.size >= 2:
                out = _interp_knots_inv(w, ui, Fi, self._inv_geo)
            else:
                out = np.full(w.shape, ui[0])
            if self._sN > 0:
                right = ui[-1] + (w - Fi[-1]) / self._sN
            else:
                right = np.full(w.shape, INF)
            out = np.where(w > Fi[-1], right, out)
            if self._first == 0:
                left = ui[0] + (w - Fi[0]) / self._s0 if self._s0 > 0 else np.full(w.shape, -INF)
                out = np.where(w < Fi[0], left, out)
            else:
                xl, xr = math.exp(self._u[self._first - 1]), math.exp(ui[0])
                lin = np.log(xl + (xr - xl) * np.exp(np.minimum(w - Fi[0], 0.0)))
                out = np.where(w < Fi[0], lin, out)
            out = np.where(w == -INF, -INF, out)
        if self.ceiling is not None:
            out = np.minimum(out, math.log(self.ceiling))
        return out

    @property
    def slope_at_infinity(self) -> float:
        if self.ceiling is not None or self._sN > 1.0 + 1e-9:
            return INF
        return float(math.exp(self._Ff[-1] - self._uf[-1]))

    def to_config(self):
        cfg = {"family": self.family, "label": self.label, "knots": self.knots.tolist()}
        if self.ceiling is not None:
            cfg["ceiling"] = self.ceiling
        return cfg


class Composed(YoungFunction):
    """``outer(inner(x))``."""

    family = "composed"

    def __init__(self, outer: YoungFunction, inner: YoungFunction):
        self.outer = outer
        self.inner = inner
        self.ceiling = inner.ceiling

    def logf(self, u):
        with np.errstate(invalid="ignore"):
            inner = self.inner.logf(u)
            out = self.outer.logf(inner)
        return np.where(inner == INF, INF, out)

    def loginv(self, w):
        return self.inner.loginv(self.outer.loginv(w))

    def to_config(self):
        return {"family": self.family, "outer": self.outer.to_config(), "inner": self.inner.to_config()}


class InverseOf(YoungFunction):
    """The generalized inverse ``f^{-1}`` as a function in its own right."""

    family = "inverse"

    def __init__(self, base: YoungFunction):
        self.base = base

    def logf(self, u):
        return self.base.loginv(u)

    def loginv(self, w):
        return self.base.logf(w)

    def to_config(self):
        return {"family": self.family, "base": self.base.to_config()}


class OverX(YoungFunction):
    """``f(x) / x`` (written ``psi~`` in the stationary estimates)."""

    family = "over_x"

    def __init__(self, base: YoungFunction):
        self.base = base
        self.ceiling = base.ceiling

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(invalid="ignore"):
            out = self.base.logf(u) - u
        # f(x)/x -> f'(0) at the origin; report 0 there only if the limit is 0
        return np.where(u == -INF, -INF, out)

    def to_config(self):
        return {"family": self.family, "base": self.base.to_config()}


def _log_h(u):
    """log of x**2 on [0, 1] and 2x - 1 beyond."""
    u = np.asarray(u, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.where(u <= 0, 2.0 * u, u + np.log(2.0 - np.exp(-np.maximum(u, 0.0))))


class Normalized(YoungFunction):
    """A Young function brought to the form ``lim psi(x)/x = 0``, ``psi(1) >= 1``.

    ``mode`` is ``"identity"`` (already normalized), ``"scaled"``
    (``psi / psi(1)``) or ``"patched"``: ``max(h(x), psi(x) - psi(1))`` with
    ``h(x) = x**2`` on ``[0, 1]`` and ``2x - 1`` beyond.
    """

    family = "normalized"

    def __init__(self, base: YoungFunction, mode: str):
        if mode not in ("identity", "scaled", "patched"):
            raise PreconditionError(f"unknown normalization mode {mode!r}")
        self.base = base
        self.mode = mode
        self.ceiling = base.ceiling
        self._c = float(base.logf(np.array(0.0)))

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        A = self.base.logf(u)
        if self.mode == "identity":
            return A
        if self.mode == "scaled":
            return A - self._c
        c = self._c
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            shifted = np.where(A > c, A + np.log1p(-np.exp(np.minimum(c - A, 0.0))), -INF)
        shifted = np.where(A == INF, INF, shifted)
        return np.maximum(_log_h(u), shifted)

    def loginv(self, w):
        w = np.asarray(w, dtype=float)
        if self.mode == "identity":
            return self.base.loginv(w)
        if self.mode == "scaled":
            return self.base.loginv(w + self._c)
        with np.errstate(divide="ignore"):
            h_inv = np.where(w <= 0, 0.5 * w, np.logaddexp(w, 0.0) - LOG2)
        return np.minimum(h_inv, self.base.loginv(np.logaddexp(w, self._c)))

    @property
    def slope_at_infinity(self) -> float:
        s = self.base.slope_at_infinity
        if self.mode == "scaled":
            return s / math.exp(self._c)
        if self.mode == "patched":
            return max(2.0, s)
        return s

    def to_config(self):
        return {"family": self.family, "mode": self.mode, "base": self.base.to_config()}


_FAMILIES = {
    "power": lambda c: Power(c["p"], c.get("scale", 1.0)),
    "linear": lambda c: Linear(c.get("scale", 1.0)),
    "exp_power": lambda c: ExpPower(c["alpha"], c.get("patch", True)),
    "power_log": lambda c: PowerLog(c["p"], c["c"]),
    "barrier": lambda c: Barrier(c["ceiling"]),
    "tabulated": lambda c: Tabulated.from_knots(c["knots"], c.get("ceiling"), c.get("label", "tabulated")),
    "composed": lambda c: Composed(from_config(c["outer"]), from_config(c["inner"])),
    "inverse": lambda c: InverseOf(from_config(c["base"])),
    "over_x": lambda c: OverX(from_config(c["base"])),
    "normalized": lambda c: Normalized(from_config(c["base"]), c["mode"]),
}


def from_config(cfg: dict[str, Any]) -> YoungFunction:
    """Rebuild a function from its declarative description (see ``to_config``)."""
    try:
        family = cfg["family"]
    except (KeyError, TypeError):
        raise PreconditionError(f"function descriptor needs a 'family' key: {cfg!r}") from None
    if family not in _FAMILIES:
        raise PreconditionError(f"unknown family {family!r}; known: {sorted(_FAMILIES)}")
    try:
        return _FAMILIES[family](cfg)
    except KeyError as exc:
        raise PreconditionError(f"descriptor for {family!r} is missing {exc}") from None
