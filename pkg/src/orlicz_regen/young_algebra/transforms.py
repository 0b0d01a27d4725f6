"""Suprema-defined transforms of Young functions.

All transforms share one engine: for every requested ``u = log x`` maximize a
log-space objective over ``v = log y`` on a uniform grid, extend the window
when the maximizer sits on its upper edge, and polish the grid argmax with a
golden-section search between its two neighbours.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import PreconditionError
from .functions import (
    INF,
    LOG2,
    Barrier,
    Composed,
    InverseOf,
    Linear,
    OverX,
    Power,
    Tabulated,
    YoungFunction,
)

V_LO, V_HI, V_STEP, V_CAP = -40.0, 80.0, 0.1, 2500.0
V_LO_SHIFT = -30.0  # window widening starts below log x = -30
GOLDEN_ITERS = 64
_GR = (math.sqrt(5.0) - 1.0) / 2.0
_CHUNK = 256

# default tabulation window in log x: [1e-10, 1e20], sparse tail to exp(1000)
TAB_LO, TAB_HI, TAB_N = math.log(1e-10), math.log(1e20), 2048
TAB_TAIL, TAB_N_TAIL = 1000.0, 256


def log_diff(A, B):
    """``log(exp(A) - exp(B))`` where ``A > B``; ``-inf`` otherwise.  ``A = inf`` wins over finite ``B``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        d = np.where(A > B, A + np.log1p(-np.exp(np.minimum(B - A, 0.0))), -INF)
    d = np.where((A == INF) & (B < INF), INF, d)
    return np.where(B == INF, -INF, d)


def _clean(vals):
    return np.where(np.isnan(vals), -INF, vals)


def log_sup(objective, u, lo=V_LO, hi=V_HI, step=V_STEP, cap=V_CAP):
    """Row-wise ``max_v objective(u, v)`` for a vector of ``u``.

    ``objective`` takes broadcastable arrays ``u[:, None]`` and ``v[None, :]``.
    Returns ``(value, argmax_v)``; the value is ``+inf`` when the objective keeps
    increasing up to ``v = cap``.
    """
    u = np.asarray(u, dtype=float).ravel()
    value = np.full(u.shape, -INF)
    arg = np.full(u.shape, np.nan)
    for start in range(0, u.size, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, u.size))
        # for tiny x the maximizer can sit near y ~ x^{-2} or y ~ x^2, outside
        # the default window; widen it in proportion to |log x|
        ext = 2.0 * max(0.0, -float(np.min(u[idx])) + V_LO_SHIFT)
        a, b = lo - ext, hi + ext
        while idx.size:
            v = np.arange(a, b + 0.5 * step, step)
            uu = u[idx]
            vals = _clean(objective(uu[:, None], v[None, :]))
            j = np.argmax(vals, axis=1)
            m = vals[np.arange(idx.size), j]
            at_edge = (j == v.size - 1) & np.isfinite(m)
            done = ~at_edge | (b >= cap)
            # polish interior maxima
            fin = done & np.isfinite(m)
            if fin.any():
                jj = j[fin]
                left = v[np.maximum(jj - 1, 0)]
                right = v[np.minimum(jj + 1, v.size - 1)]
                vbest, fbest = _golden(objective, uu[fin], left, right)
                better = fbest > m[fin]
                m_f = np.where(better, fbest, m[fin])
                arg_f = np.where(better, vbest, v[jj])
                m[fin] = m_f
                arg[idx[fin]] = arg_f
            inf_rows = at_edge & (b >= cap)
            m[inf_rows] = INF
            value[idx[done]] = m[done]
            arg[idx[~fin & done]] = v[j[~fin & done]]
            idx = idx[~done]
            a, b = b - step, min(cap, b + 2.0 * (b - lo))
    return value, arg


def _golden(objective, u, a, b):
    c = b - _GR * (b - a)
    d = a + _GR * (b - a)
    fc = _clean(objective(u, c))
    fd = _clean(objective(u, d))
    for _ in range(GOLDEN_ITERS):
        left = fc >= fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        c_new = np.where(left, b - _GR * (b - a), d)
        d_new = np.where(left, c, a + _GR * (b - a))
        fp = _clean(objective(u, np.where(left, c_new, d_new)))
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = c_new, d_new
    return np.where(fc >= fd, c, d), np.maximum(fc, fd)


class SupTransform(YoungFunction):
    """Generalized Young function defined pointwise by a supremum over ``y``."""

    family = "sup_transform"
    kind = "abstract"

    def __init__(self):
        self._tab = None

    def objective(self, u, v):
        raise NotImplementedError

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        shape = u.shape
        flat = u.ravel()
        out = np.full(flat.shape, -INF)
        live = flat > -INF
        if live.any():
            val, _ = log_sup(self.objective, flat[live])
            out[live] = val
        return out.reshape(shape)

    def argmax(self, x):
        """Maximizing ``y`` for each ``x`` (useful for the optimality constructions)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            _, v = log_sup(self.objective, np.log(x))
        return np.exp(v)

    def tabulated(self, lo=TAB_LO, hi=TAB_HI, n=TAB_N) -> Tabulated:
        """Cached tabulation on ``n`` log-spaced knots (fast inverse, composition)."""
        key = (lo, hi, n)
        if self._tab is None or self._tab[0] != key:
            self._tab = (key, tabulate(self, lo, hi, n, label=self.kind))
        return self._tab[1]

    def loginv(self, w, iters: int = 40):
        """Inverse from the cached table, polished by bisection on the exact values."""
        w = np.asarray(w, dtype=float)
        guess = np.asarray(self.tabulated().loginv(w), dtype=float)
        live = np.isfinite(guess) & np.isfinite(w)
        if not live.any():
            return guess
        ww, g = w[live], guess[live]
        lo, hi = g - 0.05, g + 0.05
        for _ in range(8):
            bad_lo = self.logf(lo) >= ww
            bad_hi = ~(self.logf(hi) >= ww)
            if not (bad_lo.any() or bad_hi.any()):
                break
            lo = np.where(bad_lo, lo - 4 * (hi - lo), lo)
            hi = np.where(bad_hi, hi + 4 * (hi - lo), hi)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            ok = self.logf(mid) >= ww
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        out = guess.copy()
        out[live] = hi
        return out


class Rho(SupTransform):
    """``rho(x) = sup_y (phi(x y) - psi(y)) / y``."""

    kind = "rho"

    def __init__(self, phi: YoungFunction, psi: YoungFunction):
        super().__init__()
        self.phi, self.psi = phi, psi

    def objective(self, u, v):
        return log_diff(self.phi.logf(u + v), self.psi.logf(v)) - v

    def to_config(self):
        return {"family": "rho", "phi": self.phi.to_config(), "psi": self.psi.to_config()}


class Zeta(SupTransform):
    """``zeta(x) = sup_y phi(x y) - psi(y) / y``."""

    kind = "zeta"

    def __init__(self, phi: YoungFunction, psi: YoungFunction):
        super().__init__()
        self.phi, self.psi = phi, psi

    def objective(self, u, v):
        return log_diff(self.phi.logf(u + v), self.psi.logf(v) - v)

    def to_config(self):
        return {"family": "zeta", "phi": self.phi.to_config(), "psi": self.psi.to_config()}


class Conjugate(SupTransform):
    """Legendre transform ``f*(y) = sup_x x y - f(x)``."""

    kind = "conjugate"

    def __init__(self, base: YoungFunction):
        super().__init__()
        self.base = base
        s = base.slope_at_infinity
        self.ceiling = None if s == INF else float(s)

    def objective(self, u, v):
        return log_diff(u + v, self.base.logf(v))

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        out = super().logf(u)
        if self.ceiling is not None:
            out = np.where(u > math.log(self.ceiling), INF, out)
        return out

    def to_config(self):
        return {"family": "conjugate", "base": self.base.to_config()}


def knot_grid(lo=TAB_LO, hi=TAB_HI, n=TAB_N, tail=TAB_TAIL, n_tail=TAB_N_TAIL) -> np.ndarray:
    """Uniform knots on ``[lo, hi]`` plus ``n_tail`` knots geometric in ``u`` up to ``tail``.

    The sparse tail keeps exponential-type functions usable far beyond ``exp(hi)``
    where their conjugates put the maximizers.
    """
    u = np.linspace(lo, hi, n)
    if tail > hi > 0 and n_tail > 0:
        extra = hi * (tail / hi) ** (np.arange(1, n_tail + 1) / n_tail)
        u = np.concatenate([u, extra])
    return u


def _boundary(pred, a, b, iters=60):
    """Point in ``[a, b]`` where ``pred`` switches from False to True."""
    for _ in range(iters):
        m = 0.5 * (a + b)
        if pred(m):
            b = m
        else:
            a = m
    return a, b


def tabulate(f: YoungFunction, lo=TAB_LO, hi=TAB_HI, n=TAB_N, label="tabulated", tail=TAB_TAIL) -> Tabulated:
    """Sample ``f`` on log-spaced knots (see :func:`knot_grid`).

    Knots where ``f`` is infinite are cut and turned into a ceiling; a zero
    region near the origin is kept, with its right end located by bisection.
    """
    ceiling = getattr(f, "ceiling", None)
    if ceiling is not None:
        hi = min(hi, math.log(ceiling) - 1e-9)
        tail = hi
    u = knot_grid(lo, hi, n, tail)
    F = np.asarray(f.logf(u), dtype=float)
    infinite = F == INF
    flags = {}
    if infinite.any():
        k = int(np.argmax(infinite))
        if k > 0:
            _, ub = _boundary(lambda m: float(f.logf(np.array(m))) == INF, u[k - 1], u[k])
        else:
            ub = u[0]
        flags["restricted_to"] = float(math.exp(u[k - 1])) if k > 0 else 0.0
        if ub < 700.0:
            ceiling = math.exp(ub) if ceiling is None else min(ceiling, math.exp(ub))
        u, F = u[:k], F[:k]
    finite = np.isfinite(F)
    if finite.sum() < 2:
        if ceiling is None:
            raise PreconditionError("function vanishes on the whole tabulation window")
        return Barrier(ceiling)
    # enforce monotonicity against refinement noise
    F = np.where(finite, np.maximum.accumulate(np.where(finite, F, -INF)), F)
    first = int(np.argmax(finite))
    if first > 0:
        ua, _ = _boundary(lambda m: float(f.logf(np.array(m))) > -INF, u[first - 1], u[first])
        # log f falls to -inf at the boundary; cluster knots there
        h = u[first] - u[first - 1]
        extra = ua + np.geomspace(1e-9, 20.0 * h, 80)
        extra = extra[extra < u[-1]]
        Fx = np.asarray(f.logf(extra), dtype=float)
        u = np.concatenate([[ua], extra, u[first:]])
        F = np.concatenate([[-INF], Fx, F[first:]])
        order = np.argsort(u, kind="stable")
        u, F = u[order], F[order]
        keep = np.concatenate(([True], np.diff(u) > 1e-12))
        u, F = u[keep], F[keep]
        tail = np.isfinite(F[1:])
        F[1:] = np.where(tail, np.maximum.accumulate(np.where(tail, F[1:], -INF)), F[1:])
        z = int(np.argmax(np.isfinite(F)))
        u, F = u[z - 1 :], F[z - 1 :]
    return Tabulated(u, F, ceiling=ceiling, label=label, flags=flags)


def conjugate(f: YoungFunction, tabulate_result: bool = False) -> YoungFunction:
    """Legendre transform.

    Closed form for power functions.  Otherwise the result evaluates the
    supremum at every requested point (its inverse goes through a cached
    tabulation); ``tabulate_result=True`` returns that tabulation instead.
    """
    if isinstance(f, Power):
        if f.p == 1.0:
            return Barrier(f.scale)
        q = f.p / (f.p - 1.0)
        coeff = (f.p - 1.0) * f.scale * (f.scale * f.p) ** (-q)
        return Power(q, coeff)
    if isinstance(f, Barrier):
        return Linear(f.ceiling)
    c = Conjugate(f)
    return c.tabulated() if tabulate_result else c


def rho_of(phi: YoungFunction, psi: YoungFunction, check: bool = True) -> Rho:
    """``rho_{phi,psi}``; ``psi`` must satisfy the normalization ``psi(x)/x -> 0``, ``psi(1) >= 1``."""
    if check:
        problems = assumption_A_violations(psi)
        if problems:
            raise PreconditionError("psi violates the normalization: " + "; ".join(problems))
    return Rho(phi, psi)


def zeta_of(phi: YoungFunction, psi: YoungFunction, check: bool = True) -> Zeta:
    """``zeta_{phi,psi}``; needs ``lim_{x->0} psi(x)/x = 0``."""
    if check and not vanishes_linearly(psi):
        raise PreconditionError("zeta needs lim_{x->0} psi(x)/x = 0")
    return Zeta(phi, psi)


def vanishes_linearly(psi: YoungFunction) -> bool:
    """Numerical test of ``lim_{x->0} psi(x)/x = 0`` from the ratio at ``1e-6`` and ``1e-12``."""
    u1, u2 = math.log(1e-6), math.log(1e-12)
    r1 = float(psi.logf(np.array(u1))) - u1
    r2 = float(psi.logf(np.array(u2))) - u2
    return r1 <= math.log(1e-6) or r2 < r1 + math.log1p(-1e-3)


def assumption_A_violations(psi: YoungFunction) -> list[str]:
    problems = []
    if not vanishes_linearly(psi):
        problems.append("lim_{x->0} psi(x)/x != 0")
    if float(psi.logf(np.array(0.0))) < -1e-12:
        problems.append("psi(1) < 1")
    return problems


def eta_nu(phi: YoungFunction, psi: YoungFunction) -> YoungFunction:
    """``eta = (psi*)^{-1} o phi*``, the function whose conjugate is equivalent to ``rho``."""
    eta = Composed(InverseOf(_fast(conjugate(psi))), conjugate(phi))
    return tabulate(eta, label="eta")


def eta_pi(phi: YoungFunction, psi: YoungFunction) -> YoungFunction:
    """``phi^{-1}(psi(x)/x)``, whose conjugate composed with ``phi`` is equivalent to ``zeta``."""
    return tabulate(Composed(InverseOf(phi), OverX(psi)), label="eta_pi")


def _fast(f: YoungFunction) -> YoungFunction:
    return f.tabulated() if isinstance(f, SupTransform) else f


def tilde_phi(psi: YoungFunction, rho: YoungFunction) -> YoungFunction:
    """``(psi* o rho*)*``: the best ``phi`` obtainable from given ``psi`` and ``rho``."""
    inner = Composed(conjugate(psi), _fast(conjugate(_fast(rho))))
    return conjugate(tabulate(inner, label="psi*_rho*"))


def check_overx(psi: YoungFunction, n: int = 400) -> None:
    """Raise unless ``psi(x)/x`` is strictly increasing from 0 to infinity on a log grid."""
    u = np.linspace(math.log(1e-8), math.log(1e12), n)
    g = OverX(psi).logf(u)
    if np.any(np.diff(g) <= 0) or not vanishes_linearly(psi) or psi.slope_at_infinity < INF:
        raise PreconditionError("psi(x)/x must increase strictly from 0 to infinity")


def kappa_of(zeta: YoungFunction, psi: YoungFunction):
    """Return ``(kappa, theta)`` with ``kappa^{-1} = zeta^{-1} * (psi/x)^{-1}`` and ``theta = kappa^{-1} o (psi/x)``."""
    check_overx(psi)
    zeta = _fast(zeta)
    psit = OverX(psi)
    w = np.linspace(TAB_LO, TAB_HI, TAB_N)
    kinv = np.asarray(zeta.loginv(w), float) + np.asarray(psit.loginv(w), float)
    ok = np.isfinite(kinv)
    kinv, w = kinv[ok], w[ok]
    keep = np.concatenate(([True], np.diff(kinv) > 0))
    kappa = Tabulated(kinv[keep], w[keep], label="kappa")
    theta = tabulate(Composed(InverseOf(kappa), psit), label="theta")
    return kappa, theta


def improvement_factor(phi: YoungFunction, r: float, n: int = 400) -> float:
    """``g(r) = sup_x x / phi^{-1}(phi(x) / r)`` on a log grid of ``x``."""
    u = np.linspace(math.log(1e-6), math.log(1e12), n)
    w = phi.logf(u) - math.log(r)
    return float(np.exp(np.max(u - phi.loginv(w))))
