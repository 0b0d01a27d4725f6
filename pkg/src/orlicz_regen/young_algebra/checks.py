"""Pointwise numerical checks of the two-sided inequalities between derived functions.

Every check evaluates both sides on a log grid and counts violations of
``lhs <= rhs * (1 + rtol) + atol``.  Comparisons are done on logarithms so
exponential-type functions can be checked far past float range.
"""

from __future__ import annotations

import math

import numpy as np

from .domination import normalize_assumption_A
from .functions import INF, LOG2, ExpPower, OverX, Power, YoungFunction
from .transforms import conjugate, eta_nu, eta_pi, kappa_of, rho_of, zeta_of

RTOL, ATOL = 1e-6, 1e-12

# (phi, psi) pairs shipped with the package and the x-range used to check them;
# exponential pairs use a shorter range because their conjugates put the
# maximizers near exp(x**2)
BUILTIN_PAIRS = {
    "x2_x4": (lambda: Power(2.0), lambda: Power(4.0), (0.1, 100.0)),
    "x3_x6": (lambda: Power(3.0), lambda: Power(6.0), (0.1, 100.0)),
    "x2_exp1": (lambda: Power(2.0), lambda: ExpPower(1.0), (0.1, 100.0)),
    "exp1_exp2": (lambda: ExpPower(1.0), lambda: ExpPower(2.0), (0.1, 10.0)),
}


def builtin_pair(name: str):
    """``(phi, normalized psi, (x_lo, x_hi))`` for a built-in pair."""
    phi, psi, rng = BUILTIN_PAIRS[name]
    return phi(), normalize_assumption_A(psi(), with_witness=False), rng


def log_grid(x_lo: float, x_hi: float, n: int = 200) -> np.ndarray:
    return np.logspace(math.log10(x_lo), math.log10(x_hi), n)


def _le(log_lhs, log_rhs, rtol=RTOL, atol=ATOL):
    """Violation mask and the largest excess ``log lhs - log(rhs (1 + rtol) + atol)``."""
    log_lhs = np.asarray(log_lhs, dtype=float)
    log_rhs = np.asarray(log_rhs, dtype=float)
    with np.errstate(invalid="ignore"):
        bound = np.logaddexp(log_rhs + math.log1p(rtol), math.log(atol))
        excess = log_lhs - bound
    excess = np.where(np.isnan(excess), -INF, excess)
    return excess > 0, float(np.max(excess))


def _report(name, x, pieces):
    viol = np.zeros(x.shape, dtype=bool)
    worst = -INF
    for mask, w in pieces:
        viol |= mask
        worst = max(worst, w)
    return {
        "check": name,
        "holds": not viol.any(),
        "n_points": int(x.size),
        "n_violations": int(viol.sum()),
        "violating_x": x[viol].tolist(),
        "max_log_excess": worst,
    }


def check_inverse_sandwich(psi: YoungFunction, x: np.ndarray) -> dict:
    """``x <= (psi*)^{-1}(x) psi^{-1}(x) <= 2x``."""
    lx = np.log(x)
    mid = np.asarray(conjugate(psi).loginv(lx), float) + np.asarray(psi.loginv(lx), float)
    return _report("inverse_sandwich", x, [_le(lx, mid), _le(mid, lx + LOG2)])


def check_nu_sandwich(phi: YoungFunction, psi: YoungFunction, x: np.ndarray) -> dict:
    """``2 eta*(x/2) <= rho(x) <= eta*(2x)/2`` with ``eta = (psi*)^{-1} o phi*``."""
    lx = np.log(x)
    es = conjugate(eta_nu(phi, psi))
    rho = rho_of(phi, psi).logf(lx)
    lo = LOG2 + es.logf(lx - LOG2)
    hi = es.logf(lx + LOG2) - LOG2
    return _report("nu_legendre_sandwich", x, [_le(lo, rho), _le(rho, hi)])


def check_pi_sandwich(phi: YoungFunction, psi: YoungFunction, x: np.ndarray) -> dict:
    """``phi(eta*(x)) <= zeta(x) <= phi(eta*(2x))/2`` with ``eta = phi^{-1}(psi(x)/x)``."""
    lx = np.log(x)
    es = conjugate(eta_pi(phi, psi))
    zeta = zeta_of(phi, psi).logf(lx)
    lo = phi.logf(es.logf(lx))
    hi = phi.logf(es.logf(lx + LOG2)) - LOG2
    return _report("pi_legendre_sandwich", x, [_le(lo, zeta), _le(zeta, hi)])


def check_auxiliary(zeta: YoungFunction, psi: YoungFunction, x: np.ndarray) -> dict:
    """``K^{-1} x <= (theta*)^{-1}(x) (psi/x)^{-1}(kappa(x)) <= 2x``.

    ``K`` is not explicit, so the smallest admissible value on the grid is
    reported; only the upper inequality can be violated.
    """
    lx = np.log(x)
    kappa, theta = kappa_of(zeta, psi)
    ts = conjugate(theta)
    # (psi/x)^{-1} o kappa is theta^{-1}; inverting the same tabulated theta that
    # was conjugated keeps both factors consistent
    mid = np.asarray(ts.loginv(lx), float) + np.asarray(theta.loginv(lx), float)
    out = _report("auxiliary_estimate", x, [_le(mid, lx + LOG2)])
    out["K"] = float(np.exp(np.max(lx - mid)))
    return out


def ms_constant(F: YoungFunction, G: YoungFunction, x: np.ndarray, s: np.ndarray) -> float:
    """Smallest ``C`` with ``F(sx)/F(x) >= C^{-1} G(sx)/G(x)`` on the grids (``s >= 1``)."""
    lx = np.log(x)[:, None]
    ls = np.log(s)[None, :]
    lf = F.logf(lx + ls) - F.logf(lx)
    lg = G.logf(lx + ls) - G.logf(lx)
    return float(np.exp(np.max(lg - lf)))


def check_monotone_convex(f: YoungFunction, x: np.ndarray, rtol: float = 1e-6) -> dict:
    """Nondecreasing values and nondecreasing chord slopes on the finite part of the grid."""
    vals = np.asarray(f(x), float)
    fin = np.isfinite(vals)
    xv, v = x[fin], vals[fin]
    inc = np.diff(v) >= -rtol * np.abs(v[1:])
    slopes = np.diff(v) / np.diff(xv)
    conv = np.diff(slopes) >= -rtol * np.abs(slopes[1:]) - 1e-12
    return {
        "check": "monotone_convex",
        "holds": bool(inc.all() and conv.all()),
        "n_points": int(fin.sum()),
        "n_violations": int((~inc).sum() + (~conv).sum()),
    }


def run_builtin_checks(n: int = 200) -> list[dict]:
    """All sandwich and inverse checks for every built-in pair."""
    out = []
    for name in BUILTIN_PAIRS:
        phi, psi, (a, b) = builtin_pair(name)
        x = log_grid(a, b, n)
        rows = [
            check_inverse_sandwich(psi, log_grid(0.1, 1e6, n)),
            check_nu_sandwich(phi, psi, x),
            check_pi_sandwich(phi, psi, x),
            check_auxiliary(zeta_of(phi, psi), psi, log_grid(10.0, 1e6, n)),
        ]
        for r in rows:
            r["pair"] = name
        out.extend(rows)
    return out
