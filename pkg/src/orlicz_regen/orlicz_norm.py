"""Orlicz norms of atomic laws and samples.

``||X||_phi = inf{C > 0 : E phi(|X| / C) <= target}`` is found by bisection on
``log C``; the expectation is evaluated as a log-sum-exp so atoms far beyond
float range (the counterexample laws) are handled.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import PreconditionError
from .young_algebra.functions import INF, ExpPower, YoungFunction

C_MIN, C_MAX = 1e-12, 1e12
PROB_TOL = 1e-12


class AtomicDist:
    """Finite weighted-atom law, stored with log-magnitudes next to the values.

    ``truncated=True`` marks the head of an infinite law: the probabilities then
    sum to ``1 - tail_mass`` and ``tail_bound(phi, log_C)`` (optional) returns an
    upper bound for the tail's contribution to ``E phi(|X|/C)``.
    """

    def __init__(self, values, probs, *, truncated: bool = False, tail_bound: Callable | None = None):
        values = np.atleast_1d(np.asarray(values, dtype=float))
        probs = np.atleast_1d(np.asarray(probs, dtype=float))
        if values.shape != probs.shape or values.ndim != 1:
            raise PreconditionError("values and probs must be matching 1-d arrays")
        if values.size == 0:
            raise PreconditionError("empty distribution")
        if np.any(np.isnan(values)) or np.any(np.isinf(values)):
            raise PreconditionError("atom values must be finite (use from_logs for huge atoms)")
        with np.errstate(divide="ignore"):
            self._init(values, np.log(np.abs(values)), np.sign(values), probs, np.log(probs), truncated, tail_bound)

    def _init(self, values, log_abs, signs, probs, log_probs, truncated, tail_bound):
        if np.any(~(probs > 0)) and np.any(~(log_probs > -INF)):
            raise PreconditionError("atom probabilities must be positive")
        total = float(np.exp(logsumexp(log_probs)))
        if not truncated and abs(total - 1.0) > PROB_TOL:
            raise PreconditionError(f"probabilities sum to {total!r}, not 1")
        if truncated and total > 1.0 + PROB_TOL:
            raise PreconditionError("truncated law carries more than unit mass")
        self.values = values
        self.log_abs = log_abs
        self.signs = signs
        self.probs = probs
        self.log_probs = log_probs
        self.truncated = truncated
        self.tail_mass = max(0.0, 1.0 - total) if truncated else 0.0
        self.tail_bound = tail_bound

    @classmethod
    def from_logs(cls, log_abs, log_probs, signs=None, *, truncated=False, tail_bound=None) -> "AtomicDist":
        """Build from ``log|value|`` and ``log prob`` (values may overflow as floats)."""
        obj = cls.__new__(cls)
        log_abs = np.atleast_1d(np.asarray(log_abs, dtype=float))
        log_probs = np.atleast_1d(np.asarray(log_probs, dtype=float))
        if log_abs.size == 0 or log_abs.shape != log_probs.shape:
            raise PreconditionError("empty or mismatched log arrays")
        signs = np.ones_like(log_abs) if signs is None else np.asarray(signs, dtype=float)
        with np.errstate(over="ignore"):
            values = signs * np.exp(log_abs)
            probs = np.exp(log_probs)
        obj._init(values, log_abs, signs, probs, log_probs, truncated, tail_bound)
        return obj

    @classmethod
    def from_sample(cls, sample) -> "AtomicDist":
        x = np.asarray(sample, dtype=float).ravel()
        if x.size == 0:
            raise PreconditionError("empty sample")
        return cls(x, np.full(x.size, 1.0 / x.size))

    @classmethod
    def from_atoms(cls, atoms) -> "AtomicDist":
        """From ``(value, prob)`` pairs."""
        arr = np.asarray(list(atoms), dtype=float)
        if arr.size == 0:
            raise PreconditionError("empty distribution")
        return cls(arr[:, 0], arr[:, 1])

    def __len__(self) -> int:
        return int(self.values.size)

    def aggregated(self) -> "AtomicDist":
        """Merge atoms with equal values (sorted by value)."""
        uniq, inv = np.unique(self.values, return_inverse=True)
        p = np.bincount(inv, weights=self.probs)
        return AtomicDist(uniq, p, truncated=self.truncated, tail_bound=self.tail_bound)

    def mean(self) -> float:
        return float(np.sum(self.values * self.probs))

    def expect(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.sum(g(self.values) * self.probs))

    def scaled(self, c: float) -> "AtomicDist":
        return AtomicDist.from_logs(
            self.log_abs + (math.log(abs(c)) if c != 0 else -INF),
            self.log_probs,
            self.signs * np.sign(c),
            truncated=self.truncated,
        )

    def to_rows(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.probs.tolist()))

    def __repr__(self) -> str:
        return f"AtomicDist(n={len(self)}, mean={self.mean():.6g}, truncated={self.truncated})"


@dataclass
class NormResult:
    value: float
    status: str  # finite, overflow (finite, log in certificate), infinite_certified or budget_exhausted
    residual: float = math.nan  # E phi(|X|/value) / target
    certificate: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return self.status == "finite"

    def to_dict(self) -> dict:
        return {"value": self.value, "status": self.status, "residual": self.residual, "certificate": self.certificate}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), allow_nan=True)


def log_expectation(dist: AtomicDist, phi: YoungFunction, log_C: float) -> float:
    """``log E phi(|X| / C)`` over the represented atoms."""
    with np.errstate(invalid="ignore"):
        terms = dist.log_probs + phi.logf(dist.log_abs - log_C)
    terms = np.where(np.isnan(terms), -INF, terms)
    if np.any(terms == INF):
        return INF
    return float(logsumexp(terms))


def _bisect_log_C(g, lo, hi, rel_tol=1e-13, max_iter=400):
    """Smallest ``log C`` in ``[lo, hi]`` with ``g(log C) <= 0`` for nonincreasing ``g``."""
    for _ in range(max_iter):
        if hi - lo <= rel_tol * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if g(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return hi


def orlicz_norm(dist, phi: YoungFunction, target: float = 1.0) -> NormResult:
    """Orlicz norm of an :class:`AtomicDist` or a sample (sequence of reals)."""
    if not isinstance(dist, AtomicDist):
        dist = AtomicDist.from_sample(dist)
    if target <= 0:
        raise PreconditionError("target must be positive")
    log_t = math.log(target)
    nz = dist.log_abs > -INF
    if not nz.any():
        return NormResult(0.0, "finite", 0.0)
    top = float(np.max(dist.log_abs[nz]))

    tail = dist.tail_bound if dist.truncated else None

    def g(log_C):
        le = log_expectation(dist, phi, log_C)
        if tail is not None:
            extra = tail(phi, log_C)
            if extra > 0:
                le = float(np.logaddexp(le, math.log(extra)))
        return le - log_t

    log_cmin, log_cmax = math.log(C_MIN), math.log(C_MAX)
    if dist.truncated and tail is None:
        # only a lower bound on the expectation is available
        at_max = log_expectation(dist, phi, log_cmax) if np.isfinite(top) else INF
        if at_max - log_t > 0:
            return NormResult(
                INF,
                "infinite_certified",
                math.inf,
                {"C_max": C_MAX, "log_partial_expectation": at_max, "atoms": len(dist)},
            )
        lower = _safe_exp(_log_norm_bracketed(g, top, phi, log_t))
        return NormResult(
            lower,
            "budget_exhausted",
            math.nan,
            {"lower_bound": lower, "tail_mass": dist.tail_mass, "atoms": len(dist)},
        )
    log_value = _log_norm_bracketed(g, top, phi, log_t)
    if log_value == INF:
        return NormResult(INF, "infinite_certified", math.inf, {"expectation_exceeds_target_at": "all C"})
    if log_value == -INF:
        return NormResult(0.0, "finite", 0.0)
    res = _safe_exp(g(log_value))
    value = _safe_exp(log_value)
    if value == INF:
        # finite but beyond float range
        return NormResult(INF, "overflow", res, {"log_value": log_value})
    return NormResult(value, "finite", res)


def _log_norm_bracketed(g, top, phi, log_t) -> float:
    """``log`` of the norm: scale-free initial bracket, geometric expansion, then a root solve."""
    if top == INF:
        return INF
    # initial bracket from max|X| / phi^{-1}(target * 10^{+-3}); a cached table
    # is accurate enough for a bracket
    inv = phi.tabulated().loginv if hasattr(phi, "tabulated") else phi.loginv
    a = top - float(inv(np.array(log_t + math.log(1e3))))
    b = top - float(inv(np.array(log_t - math.log(1e3))))
    lo, hi = (min(a, b), max(a, b)) if np.isfinite(a) and np.isfinite(b) else (top - 50.0, top + 50.0)
    lo, hi = lo - 1.0, hi + 1.0
    step = 1.0
    while g(hi) > 0:
        lo, hi = hi, hi + step
        step *= 2.0
        if hi > top + 1e4:
            return INF
    step = 1.0
    while g(lo) <= 0:
        hi, lo = lo, lo - step
        step *= 2.0
        if lo < top - 1e4:
            return -INF
    return _solve_log_C(g, lo, hi)


def _solve_log_C(g, lo, hi) -> float:
    """Root of the nonincreasing ``g`` in ``[lo, hi]``: Brent when both ends are finite, else bisection."""
    glo, ghi = g(lo), g(hi)
    if ghi == 0.0:
        return hi
    if math.isfinite(glo) and math.isfinite(ghi):
        return brentq(g, lo, hi, xtol=1e-14 * max(1.0, abs(hi)), rtol=4 * np.finfo(float).eps, maxiter=200)
    return _bisect_log_C(g, lo, hi)


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else INF


def psi_alpha_norm(sample, alpha: float) -> NormResult:
    """Quasi-norm ``inf{C : E exp((|X|/C)**alpha) <= 2}``.

    Computed as the Orlicz functional of the unpatched ``exp(x**alpha) - 1``
    with target 1; for ``alpha < 1`` this is a quasi-norm equivalent to the norm
    of the patched (convex) function.
    """
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    out = orlicz_norm(sample, ExpPower(alpha, patch=False), 1.0)
    if out.finite:
        out.residual = (out.residual + 1.0) / 2.0
    return out


def function_norm(f_law_under_pi: AtomicDist, rho: YoungFunction) -> NormResult:
    """``||f||_{pi,rho}`` from the pushforward law of ``f`` under ``pi``."""
    return orlicz_norm(f_law_under_pi, rho)


def read_sample_csv(path) -> np.ndarray:
    """One-column CSV of reals; a non-numeric first row is treated as a header."""
    vals = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                vals.append(float(row[0]))
            except ValueError:
                if i == 0:
                    continue
                raise PreconditionError(f"non-numeric entry {row[0]!r} on line {i + 1}") from None
    return np.asarray(vals, dtype=float)
