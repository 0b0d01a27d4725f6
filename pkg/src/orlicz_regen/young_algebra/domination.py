"""Asymptotic domination between Young functions and the normalization of psi."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functions import INF, LOG2, Normalized, YoungFunction
from .transforms import assumption_A_violations, vanishes_linearly


@dataclass(frozen=True)
class GridSpec:
    """Log grid of ``x`` values and the search ranges for the constants."""

    x_min: float = 1.0
    x_max: float = 1e60
    n: int = 400
    k_min: int = -10
    k_max: int = 20
    x0_doublings: int = 20

    def grid(self) -> np.ndarray:
        return np.linspace(math.log(self.x_min), math.log(self.x_max), self.n)

    def describe(self) -> dict:
        return {
            "x": [self.x_min, self.x_max, self.n],
            "C_exponents": [self.k_min, self.k_max],
            "x0_max": 2.0**self.x0_doublings,
        }


@dataclass
class DominationWitness:
    holds: bool
    C1: float
    C2: float
    x0: float
    max_violation: float
    search_budget: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "C1": self.C1,
            "C2": self.C2,
            "x0": self.x0,
            "max_violation": self.max_violation,
            "search_budget": self.search_budget,
        }


def _gap(rho1, rho2, u, shift):
    """``log rho1(x) - log rho2(2**shift x)`` with inf/inf and 0/0 counted as satisfied."""
    a = np.asarray(rho1.logf(u), dtype=float)
    b = np.asarray(rho2.logf(u + shift * LOG2), dtype=float)
    with np.errstate(invalid="ignore"):
        d = a - b
    return np.where(np.isnan(d), -INF, d)


def dominates(rho1: YoungFunction, rho2: YoungFunction, grid_spec: GridSpec | None = None) -> DominationWitness:
    """Search ``C1, C2 = 2**k`` and ``x0 = 2**j`` with ``rho1(x) <= C1 rho2(C2 x)`` for grid ``x >= x0``.

    Witnesses are ordered by ``x0`` first and then by ``|k1| + |k2|``, so the
    simplest constants are reported.
    """
    gs = grid_spec or GridSpec()
    u = gs.grid()
    ks = np.arange(gs.k_min, gs.k_max + 1)
    x0s = math.log(gs.x_min) + LOG2 * np.arange(gs.x0_doublings + 1)
    # suffix maxima of the gap for every C2
    start = np.searchsorted(u, x0s - 1e-12)
    best = None
    for j0, (ux0, s) in enumerate(zip(x0s, start)):
        if s >= u.size:
            break
        cands = []
        for k2 in ks:
            d = _gap(rho1, rho2, u[s:], float(k2))
            m = float(np.max(d))
            if m == INF:
                continue
            k1 = max(gs.k_min, math.ceil(m / LOG2 - 1e-12)) if m > -INF else gs.k_min
            k1 = max(k1, min(0, gs.k_max)) if m <= 0 else k1
            if k1 <= gs.k_max:
                cands.append((abs(k1) + abs(int(k2)), k1, int(k2)))
        if cands:
            _, k1, k2 = min(cands)
            best = (math.exp(ux0), k1, k2)
            break
    if best is not None:
        x0, k1, k2 = best
        return DominationWitness(True, 2.0**k1, 2.0**k2, x0, 0.0, gs.describe())
    last = x0s[min(len(x0s), max(1, int(np.sum(start < u.size)))) - 1]
    d = _gap(rho1, rho2, u[u >= last - 1e-12], 0.0)
    with np.errstate(over="ignore"):
        viol = float(np.exp(np.max(d)))
    return DominationWitness(False, 1.0, 1.0, float(math.exp(last)), viol, gs.describe())


def equivalent(f: YoungFunction, g: YoungFunction, grid_spec: GridSpec | None = None) -> tuple[DominationWitness, DominationWitness]:
    """Domination witnesses in both directions."""
    return dominates(f, g, grid_spec), dominates(g, f, grid_spec)


def normalize_assumption_A(psi: YoungFunction, with_witness: bool = True) -> Normalized:
    """Equivalent function with ``psi(x)/x -> 0`` at the origin and ``psi(1) >= 1``.

    Already normalized input is returned wrapped unchanged; if only ``psi(1) < 1``
    fails the function is rescaled; otherwise it is replaced by
    ``max(h, psi - psi(1))`` with ``h(x) = x**2`` on ``[0, 1]`` and ``2x - 1``
    beyond.  The domination witnesses in both directions are attached as
    ``.witnesses`` (empty for the identity case).
    """
    problems = assumption_A_violations(psi)
    if not problems:
        out = Normalized(psi, "identity")
    elif vanishes_linearly(psi):
        out = Normalized(psi, "scaled")
    else:
        out = Normalized(psi, "patched")
    out.witnesses = {}
    if with_witness and out.mode != "identity":
        gs = GridSpec(x_min=1.0, x_max=1e30, n=200)
        fwd, back = equivalent(psi, out, gs)
        out.witnesses = {"psi<=normalized": fwd.to_dict(), "normalized<=psi": back.to_dict()}
    return out
