"""The twelve classical example families with their asymptotic formulas, and fitters.

Cases ``nu1``..``nu6`` concern integrability started from the small measure:
``nu1``-``nu3`` describe ``rho_{phi,psi}`` and ``nu4``-``nu6`` the best ``phi``
for given ``(psi, rho)``.  Cases ``pi1``..``pi6`` are the stationary analogues
with ``zeta`` in place of ``rho``.

Each descriptor names the shape of the answer:

* ``power_log``: ``x**exponent * log(x)**log_power``;
* ``exp_power``: ``exp(x**exponent) - 1`` (up to equivalence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from ..errors import PreconditionError
from .domination import normalize_assumption_A
from .functions import ExpPower, Power, YoungFunction
from .transforms import kappa_of, rho_of, tilde_phi, zeta_of


@dataclass(frozen=True)
class CaseDescriptor:
    case_id: str
    target: str  # rho, zeta, phi_nu or phi_pi
    shape: str  # power_log or exp_power
    statement: str
    params: dict
    exponent: Callable[[dict], float]
    log_power: Callable[[dict], float]
    constraint: Callable[[dict], bool]

    def expected(self, params: dict | None = None) -> dict:
        p = dict(self.params, **(params or {}))
        if not self.constraint(p):
            raise PreconditionError(f"parameters {p} outside the range of case {self.case_id}")
        return {"exponent": self.exponent(p), "log_power": self.log_power(p)}


def _zero(_):
    return 0.0


_CASES = [
    CaseDescriptor("nu1", "rho", "power_log", "phi=x^p, psi=x^r: rho ~ x^{p(r-1)/(r-p)}",
                   {"p": 2.0, "r": 4.0}, lambda q: q["p"] * (q["r"] - 1) / (q["r"] - q["p"]), _zero,
                   lambda q: q["r"] > q["p"] >= 1),
    CaseDescriptor("nu2", "rho", "exp_power", "phi=psi_a, psi=psi_b: rho ~ exp(x^{ab/(b-a)})",
                   {"alpha": 1.0, "beta": 2.0}, lambda q: q["alpha"] * q["beta"] / (q["beta"] - q["alpha"]), _zero,
                   lambda q: q["beta"] > q["alpha"] > 0),
    CaseDescriptor("nu3", "rho", "power_log", "phi=x^p, psi=psi_b: rho ~ x^p log^{(p-1)/b} x",
                   {"p": 2.0, "beta": 1.0}, lambda q: q["p"], lambda q: (q["p"] - 1) / q["beta"],
                   lambda q: q["p"] >= 1 and q["beta"] > 0),
    CaseDescriptor("nu4", "phi_nu", "power_log", "psi=x^r, rho=x^p: phi ~ x^{rp/(r+p-1)}",
                   {"p": 2.0, "r": 3.0}, lambda q: q["r"] * q["p"] / (q["r"] + q["p"] - 1), _zero,
                   lambda q: q["r"] > 1 and q["p"] >= 1),
    CaseDescriptor("nu5", "phi_nu", "exp_power", "psi=psi_b, rho=psi_a: phi ~ exp(x^{ab/(a+b)})",
                   {"alpha": 1.0, "beta": 1.0}, lambda q: q["alpha"] * q["beta"] / (q["alpha"] + q["beta"]), _zero,
                   lambda q: q["alpha"] > 0 and q["beta"] > 0),
    CaseDescriptor("nu6", "phi_nu", "power_log", "psi=psi_b, rho=x^p: phi ~ x^p / log^{(p-1)/b} x",
                   {"p": 2.0, "beta": 1.0}, lambda q: q["p"], lambda q: -(q["p"] - 1) / q["beta"],
                   lambda q: q["p"] >= 1 and q["beta"] > 0),
    CaseDescriptor("pi1", "zeta", "power_log", "phi=x^p, psi=x^r: zeta ~ x^{p(r-1)/(r-p-1)}",
                   {"p": 2.0, "r": 4.0}, lambda q: q["p"] * (q["r"] - 1) / (q["r"] - q["p"] - 1), _zero,
                   lambda q: q["r"] > q["p"] + 1 >= 2),
    CaseDescriptor("pi2", "zeta", "exp_power", "phi=psi_a, psi=psi_b: zeta ~ exp(x^{ab/(b-a)})",
                   {"alpha": 1.0, "beta": 2.0}, lambda q: q["alpha"] * q["beta"] / (q["beta"] - q["alpha"]), _zero,
                   lambda q: q["beta"] > q["alpha"] > 0),
    CaseDescriptor("pi3", "zeta", "power_log", "phi=x^p, psi=psi_b: zeta ~ x^p log^{p/b} x",
                   {"p": 2.0, "beta": 1.0}, lambda q: q["p"], lambda q: q["p"] / q["beta"],
                   lambda q: q["p"] >= 1 and q["beta"] > 0),
    CaseDescriptor("pi4", "phi_pi", "power_log", "psi=x^r, zeta=x^p: phi ~ x^{(r-1)p/(r+p-1)}",
                   {"p": 2.0, "r": 3.0}, lambda q: (q["r"] - 1) * q["p"] / (q["r"] + q["p"] - 1), _zero,
                   lambda q: q["r"] >= 2 and (q["r"] == 2 or q["p"] >= (q["r"] - 1) / (q["r"] - 2))),
    CaseDescriptor("pi5", "phi_pi", "exp_power", "psi=psi_b, zeta=psi_a: phi ~ exp(x^{ab/(a+b)})",
                   {"alpha": 1.0, "beta": 1.0}, lambda q: q["alpha"] * q["beta"] / (q["alpha"] + q["beta"]), _zero,
                   lambda q: q["alpha"] > 0 and q["beta"] > 0),
    CaseDescriptor("pi6", "phi_pi", "power_log", "psi=psi_b, zeta=x^p: phi ~ x^p / log^{p/b} x",
                   {"p": 2.0, "beta": 1.0}, lambda q: q["p"], lambda q: -q["p"] / q["beta"],
                   lambda q: q["p"] > 1 and q["beta"] > 0),
]

CASES = {c.case_id: c for c in _CASES}


def closed_form_lookup(case_id: str) -> CaseDescriptor:
    try:
        return CASES[case_id]
    except KeyError:
        raise PreconditionError(f"unknown case {case_id!r}; known: {sorted(CASES)}") from None


def case_functions(case_id: str, params: dict | None = None) -> dict[str, YoungFunction]:
    """The input functions of a case (``psi`` already normalized)."""
    desc = closed_form_lookup(case_id)
    q = dict(desc.params, **(params or {}))
    n = int(case_id[-1])
    if n in (1, 4):
        a, b = Power(q["p"]), Power(q["r"])
    elif n in (2, 5):
        a, b = ExpPower(q["alpha"]), ExpPower(q["beta"])
    else:
        a, b = Power(q["p"]), ExpPower(q["beta"])
    psi = normalize_assumption_A(b, with_witness=False)
    if n <= 3:
        return {"phi": a, "psi": psi}
    key = "rho" if desc.target == "phi_nu" else "zeta"
    return {key: a, "psi": psi}


def evaluate_case(case_id: str, params: dict | None = None) -> YoungFunction:
    """Numerically computed function whose asymptotics the case describes."""
    desc = closed_form_lookup(case_id)
    fns = case_functions(case_id, params)
    if desc.target == "rho":
        return rho_of(fns["phi"], fns["psi"])
    if desc.target == "zeta":
        return zeta_of(fns["phi"], fns["psi"])
    if desc.target == "phi_nu":
        return tilde_phi(fns["psi"], fns["rho"])
    return kappa_of(fns["zeta"], fns["psi"])[0]


def fit_power(f: YoungFunction, x_lo=10.0, x_hi=1e3, n=200) -> float:
    """Least-squares slope of ``log f`` against ``log x``."""
    u = np.linspace(math.log(x_lo), math.log(x_hi), n)
    return float(np.polyfit(u, f.logf(u), 1)[0])


def fit_power_log(f: YoungFunction, x_lo=10.0, x_hi=1e3, n=200) -> tuple[float, float]:
    """Fit ``log f = p log x + q log log x + c``; returns ``(p, q)``."""
    u = np.linspace(math.log(x_lo), math.log(x_hi), n)
    A = np.column_stack([u, np.log(u), np.ones_like(u)])
    coef, *_ = np.linalg.lstsq(A, f.logf(u), rcond=None)
    return float(coef[0]), float(coef[1])


def fit_exp_power(f: YoungFunction, x_lo=10.0, x_hi=1e3, n=200) -> float:
    """Fit ``log f = c x**g + a log x + b`` and return ``g``.

    The polynomial prefactor ``x**a`` and the constants are invisible up to
    equivalence, so they are fitted as nuisance terms.
    """
    u = np.linspace(math.log(x_lo), math.log(x_hi), n)
    y = np.asarray(f.logf(u), dtype=float)

    def resid(g):
        A = np.column_stack([np.exp(g * u), u, np.ones_like(u)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = A @ coef - y
        return float(r @ r)

    gs = np.linspace(0.05, 4.0, 80)
    k = int(np.argmin([resid(g) for g in gs]))
    lo, hi = gs[max(k - 1, 0)], gs[min(k + 1, gs.size - 1)]
    return float(minimize_scalar(resid, bounds=(lo, hi), method="bounded", options={"xatol": 1e-8}).x)


def fit_case(case_id: str, params: dict | None = None, x_lo=10.0, x_hi=1e3) -> dict:
    """Fit the computed function of a case and compare with the closed form."""
    desc = closed_form_lookup(case_id)
    want = desc.expected(params)
    f = evaluate_case(case_id, params)
    if desc.shape == "exp_power":
        got = {"exponent": fit_exp_power(f, x_lo, x_hi), "log_power": 0.0}
    elif want["log_power"] == 0.0:
        got = {"exponent": fit_power(f, x_lo, x_hi), "log_power": 0.0}
    else:
        p, q = fit_power_log(f, x_lo, x_hi)
        got = {"exponent": p, "log_power": q}
    return {
        "case": case_id,
        "statement": desc.statement,
        "params": dict(desc.params, **(params or {})),
        "expected": want,
        "fitted": got,
        "exponent_error": got["exponent"] - want["exponent"],
        "log_power_error": got["log_power"] - want["log_power"],
    }
