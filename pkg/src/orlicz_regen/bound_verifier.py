"""Both sides of the block-sum Orlicz bounds on concrete tower chains.

For a tower the laws of ``tau + 1`` and ``S(f)`` under ``nu``, of ``S(f)``
under ``pi`` and of ``f`` under ``pi`` are finite and exact, so every norm in
the bounds is computed without sampling.  A Monte Carlo route (block sampling
from ``nu``) is kept for cross-checking.

Bounds, with ``a = ||tau+1||_{nu,psi}``:

* started from ``nu``: ``||S||_{nu,phi} <= 2 m a ||f||_{pi,rho}``;
* stationary: ``||S||_{pi,phi} <= m a (1 + delta pi(C) a) ||f||_{pi,zeta}``;
* best ``phi`` for given ``rho``: ``||S||_{nu,phi~} <= 4 m a ||f||_{pi,rho}``;
* best ``phi`` for given ``zeta``: as the stationary bound times an unspecified ``K``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import PreconditionError
from .orlicz_norm import NormResult, orlicz_norm
from .rng import parallel_map, stream
from .split_chain import sample_S_under_nu
from .tower_chain import TowerExactLaws, build, random_tower
from .young_algebra.domination import dominates, normalize_assumption_A
from .young_algebra.functions import INF, ExpPower, Power, YoungFunction
from .young_algebra.transforms import assumption_A_violations, improvement_factor, kappa_of, rho_of, tilde_phi, zeta_of

MC_BATCHES = 20


@dataclass
class BoundReport:
    theorem_id: str
    lhs: float
    rhs: float
    ratio: float | None
    status: str  # holds, violated, rhs_infinite
    inputs: dict
    method: dict
    extra: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.status != "violated"

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("lhs", "rhs", "ratio"):
            v = d[k]
            if isinstance(v, float) and math.isinf(v):
                d[k] = "inf"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _value(res: NormResult) -> float:
    return res.value if res.status == "finite" else INF


def _finish(theorem_id, lhs, rhs, inputs, method, extra=None) -> BoundReport:
    if rhs == INF:
        return BoundReport(theorem_id, lhs, rhs, None, "rhs_infinite", inputs, method, extra or {})
    if lhs == 0.0:
        ratio = 0.0
    elif rhs == 0.0:
        ratio = INF
    else:
        ratio = lhs / rhs
    status = "holds" if ratio <= 1.0 else "violated"
    return BoundReport(theorem_id, lhs, rhs, ratio, status, inputs, method, extra or {})


def _unpack(system):
    """Accept ``(chain, laws)`` or bare laws."""
    if isinstance(system, TowerExactLaws):
        return None, system
    chain, laws = system
    return chain, laws


def _with_f(system, f):
    chain, laws = _unpack(system)
    if f is None:
        return chain, laws
    return build(laws.tower.spec, f, check_ergodic=False)


def _lhs_nu(chain, laws, phi, method, n_blocks, seed):
    if method == "exact":
        return _value(orlicz_norm(laws.S_law_under_nu, phi)), {"method": "exact"}
    if method != "monte_carlo":
        raise PreconditionError(f"unknown method {method!r}")
    if chain is None:
        raise PreconditionError("Monte Carlo evaluation needs the chain")
    t = laws.tower
    S = sample_S_under_nu(chain, t.state_function(), n_blocks, seed)
    total = _value(orlicz_norm(S, phi))
    parts = [_value(orlicz_norm(b, phi)) for b in np.array_split(S, MC_BATCHES)]
    # batch-means standard error, rescaled from batch size to the full sample
    se = float(np.std(parts, ddof=1) / math.sqrt(MC_BATCHES))
    return total, {"method": "monte_carlo", "n": int(n_blocks), "stderr": se, "seed": int(seed)}


def _common(chain, laws, psi, m):
    a = _value(orlicz_norm(laws.tau_plus_1_law, psi))
    delta = 1.0 if chain is None else chain.delta
    return a, {"tau_plus_1_norm": a, "m": m, "delta": delta, "pi_C": laws.pi_C}


def verify_thm_nu(system, phi: YoungFunction, psi: YoungFunction, f=None, *, method="exact",
                  n_blocks=20000, seed=0, m: int = 1, rho: YoungFunction | None = None) -> BoundReport:
    """``||S(f)||_{nu,phi} <= 2 m ||tau+1||_{nu,psi} ||f||_{pi,rho_{phi,psi}}``.

    ``rho`` may be passed to reuse a precomputed ``rho_{phi,psi}`` across calls.
    """
    chain, laws = _with_f(system, f)
    rho = rho if rho is not None else rho_of(phi, psi)
    a, inputs = _common(chain, laws, psi, m)
    b = _value(orlicz_norm(laws.f_law_under_pi, rho))
    inputs["f_norm"] = b
    lhs, meth = _lhs_nu(chain, laws, phi, method, n_blocks, seed)
    return _finish("nu_bound", lhs, _product(2.0 * m, a, b), inputs, meth)


def _product(*xs) -> float:
    if any(x == 0.0 for x in xs):
        return 0.0 if all(math.isfinite(x) for x in xs) else INF
    out = 1.0
    for x in xs:
        out *= x
    return out


def verify_thm_pi(system, phi: YoungFunction, psi: YoungFunction, f=None, *, improved: bool = False,
                  m: int = 1, zeta: YoungFunction | None = None) -> BoundReport:
    """``||S(f)||_{pi,phi} <= m a (1 + delta pi(C) a) ||f||_{pi,zeta_{phi,psi}}``.

    With ``improved=True`` the factor ``1 + delta pi(C) a`` is also replaced by
    ``g(1 + delta pi(C) a)``, ``g(r) = sup_x x / phi^{-1}(phi(x)/r)``, and the
    resulting right-hand side is recorded in ``extra``.
    """
    chain, laws = _with_f(system, f)
    zeta = zeta if zeta is not None else zeta_of(phi, psi)
    a, inputs = _common(chain, laws, psi, m)
    b = _value(orlicz_norm(laws.f_law_under_pi, zeta))
    inputs["f_norm"] = b
    lhs = _value(orlicz_norm(laws.S_law_under_pi(), phi))
    r = 1.0 + inputs["delta"] * laws.pi_C * a
    extra = {}
    if improved and math.isfinite(r):
        g = improvement_factor(phi, r)
        extra = {"g": g, "rhs_improved": _product(m, a, g, b)}
        if math.isfinite(extra["rhs_improved"]) and extra["rhs_improved"] > 0:
            extra["ratio_improved"] = lhs / extra["rhs_improved"]
    return _finish("pi_bound", lhs, _product(m, a, r, b), inputs, {"method": "exact"}, extra)


def verify_cor_nu(system, psi: YoungFunction, rho: YoungFunction, f=None, *, phi_tilde=None,
                  m: int = 1) -> BoundReport:
    """``||S(f)||_{nu,phi~} <= 4 m ||tau+1||_{nu,psi} ||f||_{pi,rho}`` with ``phi~ = (psi* o rho*)*``."""
    chain, laws = _with_f(system, f)
    bad = assumption_A_violations(psi)
    if bad:
        raise PreconditionError("psi violates the normalization: " + "; ".join(bad))
    pt = phi_tilde if phi_tilde is not None else tilde_phi(psi, rho)
    a, inputs = _common(chain, laws, psi, m)
    b = _value(orlicz_norm(laws.f_law_under_pi, rho))
    inputs["f_norm"] = b
    lhs = _value(orlicz_norm(laws.S_law_under_nu, pt))
    return _finish("nu_best_phi", lhs, _product(4.0 * m, a, b), inputs, {"method": "exact"})


def verify_cor_pi(system, psi: YoungFunction, zeta: YoungFunction, phi: YoungFunction, f=None, *,
                  m: int = 1, check_domination: bool = True) -> BoundReport:
    """Stationary bound for ``phi`` dominated by ``kappa``; reports the constant it needs.

    ``K_needed = ||S||_{pi,phi} / (a (1 + delta pi(C) a) ||f||_{pi,zeta})``; the
    bound holds with any ``K >= K_needed``.  ``ratio`` is ``K_needed``.
    """
    if check_domination:
        kappa, _ = kappa_of(zeta, psi)
        wit = dominates(phi, kappa)
        if not wit.holds:
            raise PreconditionError("phi is not dominated by kappa(zeta, psi); the stationary corollary does not apply")
    chain, laws = _with_f(system, f)
    a, inputs = _common(chain, laws, psi, m)
    b = _value(orlicz_norm(laws.f_law_under_pi, zeta))
    inputs["f_norm"] = b
    lhs = _value(orlicz_norm(laws.S_law_under_pi(), phi))
    rhs = _product(m, a, 1.0 + inputs["delta"] * laws.pi_C * a, b)
    rep = _finish("pi_best_phi", lhs, rhs, inputs, {"method": "exact"})
    # K is not explicit: the "ratio" is the constant needed, never a violation
    rep.extra["K_needed"] = rep.ratio
    if rep.status == "violated":
        rep.status = "holds"
    return rep


def fit_K(reports: Iterable[BoundReport]) -> float:
    """Smallest ``K`` that makes every stationary best-``phi`` bound in ``reports`` hold."""
    ks = [r.extra.get("K_needed") for r in reports]
    ks = [k for k in ks if k is not None and math.isfinite(k)]
    return max(ks) if ks else 0.0


# divergence certificates


@dataclass
class DivergenceCertificate:
    n_terms: int
    partial_sum: float
    log_partial_sum: float
    exceeded: bool
    status: str  # exceeded, budget_exhausted, series_ended
    threshold: float
    theta: float

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("partial_sum", "log_partial_sum", "threshold"):
            if math.isinf(d[k]):
                d[k] = "inf" if d[k] > 0 else "-inf"
        return d


def divergence_certificate(series, theta: float = 1.0, M: float = 1e6, term_budget: int = 200,
                           history: list | None = None) -> DivergenceCertificate:
    """Sum exact series terms until the partial sum exceeds ``M`` or the budget runs out.

    ``series`` is a weak-optimality construction (anything with ``.series(theta)``)
    or a callable ``theta -> iterator of log terms``.  Partial sums are kept in
    log space; ``history``, when given, receives every log partial sum.
    """
    gen: Iterator[float] = series.series(theta) if hasattr(series, "series") else series(theta)
    log_M = math.log(M) if M > 0 else -INF
    s = -INF
    n = 0
    status = "budget_exhausted"
    for lt in gen:
        if n >= term_budget:
            break
        s = float(np.logaddexp(s, lt))
        n += 1
        if history is not None:
            history.append(s)
        if s > log_M:
            status = "exceeded"
            break
    else:
        status = "series_ended"
    return DivergenceCertificate(
        n, math.exp(s) if s < 709 else INF, s, status == "exceeded", status, float(M), float(theta)
    )


# randomized suites

PAIRS = {
    "x2_x4": (lambda: Power(2.0), lambda: Power(4.0)),
    "x2_exp1": (lambda: Power(2.0), lambda: ExpPower(1.0)),
    "x3_x6": (lambda: Power(3.0), lambda: Power(6.0)),
}


def suite_pair(name: str):
    phi, psi = PAIRS[name]
    return phi(), normalize_assumption_A(psi(), with_witness=False)


def random_specs(n: int, seed: int, **kwargs):
    return [random_tower(stream(seed, 7, i), **kwargs) for i in range(n)]


def run_suite(n_specs: int = 20, seed: int = 0, pairs=("x2_x4",), checks=("nu", "pi", "cor_nu"),
              workers: int | None = None) -> list[dict]:
    """Exact bound reports for ``n_specs`` random towers and every ``(pair, check)``."""
    specs = random_specs(n_specs, seed)
    fns = {}
    for p in pairs:
        phi, psi = suite_pair(p)
        entry = {"phi": phi, "psi": psi, "rho": rho_of(phi, psi), "zeta": zeta_of(phi, psi)}
        if "cor_nu" in checks:
            entry["phi_tilde"] = tilde_phi(psi, entry["rho"])
        fns[p] = entry

    def one(i):
        system = build(specs[i])
        rows = []
        for p in pairs:
            e = fns[p]
            for c in checks:
                if c == "nu":
                    rep = verify_thm_nu(system, e["phi"], e["psi"], rho=e["rho"])
                elif c == "pi":
                    rep = verify_thm_pi(system, e["phi"], e["psi"], zeta=e["zeta"])
                elif c == "cor_nu":
                    rep = verify_cor_nu(system, e["psi"], e["rho"], phi_tilde=e["phi_tilde"])
                else:
                    raise PreconditionError(f"unknown check {c!r}")
                rows.append({"instance": i, "pair": p, "check": c, "report": rep})
        return rows

    out = []
    for rows in parallel_map(one, range(n_specs), workers):
        out.extend(rows)
    return out


def write_jsonl(reports: Iterable[BoundReport], path) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")


def write_suite_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "pair", "check", "lhs", "rhs", "ratio", "status"])
        for row in rows:
            r = row["report"]
            w.writerow([row["instance"], row["pair"], row["check"], repr(r.lhs), repr(r.rhs),
                        "" if r.ratio is None else repr(r.ratio), r.status])
