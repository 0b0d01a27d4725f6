"""Desk-scale limit experiments for additive functionals ``f(X_0) + ... + f(X_{n-1})``.

* CLT: normalized sums against ``N(0, sigma_f^2)`` with the regenerative
  variance ``sigma_f^2 = delta pi(C) / m (E s_1^2 + 2 E s_1 s_2)``;
* LIL: running maxima of ``|sum| / sqrt(n log log n)``;
* Berry-Esseen: decay of the sup-distance between the law of the normalized
  sum and the normal law;
* exponential tail bound with ``gamma = alpha beta / (alpha + beta)``, the
  constant ``K`` fitted from the simulation, and the head/blocks/tail split of
  the sum used to prove it.

Tower chains are simulated block by block (exact and vectorized).  Other
chains fall back to step-by-step simulation.  Every experiment draws its
replicas in fixed chunks from counter-based streams, so results depend only on
the seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import PreconditionError, UnsupportedError
from .orlicz_norm import AtomicDist, orlicz_norm
from .rng import chunked, parallel_map, stream
from .split_chain import MinorizedChain, sample_blocks
from .tower_chain import Tower
from .young_algebra.domination import GridSpec, dominates
from .young_algebra.functions import INF, ExpPower, Power

REPLICA_CHUNK = 500
SIGMA_BLOCKS = 200_000

# stream tags, one per kind of draw
_TAG_SIGMA, _TAG_CLT, _TAG_LIL, _TAG_BE, _TAG_TAIL = 11, 12, 13, 14, 15


# helpers


def _tower(chain: MinorizedChain) -> Tower | None:
    return chain.meta.get("tower") if chain.meta else None


def _f_on_states(chain, f):
    t = _tower(chain)
    if f is not None:
        return f
    if t is None:
        raise PreconditionError("f is required for chains other than towers")
    ft = dict(zip(t.labels, t.f_tilde.tolist()))
    return lambda s: ft[s[0]]


def _exact_pi_mean(chain, f) -> float | None:
    if chain.pi_exact is None:
        return None
    return chain.pi_exact.expect(f)


def centered(chain: MinorizedChain, f=None):
    """``(f - E_pi f, E_pi f)`` using the exact stationary law."""
    g = _f_on_states(chain, f)
    mu = _exact_pi_mean(chain, g)
    if mu is None:
        raise PreconditionError("centering needs the exact stationary law")
    if mu == 0.0:
        return g, 0.0
    return (lambda s: g(s) - mu), mu


class _Sampler:
    """Sums over the first ``n`` steps for tower or generic chains."""

    def __init__(self, chain: MinorizedChain, f):
        self.chain = chain
        self.f = f
        t = _tower(chain)
        self.tower = None if t is None else Tower(t.spec, f)

    def sums(self, n, count, rng, start, trunc=INF) -> dict:
        if self.tower is not None:
            return self.tower.path_sums(n, count, rng, start, trunc)
        out = np.empty(count)
        for r in range(count):
            out[r] = self.values(n, rng, start).sum()
        return {"total": out}

    def values(self, n, rng, start) -> np.ndarray:
        if self.tower is not None:
            return self.tower.path_values(n, rng, start)
        ch = self.chain
        if start == "nu":
            x = ch.nu_sampler(rng)
        elif start == "pi":
            if ch.pi_exact is None:
                raise PreconditionError("stationary start needs the exact stationary law")
            x = ch.pi_exact.sample(rng)
        else:
            raise PreconditionError(f"unknown start law {start!r}")
        vals = np.empty(n)
        for k in range(n):
            vals[k] = self.f(x)
            _, x = ch.step(x, rng)
        return vals


def _replica_sums(sampler, n, replicas, seed, tag, key, start, workers, trunc=INF) -> dict:
    def run(chunk):
        idx, count = chunk
        return sampler.sums(n, count, stream(seed, tag, key, idx), start, trunc)

    parts = parallel_map(run, chunked(replicas, REPLICA_CHUNK), workers)
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


@dataclass
class VarianceEstimate:
    sigma_f_sq: float
    stderr: float
    E_s1_sq: float
    E_s1_s2: float
    E_s1_s2_stderr: float
    n_blocks: int
    exact: float | None = None

    @property
    def degenerate(self) -> bool:
        return not self.sigma_f_sq > 3.0 * self.stderr


def block_variance(chain: MinorizedChain, f, n_blocks: int = SIGMA_BLOCKS, seed: int = 0,
                   workers: int | None = None) -> VarianceEstimate:
    """``sigma_f^2 = delta pi(C) / m (E s_1^2 + 2 E s_1 s_2)`` from ``2 n_blocks`` i.i.d. blocks."""
    sums, _ = sample_blocks(chain, lambda s, y: f(s), 2 * n_blocks, seed, workers)
    s1, s2 = sums[0::2], sums[1::2]
    scale = chain.delta * chain.pi_C / chain.m
    sq = np.concatenate([s1, s2]) ** 2
    cross = s1 * s2
    v = scale * (sq.mean() + 2.0 * cross.mean())
    terms = scale * (0.5 * (s1**2 + s2**2) + 2.0 * cross)
    se = float(terms.std(ddof=1) / math.sqrt(n_blocks)) if n_blocks > 1 else 0.0
    exact = None
    t = _tower(chain)
    if t is not None:
        # E s_1 s_2 = (E S)^2 = 0 for centered f, so sigma^2 = delta pi(C) E_nu S^2
        S = Tower(t.spec, f).block_sums()
        exact = float(scale * np.sum(t.nu * S * S) + 2.0 * scale * np.sum(t.nu * S) ** 2)
    return VarianceEstimate(
        float(v), se, float(sq.mean()), float(cross.mean()),
        float(cross.std(ddof=1) / math.sqrt(n_blocks)) if n_blocks > 1 else 0.0, int(n_blocks), exact,
    )


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_ready(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return _json_ready(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


class _Report:
    def to_dict(self) -> dict:
        return _json_ready(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# CLT


@dataclass
class CltReport(_Report):
    n_values: list
    ks_distance: list
    sigma_f_sq: float
    sigma_f_sq_stderr: float
    sigma_estimate: list  # sample variance of normalized sums, per n
    sigma_f_sq_exact: float | None
    E_s1_s2: float
    E_s1_s2_stderr: float
    degenerate: bool
    replicas: int
    seed: int
    start: str

    def rows(self) -> list[dict]:
        return [
            {"n": n, "ks_distance": d, "normalized_variance": v}
            for n, d, v in zip(self.n_values, self.ks_distance, self.sigma_estimate)
        ]


def clt_experiment(chain: MinorizedChain, f=None, n_values=(1000, 10000, 100000), replicas: int = 2000,
                   seed: int = 0, start: str = "pi", workers: int | None = None,
                   sigma_blocks: int = SIGMA_BLOCKS) -> CltReport:
    """KS distance between ``n^{-1/2} sum f(X_i)`` (``f`` centred under ``pi``) and ``N(0, sigma_f^2)``."""
    if chain.m != 1:
        raise UnsupportedError("simulation is implemented for m = 1 only")
    g, _ = centered(chain, f)
    var = block_variance(chain, g, sigma_blocks, stream_seed(seed, _TAG_SIGMA), workers)
    sampler = _Sampler(chain, g)
    ks, sv = [], []
    for i, n in enumerate(n_values):
        x = _replica_sums(sampler, int(n), replicas, seed, _TAG_CLT, i, start, workers)["total"] / math.sqrt(n)
        sv.append(float(x.var(ddof=1)))
        if var.degenerate:
            ks.append(None)
        else:
            ks.append(float(stats.kstest(x, "norm", args=(0.0, math.sqrt(var.sigma_f_sq))).statistic))
    return CltReport(
        [int(n) for n in n_values], ks, var.sigma_f_sq, var.stderr, sv, var.exact, var.E_s1_s2,
        var.E_s1_s2_stderr, var.degenerate, int(replicas), int(seed), start,
    )


def stream_seed(seed: int, tag: int) -> int:
    """Derived integer seed for helpers that take a plain seed."""
    return int(stream(seed, tag).integers(0, 2**63 - 1))


# LIL


@dataclass
class LilReport(_Report):
    n_max: int
    replicas: int
    statistic: list  # per replica
    quantiles: dict
    sigma_f: float
    p95_over_sigma: float | None
    suspicious: int  # replicas beyond 3 sigma_f
    seed: int


def lil_statistic(chain: MinorizedChain, f=None, n_max: int = 100_000, replicas: int = 200, seed: int = 0,
                  start: str = "pi", workers: int | None = None, sigma_blocks: int = SIGMA_BLOCKS) -> LilReport:
    """Per replica ``max_{e^2 <= n <= n_max} |sum_{i<n} f(X_i)| / sqrt(n log log n)``."""
    n0 = math.ceil(math.e**2)
    if n_max < n0:
        raise PreconditionError("n_max must be at least e^2 for log log n to be defined")
    g, _ = centered(chain, f)
    var = block_variance(chain, g, sigma_blocks, stream_seed(seed, _TAG_SIGMA), workers)
    sigma = math.sqrt(max(var.sigma_f_sq, 0.0))
    sampler = _Sampler(chain, g)
    n = np.arange(n0, n_max + 1, dtype=float)
    norm = np.sqrt(n * np.log(np.log(n)))

    def run(chunk):
        idx, count = chunk
        rng = stream(seed, _TAG_LIL, idx)
        out = np.empty(count)
        for r in range(count):
            cs = np.cumsum(sampler.values(n_max, rng, start))
            out[r] = float(np.max(np.abs(cs[n0 - 1:]) / norm))
        return out

    stat = np.concatenate(parallel_map(run, chunked(replicas, 50), workers))
    q = {str(p): float(np.percentile(stat, p)) for p in (5, 50, 95)}
    return LilReport(
        int(n_max), int(replicas), stat.tolist(), q, sigma,
        q["95"] / sigma if sigma > 0 else None, int(np.sum(stat > 3.0 * sigma)), int(seed),
    )


# Berry-Esseen


@dataclass
class BerryEsseenReport(_Report):
    n_values: list
    delta_n: list
    slope: float | None
    sigma_f_sq: float
    degenerate: bool
    preconditions: dict
    replicas: int
    seed: int


def sup_normal_distance(x: np.ndarray, sigma: float) -> float:
    """``sup_t |F_n(t) - Phi(t / sigma)|`` for the empirical CDF ``F_n`` of ``x``."""
    return float(stats.kstest(x, "norm", args=(0.0, sigma)).statistic)


def berry_esseen_experiment(chain: MinorizedChain, f=None, n_values=(1000, 4000, 16000), replicas: int = 10000,
                            seed: int = 0, psi=None, workers: int | None = None,
                            sigma_blocks: int = SIGMA_BLOCKS) -> BerryEsseenReport:
    """Sup-distance ``Delta_n`` of the stationary normalized sum to the normal law, and its log-log slope.

    When ``psi`` is given, ``x^3`` must be dominated by it and
    ``||tau||_{nu,psi}`` must be finite; both facts are recorded.
    """
    if chain.m != 1:
        raise UnsupportedError("the rate experiment needs a strongly aperiodic chain (m = 1)")
    pre = {}
    if psi is not None:
        wit = dominates(Power(3.0), psi, GridSpec(1.0, 1e30, 200))
        pre["cubic_dominated"] = wit.holds
        t = _tower(chain)
        if t is not None:
            tau = AtomicDist(t.h.astype(float) - 1.0, t.nu).aggregated()
            pre["tau_norm"] = orlicz_norm(tau, psi).value
        if not wit.holds:
            raise PreconditionError("x^3 is not dominated by psi")
    g, _ = centered(chain, f)
    var = block_variance(chain, g, sigma_blocks, stream_seed(seed, _TAG_SIGMA), workers)
    sigma_sq = var.exact if var.exact is not None else var.sigma_f_sq
    sampler = _Sampler(chain, g)
    deltas = []
    degenerate = not sigma_sq > 0 or var.degenerate
    for i, n in enumerate(n_values):
        if degenerate:
            deltas.append(None)
            continue
        x = _replica_sums(sampler, int(n), replicas, seed, _TAG_BE, i, "pi", workers)["total"] / math.sqrt(n)
        deltas.append(sup_normal_distance(x, math.sqrt(sigma_sq)))
    slope = None
    if not degenerate and len(n_values) >= 2 and all(d > 0 for d in deltas):
        slope = float(np.polyfit(np.log(n_values), np.log(deltas), 1)[0])
    return BerryEsseenReport(
        [int(n) for n in n_values], deltas, slope, float(sigma_sq), bool(degenerate), pre, int(replicas), int(seed)
    )


# tail bound


@dataclass
class TailReport(_Report):
    t_grid: list
    n: int
    alpha: float
    beta: float
    gamma: float
    K: float
    tau_norm: float
    f_norm: float
    E_nu_S_sq: float
    empirical_tail: dict  # start -> list
    bound_value: dict  # start -> list, capped at 1
    components: dict  # start -> {name: list}, without the factor K
    dominates: dict  # start -> bool
    decomposition: dict
    replicas: int
    seed: int

    def rows(self) -> list[dict]:
        out = []
        for i, t in enumerate(self.t_grid):
            row = {"t": t}
            for s in self.empirical_tail:
                row[f"empirical_{s}"] = self.empirical_tail[s][i]
                row[f"bound_{s}"] = self.bound_value[s][i]
            out.append(row)
        return out


def tail_components(t, K, n, a, b, var_proxy, gamma, start):
    """Summands of the tail bound for a given ``K`` (each without the leading factor ``K``).

    ``var_proxy = delta pi(C) E_nu S^2``.  The stretched-exponential terms are
    written with the decaying sign.  The ``log ||tau+1||`` denominator of the
    stationary bound is floored at 1.
    """
    t = np.asarray(t, dtype=float)
    ab = a * b
    out = {
        "gaussian": np.exp(-(t**2) / (K * n * var_proxy)),
        "exponential": np.exp(-t / (K * b * a**3)),
        "stretched_n": np.exp(-(t**gamma) / (K * ab**gamma * math.log(n))),
    }
    if start == "pi":
        out["stretched_tau"] = np.exp(-(t**gamma) / (K * ab**gamma * max(1.0, math.log(a))))
    return out


def tail_bound_value(t, K, n, a, b, var_proxy, gamma, start) -> np.ndarray:
    comps = tail_components(t, K, n, a, b, var_proxy, gamma, start)
    return np.minimum(1.0, K * sum(comps.values()))


def fit_tail_K(t, empirical: dict, n, a, b, var_proxy, gamma, lo=1e-3, hi=1e8) -> float:
    """Smallest ``K`` (relative precision 1e-6) for which every bound dominates its empirical tail."""

    def ok(K):
        return all(
            np.all(tail_bound_value(t, K, n, a, b, var_proxy, gamma, s) >= np.asarray(e)) for s, e in empirical.items()
        )

    if not ok(hi):
        return INF
    llo, lhi = math.log(lo), math.log(hi)
    if ok(lo):
        return lo
    while lhi - llo > 1e-6:
        mid = 0.5 * (llo + lhi)
        if ok(math.exp(mid)):
            lhi = mid
        else:
            llo = mid
    return math.exp(lhi)


def tail_bound_experiment(chain: MinorizedChain, f=None, alpha: float = 1.0, beta: float = 1.0, n: int = 1000,
                          t_grid=None, replicas: int = 100_000, seed: int = 0, K: float | None = None,
                          level_K: float = 1.0, workers: int | None = None) -> TailReport:
    """Empirical tails of ``|sum_{i<n} f(X_i)|`` from ``nu`` and ``pi`` against the exponential tail bound.

    ``K`` is fitted when not given.  The sum is also split into the head block
    ``I``, the complete blocks ``II`` (with truncation at level
    ``a = level_K ||f|| ||tau+1|| log^{1/gamma} n`` into ``II_1``, ``II_2``) and
    the overshoot ``III``.
    """
    t = _tower(chain)
    if t is None:
        raise UnsupportedError("the tail experiment uses exact tower laws")
    g, _ = centered(chain, f)
    tw = Tower(t.spec, g)
    a = orlicz_norm(AtomicDist(t.h.astype(float), t.nu).aggregated(), ExpPower(alpha)).value
    st = tw.stationary_states()
    b = orlicz_norm(AtomicDist(np.array([g(s) for s in st.states]), st.probs).aggregated(), ExpPower(beta)).value
    if not (math.isfinite(a) and math.isfinite(b)):
        raise PreconditionError("the Orlicz norms of tau + 1 and f must be finite")
    S = tw.block_sums()
    ES2 = float(np.sum(t.nu * S * S))
    var_proxy = chain.delta * chain.pi_C * ES2
    gamma = alpha * beta / (alpha + beta)
    if t_grid is None:
        sd = math.sqrt(n * var_proxy)
        t_grid = np.linspace(0.0, 6.0 * sd, 25)
    t_grid = np.asarray(t_grid, dtype=float)
    level = level_K * b * a * math.log(n) ** (1.0 / gamma)
    small_mask = np.abs(S) <= level
    E_small = float(np.sum(t.nu * np.where(small_mask, S, 0.0)))
    E_large = float(np.sum(t.nu * np.where(small_mask, 0.0, S)))

    emp, decomp = {}, {}
    sampler = _Sampler(chain, g)
    for i, start in enumerate(("nu", "pi")):
        d = _replica_sums(sampler, n, replicas, seed, _TAG_TAIL, i, start, workers, trunc=level)
        total = np.abs(d["total"])
        emp[start] = [float(np.mean(total >= x)) for x in t_grid]
        I, II, III = d["head_abs"], np.abs(d["blocks"]), d["over_abs"]
        II1 = np.abs(d["small"] - d["N"] * E_small)
        II2 = np.abs(d["large"] - d["N"] * E_large)
        decomp[start] = {
            "reconstruction_exact": bool(np.all(d["head"] + d["blocks"] - d["over"] == d["total"])),
            "max_reconstruction_error": float(np.max(np.abs(d["head"] + d["blocks"] - d["over"] - d["total"]))),
            "triangle_holds": bool(np.all(total <= I + II + III)),
            "truncation_level": level,
            "tails": {
                name: [float(np.mean(v >= x)) for x in t_grid]
                for name, v in (("I", I), ("II", II), ("II_1", II1), ("II_2", II2), ("III", III))
            },
        }
    if K is None:
        K = fit_tail_K(t_grid, emp, n, a, b, var_proxy, gamma)
    bound = {s: tail_bound_value(t_grid, K, n, a, b, var_proxy, gamma, s).tolist() for s in emp}
    comps = {s: {k: v.tolist() for k, v in tail_components(t_grid, K, n, a, b, var_proxy, gamma, s).items()}
             for s in emp}
    dom = {s: bool(np.all(np.asarray(bound[s]) >= np.asarray(emp[s]))) for s in emp}
    return TailReport(
        t_grid.tolist(), int(n), float(alpha), float(beta), gamma, float(K), float(a), float(b), ES2,
        emp, bound, comps, dom, decomp, int(replicas), int(seed),
    )


def write_rows_csv(rows: list[dict], path) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
