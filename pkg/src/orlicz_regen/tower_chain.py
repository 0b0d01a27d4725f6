"""Tower chains: exact regenerative chains built from a labelled base law.

A base law ``alpha`` on labels carries a height ``h(x) >= 1`` and a value
``f~(x)``.  The chain lives on ``{(x, k) : 1 <= k <= h(x)}``: it climbs
``(x, 1) -> (x, 2) -> ... -> (x, h(x))`` deterministically and from the top
level resamples the label from ``nu(x) = R alpha(x) / h(x)`` with
``R = (sum alpha / h)^{-1}``.  The top levels form an atom (``m = delta = 1``),
so every block started from ``nu`` has length ``h(x)`` and sum ``f~(x) h(x)``,
and the stationary law is ``pi(x, k) = alpha(x) / h(x)``.

All exact laws are finite atomic laws.  The module also builds the labelled
laws used to show that the integrability conditions cannot be weakened
(:func:`weak_opt_nu_spec`, :func:`weak_opt_pi_spec`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
from scipy.special import logsumexp

from .errors import BuildError, ConfigError, PreconditionError, UnsupportedError
from .orlicz_norm import AtomicDist
from .split_chain import DiscreteLaw, MinorizedChain
from .young_algebra.functions import INF, LOG2, YoungFunction
from .young_algebra.transforms import log_sup, rho_of, zeta_of

ALPHA_TOL = 1e-12
MAX_ENUM_STATES = 2_000_000
PATH_CELLS = 1 << 22  # label draws per simulation batch


@dataclass(frozen=True)
class TowerAtom:
    label: str
    alpha: float
    f_tilde: float
    h: int


@dataclass
class TowerChainSpec:
    atoms: list[TowerAtom]

    def __post_init__(self):
        self.atoms = [a if isinstance(a, TowerAtom) else TowerAtom(*a) for a in self.atoms]

    def validate(self, check_ergodic: bool = True) -> None:
        if not self.atoms:
            raise BuildError("tower spec has no atoms")
        labels = [a.label for a in self.atoms]
        if len(set(labels)) != len(labels):
            raise BuildError("tower labels must be unique")
        for a in self.atoms:
            if not (a.alpha > 0 and math.isfinite(a.alpha)):
                raise BuildError(f"atom {a.label!r}: alpha must be positive")
            if int(a.h) != a.h or a.h < 1:
                raise BuildError(f"atom {a.label!r}: height must be an integer >= 1")
            if not math.isfinite(a.f_tilde):
                raise BuildError(f"atom {a.label!r}: f_tilde must be finite")
        total = math.fsum(a.alpha for a in self.atoms)
        if abs(total - 1.0) > ALPHA_TOL:
            raise BuildError(f"alpha sums to {total!r}, not 1")
        if check_ergodic and not any(a.h == 1 for a in self.atoms):
            raise BuildError(
                "no atom has height 1: aperiodicity, hence Harris ergodicity, is not guaranteed "
                "(pass check_ergodic=False for deterministic cycles)"
            )

    # serialization
    def to_config(self) -> dict:
        return {
            "atoms": [
                {"label": a.label, "alpha": a.alpha, "f_tilde": a.f_tilde, "h": int(a.h)} for a in self.atoms
            ]
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "TowerChainSpec":
        try:
            rows = cfg["atoms"]
            atoms = [TowerAtom(str(r["label"]), float(r["alpha"]), float(r["f_tilde"]), int(r["h"])) for r in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid tower spec: {exc}") from None
        return cls(atoms)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "alpha", "f_tilde", "h"])
            for a in self.atoms:
                w.writerow([a.label, repr(a.alpha), repr(a.f_tilde), int(a.h)])

    @classmethod
    def from_csv(cls, path) -> "TowerChainSpec":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls.from_config({"atoms": rows})


def single_atom(h: int, f_tilde: float = 1.0) -> TowerChainSpec:
    """Tower with one label: the chain cycles deterministically with period ``h``.

    Periodic for ``h > 1``; build it with ``check_ergodic=False``.
    """
    return TowerChainSpec([TowerAtom("x", 1.0, float(f_tilde), int(h))])


def geometric_tower(max_height: int = 20, values=(1.0, -1.0)) -> TowerChainSpec:
    """``alpha(h = n)`` proportional to ``2^{-n}`` for ``n <= max_height``, split evenly over ``values``."""
    # equal masses within a height keep E_pi f exactly zero for symmetric values
    w = np.array([2.0 ** -n for n in range(1, max_height + 1)]) / (1.0 - 2.0**-max_height)
    atoms = []
    for n, wn in enumerate(w, start=1):
        for j, v in enumerate(values):
            atoms.append(TowerAtom(f"h{n}_{j}", float(wn / len(values)), float(v), n))
    return TowerChainSpec(atoms)


def random_tower(rng: np.random.Generator, max_atoms: int = 6, max_height: int = 20, f_scale: float = 3.0) -> TowerChainSpec:
    """Random spec: 1..max_atoms labels, Dirichlet weights, heights in 1..max_height, one height forced to 1."""
    k = int(rng.integers(1, max_atoms + 1))
    alpha = rng.dirichlet(np.ones(k))
    h = rng.integers(1, max_height + 1, size=k)
    h[0] = 1
    f = np.round(rng.normal(0.0, f_scale, size=k), 6)
    atoms = [TowerAtom(f"a{i}", float(alpha[i]), float(f[i]), int(h[i])) for i in range(k)]
    return TowerChainSpec(_renormalize(atoms))


def _renormalize(atoms: list[TowerAtom]) -> list[TowerAtom]:
    total = math.fsum(a.alpha for a in atoms)
    out = [TowerAtom(a.label, a.alpha / total, a.f_tilde, a.h) for a in atoms]
    # push the rounding residue into the largest atom
    resid = 1.0 - math.fsum(a.alpha for a in out)
    j = max(range(len(out)), key=lambda i: out[i].alpha)
    a = out[j]
    out[j] = TowerAtom(a.label, a.alpha + resid, a.f_tilde, a.h)
    return out


class Tower:
    """Arrays of a validated spec together with its exact laws and fast samplers.

    ``f`` defaults to ``f(x, k) = f~(x)``; any function of the state can be
    passed instead, in which case its per-level values are tabulated.
    """

    def __init__(self, spec: TowerChainSpec, f: Callable | None = None):
        self.spec = spec
        self.labels = [a.label for a in spec.atoms]
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        self.alpha = np.array([a.alpha for a in spec.atoms])
        self.f_tilde = np.array([a.f_tilde for a in spec.atoms])
        self.h = np.array([int(a.h) for a in spec.atoms], dtype=np.int64)
        self.R = 1.0 / math.fsum(self.alpha / self.h)
        self.nu = self.R * self.alpha / self.h
        self.pi_C = 1.0 / self.R
        self._cum_nu = np.cumsum(self.nu)
        self._cum_nu[-1] = 1.0
        self._cum_alpha = np.cumsum(self.alpha)
        self._cum_alpha[-1] = 1.0
        self.f = f
        self._tables = None

    def state_function(self) -> Callable:
        """``f`` as a function of the state ``(label, level)``."""
        if self.f is not None:
            return self.f
        ft = dict(zip(self.labels, self.f_tilde.tolist()))
        return lambda s: ft[s[0]]

    @property
    def n_states(self) -> int:
        return int(self.h.sum())

    # per-state tables of f for simulation
    def _level_tables(self):
        if self._tables is None:
            if self.n_states > MAX_ENUM_STATES:
                raise UnsupportedError("tower too tall to tabulate per-level values")
            off = np.concatenate([[0], np.cumsum(self.h)])
            if self.f is None:
                flat = np.repeat(self.f_tilde, self.h)
            else:
                flat = np.array(
                    [self.f((lab, k)) for lab, hh in zip(self.labels, self.h) for k in range(1, hh + 1)], dtype=float
                )
            cum = np.concatenate([[0.0], np.cumsum(flat)])
            cum_abs = np.concatenate([[0.0], np.cumsum(np.abs(flat))])
            self._tables = (off, flat, cum, cum_abs)
        return self._tables

    def segment(self, lab, a, b, absolute: bool = False):
        """Sum of ``f`` (or ``|f|``) over levels ``a..b`` of label indices ``lab`` (empty if ``b < a``)."""
        off, _, cum, cum_abs = self._level_tables()
        c = cum_abs if absolute else cum
        top = self.h[lab]
        a = np.minimum(a, top + 1)
        b = np.clip(b, a - 1, top)
        return c[off[lab] + b] - c[off[lab] + a - 1]

    def block_sums(self) -> np.ndarray:
        """``S(f)`` for a block started at each label."""
        return self.segment(np.arange(len(self.labels)), 1, self.h)

    # exact laws
    def S_values(self) -> np.ndarray:
        if self.f is None:
            return self.f_tilde * self.h
        return self.block_sums()

    def S_law_under_pi(self) -> AtomicDist:
        """Law of ``S(f)`` from ``pi``: from ``(x, k)`` the block sums levels ``k..h(x)``."""
        if self.n_states > MAX_ENUM_STATES:
            raise UnsupportedError("too many states for exact enumeration")
        vals, probs = [], []
        for i, hh in enumerate(self.h):
            k = np.arange(1, hh + 1)
            vals.append(self.segment(np.full(hh, i), k, np.full(hh, hh)))
            probs.append(np.full(hh, self.alpha[i] / hh))
        return AtomicDist(np.concatenate(vals), np.concatenate(probs)).aggregated()

    def stationary_states(self) -> DiscreteLaw:
        if self.n_states > MAX_ENUM_STATES:
            raise UnsupportedError("too many states for exact enumeration")
        states, probs = [], []
        for lab, a, hh in zip(self.labels, self.alpha, self.h):
            for k in range(1, hh + 1):
                states.append((lab, k))
                probs.append(a / hh)
        return DiscreteLaw(states, np.array(probs))

    def stationarity_error(self) -> float:
        """Largest ``|(pi P)(s) - pi(s)|`` over all states."""
        if self.n_states > MAX_ENUM_STATES:
            raise UnsupportedError("too many states for exact enumeration")
        err = 0.0
        top_mass = math.fsum(self.alpha / self.h)  # pi(C)
        for i, hh in enumerate(self.h):
            p = self.alpha[i] / hh
            # level 1 is fed by the atom, level k > 1 by level k - 1
            err = max(err, abs(top_mass * self.nu[i] - p))
        return err

    # sampling
    def sample_nu(self, rng, size):
        return np.searchsorted(self._cum_nu, rng.random(size), side="right")

    def sample_pi(self, rng, size):
        lab = np.searchsorted(self._cum_alpha, rng.random(size), side="right")
        k = 1 + np.floor(rng.random(size) * self.h[lab]).astype(np.int64)
        return lab, np.minimum(k, self.h[lab])

    def sample_start(self, rng, size, start: str):
        if start == "nu":
            return self.sample_nu(rng, size), np.ones(size, dtype=np.int64)
        if start == "pi":
            return self.sample_pi(rng, size)
        raise PreconditionError(f"unknown start law {start!r}")

    def block_sampler(self, F, count, rng):
        """Fast split-chain blocks: per-label totals of ``F`` along the climb."""
        if self.n_states > MAX_ENUM_STATES:
            raise UnsupportedError("tower too tall for block tabulation")
        tot = np.array(
            [
                math.fsum(F((lab, k), int(k == hh)) for k in range(1, hh + 1))
                for lab, hh in zip(self.labels, self.h)
            ]
        )
        lab = self.sample_nu(rng, count)
        return tot[lab], self.h[lab].copy()

    def path_sums(self, n: int, count: int, rng, start: str = "nu", trunc: float = INF) -> dict:
        """Sums of ``f`` over the first ``n`` steps of ``count`` paths, with the block split.

        Returned arrays (one entry per path):

        * ``total``: ``f(X_0) + ... + f(X_{n-1})`` accumulated step by step;
        * ``head``/``head_abs``: sum of ``f`` / ``|f|`` over ``0..tau(0)``;
        * ``blocks``: ``s_1(f) + ... + s_N(f)`` with ``N = inf{i : tau(i) >= n - 1}``;
        * ``over``/``over_abs``: sum of ``f`` / ``|f|`` over ``n..tau(N)``;
        * ``small``/``large``: the part of ``blocks`` from blocks with ``|s_i| <= trunc`` / ``> trunc``;
        * ``N``.

        ``head + blocks - over == total`` holds exactly for integer-valued ``f``.
        """
        if n < 1:
            raise PreconditionError("n must be at least 1")
        lab0, k0 = self.sample_start(rng, count, start)
        h0 = self.h[lab0]
        L0 = h0 - k0 + 1
        head = self.segment(lab0, k0, h0)
        head_abs = self.segment(lab0, k0, h0, absolute=True)
        first = self.segment(lab0, k0, np.minimum(h0, k0 + n - 1))
        total = first.copy()
        blocks = np.zeros(count)
        small = np.zeros(count)
        N = np.zeros(count, dtype=np.int64)
        over = self.segment(lab0, k0 + n, h0)
        over_abs = self.segment(lab0, k0 + n, h0, absolute=True)
        rem = n - L0
        bsum = self.block_sums()
        bsmall = np.where(np.abs(bsum) <= trunc, bsum, 0.0)
        mean_len = self.R
        active = np.flatnonzero(rem > 0)
        while active.size:
            need = int(rem[active].max())
            width = max(8, min(int(need / mean_len * 1.1) + 32, PATH_CELLS // active.size))
            lab = self.sample_nu(rng, (active.size, width))
            L = self.h[lab]
            cs = np.cumsum(L, axis=1)
            r = rem[active]
            done = cs[:, -1] >= r
            # unfinished rows consume every drawn block
            nd = active[~done]
            if nd.size:
                s = bsum[lab[~done]].sum(axis=1)
                total[nd] += s
                blocks[nd] += s
                small[nd] += bsmall[lab[~done]].sum(axis=1)
                N[nd] += width
                rem[nd] -= cs[~done, -1]
            dn = active[done]
            if dn.size:
                csd, labd, rd = cs[done], lab[done], r[done]
                j = np.argmax(csd >= rd[:, None], axis=1)
                rows = np.arange(dn.size)
                before = np.where(j > 0, csd[rows, np.maximum(j - 1, 0)], 0)
                cols = np.arange(width)[None, :]
                full = np.where(cols < j[:, None], bsum[labd], 0.0).sum(axis=1)
                small[dn] += np.where(cols <= j[:, None], bsmall[labd], 0.0).sum(axis=1)
                lj = labd[rows, j]
                take = rd - before
                part = self.segment(lj, 1, take)
                total[dn] += full + part
                blocks[dn] += full + bsum[lj]
                over[dn] = self.segment(lj, take + 1, self.h[lj])
                over_abs[dn] = self.segment(lj, take + 1, self.h[lj], absolute=True)
                N[dn] += j + 1
                rem[dn] = 0
            active = active[~done]
        return {
            "total": total,
            "head": head,
            "head_abs": head_abs,
            "blocks": blocks,
            "small": small,
            "large": blocks - small,
            "over": over,
            "over_abs": over_abs,
            "N": N,
        }

    def path_values(self, n: int, rng, start: str = "nu") -> np.ndarray:
        """``f(X_0), ..., f(X_{n-1})`` along one simulated path."""
        off, flat, _, _ = self._level_tables()
        lab0, k0 = self.sample_start(rng, 1, start)
        starts = [off[lab0[0]] + k0[0] - 1]
        lens = [int(self.h[lab0[0]] - k0[0] + 1)]
        got = lens[0]
        while got < n:
            lab = self.sample_nu(rng, max(16, int((n - got) / self.R) + 16))
            starts.extend((off[lab]).tolist())
            lens.extend(self.h[lab].tolist())
            got += int(self.h[lab].sum())
        starts = np.array(starts)
        lens = np.array(lens)
        base = np.repeat(starts - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
        idx = base + np.arange(lens.sum())
        return flat[idx[:n]]


@dataclass
class TowerExactLaws:
    R: float
    nu: dict
    tau_plus_1_law: AtomicDist
    S_law_under_nu: AtomicDist
    pi_C: float
    f_law_under_pi: AtomicDist
    tower: Tower = field(repr=False)

    @property
    def E_nu_tau_plus_1(self) -> float:
        return float(math.fsum(self.tower.nu * self.tower.h))

    def S_law_under_pi(self) -> AtomicDist:
        return self.tower.S_law_under_pi()

    def E_nu_S_sq(self) -> float:
        S = self.tower.S_values()
        return float(math.fsum(self.tower.nu * S * S))

    def E_pi_f(self) -> float:
        if self.tower.f is None:
            return float(math.fsum(self.tower.alpha * self.tower.f_tilde))
        return float(self.tower.stationary_states().expect(self.tower.f))

    def to_rows(self) -> list[dict]:
        t = self.tower
        S = t.S_values()
        return [
            {"label": lab, "alpha": a, "nu": v, "h": int(hh), "f_tilde": ft, "S": s}
            for lab, a, v, hh, ft, s in zip(t.labels, t.alpha, t.nu, t.h, t.f_tilde, S)
        ]

    def to_csv(self, path) -> None:
        rows = self.to_rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


def build(spec: TowerChainSpec, f: Callable | None = None, check_ergodic: bool = True):
    """Chain and exact laws of the tower built on ``spec``.

    Returns ``(chain, laws)``; ``chain`` is a :class:`MinorizedChain` whose
    small set is the set of top levels, with ``m = delta = 1``.
    """
    spec.validate(check_ergodic)
    t = Tower(spec, f)
    h_of = dict(zip(t.labels, t.h.tolist()))

    def nu_sampler(rng):
        return (t.labels[int(t.sample_nu(rng, None))], 1)

    def kernel_sampler(state, rng):
        return (state[0], state[1] + 1)

    pi_exact = t.stationary_states() if t.n_states <= MAX_ENUM_STATES else None
    chain = MinorizedChain(
        delta=1.0,
        small_set_test=lambda s: s[1] == h_of[s[0]],
        nu_sampler=nu_sampler,
        kernel_sampler=kernel_sampler,
        pi_exact=pi_exact,
        pi_C=t.pi_C,
        block_sampler=t.block_sampler,
        state_id=lambda s: f"{s[0]}:{s[1]}",
        meta={"kind": "tower", "tower": t},
    )
    if f is None:
        f_law = AtomicDist(t.f_tilde, t.alpha).aggregated()
    else:
        st = t.stationary_states()
        f_law = AtomicDist(np.array([f(s) for s in st.states]), st.probs).aggregated()
    laws = TowerExactLaws(
        R=t.R,
        nu=dict(zip(t.labels, t.nu.tolist())),
        tau_plus_1_law=AtomicDist(t.h.astype(float), t.nu).aggregated(),
        S_law_under_nu=AtomicDist(t.S_values(), t.nu).aggregated(),
        pi_C=t.pi_C,
        f_law_under_pi=f_law,
        tower=t,
    )
    return chain, laws


def stationary_F_lower_bound(laws: TowerExactLaws, F: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
    """``(bound, exact)`` with ``bound = 1/2 sum F(h |f~| / 2) alpha <= exact = E_pi F(|S(f)|)``.

    ``F`` must be nondecreasing on ``[0, inf)``; this is probed on a grid.
    """
    t = laws.tower
    top = float(np.max(np.abs(t.f_tilde) * t.h)) if len(t.h) else 0.0
    probe = np.concatenate([[0.0], np.geomspace(1e-6, max(top, 1.0) * 2.0, 400)])
    vals = np.asarray(F(probe), dtype=float)
    if np.any(np.diff(vals) < -1e-12 * np.maximum(1.0, np.abs(vals[1:]))):
        raise PreconditionError("F must be nondecreasing")
    g = lambda x: np.asarray(F(np.asarray(x, dtype=float)), dtype=float)
    bound = 0.5 * float(np.sum(g(t.h * np.abs(t.f_tilde) / 2.0) * t.alpha))
    S = t.S_law_under_pi()
    exact = float(np.sum(g(np.abs(S.values)) * S.probs))
    return bound, exact


# counterexample constructions


LOG_VALUE_CAP = 700.0  # atoms are emitted while log(f~ h) stays in float range
LOG_H_CAP = 50.0
K_BUDGET = 2000  # x_n searched over 2^k, k <= K_BUDGET
MIN_TERMS = 60  # terms used to fix the normalizing constant (tail mass <= 2^-60)


@dataclass
class _Term:
    n: int
    log_x: float
    log_t: float
    log_cand: float
    log_w: float  # 2^-n / (candidate(x_n) + psi(t_n)/t_n)


class WeakOptConstruction:
    """Labelled law that breaks a candidate integrability function.

    ``kind = 'nu'``: the candidate ``rho`` is refuted when ``rho(x_n) <
    rho_{phi,psi}(x_n 2^{-n})`` along ``x_n -> infinity``; the atoms are
    ``f~ = x_n``, ``h = floor(t_n)`` with mass ``p_n`` proportional to
    ``2^{-n} / (psi(h)/h + rho(x_n))``, and ``E_nu phi(theta |S|)`` is the series
    ``R sum phi(theta x_n h_n) / h_n p_n``.

    ``kind = 'pi'``: the same with ``zeta``, integer ``t_n`` and the stationary
    lower-bound series ``1/2 sum phi(theta x_n t_n / 2) p_n``.

    The ``n = 0`` atom has ``f~ = 0`` and ``h = 1``.
    """

    def __init__(self, kind, phi: YoungFunction, psi: YoungFunction, candidate: YoungFunction,
                 n_max: int = 200, k_budget: int = K_BUDGET):
        if kind not in ("nu", "pi"):
            raise PreconditionError("kind must be 'nu' or 'pi'")
        self.kind = kind
        self.phi, self.psi, self.candidate = phi, psi, candidate
        self.n_max = int(n_max)
        self.k_budget = int(k_budget)
        self.target = rho_of(phi, psi) if kind == "nu" else zeta_of(phi, psi)
        lw0 = -float(psi.logf(0.0))  # 1 / psi(1)
        self.terms: list[_Term] = [_Term(0, -INF, 0.0, -INF, lw0)]
        self._k = 0
        self._exhausted = False
        for n in range(1, max(self.n_max, MIN_TERMS) + 1):
            if self._extend(n) is None:
                break
        self.n_found = len(self.terms) - 1
        self.refuted = self.n_found >= 1
        lw = np.array([t.log_w for t in self.terms])
        self.log_C = -float(logsumexp(lw))
        self.log_p = self.log_C + lw
        self.log_R = -float(logsumexp(self.log_p - np.array([t.log_t for t in self.terms])))
        self.message = (
            f"violation sequence found for n = 1..{self.n_found}"
            if self.refuted
            else "candidate not refuted at budget"
        )

    # search
    def _try_t(self, u_scaled: float, lc: float, v: float) -> float | None:
        """Admissible ``log t`` near the maximizer ``v``, or ``None``."""
        phi, psi = self.phi, self.psi
        if self.kind == "nu":
            cands = [max(v, LOG2)]
        elif v > 36.0:
            cands = [v]
        else:
            t = math.exp(v)
            cands = [math.log(c) for c in sorted({max(1, math.floor(t)), max(1, math.ceil(t))})]
        for lt in cands:
            if self.kind == "nu":
                lhs = float(phi.logf(u_scaled + lt)) - lt
            else:
                lhs = float(phi.logf(u_scaled + lt))
            rhs = float(np.logaddexp(lc, float(psi.logf(lt)) - lt))
            if lhs >= rhs:
                return lt
        return None

    def _extend(self, n: int) -> _Term | None:
        if self._exhausted:
            return None
        batch = 8
        k = self._k + 1
        while k <= self.k_budget:
            ks = np.arange(k, min(k + batch, self.k_budget + 1))
            u = ks * LOG2
            lc = np.asarray(self.candidate.logf(u), dtype=float)
            lt, v = log_sup(self.target.objective, u - n * LOG2)
            ok = np.flatnonzero((lc < lt) & np.isfinite(lt) & np.isfinite(lc))
            for i in ok:
                log_t = self._try_t(float(u[i] - n * LOG2), float(lc[i]), float(v[i]))
                if log_t is None:
                    continue
                if self.kind == "nu":
                    log_t = math.log(math.floor(math.exp(log_t))) if log_t < 36.0 else log_t
                denom = float(np.logaddexp(lc[i], float(self.psi.logf(log_t)) - log_t))
                term = _Term(n, float(u[i]), log_t, float(lc[i]), -n * LOG2 - denom)
                self.terms.append(term)
                self._k = int(ks[i])
                return term
            k = int(ks[-1]) + 1
            batch = min(2 * batch, 256)
        self._exhausted = True
        return None

    def _term(self, n: int) -> _Term | None:
        while len(self.terms) <= n:
            if self._extend(len(self.terms)) is None:
                return None
        return self.terms[n]

    # outputs
    @property
    def p_sum(self) -> float:
        return float(np.exp(logsumexp(self.log_p)))

    def log_series_term(self, term: _Term, theta: float) -> float:
        lp = self.log_C + term.log_w
        if theta <= 0 or term.log_x == -INF:
            return -INF
        lth = math.log(theta)
        if self.kind == "nu":
            return self.log_R + lp - term.log_t + float(self.phi.logf(lth + term.log_x + term.log_t))
        return -LOG2 + lp + float(self.phi.logf(lth + term.log_x + term.log_t - LOG2))

    def series(self, theta: float = 1.0) -> Iterator[float]:
        """Logarithms of the successive series terms (extends the search lazily)."""
        n = 0
        while True:
            term = self._term(n)
            if term is None:
                return
            yield self.log_series_term(term, theta)
            n += 1

    def spec(self) -> TowerChainSpec:
        """Finite tower: atoms ``n <= n_max`` in float range plus a residual atom (``h = 1``, ``f~ = 0``)."""
        atoms = []
        for term, lp in zip(self.terms[: self.n_max + 1], self.log_p):
            if term.log_t > LOG_H_CAP or term.log_x + term.log_t > LOG_VALUE_CAP:
                break
            h = 1 if term.n == 0 else int(round(math.exp(term.log_t)))
            x = 0.0 if term.log_x == -INF else math.exp(term.log_x)
            atoms.append(TowerAtom(f"n{term.n}", float(math.exp(lp)), x, h))
        resid = 1.0 - math.fsum(a.alpha for a in atoms)
        if resid > 0:
            atoms.append(TowerAtom("residual", resid, 0.0, 1))
        return TowerChainSpec(atoms)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "refuted": self.refuted,
            "message": self.message,
            "n_found": self.n_found,
            "p_sum": self.p_sum,
            "log_C": self.log_C,
            "log_R": self.log_R,
            "terms": [
                {"n": t.n, "log_x": t.log_x, "log_t": t.log_t, "log_p": float(lp)}
                for t, lp in zip(self.terms, self.log_p)
            ][: self.n_max + 1],
        }


def weak_opt_nu_spec(phi, psi, rho_candidate, n_max: int = 200, k_budget: int = K_BUDGET) -> WeakOptConstruction:
    """Counterexample construction for a candidate ``rho`` (chain started from ``nu``)."""
    return WeakOptConstruction("nu", phi, psi, rho_candidate, n_max, k_budget)


def weak_opt_pi_spec(phi, psi, zeta_candidate, n_max: int = 200, k_budget: int = K_BUDGET) -> WeakOptConstruction:
    """Counterexample construction for a candidate ``zeta`` (stationary chain)."""
    return WeakOptConstruction("pi", phi, psi, zeta_candidate, n_max, k_budget)
