"""Split-chain simulation for chains with a one-step minorization.

A chain is described by its small set ``C``, the minorization constant
``delta`` and samplers for ``nu``, the residual kernel
``(P(x, .) - delta nu) / (1 - delta)`` on ``C`` and ``P(x, .)`` off ``C``.
Marks ``Y_k`` are drawn only on ``C``; a mark ``Y_k = 1`` ends a regeneration
block and the next state is drawn from ``nu``.

Regeneration blocks started from ``nu`` are i.i.d. for ``m = 1``, so block
statistics are sampled in fixed-size chunks, each with its own counter-based
stream, and merged in chunk order: results do not depend on the number of
workers.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Sequence

import numpy as np

from .errors import PreconditionError, UnsupportedError
from .rng import chunked, parallel_map, stream

State = Hashable
BLOCK_CHUNK = 4096
MAX_BLOCK_STEPS = 10_000_000


@dataclass
class DiscreteLaw:
    """Finitely supported law on arbitrary (hashable) states."""

    states: list
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if len(self.states) != self.probs.size:
            raise PreconditionError("states and probs differ in length")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-10:
            raise PreconditionError("probs must be nonnegative and sum to 1")
        self._cum = np.cumsum(self.probs)
        self._cum[-1] = 1.0

    def sample(self, rng: np.random.Generator, size: int | None = None):
        idx = np.searchsorted(self._cum, rng.random(size), side="right")
        if size is None:
            return self.states[int(idx)]
        return [self.states[i] for i in idx]

    def expect(self, g: Callable[[Any], float]) -> float:
        return math.fsum(p * g(s) for s, p in zip(self.states, self.probs) if p > 0)

    def as_dict(self) -> dict:
        return dict(zip(self.states, self.probs.tolist()))


@dataclass
class MinorizedChain:
    """Markov chain with ``P(x, .) >= delta nu`` for ``x`` in the small set.

    ``block_sampler(F, count, rng)``, when given, must return ``(sums, lengths)``
    for ``count`` independent blocks started from ``nu``, where
    ``sums = sum_{i <= tau} F(X_i, Y_i)``; it replaces step-by-step simulation.
    """

    delta: float
    small_set_test: Callable[[State], bool]
    nu_sampler: Callable[[np.random.Generator], State]
    kernel_sampler: Callable[[State, np.random.Generator], State]
    residual_sampler: Callable[[State, np.random.Generator], State] | None = None
    pi_exact: DiscreteLaw | None = None
    pi_C: float | None = None
    m: int = 1
    block_sampler: Callable | None = None
    state_id: Callable[[State], str] = str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise PreconditionError(f"delta must lie in (0, 1], got {self.delta}")
        if self.delta < 1.0 and self.residual_sampler is None:
            raise PreconditionError("delta < 1 requires a residual sampler")
        if self.m < 1:
            raise PreconditionError("m must be a positive integer")
        if self.pi_exact is not None and self.pi_C is None:
            self.pi_C = self.pi_exact.expect(lambda s: float(self.small_set_test(s)))

    def step(self, x: State, rng: np.random.Generator) -> tuple[bool, State]:
        """One split-chain transition: ``(Y_k, X_{k+1})`` given ``X_k = x``."""
        if self.small_set_test(x):
            y = self.delta >= 1.0 or bool(rng.random() < self.delta)
            if y:
                return True, self.nu_sampler(rng)
            return False, self.residual_sampler(x, rng)
        return False, self.kernel_sampler(x, rng)

    def exact_pi_expectation(self, F: Callable[[State, int], float]) -> float:
        """``E_pi F(X_0, Y_0)`` with ``Y_0 ~ Bernoulli(delta)`` on ``C``."""
        if self.pi_exact is None:
            raise PreconditionError("exact stationary law is not available for this chain")

        def g(s):
            if self.small_set_test(s):
                v = self.delta * F(s, 1)
                if self.delta < 1.0:
                    v += (1.0 - self.delta) * F(s, 0)
                return v
            return F(s, 0)

        return self.pi_exact.expect(g)

    def occupation_factor(self) -> float:
        """``delta^{-1} pi(C)^{-1}``, the mean block length."""
        if not self.pi_C:
            raise PreconditionError("pi(C) is not known for this chain")
        return 1.0 / (self.delta * self.pi_C)


def finite_chain(P, small_set: Sequence[int], pi: np.ndarray | None = None) -> MinorizedChain:
    """Finite-state chain on ``0..n-1`` with the best one-step minorization on ``small_set``.

    ``nu`` is proportional to ``min_{x in C} P(x, .)`` and ``delta`` is its mass.
    The stationary law is solved for when not supplied.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if P.shape != (n, n) or np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
        raise PreconditionError("P must be a square stochastic matrix")
    C = sorted(set(int(c) for c in small_set))
    if not C or C[0] < 0 or C[-1] >= n:
        raise PreconditionError("small set must be a nonempty subset of the states")
    low = P[C].min(axis=0)
    delta = float(low.sum())
    if delta <= 0:
        raise PreconditionError("rows of the small set share no common mass")
    nu = low / delta
    in_C = np.zeros(n, dtype=bool)
    in_C[C] = True
    cum_P = np.cumsum(P, axis=1)
    cum_nu = np.cumsum(nu)
    resid = {}
    if delta < 1.0:
        for c in C:
            r = np.clip(P[c] - delta * nu, 0.0, None)
            resid[c] = np.cumsum(r / r.sum())

    def draw(cum, rng):
        return int(min(np.searchsorted(cum, rng.random() * cum[-1], side="right"), n - 1))

    if pi is None:
        A = np.vstack([P.T - np.eye(n), np.ones(n)])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi = np.linalg.lstsq(A, b, rcond=None)[0]
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
    pi = np.asarray(pi, dtype=float)
    if np.max(np.abs(pi @ P - pi)) > 1e-10:
        raise PreconditionError("supplied law is not stationary for P")

    return MinorizedChain(
        delta=delta,
        small_set_test=lambda x: bool(in_C[x]),
        nu_sampler=lambda rng: draw(cum_nu, rng),
        kernel_sampler=lambda x, rng: draw(cum_P[x], rng),
        residual_sampler=(lambda x, rng: draw(resid[x], rng)) if delta < 1.0 else None,
        pi_exact=DiscreteLaw(list(range(n)), pi),
        meta={"kind": "finite", "n_states": n, "small_set": C, "nu": nu.tolist()},
    )


@dataclass
class RegenTrace:
    """Simulated path of the split chain with its regeneration structure."""

    states: list
    marks: np.ndarray
    tau: np.ndarray
    f_values: np.ndarray | None
    seed: int
    init: str

    @property
    def block_lengths(self) -> np.ndarray:
        """``T_i = tau(i) - tau(i-1)`` for ``i >= 1``."""
        return np.diff(self.tau)

    @property
    def head_sum(self) -> float:
        """Sum of ``f`` over ``0..tau(0)`` (nan if no regeneration occurred)."""
        if self.f_values is None or self.tau.size == 0:
            return math.nan
        return float(self.f_values[: self.tau[0] + 1].sum())

    @property
    def block_sums(self) -> np.ndarray:
        """``s_i(f) = sum over tau(i-1)+1..tau(i)`` for ``i >= 1``."""
        if self.f_values is None:
            raise PreconditionError("trace was simulated without f")
        if self.tau.size < 2:
            return np.zeros(0)
        cs = np.concatenate([[0.0], np.cumsum(self.f_values)])
        return cs[self.tau[1:] + 1] - cs[self.tau[:-1] + 1]

    def block_ids(self) -> np.ndarray:
        """Block index of each step; ``-1`` for the unfinished tail."""
        ids = np.searchsorted(self.tau, np.arange(len(self.states)), side="left")
        ids[ids >= self.tau.size] = -1
        return ids

    def to_csv(self, path, state_id: Callable[[State], str] = str) -> None:
        ids = self.block_ids()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "state", "Y", "block"])
            for k, (s, y, b) in enumerate(zip(self.states, self.marks, ids)):
                w.writerow([k, state_id(s), int(y), int(b)])

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "init": self.init,
            "steps": len(self.states),
            "tau": self.tau.tolist(),
            "block_lengths": self.block_lengths.tolist(),
        }


def _initial_state(chain: MinorizedChain, init, rng) -> tuple[State, str]:
    if isinstance(init, str):
        if init == "nu":
            return chain.nu_sampler(rng), "nu"
        if init == "pi":
            if chain.pi_exact is None:
                raise PreconditionError("init='pi' requires the exact stationary law")
            return chain.pi_exact.sample(rng), "pi"
        raise PreconditionError(f"unknown initial law {init!r}")
    if isinstance(init, tuple) and len(init) == 2 and init[0] == "point":
        return init[1], "point"
    raise PreconditionError("init must be 'nu', 'pi' or ('point', x)")


def _require_m1(chain: MinorizedChain) -> None:
    if chain.m != 1:
        raise UnsupportedError("simulation is implemented for one-step minorization (m = 1) only")


def simulate(chain: MinorizedChain, init="nu", steps: int = 100, seed: int = 0, f=None) -> RegenTrace:
    """Simulate ``steps`` states of the split chain from ``nu``, ``pi`` or ``('point', x)``."""
    _require_m1(chain)
    if steps < 0:
        raise PreconditionError("steps must be nonnegative")
    rng = stream(seed, 0)
    states, marks = [], np.zeros(steps, dtype=bool)
    if steps:
        x, label = _initial_state(chain, init, rng)
    else:
        label = init if isinstance(init, str) else "point"
    for k in range(steps):
        states.append(x)
        y, x = chain.step(x, rng)
        marks[k] = y
    fv = None if f is None else np.array([f(s) for s in states], dtype=float)
    return RegenTrace(states, marks, np.flatnonzero(marks), fv, int(seed), label)


def _generic_blocks(chain: MinorizedChain, F, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    sums = np.empty(count)
    lengths = np.empty(count, dtype=np.int64)
    for b in range(count):
        x = chain.nu_sampler(rng)
        acc, n = 0.0, 0
        while True:
            y, nxt = chain.step(x, rng)
            acc += F(x, int(y))
            n += 1
            if y:
                break
            if n >= MAX_BLOCK_STEPS:
                raise PreconditionError("regeneration block exceeded the step budget")
            x = nxt
        sums[b], lengths[b] = acc, n
    return sums, lengths


def sample_blocks(chain: MinorizedChain, F, n_blocks: int, seed: int, workers: int | None = None):
    """``(sum_{i<=tau} F(X_i, Y_i), tau + 1)`` for ``n_blocks`` i.i.d. blocks from ``nu``."""
    _require_m1(chain)
    sampler = chain.block_sampler

    def run(chunk):
        idx, count = chunk
        rng = stream(seed, 1, idx)
        if sampler is not None:
            return sampler(F, count, rng)
        return _generic_blocks(chain, F, count, rng)

    parts = parallel_map(run, chunked(int(n_blocks), BLOCK_CHUNK), workers)
    if not parts:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass
class IdentityReport:
    check: str
    n_blocks: int
    mc_mean: float
    mc_stderr: float
    exact: float
    z: float
    seed: int

    @property
    def passed(self) -> bool:
        return abs(self.z) <= 3.0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def z_score(mean: float, stderr: float, exact: float) -> float:
    diff = mean - exact
    # differences at rounding level carry no information, even when the
    # sample is constant and its stderr is itself rounding noise
    if abs(diff) <= 1e-12 * max(1.0, abs(exact)):
        return 0.0
    if stderr > 0:
        return diff / stderr
    return math.copysign(math.inf, diff)


def _identity_report(name, sums, exact, seed) -> IdentityReport:
    n = sums.size
    mean = float(sums.mean()) if n else math.nan
    se = float(sums.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return IdentityReport(name, int(n), mean, se, float(exact), z_score(mean, se, exact), int(seed))


def pitman_check(chain: MinorizedChain, F, n_blocks: int, seed: int, workers: int | None = None) -> IdentityReport:
    """Monte Carlo ``E_nu sum_{i<=tau} F(X_i, Y_i)`` against ``delta^{-1} pi(C)^{-1} E_pi F``."""
    exact = chain.occupation_factor() * chain.exact_pi_expectation(F)
    sums, _ = sample_blocks(chain, F, n_blocks, seed, workers)
    return _identity_report("pitman", sums, exact, seed)


def block_mean_check(chain: MinorizedChain, f, n_blocks: int, seed: int, workers: int | None = None) -> IdentityReport:
    """Mean block sum ``E s_i(f)`` against ``delta^{-1} pi(C)^{-1} m E_pi f``.

    For ``m = 1`` the blocks ``s_i(f)``, ``i >= 1``, are i.i.d. with the law of
    ``S(f)`` under ``nu``, so independent blocks from ``nu`` are sampled directly.
    """
    exact = chain.occupation_factor() * chain.m * chain.exact_pi_expectation(lambda s, y: f(s))
    sums, _ = sample_blocks(chain, lambda s, y: f(s), n_blocks, seed, workers)
    return _identity_report("block_mean", sums, exact, seed)


def sample_S_under_nu(chain: MinorizedChain, f, n_blocks: int, seed: int, workers: int | None = None) -> np.ndarray:
    """``n_blocks`` independent draws of ``S(f)`` for the chain started from ``nu``."""
    return sample_blocks(chain, lambda s, y: f(s), n_blocks, seed, workers)[0]
