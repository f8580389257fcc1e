"""Agents' reward estimates and arm choice."""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from . import _rng
from .core import HIGH, LOW, Outcome, multiset_stats
from .errors import ConfigError, ContractError

log = logging.getLogger(__name__)

KINDS = ("empirical_mean", "band_perturbed", "optimistic", "pessimistic",
         "beta_posterior", "adversarial_violator")
SMALL_SAMPLE_RULES = ("empirical", "unseen", "upper", "lower")


@dataclass(frozen=True)
class BehaviorConfig:
    kind: str = "empirical_mean"
    n_est: int = 1
    c_est: float = 1 / 16
    unseen_estimate: float = 1.0
    band_fraction: float = 0.99
    projection_mode: bool = False
    beta_params: tuple = ((1.0, 1.0),)
    small_sample: str = "empirical"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown behavior kind {self.kind!r}")
        if int(self.n_est) != self.n_est or self.n_est < 1:
            raise ConfigError("n_est must be a positive integer")
        if not 0 < self.c_est < 1 / 3:
            raise ConfigError("c_est must lie in (0, 1/3)")
        if not LOW - 1e-12 <= self.unseen_estimate <= 1:
            raise ConfigError("unseen_estimate must lie in [1/3, 1]")
        if not 0 <= self.band_fraction < 1:
            raise ConfigError("band_fraction must lie in [0, 1)")
        if self.small_sample not in SMALL_SAMPLE_RULES:
            raise ConfigError(f"unknown small_sample rule {self.small_sample!r}")
        params = tuple(tuple(float(x) for x in p) for p in self.beta_params)
        if not params or any(len(p) != 2 or min(p) <= 0 for p in params):
            raise ConfigError("beta_params must be positive (alpha, beta) pairs")
        object.__setattr__(self, "beta_params", params)

    def beta(self, arm: int) -> tuple:
        p = self.beta_params
        return p[arm] if len(p) > 1 else p[0]

    @property
    def needs_draws(self) -> bool:
        return self.kind == "band_perturbed"

    @property
    def band_width(self) -> float:
        return self.band_fraction * self.c_est

    def to_json(self) -> dict:
        d = asdict(self)
        d["beta_params"] = [list(p) for p in self.beta_params]
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "BehaviorConfig":
        obj = dict(obj)
        if "beta_params" in obj:
            bp = obj["beta_params"]
            if bp and not isinstance(bp[0], (list, tuple)):
                bp = [bp]
            obj["beta_params"] = tuple(tuple(p) for p in bp)
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


# -- scalar path -----------------------------------------------------------

def estimate_stats(cfg: BehaviorConfig, counts: Sequence[int], sums: Sequence[int],
                   draws: Optional[Sequence[float]] = None) -> List[float]:
    """Estimates from per-arm pull counts and reward sums.

    `draws` are the agent's uniform draws per arm (only band_perturbed
    reads them).
    """
    out = []
    kind = cfg.kind
    for a, (n, s) in enumerate(zip(counts, sums)):
        if kind == "beta_posterior":
            al, be = cfg.beta(a)
            x = (s + al) / (n + al + be)
        elif kind == "adversarial_violator":
            x = 1.0 - s / n if n else 0.0
        elif n == 0:
            x = cfg.unseen_estimate
        else:
            mean = s / n
            if n < cfg.n_est:
                rule = cfg.small_sample
                if rule == "empirical":
                    x = mean
                elif rule == "unseen":
                    x = cfg.unseen_estimate
                else:
                    w = cfg.band_width / math.sqrt(n)
                    x = mean + w if rule == "upper" else mean - w
            elif kind == "empirical_mean":
                x = mean
            else:
                w = cfg.band_width / math.sqrt(n)
                if kind == "band_perturbed":
                    x = mean + (2.0 * draws[a] - 1.0) * w
                elif kind == "optimistic":
                    x = mean + w
                else:
                    x = mean - w
        if x < 0.0 or x > 1.0:
            log.debug("clamping estimate %.6g for arm %d", x, a)
            x = min(max(x, 0.0), 1.0)
        if cfg.projection_mode:
            x = min(max(x, LOW), HIGH)
        out.append(x)
    return out


def agent_draws(cfg: BehaviorConfig, agents, num_arms: int, stream: int = 0) -> np.ndarray:
    """Per-(agent, arm) uniforms, shape (len(agents), num_arms)."""
    agents = np.atleast_1d(np.asarray(agents, dtype=np.int64))
    return np.stack([_rng.uniforms(agents, _rng.AGENT, cfg.seed, stream, a)
                     for a in range(num_arms)], axis=1)


def tiebreak_draws(cfg: BehaviorConfig, agents, stream: int = 0) -> np.ndarray:
    return _rng.uniforms(np.atleast_1d(agents), _rng.TIEBREAK, cfg.seed, stream)


def estimate(cfg: BehaviorConfig, agent: int, m: Counter, K: int, stream: int = 0) -> List[float]:
    """Estimate vector of agent `agent` given an anonymized subhistory `m`."""
    st = multiset_stats(m, K)
    draws = agent_draws(cfg, [agent], K, stream)[0] if cfg.needs_draws else None
    return estimate_stats(cfg, st.counts, st.sums, draws)


def choose_arm(estimates: Sequence[float], tie_draw: Optional[float] = None) -> int:
    """Argmax; ties go to the lowest index, or uniformly at random given `tie_draw`."""
    best = max(estimates)
    if tie_draw is None:
        for a, x in enumerate(estimates):
            if x == best:
                return a
    ties = [a for a, x in enumerate(estimates) if x == best]
    return ties[min(int(tie_draw * len(ties)), len(ties) - 1)]


# -- vectorized path -------------------------------------------------------

def estimate_matrix(cfg: BehaviorConfig, counts, sums, draws=None) -> np.ndarray:
    """Same rule as :func:`estimate_stats` over broadcast (n, K) arrays."""
    counts = np.asarray(counts, dtype=np.int64)
    sums = np.asarray(sums, dtype=np.int64)
    counts, sums = np.broadcast_arrays(counts, sums)
    if draws is not None:
        counts, sums, draws = np.broadcast_arrays(counts, sums, np.asarray(draws, dtype=np.float64))
    K = counts.shape[-1]
    kind = cfg.kind
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "beta_posterior":
            al = np.array([cfg.beta(a)[0] for a in range(K)])
            be = np.array([cfg.beta(a)[1] for a in range(K)])
            x = (sums + al) / (counts + al + be)
        elif kind == "adversarial_violator":
            x = np.where(counts > 0, 1.0 - sums / counts, 0.0)
        else:
            mean = sums / counts
            w = cfg.band_width / np.sqrt(counts)
            if kind == "empirical_mean":
                big = mean
            elif kind == "band_perturbed":
                big = mean + (2.0 * draws - 1.0) * w
            elif kind == "optimistic":
                big = mean + w
            else:
                big = mean - w
            rule = cfg.small_sample
            small = {"empirical": mean,
                     "unseen": np.full(mean.shape, cfg.unseen_estimate),
                     "upper": mean + w, "lower": mean - w}[rule] if cfg.n_est > 1 else big
            x = np.where(counts == 0, cfg.unseen_estimate,
                         np.where(counts < cfg.n_est, small, big))
    x = np.clip(x, 0.0, 1.0)
    if cfg.projection_mode:
        x = np.clip(x, LOW, HIGH)
    return x


def choose_arms(est: np.ndarray, tie_draws=None) -> np.ndarray:
    """Row-wise :func:`choose_arm`."""
    est = np.atleast_2d(est)
    if tie_draws is None:
        return np.argmax(est, axis=1)
    is_max = est == est.max(axis=1, keepdims=True)
    n_ties = is_max.sum(axis=1)
    pick = np.minimum((np.asarray(tie_draws) * n_ties).astype(np.int64), n_ties - 1)
    # index of the pick-th maximal entry in each row
    rank = np.cumsum(is_max, axis=1) - 1
    return np.argmax(is_max & (rank == pick[:, None]), axis=1)


# -- assumption checks -----------------------------------------------------

@dataclass
class ComplianceReport:
    kind: str
    cases: int
    violations: list = field(default_factory=list)

    @property
    def compliant(self) -> bool:
        return not self.violations

    @property
    def offending_n(self) -> list:
        return sorted({v["n"] for v in self.violations if v["check"] == "band"})

    def to_json(self) -> dict:
        return {"kind": self.kind, "cases": self.cases, "compliant": self.compliant,
                "violations": self.violations[:50], "num_violations": len(self.violations),
                "offending_n": self.offending_n[:50]}


def _reference_mean(cfg, mean):
    return min(max(mean, LOW), HIGH) if cfg.projection_mode else mean


def _tally(arms: np.ndarray, rewards: np.ndarray) -> Counter:
    m: Counter = Counter()
    codes, counts = np.unique(2 * arms + rewards, return_counts=True)
    for c, k in zip(codes.tolist(), counts.tolist()):
        m[(c // 2, c % 2)] = k
    return m


def check_assumption_compliance(cfg: BehaviorConfig, fuzz_rounds: int = 10_000, seed: int = 0,
                                n_max: int = 100_000) -> ComplianceReport:
    """Fuzz random anonymized subhistories and sweep worst cases over n.

    Checks the confidence band |est - mean| < c_est/sqrt(n) for n >= n_est,
    the floor est >= 1/3 for unseen arms, and invariance of the estimate
    under re-ordering the rounds of the subhistory.  With projection_mode
    the band is measured against the projected empirical mean.
    """
    rng = np.random.default_rng(seed)
    rep = ComplianceReport(cfg.kind, 0)

    def check(counts, sums, est, ctx):
        for a, (n, s) in enumerate(zip(counts, sums)):
            x = est[a]
            if n == 0:
                if x < LOW:
                    rep.violations.append({"check": "unseen_floor", "n": 0, "s": 0, "arm": a,
                                           "estimate": x, **ctx})
            elif n >= cfg.n_est:
                bound = cfg.c_est / math.sqrt(n)
                if not abs(x - _reference_mean(cfg, s / n)) < bound:
                    rep.violations.append({"check": "band", "n": int(n), "s": int(s), "arm": a,
                                           "estimate": x, "bound": bound, **ctx})

    for case in range(fuzz_rounds):
        K = int(rng.integers(2, 5))
        arms_l, rew_l = [], []
        for a in range(K):
            r = rng.random()
            if r < 0.15:
                n = 0
            elif r < 0.5:
                n = int(rng.integers(1, cfg.n_est + 8))
            else:
                n = int(np.exp(rng.uniform(0, np.log(5000))))
            r = rng.random()
            s = 0 if r < 0.15 else n if r < 0.3 else int(rng.binomial(n, rng.uniform(0.2, 0.8)))
            arms_l.append(np.full(n, a))
            rew_l.append(np.arange(n) < s)
        arms = np.concatenate(arms_l)
        rew = np.concatenate(rew_l).astype(np.int64)
        # the same outcomes listed in round order and in a shuffled order
        order1, order2 = rng.permutation(arms.size), rng.permutation(arms.size)
        agent = int(rng.integers(1, 1 << 40))
        m1, m2 = _tally(arms[order1], rew[order1]), _tally(arms[order2], rew[order2])
        e1 = estimate(cfg, agent, m1, K)
        e2 = estimate(cfg, agent, m2, K)
        if e1 != e2:
            rep.violations.append({"check": "anonymity", "n": int(arms.size), "case": case})
        st = multiset_stats(m1, K)
        check(st.counts, st.sums, e1, {"case": case})
        rep.cases += 1

    # deterministic worst-case sweep over n (extreme and central reward sums)
    n = np.arange(cfg.n_est, n_max + 1, dtype=np.int64)
    for s in (np.zeros_like(n), n // 3, n // 2, n):
        for u in (0.0, 0.5, 1.0 - 2.0 ** -53):
            draws = np.full((n.size, 1), u)
            if cfg.kind == "beta_posterior" and len(cfg.beta_params) > 1:
                cols = [estimate_matrix(replace(cfg, beta_params=(cfg.beta(a),)),
                                        n[:, None], s[:, None], draws)[:, 0]
                        for a in range(len(cfg.beta_params))]
            else:
                cols = [estimate_matrix(cfg, n[:, None], s[:, None], draws)[:, 0]]
            ref = s / n
            if cfg.projection_mode:
                ref = np.clip(ref, LOW, HIGH)
            bound = cfg.c_est / np.sqrt(n)
            for a, est in enumerate(cols):
                bad = ~(np.abs(est - ref) < bound)
                for i in np.flatnonzero(bad)[:20]:
                    rep.violations.append({"check": "band", "n": int(n[i]), "s": int(s[i]), "arm": a,
                                           "estimate": float(est[i]), "bound": float(bound[i]),
                                           "sweep": True})
                rep.cases += n.size
    return rep


def posterior_adaptive_invariance(beta_params, h1: Sequence[Outcome], h2: Sequence[Outcome]) -> bool:
    """Compare Beta-Bernoulli posterior means built by sequential updates.

    Both histories must hold the same per-arm pull counts and reward sums;
    only the order of pulls may differ.
    """
    params = tuple(beta_params) if beta_params else ((1, 1),)
    if not isinstance(params[0], (tuple, list)):
        params = (params,)

    def tally(h):
        out: dict = {}
        for o in h:
            n, s = out.get(o.arm, (0, 0))
            out[o.arm] = (n + 1, s + o.reward)
        return out

    if tally(h1) != tally(h2):
        raise ContractError("histories differ in per-arm pull counts or reward sums")

    def posterior(h):
        ab: dict = {}
        for o in h:
            p = params[o.arm] if len(params) > 1 else params[0]
            al, be = ab.get(o.arm, (Fraction(p[0]), Fraction(p[1])))
            ab[o.arm] = (al + o.reward, be + 1 - o.reward)
        return {a: al / (al + be) for a, (al, be) in ab.items()}

    return posterior(h1) == posterior(h2)
