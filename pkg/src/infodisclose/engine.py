"""Run one disclosure policy against a population of agents."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .behavior import (BehaviorConfig, agent_draws, choose_arm, choose_arms, estimate_stats,
                       estimate_matrix, tiebreak_draws)
from .core import BanditInstance, Outcome, RewardTape
from .errors import ContractError
from .graph import InfoGraph, validate_transitive

log = logging.getLogger(__name__)


@dataclass
class SimTrace:
    arms: np.ndarray
    rewards: np.ndarray
    means: tuple
    seed: int
    policy: str
    config_digest: str
    view_counts: Optional[np.ndarray] = field(default=None, repr=False)
    view_sums: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return len(self.arms)

    @property
    def pulls(self) -> list:
        return np.bincount(self.arms, minlength=len(self.means)).tolist()

    @property
    def regret(self) -> float:
        return regret_from_pulls(self.pulls, self.means)

    @property
    def outcomes(self) -> list:
        return [Outcome(t, int(a), int(r))
                for t, (a, r) in enumerate(zip(self.arms, self.rewards), start=1)]

    def summary(self, herd_tail: float = 0.25) -> dict:
        return {"policy": self.policy, "T": self.horizon, "seed": self.seed,
                "regret": self.regret, "pulls": self.pulls,
                "herded": herding_indicator(self, herd_tail)}


def _exact(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def regret_from_pulls(pulls: Sequence[int], means: Sequence[float]) -> float:
    best = max(_exact(m) for m in means)
    return float(sum(n * (best - _exact(m)) for n, m in zip(pulls, means)))


def regret_of(arms, instance: BanditInstance) -> float:
    """Sum over rounds of (best mean - mean of the pulled arm)."""
    arms = np.asarray(arms, dtype=np.int64)
    if arms.size and (arms.min() < 0 or arms.max() >= instance.num_arms):
        raise IndexError("arm index out of range")
    return regret_from_pulls(np.bincount(arms, minlength=instance.num_arms), instance.means)


def config_digest(instance: BanditInstance, graph: InfoGraph, cfg: BehaviorConfig) -> str:
    h = hashlib.sha256()
    h.update(json.dumps({"instance": instance.to_json(), "behavior": cfg.to_json()},
                        sort_keys=True).encode())
    for b in graph.blocks:
        h.update(repr((b.start, b.stop, b.view, b.chain)).encode())
    return h.hexdigest()[:16]


def run(instance: BanditInstance, graph: InfoGraph, cfg: BehaviorConfig, tape_seed: int,
        debug: bool = False) -> SimTrace:
    """Simulate rounds 1..T in order.

    Each agent's statistics are assembled from prefix sums over the
    intervals it observes, so the cost per agent does not grow with |S_t|.
    With ``debug`` the per-round observed counts and sums are recorded.
    """
    if graph.horizon != instance.horizon:
        raise ContractError(f"graph horizon {graph.horizon} != instance horizon {instance.horizon}")
    K, T = instance.num_arms, instance.horizon
    tape = RewardTape.for_instance(instance, tape_seed).draws
    tape_lists = None
    arms = np.empty(T, dtype=np.int64)
    rewards = np.empty(T, dtype=np.int64)
    pc = np.zeros((T + 1, K), dtype=np.int64)   # pc[t] = pulls per arm in rounds 1..t
    ps = np.zeros((T + 1, K), dtype=np.int64)
    vc = np.zeros((T, K), dtype=np.int64) if debug else None
    vs = np.zeros((T, K), dtype=np.int64) if debug else None
    pulls = [0] * K
    stream = int(tape_seed)
    randomized = cfg.needs_draws or cfg.projection_mode

    for b in graph.blocks:
        counts = np.zeros(K, dtype=np.int64)
        sums = np.zeros(K, dtype=np.int64)
        for lo, hi in b.view:
            counts += pc[hi - 1] - pc[lo - 1]
            sums += ps[hi - 1] - ps[lo - 1]
        i0, i1 = b.start - 1, b.stop - 1
        agents = np.arange(b.start, b.stop)
        if b.chain:
            if tape_lists is None:
                tape_lists = [row.tolist() for row in tape]
            draws = agent_draws(cfg, agents, K, stream).tolist() if cfg.needs_draws else None
            ties = tiebreak_draws(cfg, agents, stream).tolist() if cfg.projection_mode else None
            c, s = counts.tolist(), sums.tolist()
            for i in range(b.size):
                if debug:
                    vc[i0 + i], vs[i0 + i] = c, s
                est = estimate_stats(cfg, c, s, draws[i] if draws else None)
                a = choose_arm(est, ties[i] if ties else None)
                r = tape_lists[a][pulls[a]]
                pulls[a] += 1
                c[a] += 1
                s[a] += r
                arms[i0 + i] = a
                rewards[i0 + i] = r
        else:
            if debug:
                vc[i0:i1], vs[i0:i1] = counts, sums
            if randomized:
                draws = agent_draws(cfg, agents, K, stream) if cfg.needs_draws else None
                est = estimate_matrix(cfg, counts[None, :], sums[None, :], draws)
                ties = tiebreak_draws(cfg, agents, stream) if cfg.projection_mode else None
                blk = choose_arms(np.broadcast_to(est, (b.size, K)), ties)
            else:
                blk = np.full(b.size, choose_arm(estimate_stats(cfg, counts.tolist(), sums.tolist())))
            arms[i0:i1] = blk
            for a in range(K):
                idx = np.flatnonzero(blk == a)
                if idx.size:
                    rewards[i0 + idx] = tape[a, pulls[a]:pulls[a] + idx.size]
                    pulls[a] += idx.size
        onehot = arms[i0:i1, None] == np.arange(K)
        pc[b.start:b.stop] = pc[i0] + np.cumsum(onehot, axis=0)
        ps[b.start:b.stop] = ps[i0] + np.cumsum(onehot * rewards[i0:i1, None], axis=0)

    policy = graph.meta.get("preset", graph.meta.get("policy", "custom"))
    return SimTrace(arms, rewards, instance.means, int(tape_seed), policy,
                    config_digest(instance, graph, cfg), vc, vs)


def run_checked(instance, graph, cfg, tape_seed, debug=False) -> SimTrace:
    bad = validate_transitive(graph)
    if bad:
        raise ContractError(f"graph is not transitive: {bad[:3]}")
    return run(instance, graph, cfg, tape_seed, debug)


def run_constant(instance: BanditInstance, arm: Union[int, str], tape_seed: int) -> SimTrace:
    """Every agent pulls one fixed arm ("best", "worst" or an index)."""
    if arm == "best":
        arm = int(np.argmax(instance.means))
    elif arm == "worst":
        arm = int(np.argmin(instance.means))
    if not 0 <= arm < instance.num_arms:
        raise IndexError(f"arm {arm} out of range")
    T = instance.horizon
    tape = RewardTape.for_instance(instance, tape_seed)
    arms = np.full(T, arm, dtype=np.int64)
    return SimTrace(arms, tape.row(arm).astype(np.int64), instance.means, int(tape_seed),
                    f"constant-{arm}", hashlib.sha256(f"{instance.digest}|const|{arm}".encode()).hexdigest()[:16])


def herding_indicator(trace: SimTrace, tail_fraction: float) -> bool:
    """True iff the last ceil(tail_fraction*T) rounds all pull one suboptimal arm."""
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    tail = trace.arms[-math.ceil(tail_fraction * trace.horizon):]
    a = int(tail[0])
    return bool((tail == a).all() and trace.means[a] < max(trace.means))


# -- batches ---------------------------------------------------------------

def _one(job):
    runner, seed = job
    try:
        return runner(seed).summary()
    except Exception as exc:    # reported per seed; the batch carries on
        log.warning("seed %s failed: %s", seed, exc)
        return {"seed": seed, "error": f"{type(exc).__name__}: {exc}"}


@dataclass(frozen=True)
class _Runner:
    instance: BanditInstance
    graph: Optional[InfoGraph]
    cfg: Optional[BehaviorConfig]
    constant_arm: Optional[object] = None

    def __call__(self, seed):
        if self.graph is None:
            return run_constant(self.instance, self.constant_arm, seed)
        return run(self.instance, self.graph, self.cfg, seed)


def run_batch(instance: BanditInstance, graph, cfg: BehaviorConfig, seeds: Sequence[int],
              threads: int = 1, **preset_kw) -> list:
    """Trace summaries for each seed, in the order of `seeds`.

    `graph` is an InfoGraph, a preset name, or ("constant", arm).
    """
    if isinstance(graph, str):
        from .presets import build_preset
        name = graph
        graph = build_preset(name, instance.horizon, instance.num_arms, cfg.n_est, **preset_kw)
        graph.meta["preset"] = name
    if isinstance(graph, tuple) and graph and graph[0] == "constant":
        runner = _Runner(instance, None, None, graph[1])
    else:
        runner = _Runner(instance, graph, cfg)
    jobs = [(runner, int(s)) for s in seeds]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_one, jobs))
    return [_one(j) for j in jobs]


def batch_stats(summaries: Sequence[dict]) -> dict:
    reg = np.array([s["regret"] for s in summaries if "error" not in s], dtype=np.float64)
    n = reg.size
    se = float(reg.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return {"n": int(n), "mean_regret": float(reg.mean()) if n else float("nan"), "se": se,
            "failures": len(summaries) - int(n)}
