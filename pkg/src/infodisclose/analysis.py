"""Monte Carlo harness: path constants, event monitors, regret curves and fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import oracles
from .behavior import BehaviorConfig
from .core import BanditInstance, RewardTape
from .engine import run, run_constant
from .errors import ConfigError
from .graph import InfoGraph, LevelSpec, build_two_level
from .presets import PolicySpec, path_length

CSV_HEADER = ("policy", "T", "delta", "seed", "regret")


# -- constants of full-disclosure paths -----------------------------------

@dataclass
class PathConstants:
    q: list            # expected pulls per arm in one path
    q_se: list
    p_all: float       # probability that one path samples every arm
    p_se: float
    trials: int


def estimate_fdp_constants(K: int, cfg: BehaviorConfig, path_len: Optional[int] = None,
                           trials: int = 10_000, means: Optional[Sequence[float]] = None,
                           seed: int = 0) -> PathConstants:
    """Monte Carlo over independent full-disclosure paths.

    The paths are run as the first level of one two-level graph; each tape
    cell is consumed once, so the paths are independent.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    pl = path_length(K, cfg.n_est) if path_len is None else path_len
    means = tuple(means) if means is not None else (0.5,) * K
    inst = BanditInstance(means, trials * pl, strict_model=False)
    tr = run(inst, build_two_level(trials * pl, trials, pl), cfg, seed)
    per_path = (tr.arms.reshape(trials, pl)[:, :, None] == np.arange(K)).sum(axis=1)
    covered = (per_path > 0).all(axis=1)
    sd = per_path.std(axis=0, ddof=1) if trials > 1 else np.zeros(K)
    p = float(covered.mean())
    return PathConstants(per_path.mean(axis=0).tolist(), (sd / math.sqrt(trials)).tolist(),
                         p, math.sqrt(p * (1 - p) / trials), trials)


# -- gap thresholds ----------------------------------------------------------

@dataclass
class GapThresholds:
    delta: float
    eps_levels: list

    @classmethod
    def build(cls, instance: BanditInstance, spec: LevelSpec, q: Sequence[float]) -> "GapThresholds":
        """eps_0 = 1; eps_1 from the per-path pull rates of the two arms; eps_l from T_l."""
        s, sizes = spec.sigma, spec.group_sizes
        eps = [1.0, 1 / (4 * math.sqrt(q[0] * sizes[0] * s)) + 1 / (4 * math.sqrt(q[1] * sizes[0] * s))]
        eps += [1 / (4 * math.sqrt(sizes[l - 1] * s)) for l in range(2, spec.num_levels)]
        return cls(instance.gap, eps)


# -- event monitors --------------------------------------------------------

@dataclass
class EventStats:
    event: str
    frequency: float
    se: float
    trials: int
    target: Optional[float] = None
    indicators: Optional[np.ndarray] = field(default=None, repr=False)
    detail: dict = field(default_factory=dict)

    @property
    def meets_target(self) -> bool:
        return self.target is None or self.frequency >= self.target - 3 * self.se


def _freq(ind) -> tuple:
    ind = np.asarray(ind, dtype=bool)
    p = float(ind.mean()) if ind.size else float("nan")
    return p, math.sqrt(p * (1 - p) / ind.size) if ind.size else float("nan")


def pull_count_monitor(instance: BanditInstance, graph: InfoGraph, cfg: BehaviorConfig,
                       seeds: Iterable[int], q: Sequence[float], delta: float = 0.05) -> EventStats:
    """Pull counts of each first-level group against the path concentration bound.

    Per run and group, the indicator is |N_a - q_a T1| <= path_len *
    sqrt(T1 log(2K/delta) / 2) for all arms a, where T1 is the number of
    paths in the group.
    """
    K = instance.num_arms
    groups: dict = {}
    for b in graph.blocks:
        if b.label.level == 1 and b.label.kind == "path":
            groups.setdefault((b.label.u, b.label.v), []).append(b)
    if not groups:
        raise ConfigError("graph has no labelled first-level path groups")
    ind = []
    for seed in seeds:
        tr = run(instance, graph, cfg, seed)
        for blocks in groups.values():
            idx = np.concatenate([np.arange(b.start - 1, b.stop - 1) for b in blocks])
            n = np.bincount(tr.arms[idx], minlength=K)
            T1 = len(blocks)
            pl = max(b.size for b in blocks)
            bound = pl * math.sqrt(T1 * math.log(2 * K / delta) / 2)
            ind.append(bool(np.all(np.abs(n - np.asarray(q) * T1) <= bound)))
    p, se = _freq(ind)
    return EventStats("W1", p, se, len(ind), 1 - delta, np.array(ind))


def segment_concentration_monitor(instance: BanditInstance, seeds: Iterable[int], length: int,
                                  log_factor: float = 2.0) -> EventStats:
    """Every run of consecutive tape cells [i, j] of each arm has mean within
    sqrt(log_factor * log(length) / (j - i + 1)) of the arm mean."""
    ind = []
    for seed in seeds:
        tape = RewardTape.for_instance(instance.with_horizon(length), seed)
        ok = True
        for a in range(instance.num_arms):
            cs = np.concatenate([[0], np.cumsum(tape.row(a), dtype=np.int64)])
            for w in range(1, length + 1):
                dev = np.abs((cs[w:] - cs[:-w]) / w - instance.means[a])
                if dev.max() > math.sqrt(log_factor * math.log(length) / w):
                    ok = False
                    break
            if not ok:
                break
        ind.append(ok)
    p, se = _freq(ind)
    return EventStats("W2", p, se, len(ind), None, np.array(ind))


@dataclass
class AntiConcentration:
    n: int
    arm: int
    mc_high: float
    mc_low: float
    exact_high: float
    exact_low: float
    normal_high: float
    normal_low: float
    trials: int

    @property
    def se_high(self) -> float:
        return math.sqrt(self.exact_high * (1 - self.exact_high) / self.trials)

    @property
    def se_low(self) -> float:
        return math.sqrt(self.exact_low * (1 - self.exact_low) / self.trials)


def _tape_means(instance: BanditInstance, arm: int, n: int, trials: int, seed: int,
                chunk: int = 2000) -> np.ndarray:
    """Reward counts over `trials` disjoint length-n segments of one long tape."""
    tape = RewardTape.for_instance(instance.with_horizon(n * trials), seed)
    out = np.empty(trials, dtype=np.int64)
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        cells = tape.row(arm, lo * n + 1, hi * n + 1)
        out[lo:hi] = cells.reshape(hi - lo, n).sum(axis=1)
    return out


def anticoncentration_monitor(instance: BanditInstance, n: int, trials: int = 10_000,
                              seed: int = 0) -> dict:
    """Frequencies of {mean >= mu + 1/sqrt(n)} and {mean <= mu - 1/sqrt(n)} per arm.

    Returned next to the exact binomial tails and the normal approximation,
    plus the joint frequency of (arm a high, arm b low) for arm pairs
    against the product of the marginals.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    per_arm, highs, lows = [], {}, {}
    for a, mu in enumerate(instance.means):
        k = _tape_means(instance, a, n, trials, seed)
        k_hi, k_lo = oracles.deviation_counts(n, mu)
        highs[a], lows[a] = k >= k_hi, k <= k_lo
        z = math.sqrt(n) / math.sqrt(mu * (1 - mu) * n) if 0 < mu < 1 else float("inf")
        per_arm.append(AntiConcentration(
            n, a, float(highs[a].mean()), float(lows[a].mean()),
            oracles.binomial_tail(n, mu, k_hi), oracles.binomial_head(n, mu, k_lo),
            oracles.normal_tail(z), oracles.normal_tail(z), trials))
    joint = {}
    for a in highs:
        for b in lows:
            if a != b:
                f = float((highs[a] & lows[b]).mean())
                prod = float(highs[a].mean() * lows[b].mean())
                se = math.sqrt(max(prod * (1 - prod), 1e-300) / trials)
                joint[(a, b)] = {"joint": f, "product": prod, "se": se}
    return {"per_arm": per_arm, "joint": joint}


# -- regret experiments ----------------------------------------------------

def run_policy(policy: PolicySpec, instance: BanditInstance, cfg: BehaviorConfig, seed: int,
               graph: Optional[InfoGraph] = None):
    if policy.is_constant:
        return run_constant(instance, policy.params.get("arm", "best"), seed)
    if graph is None:
        graph = policy.graph(instance.horizon, instance.num_arms, cfg.n_est)
    return run(instance, graph, cfg, seed)


def _rows(policy, instance, cfg, seeds):
    graph = None if policy.is_constant else policy.graph(instance.horizon, instance.num_arms, cfg.n_est)
    return [{"policy": policy.label, "T": instance.horizon, "delta": instance.gap, "seed": int(s),
             "regret": run_policy(policy, instance, cfg, s, graph).regret} for s in seeds]


def summarize(rows: Sequence[dict], key: str) -> list:
    out = []
    for k in sorted({r[key] for r in rows}):
        reg = np.array([r["regret"] for r in rows if r[key] == k])
        se = float(reg.std(ddof=1) / math.sqrt(reg.size)) if reg.size > 1 else 0.0
        out.append({key: k, "mean_regret": float(reg.mean()), "se": se, "reps": int(reg.size)})
    return out


def regret_curve(policy: PolicySpec, means: Sequence[float], T_grid: Sequence[int], reps: int,
                 cfg: BehaviorConfig = BehaviorConfig(), seed_base: int = 0,
                 strict_model: bool = True) -> tuple:
    """Per-seed rows and per-T (mean, SE) summary.

    Seeds are ``seed_base .. seed_base+reps-1`` at every T, so curves of
    different policies are paired on the same reward tapes.
    """
    if list(T_grid) != sorted(T_grid) or not T_grid:
        raise ConfigError("T grid must be non-empty and sorted")
    seeds = range(seed_base, seed_base + reps)
    rows = []
    for T in T_grid:
        rows += _rows(policy, BanditInstance(tuple(means), T, strict_model), cfg, seeds)
    return rows, summarize(rows, "T")


def gap_instance(delta: float, T: int, strict_model: bool = True) -> BanditInstance:
    return BanditInstance((0.5 + delta / 2, 0.5 - delta / 2), T, strict_model)


def gap_sweep(policy: PolicySpec, T: int, delta_grid: Sequence[float], reps: int,
              cfg: BehaviorConfig = BehaviorConfig(), seed_base: int = 0,
              strict_model: bool = True) -> tuple:
    """Regret against the gap with means (1/2 + d/2, 1/2 - d/2), paired on seeds."""
    instances = [gap_instance(d, T, strict_model) for d in delta_grid]
    seeds = range(seed_base, seed_base + reps)
    rows = []
    for d, inst in zip(delta_grid, instances):
        for r in _rows(policy, inst, cfg, seeds):
            r["delta"] = d
            rows.append(r)
    return rows, summarize(rows, "delta")


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    residual: float
    points: int
    excluded: list = field(default_factory=list)


def fit_exponent(table) -> ExponentFit:
    """Least squares of log(mean regret) on log(T).

    `table` holds dicts with "T" and "mean_regret" or (T, mean) pairs.
    Non-positive means are excluded and listed.
    """
    pts = [(r["T"], r["mean_regret"]) if isinstance(r, dict) else tuple(r[:2]) for r in table]
    good = [(t, m) for t, m in pts if m > 0]
    excluded = [t for t, m in pts if not m > 0]
    if len(good) < 3:
        raise ConfigError(f"need >= 3 positive points, have {len(good)}")
    x = np.log([t for t, _ in good])
    y = np.log([m for _, m in good])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ [slope, intercept] - y) ** 2)))
    return ExponentFit(float(slope), float(intercept), resid, len(good), excluded)


@dataclass
class PairedDiff:
    mean: float
    se: float
    n: int

    def ci(self, z: float = 1.96) -> tuple:
        return self.mean - z * self.se, self.mean + z * self.se


def paired_difference(a: Sequence[float], b: Sequence[float]) -> PairedDiff:
    """Per-seed differences a - b."""
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    se = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0
    return PairedDiff(float(d.mean()), se, int(d.size))
