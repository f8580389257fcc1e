"""Bandit instances, reward tapes, subhistories and per-arm statistics."""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _rng
from .errors import ConfigError

LOW, HIGH = 1 / 3, 2 / 3
_EPS = 1e-12


@dataclass(frozen=True)
class BanditInstance:
    means: tuple
    horizon: int
    strict_model: bool = True

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        if len(self.means) < 2:
            raise ConfigError("need at least two arms")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError(f"horizon must be a positive integer, got {self.horizon!r}")
        object.__setattr__(self, "horizon", int(self.horizon))
        lo, hi = (LOW, HIGH) if self.strict_model else (0.0, 1.0)
        for a, m in enumerate(self.means):
            if not (lo - _EPS <= m <= hi + _EPS):
                raise ConfigError(f"mean of arm {a} is {m}, outside [{lo:.4g}, {hi:.4g}]")

    @property
    def num_arms(self) -> int:
        return len(self.means)

    @property
    def best_mean(self) -> float:
        return max(self.means)

    @property
    def gap(self) -> float:
        """Best mean minus the largest strictly smaller mean (0 if all equal)."""
        best = self.best_mean
        rest = [m for m in self.means if m < best]
        if not rest:
            return 0.0
        return float(Fraction(repr(best)) - Fraction(repr(max(rest))))

    @cached_property
    def digest(self) -> str:
        text = "%d|%d|%s" % (
            self.num_arms, self.horizon, ",".join(format(m, ".17g") for m in self.means))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_horizon(self, horizon: int) -> "BanditInstance":
        return BanditInstance(self.means, horizon, self.strict_model)

    def to_json(self) -> dict:
        return {"num_arms": self.num_arms, "means": list(self.means), "horizon": self.horizon}

    @classmethod
    def from_json(cls, obj: dict, strict_model: bool = True) -> "BanditInstance":
        means = obj["means"]
        if "num_arms" in obj and obj["num_arms"] != len(means):
            raise ConfigError(f"num_arms={obj['num_arms']} but {len(means)} means given")
        return cls(tuple(means), obj["horizon"], strict_model)


def load_instance(path, strict_model: bool = True) -> BanditInstance:
    with open(path) as fh:
        return BanditInstance.from_json(json.load(fh), strict_model)


@dataclass(frozen=True)
class RewardTape:
    """Pre-drawn Bernoulli rewards: cell (a, j) is the j-th pull of arm a.

    Cells are computed on demand from (seed, arm, pull index); `draws`
    materializes the full K x T matrix.
    """
    seed: int
    means: tuple
    horizon: int
    instance_digest: str

    @classmethod
    def for_instance(cls, instance: BanditInstance, seed: int) -> "RewardTape":
        return cls(int(seed), instance.means, instance.horizon, instance.digest)

    @property
    def num_arms(self) -> int:
        return len(self.means)

    def row(self, arm: int, start: int = 1, stop: Optional[int] = None) -> np.ndarray:
        """Cells (arm, start..stop-1) as uint8; pull indices are 1-based."""
        stop = self.horizon + 1 if stop is None else stop
        if not 0 <= arm < self.num_arms:
            raise IndexError(f"arm {arm} out of range")
        if start < 1 or stop > self.horizon + 1 or start > stop:
            raise IndexError(f"pull range [{start}, {stop}) outside [1, {self.horizon}]")
        u = _rng.uniforms(np.arange(start, stop), _rng.TAPE, self.seed, arm)
        return (u < self.means[arm]).astype(np.uint8)

    @cached_property
    def draws(self) -> np.ndarray:
        out = np.stack([self.row(a) for a in range(self.num_arms)])
        out.setflags(write=False)
        return out

    def regenerate(self) -> "RewardTape":
        return RewardTape(self.seed, self.means, self.horizon, self.instance_digest)


def tape_reward(tape: RewardTape, arm: int, pull_index: int) -> int:
    if not 1 <= pull_index <= tape.horizon:
        raise IndexError(f"pull index {pull_index} outside [1, {tape.horizon}]")
    return int(tape.row(arm, pull_index, pull_index + 1)[0])


@dataclass(frozen=True)
class Outcome:
    round: int
    arm: int
    reward: int


@dataclass(frozen=True)
class Subhistory:
    entries: tuple = ()

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        for prev, nxt in zip(entries, entries[1:]):
            if nxt.round <= prev.round:
                raise ValueError("subhistory rounds must be strictly increasing")

    @classmethod
    def of(cls, outcomes: Iterable[Outcome]) -> "Subhistory":
        return cls(tuple(sorted(outcomes, key=lambda o: o.round)))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def anonymize(h: Iterable[Outcome]) -> Counter:
    """Drop round indices, keeping the multiset of (arm, reward) pairs."""
    return Counter((o.arm, o.reward) for o in h)


@dataclass(frozen=True)
class ArmStats:
    counts: tuple
    sums: tuple

    @property
    def num_arms(self) -> int:
        return len(self.counts)

    def mean(self, arm: int) -> Optional[float]:
        n = self.counts[arm]
        return self.sums[arm] / n if n else None

    @property
    def means(self) -> list:
        return [self.mean(a) for a in range(self.num_arms)]

    def add(self, arm: int, reward: int) -> "ArmStats":
        counts, sums = list(self.counts), list(self.sums)
        counts[arm] += 1
        sums[arm] += reward
        return ArmStats(tuple(counts), tuple(sums))


def multiset_stats(m: Counter, num_arms: int) -> ArmStats:
    counts, sums = [0] * num_arms, [0] * num_arms
    for (arm, reward), mult in m.items():
        if not 0 <= arm < num_arms:
            raise IndexError(f"arm {arm} out of range for K={num_arms}")
        counts[arm] += mult
        sums[arm] += mult * reward
    return ArmStats(tuple(counts), tuple(sums))


def arm_stats(h: Iterable[Outcome], num_arms: int) -> ArmStats:
    return multiset_stats(anonymize(h), num_arms)
