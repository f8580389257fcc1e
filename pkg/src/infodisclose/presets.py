"""Named parameter schedules for the disclosure policies.

Logs are natural logs.  Sizes are rounded up for level-1/level-2 counts and
down for the top level, whose leftover rounds become a remainder group.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .graph import (InfoGraph, LevelSpec, build_full_disclosure, build_l_level,
                    build_three_level, build_two_level)

PRESETS = ("full-disclosure", "paper-2level", "paper-3level", "paper-Llevel-thm", "paper-Llevel-cor")


def path_length(num_arms: int, n_est: int = 1) -> int:
    """Length of a full-disclosure path guaranteed to sample every arm w.p. > 0."""
    return (num_arms - 1) * n_est + 1


def two_level_T1(T: int, scale: float = 1.0) -> int:
    return max(1, math.ceil(scale * T ** (2 / 3) * math.log(T) ** (1 / 3)))


def three_level_sizes(T: int, scale1: float = 1.0, scale2: float = 1.0) -> tuple:
    lg = math.log(T)
    T1 = max(1, math.ceil(scale1 * T ** (4 / 7) * lg ** (-1 / 7)))
    T2 = max(1, math.ceil(scale2 * T ** (6 / 7) * lg ** (-5 / 7)))
    return T1, T2


def llevel_thm_sizes(T: int, L: int, sigma: int, path_len: int) -> tuple:
    denom = 2 ** L - 1
    sizes = []
    for l in range(1, L):
        num = sum(2 ** (L - i) for i in range(1, l + 1))
        sizes.append(max(1, math.floor(T ** (num / denom) / sigma ** 3)))
    return sizes + [_top_size(T, sizes, sigma, path_len)]


def llevel_cor_sizes(T: int, sigma: int, path_len: int, growth: Optional[float] = None,
                     scale: float = 1.0, num_levels: Optional[int] = None) -> tuple:
    """T_l = scale * growth**l below the top level; growth defaults to sigma**4.

    Without an explicit level count, L = log(T)/log(growth), lowered until
    the lower levels leave room for at least one top-level G agent.
    """
    growth = float(sigma ** 4 if growth is None else growth)
    if growth <= 1:
        raise ConfigError("growth must exceed 1")
    L = num_levels if num_levels is not None else max(2, int(math.log(T) / math.log(growth)))
    while True:
        sizes = [max(1, math.ceil(scale * growth ** l)) for l in range(1, L)]
        top = _top_size(T, sizes, sigma, path_len, strict=False)
        if top >= 1 or L <= 2 or num_levels is not None:
            break
        L -= 1
    if top < 1:
        raise ConfigError(f"T = {T} too small for the lower levels {sizes} at sigma = {sigma}")
    return tuple(sizes + [top])


def _top_size(T, lower, sigma, path_len, strict=True) -> int:
    used = lower[0] * path_len * sigma ** 2 + sigma ** 3 * sum(lower[1:])
    top = (T - used) // sigma ** 3
    if strict and top < 1:
        raise ConfigError(f"T = {T} too small for the lower levels {list(lower)} at sigma = {sigma}")
    return top


def build_preset(name: str, T: int, num_arms: int = 2, n_est: int = 1, *, sigma: int = 4,
                 path_len: Optional[int] = None, num_levels: Optional[int] = None,
                 growth: Optional[float] = None, scale: float = 1.0,
                 scale2: float = 1.0) -> InfoGraph:
    """Build the info-graph of a named preset at horizon T.

    `scale` multiplies the first-level size (T1) of every preset; `scale2`
    multiplies T2 for the three-level preset.
    """
    g = _build(name, T, path_length(num_arms, n_est) if path_len is None else path_len,
               sigma, num_levels, growth, scale, scale2)
    g.meta["preset"] = name
    return g


def _build(name, T, pl, sigma, num_levels, growth, scale, scale2) -> InfoGraph:
    if name == "full-disclosure":
        return build_full_disclosure(T)
    if name == "paper-2level":
        T1 = min(two_level_T1(T, scale), T // pl)
        return build_two_level(T, T1, pl)
    if name == "paper-3level":
        T1, T2 = three_level_sizes(T, scale, scale2)
        return build_three_level(T, T1, T2, sigma, pl)
    if name == "paper-Llevel-thm":
        L = 3 if num_levels is None else num_levels
        return build_l_level(LevelSpec(L, sigma, llevel_thm_sizes(T, L, sigma, pl), pl), T)
    if name == "paper-Llevel-cor":
        sizes = llevel_cor_sizes(T, sigma, pl, growth, scale, num_levels)
        return build_l_level(LevelSpec(len(sizes), sigma, sizes, pl), T)
    raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")


POLICY_TYPES = ("full_disclosure", "two_level", "three_level", "l_level", "constant") + PRESETS


@dataclass(frozen=True)
class PolicySpec:
    """A policy that can be instantiated at any horizon.

    `type` is a builder name, a preset name, or "constant" (every agent
    pulls `params["arm"]`, bypassing the agents).
    """
    type: str
    params: dict = field(default_factory=dict, hash=False)
    name: Optional[str] = None

    def __post_init__(self):
        if self.type not in POLICY_TYPES:
            raise ConfigError(f"unknown policy type {self.type!r}")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.type == "constant":
            return f"constant-{self.params.get('arm', 'best')}"
        return self.type

    @property
    def is_constant(self) -> bool:
        return self.type == "constant"

    def graph(self, T: int, num_arms: int = 2, n_est: int = 1) -> InfoGraph:
        p = dict(self.params)
        pl = p.pop("path_len", None) or path_length(num_arms, n_est)
        if self.type == "full_disclosure":
            g = build_full_disclosure(T)
        elif self.type == "two_level":
            g = build_two_level(T, p["T1"], pl)
        elif self.type == "three_level":
            g = build_three_level(T, p["T1"], p["T2"], p["sigma"], pl)
        elif self.type == "l_level":
            spec = LevelSpec(len(p["group_sizes"]), p["sigma"], tuple(p["group_sizes"]), pl,
                             p.get("gamma_factor"))
            g = build_l_level(spec, T)
        elif self.type == "constant":
            raise ConfigError("constant policies have no info-graph")
        else:
            g = build_preset(self.type, T, num_arms, n_est, path_len=pl, **p)
        g.meta["preset"] = self.label
        return g

    def to_json(self) -> dict:
        return {"type": self.type, "params": self.params, **({"name": self.name} if self.name else {})}
