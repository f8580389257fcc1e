"""Order-based disclosure structures.

An :class:`InfoGraph` tiles rounds ``1..T`` with contiguous blocks.  Every
member of a block observes the block's ``view`` (a union of half-open round
intervals, all before the block starts); members of a *chain* block also
observe the earlier members of their own block.  This keeps storage
proportional to the number of structural groups rather than ``T**2``.
"""
from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError

Interval = Tuple[int, int]


# -- interval unions (sorted, disjoint, non-adjacent, half-open) ----------

def merge(intervals: Iterable[Interval]) -> tuple:
    out: List[list] = []
    for lo, hi in sorted(i for i in intervals if i[0] < i[1]):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return tuple((lo, hi) for lo, hi in out)


def span(intervals) -> int:
    return sum(hi - lo for lo, hi in intervals)


def intersect(a, b) -> tuple:
    out, i, j = [], 0, 0
    while i < len(a) and j < len(b):
        lo, hi = max(a[i][0], b[j][0]), min(a[i][1], b[j][1])
        if lo < hi:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return tuple(out)


def difference(a, b) -> tuple:
    """Rounds in ``a`` not in ``b``."""
    out = []
    for lo, hi in a:
        cur = lo
        for blo, bhi in b:
            if bhi <= cur or blo >= hi:
                continue
            if blo > cur:
                out.append((cur, blo))
            cur = max(cur, bhi)
        if cur < hi:
            out.append((cur, hi))
    return tuple(out)


def from_rounds(rounds: Iterable[int]) -> tuple:
    return merge((r, r + 1) for r in rounds)


def to_rounds(intervals) -> list:
    return [r for lo, hi in intervals for r in range(lo, hi)]


# -- graph -----------------------------------------------------------------

class Label(NamedTuple):
    level: int
    kind: str            # "path", "G", "Gamma", "top", "remainder", "round"
    u: Optional[int] = None
    v: Optional[int] = None
    path: Optional[int] = None

    def group_key(self) -> tuple:
        return (self.level, self.kind, self.u, self.v)

    def group_name(self) -> str:
        if self.kind in ("G", "Gamma") and self.u is not None:
            coords = f"{self.u},{self.v}" if self.v is not None else f"{self.u}"
            return f"{self.kind}_{self.level}[{coords}]"
        if self.kind == "path" and self.u is not None:
            return f"paths_{self.level}[{self.u}{',' + str(self.v) if self.v is not None else ''}]"
        return f"{self.kind}_{self.level}"


@dataclass(frozen=True)
class Block:
    start: int
    stop: int
    view: tuple = ()
    chain: bool = False
    label: Label = Label(1, "round")

    @property
    def size(self) -> int:
        return self.stop - self.start

    @property
    def rounds(self) -> tuple:
        return ((self.start, self.stop),)


class Violation(NamedTuple):
    observed: int    # t, a round seen by t_prime
    observer: int    # t_prime
    witness: int     # a round in S_t missing from S_t_prime


@dataclass(frozen=True)
class InfoGraph:
    horizon: int
    blocks: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        expected = 1
        for b in blocks:
            if b.start != expected or b.stop <= b.start:
                raise ConfigError(f"blocks must tile rounds contiguously; got [{b.start}, {b.stop}) at {expected}")
            if b.view and (b.view[0][0] < 1 or b.view[-1][1] > b.start):
                raise ConfigError(f"block at round {b.start} observes rounds outside [1, {b.start - 1}]")
            expected = b.stop
        if expected != self.horizon + 1:
            raise ConfigError(f"blocks cover {expected - 1} rounds, horizon is {self.horizon}")
        object.__setattr__(self, "_starts", [b.start for b in blocks])

    # lookups
    def block_index(self, t: int) -> int:
        if not 1 <= t <= self.horizon:
            raise IndexError(f"round {t} outside [1, {self.horizon}]")
        return bisect.bisect_right(self._starts, t) - 1

    def block_of(self, t: int) -> Block:
        return self.blocks[self.block_index(t)]

    def observed_intervals(self, t: int) -> tuple:
        b = self.block_of(t)
        if b.chain and t > b.start:
            return merge(b.view + ((b.start, t),))
        return b.view

    def observed(self, t: int) -> list:
        """S_t as a sorted list of rounds."""
        return to_rounds(self.observed_intervals(t))

    def observed_size(self, t: int) -> int:
        return span(self.observed_intervals(t))

    def dense(self) -> list:
        """[S_1, ..., S_T] as Python sets; meant for small T."""
        return [set(self.observed(t)) for t in range(1, self.horizon + 1)]

    def blocks_in(self, intervals) -> range:
        """Indices of blocks intersecting an interval union."""
        if not intervals:
            return range(0)
        first = self.block_index(intervals[0][0])
        last = self.block_index(intervals[-1][1] - 1)
        return range(first, last + 1)

    @classmethod
    def from_sets(cls, sets: Sequence[Iterable[int]]) -> "InfoGraph":
        """Hand-built graph, one block per round; ``sets[t-1]`` is S_t."""
        blocks = [Block(t, t + 1, from_rounds(s), False, Label(1, "round", path=t))
                  for t, s in enumerate(sets, start=1)]
        return cls(len(blocks), tuple(blocks))

    # summaries
    def groups(self) -> dict:
        """Structural group key -> interval union of its rounds."""
        out: dict = {}
        for b in self.blocks:
            out.setdefault(b.label.group_key(), []).append((b.start, b.stop))
        return {k: merge(v) for k, v in out.items()}

    def level_of_rounds(self) -> np.ndarray:
        lv = np.empty(self.horizon, dtype=np.int64)
        for b in self.blocks:
            lv[b.start - 1:b.stop - 1] = b.label.level
        return lv

    def summary(self) -> dict:
        levels: dict = {}
        for b in self.blocks:
            rec = levels.setdefault(b.label.level, {"level": b.label.level, "g_rounds": 0, "gamma_rounds": 0})
            rec["gamma_rounds" if b.label.kind == "Gamma" else "g_rounds"] += b.size
        return {"levels": [levels[k] for k in sorted(levels)], "total": self.horizon}

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


# -- builders --------------------------------------------------------------

def _check_positive(**kw):
    for name, val in kw.items():
        if int(val) != val or val < 1:
            raise ConfigError(f"{name} must be a positive integer, got {val!r}")


def _paths(start: int, count: int, path_len: int, level: int, u=None, v=None) -> list:
    return [Block(start + i * path_len, start + (i + 1) * path_len, (), True,
                  Label(level, "path", u, v, i + 1))
            for i in range(count)]


def build_full_disclosure(T: int) -> InfoGraph:
    _check_positive(T=T)
    return InfoGraph(T, (Block(1, T + 1, (), True, Label(1, "path", path=1)),),
                     {"policy": "full_disclosure"})


def build_two_level(T: int, T1: int, path_len: int) -> InfoGraph:
    _check_positive(T=T, T1=T1, path_len=path_len)
    explore = T1 * path_len
    if explore > T:
        raise ConfigError(f"T1*path_len = {explore} exceeds T = {T}")
    blocks = _paths(1, T1, path_len, 1, u=1)
    if explore < T:
        blocks.append(Block(explore + 1, T + 1, ((1, explore + 1),), False, Label(2, "top")))
    return InfoGraph(T, tuple(blocks), {"policy": "two_level", "T1": T1, "path_len": path_len})


def build_three_level(T: int, T1: int, T2: int, sigma: int, path_len: int) -> InfoGraph:
    _check_positive(T=T, T1=T1, T2=T2, sigma=sigma, path_len=path_len)
    n1 = sigma * T1 * path_len
    if n1 + sigma * T2 > T:
        raise ConfigError(f"sigma*T1*path_len + sigma*T2 = {n1 + sigma * T2} exceeds T = {T}")
    blocks, first_level = [], []
    cur = 1
    for s in range(1, sigma + 1):
        blocks += _paths(cur, T1, path_len, 1, u=s)
        first_level.append((cur, cur + T1 * path_len))
        cur += T1 * path_len
    for s in range(1, sigma + 1):
        blocks.append(Block(cur, cur + T2, (first_level[s - 1],), False, Label(2, "G", s)))
        cur += T2
    if cur <= T:
        blocks.append(Block(cur, T + 1, ((1, cur),), False, Label(3, "top")))
    meta = {"policy": "three_level", "T1": T1, "T2": T2, "sigma": sigma, "path_len": path_len}
    return InfoGraph(T, tuple(blocks), meta)


@dataclass(frozen=True)
class LevelSpec:
    num_levels: int
    sigma: int
    group_sizes: tuple          # T_1 (paths per level-1 group), T_2..T_L (agents per G-group)
    path_len: int
    gamma_factor: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "group_sizes", tuple(int(x) for x in self.group_sizes))
        if self.sigma is None or self.sigma < 1:
            raise ConfigError(f"sigma must be >= 1, got {self.sigma!r}")
        if self.num_levels < 2:
            raise ConfigError(f"need at least two levels, got {self.num_levels}")
        if len(self.group_sizes) != self.num_levels:
            raise ConfigError(f"{len(self.group_sizes)} group sizes for {self.num_levels} levels")
        if min(self.group_sizes) < 1 or self.path_len < 1:
            raise ConfigError("group sizes and path_len must be >= 1")
        if self.gamma_factor is None:
            object.__setattr__(self, "gamma_factor", self.sigma - 1)
        if self.gamma_factor < 0:
            raise ConfigError("gamma_factor must be >= 0")

    def level_rounds(self, level: int) -> int:
        s2 = self.sigma ** 2
        if level == 1:
            return s2 * self.group_sizes[0] * self.path_len
        return s2 * self.group_sizes[level - 1] * (1 + self.gamma_factor)

    @property
    def implied_rounds(self) -> int:
        return sum(self.level_rounds(l) for l in range(1, self.num_levels + 1))


def build_l_level(spec: LevelSpec, T: int) -> InfoGraph:
    _check_positive(T=T)
    if spec.implied_rounds > T:
        raise ConfigError(f"level spec needs {spec.implied_rounds} rounds, T = {T}")
    sigma, L = spec.sigma, spec.num_levels
    coords = [(u, v) for u in range(1, sigma + 1) for v in range(1, sigma + 1)]
    blocks: list = []
    level_start = {}
    g_rounds: dict = {}      # (level, u, v) -> interval
    cur = 1
    level_start[1] = cur
    for u, v in coords:
        size = spec.group_sizes[0] * spec.path_len
        blocks += _paths(cur, spec.group_sizes[0], spec.path_len, 1, u, v)
        g_rounds[(1, u, v)] = (cur, cur + size)
        cur += size
    for l in range(2, L + 1):
        level_start[l] = cur
        below = ((1, level_start[l - 1]),) if l > 2 else ()
        tl = spec.group_sizes[l - 1]
        for kind, size in (("G", tl), ("Gamma", tl * spec.gamma_factor)):
            for u, v in coords:
                if size == 0:
                    continue
                prev = merge([g_rounds[(l - 1, v, w)] for w in range(1, sigma + 1)])
                blocks.append(Block(cur, cur + size, merge(below + prev), False, Label(l, kind, u, v)))
                if kind == "G":
                    g_rounds[(l, u, v)] = (cur, cur + size)
                cur += size
    if cur <= T:
        blocks.append(Block(cur, T + 1, ((1, level_start[L]),), False, Label(L, "remainder")))
    meta = {"policy": "l_level", "sigma": sigma, "num_levels": L,
            "group_sizes": list(spec.group_sizes), "path_len": spec.path_len,
            "gamma_factor": spec.gamma_factor}
    return InfoGraph(T, tuple(blocks), meta)


# -- checks and metrics ----------------------------------------------------

def validate_transitive(g: InfoGraph) -> List[Violation]:
    """All (t, t', witness) with t in S_t', witness in S_t but not in S_t'.

    Works block-wise: one violation is reported per (observed block,
    observer block) pair, with the smallest witness.
    """
    by_view: dict = {}
    out = []
    for b in g.blocks:
        if b.view not in by_view:
            by_view[b.view] = _view_violations(g, b.view)
        out += [Violation(t, b.start, w) for t, w in by_view[b.view]]
    return out


def _view_violations(g: InfoGraph, view) -> list:
    found = []
    for i in g.blocks_in(view):
        a = g.blocks[i]
        seen = intersect(view, a.rounds)
        if not seen:
            continue
        missing = difference(a.view, view)
        if missing:
            found.append((seen[0][0], missing[0][0]))
            continue
        if a.chain:
            last = seen[-1][1] - 1
            gap = difference(((a.start, last),), view)
            if gap:
                w = gap[0][0]
                t = next(r for r in to_rounds(seen) if r > w)
                found.append((t, w))
    return found


def subhistory_fraction(g: InfoGraph) -> np.ndarray:
    """|S_t| / max(t-1, 1) for t = 1..T."""
    sizes = np.empty(g.horizon, dtype=np.float64)
    for b in g.blocks:
        base = span(b.view)
        idx = np.arange(b.start, b.stop)
        sizes[b.start - 1:b.stop - 1] = base + ((idx - b.start) if b.chain else 0)
    t = np.arange(1, g.horizon + 1)
    return sizes / np.maximum(t - 1, 1)


def fraction_by_level(g: InfoGraph) -> dict:
    frac = subhistory_fraction(g)
    levels = g.level_of_rounds()
    return {int(l): float(frac[(levels == l) & (np.arange(1, g.horizon + 1) > 1)].min(initial=1.0))
            for l in np.unique(levels)}


def export_dot(g: InfoGraph, collapse_groups: bool = False, reduce: bool = False) -> str:
    """Graphviz digraph; edges point from observed to observer."""
    lines = ["digraph infograph {", "  rankdir=BT;"]
    if collapse_groups:
        groups = g.groups()
        names = {k: f"g{i}" for i, k in enumerate(groups)}
        labels = {}
        for b in g.blocks:
            labels.setdefault(b.label.group_key(), b.label.group_name())
        for k, iv in groups.items():
            lines.append(f'  {names[k]} [label="{labels[k]} ({span(iv)} rounds)"];')
        for (src, dst), n in sorted(_group_edges(g, groups).items(), key=lambda kv: (names[kv[0][0]], names[kv[0][1]])):
            lines.append(f'  {names[src]} -> {names[dst]} [label="{n}"];')
    else:
        dense = g.dense()
        for t in range(1, g.horizon + 1):
            lines.append(f"  r{t};")
        for t in range(1, g.horizon + 1):
            preds = dense[t - 1]
            if reduce:
                covered = set().union(*(dense[s - 1] for s in preds)) if preds else set()
                preds = preds - covered
            for s in sorted(preds):
                lines.append(f"  r{s} -> r{t};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _group_edges(g: InfoGraph, groups: dict) -> dict:
    counts: dict = {}
    for b in g.blocks:
        dst = b.label.group_key()
        for key, iv in groups.items():
            if key == dst:
                continue
            n = span(intersect(b.view, iv)) * b.size
            if n:
                counts[(key, dst)] = counts.get((key, dst), 0) + n
    return counts
