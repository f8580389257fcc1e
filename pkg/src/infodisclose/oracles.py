"""Exact reference computations.

Nothing here imports the simulation engine or the behavior module: these
are the independent paths the Monte Carlo estimators are checked against.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(repr(float(x)))


def binomial_tail(n: int, p, k_min: int) -> float:
    """P[Binomial(n, p) >= k_min] by exact summation of the pmf."""
    p = _frac(p)
    q = 1 - p
    k_min = max(k_min, 0)
    total = sum(math.comb(n, k) * p ** k * q ** (n - k) for k in range(k_min, n + 1))
    return float(total)


def binomial_head(n: int, p, k_max: int) -> float:
    """P[Binomial(n, p) <= k_max]."""
    p = _frac(p)
    q = 1 - p
    k_max = min(k_max, n)
    return float(sum(math.comb(n, k) * p ** k * q ** (n - k) for k in range(0, k_max + 1)))


def deviation_counts(n: int, mu: float) -> tuple:
    """Smallest count with mean >= mu + 1/sqrt(n), largest with mean <= mu - 1/sqrt(n)."""
    root = math.sqrt(n)
    hi = math.ceil(n * mu + root - 1e-9)
    lo = math.floor(n * mu - root + 1e-9)
    return hi, lo


def normal_tail(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2))


def greedy_path_coverage(means: Sequence[float], path_len: int, unseen: float = 1.0) -> tuple:
    """Exact law of one full-disclosure path of greedy agents.

    Agents pick the highest empirical mean (``unseen`` for unpulled arms,
    lowest index on ties).  Enumerates every prefix of length `path_len`
    of each arm's reward tape.  Returns (P[every arm sampled],
    expected pulls per arm) as Fractions.
    """
    K = len(means)
    mu = [_frac(m) for m in means]
    p_all = Fraction(0)
    pulls = [Fraction(0)] * K
    for rows in itertools.product(itertools.product((0, 1), repeat=path_len), repeat=K):
        w = Fraction(1)
        for a, row in enumerate(rows):
            for x in row:
                w *= mu[a] if x else 1 - mu[a]
        n, s = [0] * K, [0] * K
        for _ in range(path_len):
            est = [Fraction(s[a], n[a]) if n[a] else _frac(unseen) for a in range(K)]
            a = est.index(max(est))
            s[a] += rows[a][n[a]]
            n[a] += 1
        if min(n) > 0:
            p_all += w
        for a in range(K):
            pulls[a] += w * n[a]
    return p_all, pulls


def regret_bruteforce(arms: Sequence[int], means: Sequence[float]) -> float:
    best = max(means)
    return math.fsum(best - means[a] for a in arms)


def dense_transitivity_violations(sets: Sequence[set]) -> list:
    """(t, t', w) for every t in S_t' and w in S_t \\ S_t' (rounds 1-based)."""
    out = []
    for tp, s_tp in enumerate(sets, start=1):
        for t in sorted(s_tp):
            for w in sorted(sets[t - 1] - s_tp):
                out.append((t, tp, w))
    return out
