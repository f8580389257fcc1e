import itertools
import random

import numpy as np
import pydot
import pytest
from hypothesis import given, settings, strategies as st

from infodisclose.errors import ConfigError
from infodisclose.graph import (InfoGraph, LevelSpec, build_full_disclosure, build_l_level,
                                build_three_level, build_two_level, export_dot, fraction_by_level,
                                subhistory_fraction, validate_transitive)
from infodisclose.oracles import dense_transitivity_violations
from infodisclose.presets import build_preset


# -- independent dense constructions (straight from the definitions) -------

def dense_two_level(T, T1, pl):
    S, explore = [], T1 * pl
    for t in range(1, T + 1):
        if t <= explore:
            p0 = (t - 1) // pl * pl + 1
            S.append(set(range(p0, t)))
        else:
            S.append(set(range(1, explore + 1)))
    return S


def dense_three_level(T, T1, T2, sigma, pl):
    S = []
    g1 = T1 * pl
    n1 = sigma * g1
    for t in range(1, T + 1):
        if t <= n1:
            p0 = (t - 1) // pl * pl + 1
            S.append(set(range(p0, t)))
        elif t <= n1 + sigma * T2:
            s = (t - n1 - 1) // T2
            S.append(set(range(s * g1 + 1, (s + 1) * g1 + 1)))
        else:
            S.append(set(range(1, n1 + sigma * T2 + 1)))
    return S


def dense_l_level(spec: LevelSpec, T):
    """Round ownership first, then S_t from group membership."""
    sigma, L, pl = spec.sigma, spec.num_levels, spec.path_len
    owner = []      # (level, kind, u, v, path)
    coords = [(u, v) for u in range(1, sigma + 1) for v in range(1, sigma + 1)]
    for u, v in coords:
        for p in range(spec.group_sizes[0]):
            owner += [(1, "G", u, v, p)] * pl
    for l in range(2, L + 1):
        for kind, size in (("G", spec.group_sizes[l - 1]), ("Gamma", spec.group_sizes[l - 1] * spec.gamma_factor)):
            for u, v in coords:
                owner += [(l, kind, u, v, None)] * size
    top_end = len(owner)
    owner += [(L, "rem", None, None, None)] * (T - top_end)
    S = []
    for t in range(1, T + 1):
        l, kind, u, v, p = owner[t - 1]
        if l == 1:
            S.append({s for s in range(1, t) if owner[s - 1] == owner[t - 1]})
        elif kind == "rem":
            S.append({s for s in range(1, T + 1) if owner[s - 1][0] < L})
        else:
            S.append({s for s in range(1, T + 1)
                      if owner[s - 1][0] <= l - 2
                      or (owner[s - 1][0] == l - 1 and owner[s - 1][1] == "G" and owner[s - 1][2] == v)})
    return S


# -- builders ----------------------------------------------------------------

def test_full_disclosure_small():
    assert build_full_disclosure(1).dense() == [set()]
    assert build_full_disclosure(3).dense() == [set(), {1}, {1, 2}]
    assert validate_transitive(build_full_disclosure(50)) == []


def test_two_level_example():
    g = build_two_level(10, 2, 3)
    S = g.dense()
    assert S[:6] == [set(), {1}, {1, 2}, set(), {4}, {4, 5}]
    assert all(S[t - 1] == set(range(1, 7)) for t in range(7, 11))
    path1, path2 = {1, 2, 3}, {4, 5, 6}
    assert all(not (S[s - 1] & path2) for s in path1)
    assert all(not (S[s - 1] & path1) for s in path2)
    assert g.observed_size(10) == 6


def test_three_level_example():
    g = build_three_level(8, 1, 1, 2, 2)
    S = g.dense()
    assert S[4] == {1, 2} and S[5] == {3, 4}
    assert S[6] == S[7] == set(range(1, 7))


def test_three_level_group_members_share_view():
    g = build_three_level(60, 2, 5, 3, 2)
    for b in g.blocks:
        if b.label.level == 2:
            views = [set(g.observed(t)) for t in range(b.start, b.stop)]
            assert all(v == views[0] for v in views)
            members = set(range(b.start, b.stop))
            assert not (views[0] & members)


def l_level_example():
    spec = LevelSpec(3, 2, (1, 2, 2), 2)
    return spec, build_l_level(spec, 60)


def test_l_level_interlacing():
    spec, g = l_level_example()
    groups = g.groups()
    lvl1 = set().union(*(range(lo, hi) for (lv, *_), iv in groups.items() if lv == 1 for lo, hi in iv))
    def rounds(key):
        return {r for lo, hi in groups[key] for r in range(lo, hi)}
    target = rounds((3, "G", 1, 2))
    t = min(target)
    expect = lvl1 | rounds((2, "G", 2, 1)) | rounds((2, "G", 2, 2))
    assert set(g.observed(t)) == expect
    gamma2 = set().union(*(rounds(k) for k in groups if k[0] == 2 and k[1] == "Gamma"))
    assert not (set(g.observed(t)) & gamma2)


def test_l_level_same_v_same_view():
    spec, g = l_level_example()
    groups = g.groups()
    for l in (2, 3):
        for v in (1, 2):
            a = min(r for lo, hi in groups[(l, "G", 1, v)] for r in range(lo, hi))
            b = min(r for lo, hi in groups[(l, "G", 2, v)] for r in range(lo, hi))
            assert g.observed(a) == g.observed(b)


def test_l_level_round_counts_and_remainder():
    spec = LevelSpec(3, 2, (2, 3, 4), 2)
    g = build_l_level(spec, 200)
    summ = {d["level"]: d for d in g.summary()["levels"]}
    assert summ[1] == {"level": 1, "g_rounds": 4 * 2 * 2, "gamma_rounds": 0}
    assert summ[2] == {"level": 2, "g_rounds": 4 * 3, "gamma_rounds": 4 * 3}
    # level 3: G and Gamma plus the 200 - 104 leftover rounds
    assert summ[3]["gamma_rounds"] == 16
    assert summ[3]["g_rounds"] == 16 + 200 - spec.implied_rounds
    assert g.summary()["total"] == 200
    assert g.blocks[-1].label.kind == "remainder"


def test_storage_is_per_group():
    spec = LevelSpec(3, 2, (1, 5, 7), 2)
    small = build_l_level(spec, spec.implied_rounds)
    big = build_l_level(spec, 10 ** 6)
    assert len(big.blocks) == len(small.blocks) + 1
    assert max(len(b.view) for b in big.blocks) <= 2


def test_builder_errors():
    with pytest.raises(ConfigError):
        build_two_level(5, 3, 2)
    with pytest.raises(ConfigError):
        build_three_level(9, 1, 3, 2, 2)
    with pytest.raises(ConfigError):
        LevelSpec(3, 0, (1, 1, 1), 2)
    with pytest.raises(ConfigError):
        build_l_level(LevelSpec(2, 2, (1, 1), 2), 10)


def test_invalid_views_rejected():
    with pytest.raises(ConfigError):
        InfoGraph.from_sets([set(), {2}])
    with pytest.raises(ConfigError):
        InfoGraph.from_sets([set(), {1}, {3}])


# -- densification oracle ----------------------------------------------------

@pytest.mark.parametrize("T,T1,pl", [(10, 2, 3), (64, 7, 2), (300, 20, 5), (512, 100, 3)])
def test_two_level_matches_dense(T, T1, pl):
    assert build_two_level(T, T1, pl).dense() == dense_two_level(T, T1, pl)


@pytest.mark.parametrize("T,T1,T2,s,pl", [(8, 1, 1, 2, 2), (100, 3, 7, 3, 2), (512, 5, 20, 4, 3)])
def test_three_level_matches_dense(T, T1, T2, s, pl):
    assert build_three_level(T, T1, T2, s, pl).dense() == dense_three_level(T, T1, T2, s, pl)


@pytest.mark.parametrize("spec,T", [
    (LevelSpec(2, 2, (1, 2), 2), 40),
    (LevelSpec(3, 2, (1, 2, 2), 2), 60),
    (LevelSpec(4, 2, (1, 1, 2, 1), 3), 120),
    (LevelSpec(3, 3, (1, 2, 1), 2), 200),
    (LevelSpec(3, 2, (2, 3, 4), 2, gamma_factor=0), 100),
])
def test_l_level_matches_dense(spec, T):
    assert build_l_level(spec, T).dense() == dense_l_level(spec, T)


# -- transitivity ------------------------------------------------------------

def test_validator_examples():
    assert validate_transitive(build_full_disclosure(10)) == []
    g = InfoGraph.from_sets([set(), {1}, {2}])
    assert [tuple(v) for v in validate_transitive(g)] == [(2, 3, 1)]


def test_validator_detects_chain_gap():
    # round 4 sees round 3 of a chain but not the chain's earlier round 2
    from infodisclose.graph import Block, Label
    g = InfoGraph(4, (Block(1, 2), Block(2, 4, (), True, Label(1, "path")), Block(4, 5, ((3, 4),))))
    assert [tuple(v) for v in validate_transitive(g)] == [(3, 4, 2)]


@st.composite
def random_sets(draw):
    T = draw(st.integers(1, 14))
    return [set(draw(st.sets(st.integers(1, t - 1)))) if t > 1 else set() for t in range(1, T + 1)]


@settings(max_examples=300, deadline=None)
@given(random_sets())
def test_validator_matches_dense_oracle(sets):
    got = {(v.observed, v.observer): v.witness for v in validate_transitive(InfoGraph.from_sets(sets))}
    want = {}
    for t, tp, w in dense_transitivity_violations(sets):
        want[(t, tp)] = min(w, want.get((t, tp), w))
    assert got == want


def parameter_grid():
    rng = random.Random(11)
    grid = []
    for _ in range(20):
        pl, T1 = rng.randint(1, 4), rng.randint(1, 12)
        grid.append(build_two_level(T1 * pl + rng.randint(0, 30), T1, pl))
    for _ in range(20):
        pl, T1, T2, s = rng.randint(1, 3), rng.randint(1, 5), rng.randint(1, 9), rng.randint(1, 4)
        grid.append(build_three_level(s * T1 * pl + s * T2 + rng.randint(0, 20), T1, T2, s, pl))
    for _ in range(20):
        L, s = rng.randint(2, 4), rng.randint(1, 3)
        spec = LevelSpec(L, s, tuple(rng.randint(1, 3) for _ in range(L)), rng.randint(1, 3),
                         rng.choice([None, 0, 1, 2]))
        grid.append(build_l_level(spec, spec.implied_rounds + rng.randint(0, 20)))
    grid += [build_full_disclosure(T) for T in (1, 2, 7, 100)]
    return grid


def test_builders_transitive_over_grid():
    grid = parameter_grid()
    assert len(grid) >= 50
    for g in grid:
        assert validate_transitive(g) == []
        if g.horizon <= 200:
            assert dense_transitivity_violations(g.dense()) == []


@pytest.mark.parametrize("name", ["paper-2level", "paper-3level", "paper-Llevel-thm", "paper-Llevel-cor"])
def test_presets_transitive(name):
    kw = {"growth": 4} if name == "paper-Llevel-cor" else {}
    for T in (2 ** 10, 2 ** 14):
        assert validate_transitive(build_preset(name, T, **kw)) == []


# -- metrics and export --------------------------------------------------------

def test_subhistory_fraction():
    f = subhistory_fraction(build_full_disclosure(20))
    assert np.all(f[1:] == 1.0) and f[0] == 0.0
    T, T1, pl = 50, 4, 3
    f = subhistory_fraction(build_two_level(T, T1, pl))
    assert f[-1] == pytest.approx(T1 * pl / (T - 1))
    g = build_three_level(100, 3, 7, 3, 2)
    dense = g.dense()
    assert np.allclose(subhistory_fraction(g), [len(s) / max(t - 1, 1) for t, s in enumerate(dense, 1)])


def test_upper_levels_see_constant_fraction():
    # structural: every agent above level 2 sees a constant fraction of the past,
    # min fraction >= 1/(c sigma^4) with c = 1 at these settings
    sigma = 4
    for T in (2 ** 12, 2 ** 14, 2 ** 16):
        fr = fraction_by_level(build_preset("paper-Llevel-cor", T, sigma=sigma, growth=sigma))
        upper = [v for l, v in fr.items() if l >= 3]
        assert upper and min(upper) >= 1 / sigma ** 4


def test_export_dot_full():
    text = export_dot(build_full_disclosure(3))
    (graph,) = pydot.graph_from_dot_data(text)
    assert {n.get_name() for n in graph.get_nodes()} >= {"r1", "r2", "r3"}
    edges = {(e.get_source(), e.get_destination()) for e in graph.get_edges()}
    assert edges == {("r1", "r2"), ("r1", "r3"), ("r2", "r3")}
    reduced = pydot.graph_from_dot_data(export_dot(build_full_disclosure(3), reduce=True))[0]
    assert {(e.get_source(), e.get_destination()) for e in reduced.get_edges()} == {("r1", "r2"), ("r2", "r3")}


def test_export_dot_collapsed_three_level():
    g = build_three_level(40, 2, 3, 2, 2)
    (graph,) = pydot.graph_from_dot_data(export_dot(g, collapse_groups=True))
    nodes = [n for n in graph.get_nodes() if n.get_name() not in ("node", "edge", "graph")]
    assert len(nodes) == 2 + 2 + 1
    # level-2 group 1 observes 2 paths * 2 rounds, 3 members -> 12 observation pairs
    labels = sorted(e.get("label").strip('"') for e in graph.get_edges())
    assert labels.count("12") == 2


def test_summary_json():
    import json
    g = build_three_level(8, 1, 1, 2, 2)
    assert json.loads(g.summary_json()) == {
        "levels": [{"level": 1, "g_rounds": 4, "gamma_rounds": 0},
                   {"level": 2, "g_rounds": 2, "gamma_rounds": 0},
                   {"level": 3, "g_rounds": 2, "gamma_rounds": 0}], "total": 8}
