import math

import numpy as np
import pytest

from adaptim.diffusion import (
    EnumerationCapExceeded,
    count_active,
    enumerate_statuses,
    expected_active_exact,
    expected_marginal_exact,
    expected_marginal_mc,
    marginal_delta,
    simulate_round,
)
from adaptim.graph import Graph, random_graph
from adaptim.realization import (
    EMPTY_REALIZATION,
    UNBOUNDED,
    Horizon,
    NotFullRealizationError,
    Realization,
    Status,
    empty_status,
    is_compatible,
    t_live_reachable,
    unobserved_edges,
)


def R(live=(), dead=()):
    return Realization(frozenset(live), frozenset(dead))


def brute_expected_active(g, sources, phi, t):
    """Independent oracle: enumerate every full extension of phi outright."""
    unobs = unobserved_edges(g, phi)
    total = 0.0
    for mask in range(1 << len(unobs)):
        live, dead, pr = set(phi.live), set(phi.dead), 1.0
        for i, e in enumerate(unobs):
            if (mask >> i) & 1:
                live.add(e)
                pr *= float(g.p[e])
            else:
                dead.add(e)
                pr *= 1.0 - float(g.p[e])
        psi = Realization(frozenset(live), frozenset(dead))
        total += pr * len(t_live_reachable(g, sources, psi, t))
    return total


def rand_graph_and_phi(rng, max_n=5, max_m=10):
    n = int(rng.integers(2, max_n + 1))
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    m = int(rng.integers(1, min(max_m, len(pairs)) + 1))
    pick = rng.choice(len(pairs), size=m, replace=False)
    g = Graph(n, [pairs[i] for i in pick], [float(rng.choice([0.3, 0.5, 0.9])) for _ in pick])
    live, dead = set(), set()
    for e in range(g.m):
        x = rng.random()
        if x < 0.2:
            live.add(e)
        elif x < 0.4:
            dead.add(e)
    return g, R(live, dead)


# ------------------------------------------------------------ one round ----


def test_round_empty_frontier_waits():
    g = Graph(2, [(0, 1)], [0.5])
    u = Status(frozenset({0}), EMPTY_REALIZATION)
    out = simulate_round(g, u, frozenset(), np.random.default_rng(0))
    assert out.next_status == u
    assert out.newly_observed == {}
    assert out.newly_active == frozenset()


def test_round_forced_activation():
    g = Graph(2, [(0, 1)], [1.0])
    u = Status(frozenset({0}), EMPTY_REALIZATION)
    out = simulate_round(g, u, {0}, np.random.default_rng(0))
    assert out.next_status.active == {0, 1}
    assert out.newly_observed == {0: True}


def test_round_dead_edge_never_refires():
    g = Graph(2, [(0, 1)], [1.0])
    u = Status(frozenset({0}), R(dead={0}))
    out = simulate_round(g, u, {0}, np.random.default_rng(0))
    assert out.next_status == u
    assert out.newly_observed == {}


def test_round_observed_live_edge_activates_without_resampling():
    # the edge state is already decided; a newly attempting source just uses it
    g = Graph(2, [(0, 1)], [0.01])
    u = Status(frozenset({0}), R(live={0}))
    out = simulate_round(g, u, {0}, np.random.default_rng(0))
    assert out.next_status.active == {0, 1}
    assert out.newly_observed == {}


def test_round_frontier_must_be_active():
    g = Graph(2, [(0, 1)], [0.5])
    with pytest.raises(ValueError):
        simulate_round(g, empty_status(), {0}, np.random.default_rng(0))


def test_round_against_edge_probability():
    # frequency of activation over many seeded rounds tracks p
    g = Graph(2, [(0, 1)], [0.3])
    u = Status(frozenset({0}), EMPTY_REALIZATION)
    rng = np.random.default_rng(42)
    hits = sum(
        1 in simulate_round(g, u, {0}, rng).next_status.active for _ in range(20000)
    )
    assert abs(hits / 20000 - 0.3) < 0.01


# ------------------------------------------------- counts on full states ----


def test_count_active_basics():
    g = Graph(3, [(0, 1), (1, 2)], [0.5, 0.5])
    psi = R(live={0, 1})
    assert count_active(g, set(), psi, UNBOUNDED) == 0
    assert count_active(g, {0}, psi, UNBOUNDED) == 3
    assert count_active(g, {0}, psi, Horizon.finite(1)) == 2


def test_count_active_needs_full():
    g = Graph(3, [(0, 1), (1, 2)], [0.5, 0.5])
    with pytest.raises(NotFullRealizationError):
        count_active(g, {0}, R(live={0}), UNBOUNDED)


def test_marginal_delta():
    g = Graph(3, [(0, 1), (1, 2)], [0.5, 0.5])
    psi = R(live={0}, dead={1})
    assert marginal_delta(g, {0}, {0}, psi, UNBOUNDED) == 0
    assert marginal_delta(g, set(), {0}, psi, UNBOUNDED) == 2
    assert marginal_delta(g, {0}, {2}, psi, UNBOUNDED) == 1


# ----------------------------------------------------------- exact value ----


def test_exact_single_edge():
    # 0.3 * 2 + 0.7 * 1
    g = Graph(2, [(0, 1)], [0.3])
    assert math.isclose(
        expected_marginal_exact(g, set(), {0}, EMPTY_REALIZATION, UNBOUNDED), 1.3
    )


def test_exact_chain_values():
    g = Graph(3, [(0, 1), (1, 2)], [0.5, 0.5])
    f = lambda s, v, phi, t: expected_marginal_exact(g, s, v, phi, t)
    assert math.isclose(f(set(), {0}, EMPTY_REALIZATION, UNBOUNDED), 1.75)
    assert math.isclose(f(set(), {0}, EMPTY_REALIZATION, Horizon.finite(1)), 1.5)
    # seeding the tail once the head's edge is known live
    assert math.isclose(f({0}, {2}, R(live={0}), UNBOUNDED), 0.5)
    assert math.isclose(f({0}, {1}, EMPTY_REALIZATION, UNBOUNDED), 0.75)
    assert math.isclose(f({0}, {2}, EMPTY_REALIZATION, UNBOUNDED), 0.75)


def test_exact_vstar_already_seeded():
    g = Graph(2, [(0, 1)], [0.3])
    assert expected_marginal_exact(g, {0}, {0}, EMPTY_REALIZATION, UNBOUNDED) == 0.0


def test_exact_on_full_realization_matches_delta():
    g = Graph(3, [(0, 1), (1, 2)], [0.5, 0.5])
    psi = R(live={0}, dead={1})
    want = marginal_delta(g, {0}, {2}, psi, UNBOUNDED)
    got = expected_marginal_exact(g, {0}, {2}, psi, UNBOUNDED)
    assert got == want


def test_exact_matches_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(60):
        g, phi = rand_graph_and_phi(rng)
        srcs = frozenset(int(v) for v in range(g.n) if rng.random() < 0.4)
        t = [Horizon.finite(1), Horizon.finite(2), UNBOUNDED][int(rng.integers(3))]
        want = brute_expected_active(g, srcs, phi, t)
        got = expected_active_exact(g, srcs, phi, t)
        assert abs(got - want) < 1e-12, (g, phi, srcs, t)


def test_exact_marginal_matches_brute_force():
    rng = np.random.default_rng(77)
    for _ in range(40):
        g, phi = rand_graph_and_phi(rng)
        srcs = frozenset(int(v) for v in range(g.n) if rng.random() < 0.3)
        v = int(rng.integers(g.n))
        want = brute_expected_active(g, srcs | {v}, phi, UNBOUNDED) - brute_expected_active(
            g, srcs, phi, UNBOUNDED
        )
        got = expected_marginal_exact(g, srcs, {v}, phi, UNBOUNDED)
        assert abs(got - want) < 1e-12


def test_enumeration_cap():
    g = Graph(5, [(0, i) for i in range(1, 5)], [0.5] * 4)
    with pytest.raises(EnumerationCapExceeded):
        expected_active_exact(g, {0}, EMPTY_REALIZATION, UNBOUNDED, cap=3)


# ----------------------------------------------------------- monte carlo ----


def test_mc_deterministic_graph():
    g = Graph(3, [(0, 1), (1, 2)], [1.0, 1.0])
    got = expected_marginal_mc(g, set(), {0}, EMPTY_REALIZATION, UNBOUNDED, 1, 5)
    assert got == 3.0


def test_mc_single_edge_close():
    g = Graph(2, [(0, 1)], [0.3])
    got = expected_marginal_mc(g, set(), {0}, EMPTY_REALIZATION, UNBOUNDED, 10**6, 11)
    assert abs(got - 1.3) < 0.01


def test_mc_vstar_already_seeded():
    g = Graph(2, [(0, 1)], [0.3])
    assert expected_marginal_mc(g, {0}, {0}, EMPTY_REALIZATION, UNBOUNDED, 100, 0) == 0.0


def test_mc_tracks_exact_on_random_instances():
    rng = np.random.default_rng(9)
    for _ in range(10):
        g, phi = rand_graph_and_phi(rng)
        v = int(rng.integers(g.n))
        want = expected_marginal_exact(g, set(), {v}, phi, UNBOUNDED)
        got = expected_marginal_mc(g, set(), {v}, phi, UNBOUNDED, 40000, int(rng.integers(1 << 30)))
        assert abs(got - want) < 0.08


# ------------------------------------------------------- status fan-out ----


def test_enumerate_zero_rounds():
    g = Graph(2, [(0, 1)], [0.3])
    u = Status(frozenset({0}), EMPTY_REALIZATION)
    assert enumerate_statuses(g, u, 0) == [(u, 1.0)]


def test_enumerate_single_edge_one_round():
    g = Graph(2, [(0, 1)], [0.3])
    u = Status(frozenset({0}), EMPTY_REALIZATION)
    got = dict(enumerate_statuses(g, u, 1))
    live = Status(frozenset({0, 1}), R(live={0}))
    dead = Status(frozenset({0}), R(dead={0}))
    assert got == {live: 0.3, dead: 0.7}


def test_enumerate_probs_sum_to_one():
    rng = np.random.default_rng(31)
    for _ in range(25):
        g, _ = rand_graph_and_phi(rng, max_m=6)
        u = Status(frozenset({int(rng.integers(g.n))}), EMPTY_REALIZATION)
        for rounds in (1, 2, None):
            pairs = enumerate_statuses(g, u, rounds)
            assert math.isclose(sum(p for _, p in pairs), 1.0, abs_tol=1e-12)


def test_enumerate_statuses_pairwise_incompatible():
    rng = np.random.default_rng(13)
    for _ in range(15):
        g, _ = rand_graph_and_phi(rng, max_m=6)
        u = Status(frozenset({0}), EMPTY_REALIZATION)
        pairs = enumerate_statuses(g, u, 2)
        for i in range(len(pairs)):
            for j in range(i + 1, len(pairs)):
                assert not is_compatible(pairs[i][0].observed, pairs[j][0].observed)


def test_enumerate_until_quiet_reaches_final_statuses():
    from adaptim.realization import is_final

    g = Graph(3, [(0, 1), (1, 2)], [0.5, 0.5])
    u = Status(frozenset({0}), EMPTY_REALIZATION)
    pairs = enumerate_statuses(g, u, None)
    assert all(is_final(g, st) for st, _ in pairs)
    # expected spread recovered from the fan-out
    mean = sum(p * len(st.active) for st, p in pairs)
    assert math.isclose(mean, 1.75)


def test_enumerate_waiting_rounds_keep_status():
    g = Graph(2, [(0, 1)], [0.5])
    u = Status(frozenset({0}), R(dead={0}))
    assert enumerate_statuses(g, u, 5) == [(u, 1.0)]


def test_expected_active_exact_random_medium_graph():
    # sanity on a slightly larger random instance against the brute oracle
    g = random_graph(6, 9, 0.4, 3)
    srcs = frozenset({0, 3})
    want = brute_expected_active(g, srcs, EMPTY_REALIZATION, UNBOUNDED)
    got = expected_active_exact(g, srcs, EMPTY_REALIZATION, UNBOUNDED)
    assert abs(got - want) < 1e-12
