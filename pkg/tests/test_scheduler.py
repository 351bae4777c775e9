import itertools
import random

import pytest

from errors import CapacityError, DomainError
from linkgen import LinkSnapshot, RngStream
from scheduler import (
    Matching,
    MaxWeightScheduler,
    ServiceRule,
    TieBreak,
    enumerate_matchings,
    flow_weights,
    matching_weight,
    max_weight,
    serviceable,
)
from switch_model import FlowSpec, LinkParam, build_scenario, build_topology

ALL_UP = LinkSnapshot.from_lists([1, 1, 1, 1, 1, 1])


@pytest.mark.parametrize("tag,count", [("A", 4), ("B", 5), ("C", 8)])
def test_matching_counts(tag, count):
    matchings = enumerate_matchings(build_scenario(tag, 0.5, 1.0).topology)
    assert len(matchings) == count
    assert matchings[0].r == (0, 0, 0)
    assert [m.r for m in matchings] == sorted(m.r for m in matchings)


def test_matchings_are_exactly_the_valid_vectors(scenario_b):
    found = {m.r for m in enumerate_matchings(scenario_b)}
    expected = {r for r in itertools.product((0, 1), repeat=3) if Matching(r).is_valid(scenario_b)}
    assert found == expected
    assert (1, 0, 1) in found and (1, 1, 0) not in found


def test_enumeration_cap(scenario_a):
    with pytest.raises(CapacityError):
        enumerate_matchings(scenario_a, max_flows=2)


def test_service_rules(scenario_a):
    flow = scenario_a.flows[0]
    same = LinkSnapshot.from_lists([1, 1, 0], [1, 1, 0])
    opposite = LinkSnapshot.from_lists([1, 1, 0], [0, 1, 0])
    assert serviceable(flow, same, ServiceRule.ANY_ORIENTATION)
    assert not serviceable(flow, same, ServiceRule.OPPOSITE_PARITY)
    assert serviceable(flow, opposite, "parity", scenario_a)
    assert not serviceable(scenario_a.flows[1], opposite, "any")


def test_rule_parsing():
    assert ServiceRule.parse("any") is ServiceRule.ANY_ORIENTATION
    assert ServiceRule.parse("opposite_parity") is ServiceRule.OPPOSITE_PARITY
    with pytest.raises(DomainError):
        ServiceRule.parse("diagonal")


def test_longest_weighted_queue_wins(scenario_a):
    chosen = max_weight(scenario_a, ALL_UP, [5, 3, 0])
    assert chosen.flow_ids == (1,)


def test_disjoint_flows_served_together(scenario_c):
    assert max_weight(scenario_c, ALL_UP, [1, 1, 1]).flow_ids == (1, 2, 3)
    assert max_weight(scenario_c, ALL_UP, [0, 4, 0]).flow_ids == (2,)


def test_lowest_index_picks_lexicographically_smallest_maximizer(scenario_a):
    # r = (0,1,0) precedes (1,0,0)
    assert max_weight(scenario_a, ALL_UP, [2, 2, 0]).r == (0, 1, 0)


def test_unserviceable_and_empty_flows_never_scheduled(scenario_a):
    snap = LinkSnapshot.from_lists([1, 1, 0])
    assert max_weight(scenario_a, snap, [0, 9, 9]).r == (0, 0, 0)
    assert max_weight(scenario_a, LinkSnapshot.from_lists([0, 0, 0]), [3, 3, 3]).r == (0, 0, 0)


def test_swap_probability_scales_weight():
    links = [LinkParam.direct(1.0)] * 3
    flows = [FlowSpec(1, (1, 2), q=0.2), FlowSpec(2, (2, 3), q=1.0), FlowSpec(3, (1, 3), q=1.0)]
    topology = build_topology([1, 2, 3], links, flows)
    # 0.2 * 10 < 1.0 * 3
    assert max_weight(topology, ALL_UP, [10, 3, 0]).flow_ids == (2,)


def test_queue_validation(scenario_a):
    with pytest.raises(DomainError):
        max_weight(scenario_a, ALL_UP, [1, 2])
    with pytest.raises(DomainError):
        max_weight(scenario_a, ALL_UP, [1, -1, 0])


def test_scale_invariance(scenario_b):
    snap = LinkSnapshot.from_lists([1, 1, 1, 1], [0, 1, 0, 1])
    for queues in ([3, 5, 2], [1, 1, 1], [7, 0, 7]):
        base = max_weight(scenario_b, snap, queues)
        assert max_weight(scenario_b, snap, [4 * Q for Q in queues]) == base


def test_seeded_random_ties_are_reproducible(scenario_a):
    stream = RngStream(5, "tie", 0)
    scheduler = MaxWeightScheduler(scenario_a, tie_break=TieBreak.SEEDED_RANDOM, tie_stream=stream)
    picks = [scheduler.select([True] * 3, [1, 1, 1], step) for step in range(200)]
    again = [scheduler.select([True] * 3, [1, 1, 1], step) for step in range(200)]
    assert picks == again
    assert set(picks) == {(0,), (1,), (2,)}


def test_seeded_random_needs_stream(scenario_a):
    with pytest.raises(DomainError):
        MaxWeightScheduler(scenario_a, tie_break=TieBreak.SEEDED_RANDOM)


@pytest.mark.parametrize("tag", ["A", "B", "C"])
@pytest.mark.parametrize("rule", list(ServiceRule))
def test_max_weight_is_optimal_on_random_states(tag, rule):
    """Brute force over all 2^3 selection vectors on random link states and queues."""
    topology = build_scenario(tag, 0.5, 1.0).topology
    rng = random.Random(f"{tag}-{rule.value}")
    for _ in range(10_000):
        t = [rng.randint(0, 1) for _ in topology.links]
        o = [rng.randint(0, 1) for _ in topology.links]
        snap = LinkSnapshot.from_lists(t, o)
        queues = [rng.randint(0, 6) for _ in topology.flows]
        chosen = max_weight(topology, snap, queues, rule)
        weights = flow_weights(topology, snap, queues, rule)
        best = max(
            matching_weight(Matching(r), weights)
            for r in itertools.product((0, 1), repeat=3)
            if Matching(r).is_valid(topology)
        )
        assert chosen.is_valid(topology)
        assert matching_weight(chosen, weights) == best
        for i, ri in enumerate(chosen.r):
            if ri:
                assert weights[i] > 0


def test_seeded_random_ties_are_uniform_over_served_sets(scenario_b):
    # Q = [1, 1, 0]: {1}, {2} and {1, 3} all weigh 1, but {1, 3} serves the same flows as {1}
    scheduler = MaxWeightScheduler(scenario_b, tie_break=TieBreak.SEEDED_RANDOM,
                                   tie_stream=RngStream(11, "tie", 0))
    picks = [scheduler.select([True] * 3, [1, 1, 0], step) for step in range(20_000)]
    assert set(picks) == {(0,), (1,)}
    assert picks.count((0,)) / len(picks) == pytest.approx(0.5, abs=0.02)


def test_single_distinct_tie_skips_the_draw(scenario_b):
    scheduler = MaxWeightScheduler(scenario_b, tie_break=TieBreak.SEEDED_RANDOM,
                                   tie_stream=RngStream(11, "tie", 0))
    # {1} and {1, 3} tie with flow 3 empty
    assert {scheduler.select([True, False, True], [2, 0, 0], step) for step in range(50)} == {(0,)}


@pytest.mark.parametrize("tag", ["A", "B", "C"])
@pytest.mark.parametrize("rule", list(ServiceRule))
def test_losing_a_link_never_raises_max_weight(tag, rule):
    topology = build_scenario(tag, 0.5, 1.0).topology
    rng = random.Random(f"drop-{tag}-{rule.value}")
    for _ in range(1000):
        t = [rng.randint(0, 1) for _ in topology.links]
        o = [rng.randint(0, 1) for _ in topology.links]
        queues = [rng.randint(0, 6) for _ in topology.flows]
        snap = LinkSnapshot.from_lists(t, o)
        before = matching_weight(max_weight(topology, snap, queues, rule),
                                 flow_weights(topology, snap, queues, rule))
        for j in range(topology.num_links):
            if not t[j]:
                continue
            dropped = LinkSnapshot.from_lists(t[:j] + [0] + t[j + 1:], o)
            after = matching_weight(max_weight(topology, dropped, queues, rule),
                                    flow_weights(topology, dropped, queues, rule))
            assert after <= before
