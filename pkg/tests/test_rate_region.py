import csv
from fractions import Fraction

import numpy as np
import pytest

from errors import CapacityError, DomainError
from rate_region import (
    analytic_region,
    binding_facets,
    boundary_samples_csv,
    check_region,
    closed_form_region_3flow,
    contains,
    load_region,
    region_to_json,
    service_capacity,
    serviceable_prob,
    tightest_facet,
)
from scheduler import ServiceRule
from switch_model import FlowSpec, LinkParam, build_scenario, build_topology

P = 0.632
R = 1 - P


class TestScenarioAFacets:
    """Scenario A at p = 0.632, where every pair of flows shares a user."""

    def test_any_orientation(self, scenario_a):
        region = analytic_region(scenario_a, ServiceRule.ANY_ORIENTATION)
        assert region.bound_for([1]) == pytest.approx(0.399424, abs=1e-9)
        assert region.bound_for([1, 2]) == pytest.approx(P ** 3 + 2 * R * P ** 2, abs=1e-12)
        assert region.bound_for([1, 2]) == pytest.approx(0.546412032, abs=1e-9)
        assert region.bound_for([1, 2, 3]) == pytest.approx(0.693400064, abs=1e-9)

    def test_opposite_parity(self, scenario_a):
        region = analytic_region(scenario_a, ServiceRule.OPPOSITE_PARITY)
        assert region.bound_for([2]) == pytest.approx(0.199712, abs=1e-9)
        assert region.bound_for([2, 3]) == pytest.approx(0.336315008, abs=1e-9)
        assert region.bound_for([1, 2, 3]) == pytest.approx(1.5 * P ** 2 - 0.75 * P ** 3, abs=1e-12)
        assert region.bound_for([1, 2, 3]) == pytest.approx(0.409809024, abs=1e-9)

    def test_subset_order(self, scenario_a):
        region = analytic_region(scenario_a)
        assert [b.subset for b in region.bounds] == [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]


def test_parity_triple_probability_at_half():
    topology = build_scenario("A", 0.5, 1.0).topology
    assert serviceable_prob(topology, [1, 2, 3], "parity") == pytest.approx(0.28125, abs=1e-15)
    assert serviceable_prob(topology, [1, 2, 3], "parity", exact=True) == Fraction(9, 32)


def test_scenario_b_values_at_half():
    topology = build_scenario("B", 0.5, 1.0).topology
    region = analytic_region(topology)
    assert region.bound_for([1]) == pytest.approx(0.25)
    assert region.bound_for([1, 2]) == pytest.approx(0.375)
    assert region.bound_for([2, 3]) == pytest.approx(0.375)
    assert region.bound_for([1, 3]) == pytest.approx(0.5)
    assert region.bound_for([1, 2, 3]) == pytest.approx(0.5625)
    # the disjoint pair is served together whenever both are serviceable
    assert serviceable_prob(topology, [1, 3]) == pytest.approx(1 - (1 - 0.25) ** 2)


def test_capacity_equals_probability_on_contending_sets(scenario_a):
    for subset in ([1], [1, 2], [1, 2, 3]):
        for rule in ServiceRule:
            assert service_capacity(scenario_a, subset, rule) == pytest.approx(
                serviceable_prob(scenario_a, subset, rule), abs=1e-15)


@pytest.mark.parametrize("tag", ["A", "B", "C"])
@pytest.mark.parametrize("rule", list(ServiceRule))
@pytest.mark.parametrize("p", [round(0.1 * k, 1) for k in range(11)])
def test_enumeration_matches_closed_forms(tag, rule, p):
    enumerated = analytic_region(build_scenario(tag, p, 1.0).topology, rule)
    closed = closed_form_region_3flow(p, tag, rule)
    for a, b in zip(enumerated.bounds, closed.bounds):
        assert a.subset == b.subset
        assert a.bound == pytest.approx(b.bound, abs=1e-12)


@pytest.mark.parametrize("tag", ["A", "B", "C"])
def test_parity_never_exceeds_any_orientation(tag):
    topology = build_scenario(tag, P, 1.0).topology
    loose = analytic_region(topology, ServiceRule.ANY_ORIENTATION)
    tight = analytic_region(topology, ServiceRule.OPPOSITE_PARITY)
    for a, b in zip(loose.bounds, tight.bounds):
        assert b.bound <= a.bound + 1e-15


@pytest.mark.parametrize("tag", ["A", "B", "C"])
def test_regions_are_monotone_and_subadditive(tag):
    for rule in ServiceRule:
        assert check_region(analytic_region(build_scenario(tag, P, 1.0).topology, rule)) == []


def test_degenerate_probabilities():
    zero = analytic_region(build_scenario("A", 0.0, 1.0).topology)
    assert all(b.bound == 0.0 for b in zero.bounds)
    assert contains(zero, [0.0, 0.0, 0.0])
    assert not contains(zero, [1e-6, 0.0, 0.0])
    one = analytic_region(build_scenario("C", 1.0, 1.0).topology)
    assert one.bound_for([1, 2, 3]) == pytest.approx(3.0)


def test_binding_facets_per_scenario(scenario_a, scenario_b, scenario_c):
    assert len(binding_facets(analytic_region(scenario_a))) == 7
    b_subsets = {f.subset for f in binding_facets(analytic_region(scenario_b))}
    assert b_subsets == {(1,), (2,), (3,), (1, 2), (2, 3), (1, 2, 3)}
    c_subsets = {f.subset for f in binding_facets(analytic_region(scenario_c))}
    assert c_subsets == {(1,), (2,), (3,)}


def test_membership(scenario_a):
    region = analytic_region(scenario_a)
    assert contains(region, [0.39, 0.0, 0.0])
    assert not contains(region, [0.4, 0.0, 0.0])
    assert contains(region, [0.2, 0.2, 0.2])
    assert not contains(region, [0.25, 0.25, 0.25])
    assert not contains(region, [0.2, 0.2, 0.2], margin=0.1)
    with pytest.raises(DomainError):
        contains(region, [0.1, 0.1])
    with pytest.raises(DomainError):
        contains(region, [-0.1, 0.0, 0.0])


def test_swap_probability_shrinks_region():
    region = analytic_region(build_scenario("A", P, 0.5).topology)
    assert region.q == (0.5, 0.5, 0.5)
    assert contains(region, [0.19, 0.0, 0.0])
    assert not contains(region, [0.2, 0.0, 0.0])


def test_tightest_facet(scenario_a):
    facet, ratio = tightest_facet(analytic_region(scenario_a), [1.0, 1.0, 1.0])
    assert facet.subset == (1, 2, 3)
    assert ratio == pytest.approx(3 / 0.693400064)


def test_heterogeneous_links():
    links = [LinkParam.direct(0.9), LinkParam.direct(0.5), LinkParam.direct(0.2)]
    flows = [FlowSpec(1, (1, 2)), FlowSpec(2, (2, 3)), FlowSpec(3, (1, 3))]
    topology = build_topology([1, 2, 3], links, flows)
    assert serviceable_prob(topology, [1]) == pytest.approx(0.45)
    assert serviceable_prob(topology, [1, 2]) == pytest.approx(0.5 * (1 - 0.1 * 0.8))
    assert serviceable_prob(topology, [1], exact=True) == Fraction(9, 20)


def test_enumeration_cap(scenario_c):
    with pytest.raises(CapacityError):
        analytic_region(scenario_c, cap=4)


def test_subset_validation(scenario_a):
    with pytest.raises(DomainError):
        serviceable_prob(scenario_a, [])
    with pytest.raises(DomainError):
        serviceable_prob(scenario_a, [4])


def test_region_json_and_samples(tmp_path, scenario_b):
    region = analytic_region(scenario_b, "parity")
    region_to_json(region, tmp_path / "region.json")
    assert load_region(tmp_path / "region.json") == region

    boundary_samples_csv(region, tmp_path / "samples.csv", step=0.25)
    with open(tmp_path / "samples.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["lam1", "lam2", "lam3", "in_region"]
    assert len(rows) == 1 + 5 ** 3
    assert rows[1] == ["0.000000", "0.000000", "0.000000", "1"]


def test_halfspaces(scenario_a):
    a, b = analytic_region(scenario_a).halfspaces(q=[1.0, 0.5, 1.0])
    assert a.shape == (7, 3)
    np.testing.assert_allclose(a[1], [0.0, 2.0, 0.0])
    assert b[0] == pytest.approx(P ** 2)


@pytest.mark.parametrize("tag", ["A", "B", "C"])
@pytest.mark.parametrize("rule", list(ServiceRule))
def test_every_plane_grows_with_p(tag, rule):
    grid = np.linspace(0.0, 1.0, 41)
    regions = [analytic_region(build_scenario(tag, float(p), 1.0).topology, rule) for p in grid]
    for b in regions[0].bounds:
        values = [r.bound_for(b.subset) for r in regions]
        assert all(a <= c + 1e-12 for a, c in zip(values, values[1:])), b.subset
