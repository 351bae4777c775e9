#!/usr/bin/env python3
"""
Stable Request-Rate Regions
===========================

For every nonempty subset S of flows the switch can, per time step, complete at
most as many type-S requests as the largest matching among the serviceable
flows of S. Averaging that over the joint link outcomes gives one boundary plane

    sum_{i in S} lambda_i / q_i <= c_S

per subset. When the flows of S pairwise share a user, c_S is simply the
probability that at least one of them is serviceable; disjoint flows add up,
which is why a disjoint pair contributes no plane beyond its singletons and a
fully disjoint switch reduces to lambda_i <= p^2.

The planes are computed by exact enumeration of link outcomes (down, or up in
either orientation) and, for the canonical 3-flow scenarios, by closed forms.
"""

import csv
import itertools
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog

from errors import CapacityError, DomainError
from scheduler import ServiceRule, enumerate_matchings
from switch_model import SCENARIO_LAYOUTS, SwitchTopology

logger = logging.getLogger(__name__)

ENUMERATION_CAP = 20
MEMBERSHIP_TOL = 1e-12
FACET_TOL = 1e-9


@dataclass(frozen=True)
class SubsetBound:
    """sum_{i in subset} lambda_i / q_i <= bound, subset given as sorted flow ids."""
    subset: Tuple[int, ...]
    bound: float

    def __post_init__(self):
        if not self.subset:
            raise DomainError("a subset bound needs at least one flow")

    def load(self, lam: Sequence[float], q: Sequence[float]) -> float:
        return math.fsum(lam[i - 1] / q[i - 1] for i in self.subset)

    def to_dict(self) -> Dict[str, Any]:
        return {"subset": list(self.subset), "bound": float(self.bound)}


@dataclass(frozen=True)
class RateRegion:
    """All 2^K - 1 subset planes for one topology and service rule."""
    bounds: Tuple[SubsetBound, ...]
    rule: ServiceRule
    num_flows: int
    q: Tuple[float, ...] = ()

    def bound_for(self, subset: Iterable[int]) -> float:
        key = tuple(sorted(subset))
        for b in self.bounds:
            if b.subset == key:
                return b.bound
        raise KeyError(f"no bound stored for subset {key}")

    def weights(self, q: Optional[Sequence[float]] = None) -> Tuple[float, ...]:
        q = tuple(q) if q is not None else (self.q or (1.0,) * self.num_flows)
        if len(q) != self.num_flows:
            raise DomainError(f"need one q per flow ({self.num_flows}), got {len(q)}")
        return q

    def halfspaces(self, q: Optional[Sequence[float]] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Planes as ``A @ lam <= b`` (without the nonnegativity constraints)."""
        q = self.weights(q)
        a = np.zeros((len(self.bounds), self.num_flows))
        b = np.zeros(len(self.bounds))
        for row, bound in enumerate(self.bounds):
            for i in bound.subset:
                a[row, i - 1] = 1.0 / q[i - 1]
            b[row] = bound.bound
        return a, b

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rule": ServiceRule.parse(self.rule).value,
            "num_flows": self.num_flows,
            "q": list(self.q),
            "bounds": [b.to_dict() for b in self.bounds],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RateRegion":
        return cls(
            bounds=tuple(SubsetBound(tuple(b["subset"]), float(b["bound"])) for b in data["bounds"]),
            rule=ServiceRule.parse(data["rule"]),
            num_flows=int(data["num_flows"]),
            q=tuple(data.get("q") or ()),
        )


def _all_subsets(k: int) -> List[Tuple[int, ...]]:
    ids = range(1, k + 1)
    return [s for size in range(1, k + 1) for s in itertools.combinations(ids, size)]


def _subset_mask(subset: Iterable[int]) -> int:
    mask = 0
    for i in subset:
        mask |= 1 << (i - 1)
    return mask


def _link_states(p: float, parity: bool, exact: bool):
    if exact:
        p = Fraction(repr(float(p)))
        one, half = Fraction(1), Fraction(1, 2)
    else:
        one, half = 1.0, 0.5
    if parity:
        return ((one - p, 0, 0), (p * half, 1, 0), (p * half, 1, 1))
    return ((one - p, 0, 0), (p, 1, 0))


@lru_cache(maxsize=64)
def _mask_distribution(topology: SwitchTopology, rule: ServiceRule, exact: bool,
                       cap: int) -> Dict[int, Union[float, Fraction]]:
    """P(set of serviceable flows == mask) over all joint link outcomes."""
    pairs = [topology.flow_links(f) for f in topology.flows]
    relevant = sorted({j for pair in pairs for j in pair})
    parity = rule is ServiceRule.OPPOSITE_PARITY
    states_per_link = 3 if parity else 2
    if len(relevant) > cap:
        raise CapacityError(
            f"exact enumeration over {states_per_link}^{len(relevant)} link outcomes exceeds the {cap}-link cap",
            estimate=float(states_per_link ** len(relevant)), cap=float(states_per_link ** cap),
        )
    position = {j: pos for pos, j in enumerate(relevant)}
    local_pairs = [(position[a], position[b]) for a, b in pairs]
    choices = [_link_states(topology.links[j].p, parity, exact) for j in relevant]

    buckets = defaultdict(list)
    for combo in itertools.product(*choices):
        prob = math.prod(state[0] for state in combo)
        if prob == 0:
            continue
        mask = 0
        for i, (a, b) in enumerate(local_pairs):
            if combo[a][1] and combo[b][1] and (not parity or combo[a][2] != combo[b][2]):
                mask |= 1 << i
        buckets[mask].append(prob)

    if exact:
        return {mask: sum(probs, Fraction(0)) for mask, probs in buckets.items()}
    return {mask: math.fsum(probs) for mask, probs in buckets.items()}


@lru_cache(maxsize=64)
def _matching_masks(topology: SwitchTopology) -> Tuple[int, ...]:
    return tuple(_subset_mask(m.flow_ids) for m in enumerate_matchings(topology))


def _max_served(mask: int, matchings: Tuple[int, ...]) -> int:
    return max(bin(m & mask).count("1") for m in matchings)


def _check_subset(topology: SwitchTopology, subset: Iterable[int]) -> Tuple[int, ...]:
    subset = tuple(sorted(set(subset)))
    if not subset:
        raise DomainError("subset must be nonempty")
    for i in subset:
        if not 1 <= i <= topology.num_flows:
            raise DomainError(f"flow id {i} outside 1..{topology.num_flows}")
    return subset


def serviceable_prob(topology: SwitchTopology, subset: Iterable[int], rule=ServiceRule.ANY_ORIENTATION,
                     exact: bool = False, cap: int = ENUMERATION_CAP):
    """Exact P(at least one flow of ``subset`` is serviceable in a step)."""
    rule = ServiceRule.parse(rule)
    smask = _subset_mask(_check_subset(topology, subset))
    dist = _mask_distribution(topology, rule, exact, cap)
    hits = [prob for mask, prob in dist.items() if mask & smask]
    return sum(hits, Fraction(0)) if exact else math.fsum(hits)


def service_capacity(topology: SwitchTopology, subset: Iterable[int], rule=ServiceRule.ANY_ORIENTATION,
                     exact: bool = False, cap: int = ENUMERATION_CAP):
    """Expected number of ``subset`` flows that one step can serve together.

    Equals ``serviceable_prob`` whenever the flows of ``subset`` pairwise contend.
    """
    rule = ServiceRule.parse(rule)
    smask = _subset_mask(_check_subset(topology, subset))
    dist = _mask_distribution(topology, rule, exact, cap)
    matchings = _matching_masks(topology)
    terms = [prob * _max_served(mask & smask, matchings) for mask, prob in dist.items() if mask & smask]
    return sum(terms, Fraction(0)) if exact else math.fsum(terms)


def analytic_region(topology: SwitchTopology, rule=ServiceRule.ANY_ORIENTATION,
                    exact: bool = False, cap: int = ENUMERATION_CAP) -> RateRegion:
    """Subset planes for every nonempty flow subset, by exact enumeration."""
    rule = ServiceRule.parse(rule)
    bounds = tuple(
        SubsetBound(subset, float(service_capacity(topology, subset, rule, exact, cap)))
        for subset in _all_subsets(topology.num_flows)
    )
    logger.debug(f"Enumerated region with {len(bounds)} planes under {rule.value}")
    return RateRegion(bounds=bounds, rule=rule, num_flows=topology.num_flows, q=topology.q)


def closed_form_region_3flow(p: float, scenario_tag: str, rule=ServiceRule.ANY_ORIENTATION,
                             q: float = 1.0) -> RateRegion:
    """Closed-form planes of the canonical 3-flow scenarios with uniform link p."""
    if isinstance(p, bool) or not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    tag = str(scenario_tag).upper()
    if tag not in SCENARIO_LAYOUTS:
        raise DomainError(f"unknown scenario tag {scenario_tag!r}")
    parity = ServiceRule.parse(rule) is ServiceRule.OPPOSITE_PARITY
    r = 1.0 - p

    single = p ** 2 / 2 if parity else p ** 2
    # two flows sharing one user, three links involved
    contending_pair = p ** 2 - p ** 3 / 4 if parity else p ** 3 + 2 * r * p ** 2
    if tag == "A":
        pairs = {(1, 2): contending_pair, (1, 3): contending_pair, (2, 3): contending_pair}
        triple = 3 * p ** 2 / 2 - 3 * p ** 3 / 4 if parity else p ** 3 + 3 * r * p ** 2
    elif tag == "B":
        pairs = {(1, 2): contending_pair, (1, 3): 2 * single, (2, 3): contending_pair}
        if parity:
            triple = 9 * p ** 4 / 8 + 5 * p ** 3 * r / 2 + 3 * p ** 2 * r ** 2 / 2
        else:
            triple = 2 * p ** 4 + 4 * p ** 3 * r + 3 * p ** 2 * r ** 2
    else:
        pairs = {(1, 2): 2 * single, (1, 3): 2 * single, (2, 3): 2 * single}
        triple = 3 * single

    values = {(1,): single, (2,): single, (3,): single, **pairs, (1, 2, 3): triple}
    bounds = tuple(SubsetBound(s, values[s]) for s in _all_subsets(3))
    return RateRegion(bounds=bounds, rule=ServiceRule.parse(rule), num_flows=3, q=(float(q),) * 3)


def contains(region: RateRegion, lam: Sequence[float], q: Optional[Sequence[float]] = None,
             margin: float = 0.0) -> bool:
    """True iff every plane holds; ``margin > 0`` demands that much slack (strict interior)."""
    if len(lam) != region.num_flows:
        raise DomainError(f"need one rate per flow ({region.num_flows}), got {len(lam)}")
    if any(x < 0 for x in lam):
        raise DomainError("request rates must be nonnegative")
    q = region.weights(q)
    tol = MEMBERSHIP_TOL if margin == 0.0 else 0.0
    return all(b.load(lam, q) <= b.bound - margin + tol for b in region.bounds)


def tightest_facet(region: RateRegion, lam: Sequence[float],
                   q: Optional[Sequence[float]] = None) -> Tuple[SubsetBound, float]:
    """The plane with the largest load/bound ratio for ``lam`` and that ratio."""
    q = region.weights(q)
    best, ratio = None, -1.0
    for b in region.bounds:
        load = b.load(lam, q)
        value = math.inf if b.bound == 0 and load > 0 else (0.0 if b.bound == 0 else load / b.bound)
        if value > ratio:
            best, ratio = b, value
    return best, ratio


def binding_facets(region: RateRegion, q: Optional[Sequence[float]] = None) -> List[SubsetBound]:
    """Planes not implied by the others together with lambda >= 0 (LP redundancy test)."""
    a, b = region.halfspaces(q)
    binding = []
    for row, bound in enumerate(region.bounds):
        others = [i for i in range(len(region.bounds)) if i != row]
        res = linprog(
            -a[row],
            A_ub=a[others] if others else None,
            b_ub=b[others] if others else None,
            bounds=[(0, None)] * region.num_flows,
            method="highs",
        )
        if res.status == 3 or (res.status == 0 and -res.fun > bound.bound + FACET_TOL):
            binding.append(bound)
    return binding


def check_region(region: RateRegion) -> List[str]:
    """Monotonicity and subadditivity of the stored planes."""
    violations = []
    values = {b.subset: b.bound for b in region.bounds}
    for s, c in values.items():
        if not -FACET_TOL <= c <= len(s) + FACET_TOL:
            violations.append(f"bound {c} for {s} outside [0, |S|]")
        for t, d in values.items():
            if set(s) < set(t) and c > d + FACET_TOL:
                violations.append(f"not monotone: c{s}={c} > c{t}={d}")
            if not set(s) & set(t) and s < t:
                union = tuple(sorted(set(s) | set(t)))
                if union in values and values[union] > c + d + FACET_TOL:
                    violations.append(f"not subadditive on {s} and {t}")
    return violations


def region_to_json(region: RateRegion, path: Union[str, Path, None] = None) -> str:
    text = json.dumps(region.to_dict(), indent=2)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
        logger.info(f"✅ Region written to {path}")
    return text


def load_region(path: Union[str, Path]) -> RateRegion:
    return RateRegion.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def boundary_samples_csv(region: RateRegion, path: Union[str, Path], step: float = 0.05,
                         upper: float = 1.0) -> Path:
    """Membership on a regular grid, header ``lam1,...,lamK,in_region``."""
    if step <= 0:
        raise DomainError("sample step must be positive")
    count = int(math.floor(upper / step + 1e-9)) + 1
    axis = [round(k * step, 10) for k in range(count)]
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([f"lam{i}" for i in range(1, region.num_flows + 1)] + ["in_region"])
        for lam in itertools.product(axis, repeat=region.num_flows):
            writer.writerow([f"{x:.6f}" for x in lam] + [int(contains(region, lam))])
    logger.info(f"✅ Boundary samples written to {path}")
    return path
