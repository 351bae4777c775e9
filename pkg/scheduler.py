#!/usr/bin/env python3
"""
Max-Weight Scheduling
=====================

A matching selects flows so that each user's link serves at most one flow per
time step. Every step the switch picks the matching maximizing
``sum_i r_i * q_i * Q_i * [flow i serviceable]`` over the exhaustively
enumerated matchings.
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

from errors import CapacityError, DomainError
from linkgen import LinkSnapshot, RngStream
from switch_model import FlowSpec, SwitchTopology

logger = logging.getLogger(__name__)

MAX_FLOWS = 20


class ServiceRule(str, Enum):
    ANY_ORIENTATION = "any_orientation"
    OPPOSITE_PARITY = "opposite_parity"

    @classmethod
    def parse(cls, value) -> "ServiceRule":
        """Accept enum values and the short CLI spellings ``any`` / ``parity``."""
        if isinstance(value, cls):
            return value
        aliases = {"any": cls.ANY_ORIENTATION, "parity": cls.OPPOSITE_PARITY}
        text = str(value).lower()
        if text in aliases:
            return aliases[text]
        try:
            return cls(text)
        except ValueError:
            raise DomainError(f"unknown service rule {value!r}") from None


class TieBreak(str, Enum):
    LOWEST_INDEX = "lowest_index"
    SEEDED_RANDOM = "seeded_random"


@dataclass(frozen=True)
class Matching:
    """Binary selection vector over flows (r[i] for flow id i+1)."""
    r: Tuple[int, ...]

    @property
    def flow_ids(self) -> Tuple[int, ...]:
        return tuple(i + 1 for i, ri in enumerate(self.r) if ri)

    @classmethod
    def from_indices(cls, k: int, indices: Sequence[int]) -> "Matching":
        chosen = set(indices)
        return cls(r=tuple(1 if i in chosen else 0 for i in range(k)))

    def is_valid(self, topology: SwitchTopology) -> bool:
        """True iff no user appears in more than one selected flow."""
        used = set()
        for flow, ri in zip(topology.flows, self.r):
            if not ri:
                continue
            if used & set(flow.users):
                return False
            used.update(flow.users)
        return True


@lru_cache(maxsize=64)
def _matching_indices(topology: SwitchTopology, max_flows: int) -> Tuple[Tuple[int, ...], ...]:
    k = topology.num_flows
    if k > max_flows:
        raise CapacityError(
            f"exhaustive matching enumeration over 2^{k} vectors exceeds the {max_flows}-flow cap",
            estimate=float(2 ** k), cap=float(2 ** max_flows),
        )
    user_sets = [set(f.users) for f in topology.flows]
    found = []
    for r in itertools.product((0, 1), repeat=k):
        chosen = [i for i in range(k) if r[i]]
        if all(not (user_sets[a] & user_sets[b]) for a, b in itertools.combinations(chosen, 2)):
            found.append(tuple(chosen))
    logger.debug(f"Enumerated {len(found)} matchings over {k} flows")
    return tuple(found)


def enumerate_matchings(topology: SwitchTopology, max_flows: int = MAX_FLOWS) -> List[Matching]:
    """All matchings (including the empty one) in lexicographic order of r."""
    k = topology.num_flows
    return [Matching.from_indices(k, idx) for idx in _matching_indices(topology, max_flows)]


def serviceable(flow: FlowSpec, snapshot: LinkSnapshot, rule: ServiceRule,
                topology: Optional[SwitchTopology] = None) -> bool:
    """Both links of the flow are up (and, under opposite_parity, of opposite orientation).

    Without a topology, user ``u`` is taken to sit on link ``u - 1``.
    """
    if topology is not None:
        ja, jb = topology.flow_links(flow)
    else:
        ja, jb = flow.users[0] - 1, flow.users[1] - 1
    if not (snapshot.t[ja] and snapshot.t[jb]):
        return False
    if ServiceRule.parse(rule) is ServiceRule.OPPOSITE_PARITY:
        return snapshot.o[ja] != snapshot.o[jb]
    return True


def matching_weight(matching: Matching, weights: Sequence[float]) -> float:
    return sum(w for ri, w in zip(matching.r, weights) if ri)


def flow_weights(topology: SwitchTopology, snapshot: LinkSnapshot, queues: Sequence[int],
                 rule: ServiceRule) -> List[float]:
    """Per-flow max-weight coefficient q_i * Q_i * [serviceable]."""
    return [
        flow.q * queues[i] if queues[i] > 0 and serviceable(flow, snapshot, rule, topology) else 0.0
        for i, flow in enumerate(topology.flows)
    ]


class MaxWeightScheduler:
    """Precomputed matchings and link pairs for repeated per-step selection."""

    def __init__(self, topology: SwitchTopology, rule=ServiceRule.ANY_ORIENTATION,
                 tie_break=TieBreak.LOWEST_INDEX, tie_stream: Optional[RngStream] = None,
                 max_flows: int = MAX_FLOWS):
        self.topology = topology
        self.rule = ServiceRule.parse(rule)
        self.tie_break = TieBreak(tie_break)
        if self.tie_break is TieBreak.SEEDED_RANDOM and tie_stream is None:
            raise DomainError("seeded_random tie-breaking needs a tie stream")
        self.tie_stream = tie_stream
        self.matchings = _matching_indices(topology, max_flows)
        self.pairs = [topology.flow_links(f) for f in topology.flows]
        self.q = [f.q for f in topology.flows]
        self.parity = self.rule is ServiceRule.OPPOSITE_PARITY

    def serviceable_flags(self, t: Sequence[int], o: Sequence[int]) -> List[bool]:
        flags = []
        for ja, jb in self.pairs:
            ok = bool(t[ja] and t[jb])
            if ok and self.parity:
                ok = o[ja] != o[jb]
            flags.append(ok)
        return flags

    def select(self, flags: Sequence[bool], queues: Sequence[int], step: int = 0) -> Tuple[int, ...]:
        """0-based flow indices of the chosen matching, never including zero-weight flows."""
        weights = [self.q[i] * queues[i] if flags[i] and queues[i] > 0 else 0.0
                   for i in range(len(self.q))]
        best = -1.0
        chosen: Tuple[int, ...] = ()
        ties: List[Tuple[int, ...]] = []
        for m in self.matchings:
            total = sum(weights[i] for i in m)
            if total > best:
                best, chosen = total, m
                ties = [m]
            elif total == best and self.tie_break is TieBreak.SEEDED_RANDOM:
                ties.append(m)
        if self.tie_break is TieBreak.SEEDED_RANDOM and len(ties) > 1:
            # Supersets that only add zero-weight flows serve the same flows
            distinct = list(dict.fromkeys(tuple(i for i in m if weights[i] > 0.0) for m in ties))
            if len(distinct) == 1:
                return distinct[0]
            u = float(self.tie_stream.uniforms(step)[0])
            return distinct[min(int(u * len(distinct)), len(distinct) - 1)]
        return tuple(i for i in chosen if weights[i] > 0.0)


def max_weight(topology: SwitchTopology, snapshot: LinkSnapshot, queues: Sequence[int],
               rule=ServiceRule.ANY_ORIENTATION, tie_break=TieBreak.LOWEST_INDEX,
               tie_stream: Optional[RngStream] = None) -> Matching:
    """Max-Weight matching for one step; ties resolved by ``tie_break``."""
    if len(queues) != topology.num_flows:
        raise DomainError(f"need one queue length per flow ({topology.num_flows}), got {len(queues)}")
    if any(Q < 0 for Q in queues):
        raise DomainError("queue lengths must be nonnegative")
    scheduler = MaxWeightScheduler(topology, rule, tie_break, tie_stream)
    flags = scheduler.serviceable_flags(snapshot.t, snapshot.o)
    chosen = scheduler.select(flags, queues, snapshot.step)
    return Matching.from_indices(topology.num_flows, chosen)
