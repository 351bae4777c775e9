#!/usr/bin/env python3
"""
Switch Topology Model
=====================

Hub-and-spoke topology of the repeating switch: one link per user, bipartite
entanglement flows between user pairs, and the three canonical 3-flow
scenarios (all contending, one disjoint pair, fully disjoint).

Topologies load from JSON, either spelled out::

    {"users": [1, 2, 3],
     "links": [{"p": 0.632}, {"pnla": 0.01, "m": 100}, {"eta": 0.01, "nla_scale": 0.5, "m": 40}],
     "flows": [{"users": [1, 2], "q": 1.0, "rci": 0.8}, {"users": [2, 3]}]}

or through the scenario shorthand ``{"scenario": {"tag": "A", "p": 0.632, "q": 1.0}}``.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import networkx as nx
from pydantic import BaseModel, Field, ValidationError, model_validator

from errors import ConfigError, DomainError
from linkgen import herald_prob, nla_success_prob

logger = logging.getLogger(__name__)

SCENARIO_TAGS = ("A", "B", "C")

# Canonical user layouts per scenario tag; flows are 1-indexed user pairs
SCENARIO_LAYOUTS: Dict[str, Tuple[int, Tuple[Tuple[int, int], ...]]] = {
    "A": (3, ((1, 2), (2, 3), (1, 3))),
    "B": (4, ((1, 2), (2, 3), (3, 4))),
    "C": (6, ((1, 2), (3, 4), (5, 6))),
}


def _is_probability(value: Any) -> bool:
    return (not isinstance(value, bool) and isinstance(value, (int, float))
            and not math.isnan(value) and 0.0 <= value <= 1.0)


@dataclass(frozen=True)
class LinkParam:
    """Per-step heralding probability of one link and how it was obtained."""
    p: float
    source: str = "direct"  # 'direct' | 'derived'
    pnla: Optional[float] = None
    m: Optional[int] = None
    eta: Optional[float] = None
    nla_scale: Optional[float] = None

    @classmethod
    def direct(cls, p: float) -> "LinkParam":
        if not _is_probability(p):
            raise DomainError(f"link probability must lie in [0, 1], got {p!r}")
        return cls(p=float(p))

    @classmethod
    def derived(cls, pnla: float, m: int) -> "LinkParam":
        """p = 1 - (1 - P_NLA)^M over M multiplexed channels."""
        return cls(p=herald_prob(pnla, m), source="derived", pnla=float(pnla), m=int(m))

    @classmethod
    def from_eta(cls, eta: float, m: int, scale: float = 1.0) -> "LinkParam":
        """Derive P_NLA from transmissivity through the eta^(1/4) model, then p."""
        pnla = nla_success_prob(eta, scale)
        return cls(p=herald_prob(pnla, m), source="derived", pnla=pnla, m=int(m),
                   eta=float(eta), nla_scale=float(scale))

    def to_dict(self) -> Dict[str, Any]:
        if self.source == "direct":
            return {"p": self.p}
        data = {"pnla": self.pnla, "m": self.m}
        if self.eta is not None:
            data.update({"eta": self.eta, "nla_scale": self.nla_scale})
        return data


@dataclass(frozen=True)
class FlowSpec:
    """A bipartite flow i between users (a, b) with swap success q and optional RCI."""
    id: int
    users: Tuple[int, int]
    q: float = 1.0
    rci: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        data = {"users": list(self.users), "q": self.q}
        if self.rci is not None:
            data["rci"] = self.rci
        return data


@dataclass(frozen=True)
class SwitchTopology:
    """Users (spokes), one link per user, and K flows. Immutable and hashable."""
    users: Tuple[int, ...]
    links: Tuple[LinkParam, ...]
    flows: Tuple[FlowSpec, ...]
    _link_of: Dict[int, int] = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_link_of", {u: j for j, u in enumerate(self.users)})

    @property
    def num_flows(self) -> int:
        return len(self.flows)

    @property
    def num_links(self) -> int:
        return len(self.links)

    def link_index(self, user: int) -> int:
        """Index of the link connecting ``user`` to the switch."""
        try:
            return self._link_of[user]
        except KeyError:
            raise DomainError(f"unknown user {user}") from None

    def flow_links(self, flow: FlowSpec) -> Tuple[int, int]:
        a, b = flow.users
        return self.link_index(a), self.link_index(b)

    @property
    def q(self) -> Tuple[float, ...]:
        return tuple(f.q for f in self.flows)

    @property
    def uniform_p(self) -> Optional[float]:
        """The shared link probability, or None when links differ."""
        ps = {link.p for link in self.links}
        return ps.pop() if len(ps) == 1 else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "users": list(self.users),
            "links": [link.to_dict() for link in self.links],
            "flows": [flow.to_dict() for flow in self.flows],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SwitchTopology":
        return topology_from_config(data)


@dataclass(frozen=True)
class Scenario:
    """One of the canonical 3-flow layouts together with its generated topology."""
    tag: str
    topology: SwitchTopology


def validate(topology: SwitchTopology) -> List[str]:
    """Every invariant violation of ``topology``; an empty list means valid."""
    violations = []
    users = list(topology.users)
    if len(set(users)) != len(users):
        violations.append("user identifiers must be unique")
    if len(topology.links) != len(users):
        violations.append(f"one link per user: {len(users)} users but {len(topology.links)} links")

    for j, link in enumerate(topology.links):
        if not _is_probability(link.p):
            violations.append(f"link {j}: p must lie in [0, 1], got {link.p}")
        if link.source == "derived":
            if link.pnla is None or link.m is None:
                violations.append(f"link {j}: derived link needs pnla and m")
            elif 1.0 - (1.0 - link.pnla) ** link.m != link.p:
                violations.append(f"link {j}: stored p does not equal 1 - (1 - pnla)^m")

    seen = set()
    known = set(users)
    for position, flow in enumerate(topology.flows, start=1):
        if flow.id != position:
            violations.append(f"flow ids must run 1..K in order, found {flow.id} at position {position}")
        if len(flow.users) != 2:
            violations.append(f"flow {flow.id}: only bipartite flows are supported")
            continue
        a, b = flow.users
        if a == b:
            violations.append(f"flow {flow.id}: flow users must be distinct")
        for u in (a, b):
            if u not in known:
                violations.append(f"flow {flow.id}: unknown user {u}")
        key = frozenset(flow.users)
        if key in seen:
            violations.append(f"flow {flow.id}: duplicate flow user set {sorted(key)}")
        seen.add(key)
        if not _is_probability(flow.q) or flow.q == 0.0:
            violations.append(f"flow {flow.id}: q must lie in (0, 1], got {flow.q}")
        if flow.rci is not None and (not isinstance(flow.rci, (int, float)) or flow.rci < 0):
            violations.append(f"flow {flow.id}: rci must be nonnegative, got {flow.rci}")
    return violations


def build_topology(users, links, flows) -> SwitchTopology:
    """Assemble and validate a topology; raises ConfigError listing every violation."""
    topology = SwitchTopology(
        users=tuple(int(u) for u in users),
        links=tuple(links),
        flows=tuple(flows),
    )
    violations = validate(topology)
    if violations:
        raise ConfigError(f"invalid topology: {'; '.join(violations)}", violations)
    return topology


def build_scenario(tag: str, p: float, q: float) -> Scenario:
    """Canonical 3-flow scenario with uniform link p and flow q."""
    tag = str(tag).upper()
    if tag not in SCENARIO_LAYOUTS:
        raise DomainError(f"unknown scenario tag {tag!r}, expected one of {', '.join(SCENARIO_TAGS)}")
    if not _is_probability(p):
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    if not _is_probability(q):
        raise DomainError(f"q must lie in [0, 1], got {q!r}")
    if q == 0.0:
        raise DomainError("q must be positive: a flow that can never be swapped has no region")

    n_users, pairs = SCENARIO_LAYOUTS[tag]
    topology = build_topology(
        users=range(1, n_users + 1),
        links=[LinkParam.direct(p) for _ in range(n_users)],
        flows=[FlowSpec(id=i, users=pair, q=float(q)) for i, pair in enumerate(pairs, start=1)],
    )
    logger.debug(f"Built scenario {tag}: {n_users} users, p={p}, q={q}")
    return Scenario(tag=tag, topology=topology)


def contention_graph(topology: SwitchTopology) -> nx.Graph:
    """Flows (by id) adjacent iff their user sets intersect."""
    graph = nx.Graph()
    graph.add_nodes_from(flow.id for flow in topology.flows)
    for i, fi in enumerate(topology.flows):
        for fm in topology.flows[i + 1:]:
            if set(fi.users) & set(fm.users):
                graph.add_edge(fi.id, fm.id)
    return graph


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------

class LinkConfig(BaseModel):
    p: Optional[float] = Field(None, ge=0, le=1, description="Direct heralding probability")
    pnla: Optional[float] = Field(None, gt=0, le=1, description="Per-channel NLA success probability")
    m: Optional[int] = Field(None, ge=1, description="Multiplexed channel count")
    eta: Optional[float] = Field(None, gt=0, le=1, description="Transmissivity for the eta^(1/4) model")
    nla_scale: float = Field(1.0, gt=0, description="Prefactor of the eta^(1/4) model")

    @model_validator(mode="after")
    def _one_source(self):
        if self.p is None and self.pnla is None and self.eta is None:
            raise ValueError("link needs one of p, pnla+m or eta+m")
        if (self.pnla is not None or self.eta is not None) and self.m is None:
            raise ValueError("derived links need m")
        return self

    def to_param(self) -> LinkParam:
        if self.p is not None:
            return LinkParam.direct(self.p)
        if self.pnla is not None:
            return LinkParam.derived(self.pnla, self.m)
        return LinkParam.from_eta(self.eta, self.m, self.nla_scale)


class FlowConfig(BaseModel):
    users: List[int] = Field(..., description="The two users sharing the end-to-end entanglement")
    q: float = Field(1.0, gt=0, le=1, description="Entanglement swap success probability")
    rci: Optional[float] = Field(None, ge=0, description="Reverse coherent information per request (ebits)")


class ScenarioConfig(BaseModel):
    tag: str = Field(..., description="Scenario tag A, B or C")
    p: float = Field(..., ge=0, le=1, description="Uniform link probability")
    q: float = Field(1.0, gt=0, le=1, description="Uniform swap probability")


class TopologyConfig(BaseModel):
    users: Optional[List[int]] = None
    links: Optional[List[LinkConfig]] = None
    flows: Optional[List[FlowConfig]] = None
    scenario: Optional[ScenarioConfig] = None

    @model_validator(mode="after")
    def _shape(self):
        explicit = [self.users, self.links, self.flows]
        if self.scenario is None and any(part is None for part in explicit):
            raise ValueError("config needs either 'scenario' or all of 'users', 'links', 'flows'")
        if self.scenario is not None and any(part is not None for part in explicit):
            raise ValueError("'scenario' shorthand cannot be combined with explicit users/links/flows")
        return self


def topology_from_config(data: Dict[str, Any]) -> SwitchTopology:
    """Build a validated topology from a parsed JSON config."""
    try:
        config = TopologyConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid topology config: {e}") from e

    try:
        if config.scenario is not None:
            s = config.scenario
            return build_scenario(s.tag, s.p, s.q).topology
        links = [link.to_param() for link in config.links]
        flows = [
            FlowSpec(id=i, users=tuple(f.users), q=f.q, rci=f.rci)
            for i, f in enumerate(config.flows, start=1)
        ]
    except DomainError as e:
        raise ConfigError(f"invalid topology config: {e}") from e
    return build_topology(config.users, links, flows)


def load_topology(path: Union[str, Path]) -> SwitchTopology:
    """Read a JSON topology file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read topology config {path}: {e}") from e
    topology = topology_from_config(data)
    logger.info(f"✅ Loaded topology from {path.name}: {len(topology.users)} users, {topology.num_flows} flows")
    return topology
