#!/usr/bin/env python3
"""
Discrete-Time Switch Simulator
==============================

Each time step: new requests join their FIFO queues, every link tries to herald
an elementary entanglement, the Max-Weight matching is chosen on the updated
queues, scheduled swaps succeed with probability q_i, and any unused link
entanglement is discarded before the next step.

Every source of randomness has its own stream (arrivals per flow, links per
link, swaps per flow, ties), so toggling one feature never shifts the draws of
another.
"""

import csv
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import DomainError
from linkgen import LinkSnapshot, RngStream, link_state_rows, make_streams
from scheduler import Matching, MaxWeightScheduler, ServiceRule, TieBreak
from switch_model import SwitchTopology

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArrivalModel:
    """I.i.d. request arrivals with mean ``rates[i]`` per step for flow i+1."""
    rates: Tuple[float, ...]
    kind: str = "bernoulli"  # 'bernoulli' | 'poisson'

    def __post_init__(self):
        if self.kind not in ("bernoulli", "poisson"):
            raise DomainError(f"unknown arrival kind {self.kind!r}")
        for lam in self.rates:
            if lam < 0:
                raise DomainError(f"arrival rates must be nonnegative, got {lam}")
            if self.kind == "bernoulli" and lam > 1:
                raise DomainError(f"bernoulli arrival rates must not exceed 1, got {lam}")

    def rows(self, streams: Sequence[RngStream], start: int, count: int) -> np.ndarray:
        """Arrival counts for steps ``start .. start+count-1``, shape ``(count, K)``."""
        out = np.zeros((count, len(self.rates)), dtype=np.int64)
        for i, (lam, stream) in enumerate(zip(self.rates, streams)):
            if lam == 0:
                continue
            if self.kind == "bernoulli":
                out[:, i] = stream.uniform_rows(start, count, 1)[:, 0] < lam
            else:
                out[:, i] = stream.poisson_rows(lam, start, count)
        return out


@dataclass(frozen=True)
class SimConfig:
    topology: SwitchTopology
    arrivals: ArrivalModel
    rule: ServiceRule = ServiceRule.ANY_ORIENTATION
    steps: int = 20_000
    seed: int = 0
    tie_break: TieBreak = TieBreak.LOWEST_INDEX
    record_waits: bool = False
    initial_queues: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.steps < 1:
            raise DomainError(f"horizon must be at least one step, got {self.steps}")
        if len(self.arrivals.rates) != self.topology.num_flows:
            raise DomainError(
                f"need one arrival rate per flow ({self.topology.num_flows}), got {len(self.arrivals.rates)}"
            )
        if self.initial_queues is not None and len(self.initial_queues) != self.topology.num_flows:
            raise DomainError("initial_queues needs one entry per flow")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "topology": self.topology.to_dict(),
            "arrivals": {"kind": self.arrivals.kind, "rates": list(self.arrivals.rates)},
            "rule": ServiceRule.parse(self.rule).value,
            "steps": self.steps,
            "seed": self.seed,
            "tie_break": TieBreak(self.tie_break).value,
        }


@dataclass(frozen=True)
class SwitchState:
    """Queue contents and cumulative counters after ``step`` steps."""
    step: int
    queues: Tuple[int, ...]
    arrivals: Tuple[int, ...]
    services: Tuple[int, ...]
    swap_failures: Tuple[int, ...]
    scheduled: Tuple[int, ...] = ()
    served: Tuple[int, ...] = ()

    @classmethod
    def empty(cls, k: int, queues: Optional[Sequence[int]] = None) -> "SwitchState":
        zeros = (0,) * k
        return cls(step=0, queues=tuple(queues) if queues is not None else zeros,
                   arrivals=zeros, services=zeros, swap_failures=zeros)


@dataclass
class SimTrace:
    """Per-step queue lengths plus the counters the stability and sanity checks need."""
    qlen: np.ndarray            # (N, K) queue lengths at the end of each step
    step_arrivals: np.ndarray   # (N, K) arrivals per step
    scheduled: np.ndarray       # (N, K) swap attempted
    served: np.ndarray          # (N, K) swap succeeded
    serviceable: np.ndarray     # (N, K) flow serviceable under the active rule
    initial_queues: np.ndarray  # (K,)
    config: Dict[str, Any] = field(default_factory=dict)
    waits: Optional[List[np.ndarray]] = None

    @property
    def steps(self) -> int:
        return int(self.qlen.shape[0])

    @property
    def qtotal(self) -> np.ndarray:
        return self.qlen.sum(axis=1)

    @property
    def arrivals(self) -> np.ndarray:
        return self.step_arrivals.sum(axis=0)

    @property
    def services(self) -> np.ndarray:
        return self.served.sum(axis=0)

    @property
    def swap_failures(self) -> np.ndarray:
        return (self.scheduled & ~self.served).sum(axis=0)

    def throughput(self) -> np.ndarray:
        """Mean served requests per step for each flow."""
        return self.services / self.steps

    def summary(self) -> Dict[str, Any]:
        data = {
            "steps": self.steps,
            "final_queues": self.qlen[-1].tolist(),
            "arrivals": self.arrivals.tolist(),
            "services": self.services.tolist(),
            "swap_failures": self.swap_failures.tolist(),
            "throughput": [round(x, 6) for x in self.throughput().tolist()],
            "config": self.config,
        }
        if self.waits is not None:
            data["mean_wait"] = [float(w.mean()) if len(w) else None for w in self.waits]
        return data


class SwitchSimulator:
    """Runs one configuration step by step."""

    def __init__(self, config: SimConfig):
        self.config = config
        topology = config.topology
        k = topology.num_flows
        self.link_streams = make_streams(config.seed, "link", topology.num_links)
        self.arrival_streams = make_streams(config.seed, "arrival", k)
        self.swap_streams = make_streams(config.seed, "swap", k)
        self.scheduler = MaxWeightScheduler(
            topology, config.rule, config.tie_break, tie_stream=RngStream(config.seed, "tie", 0),
        )
        self.q = [f.q for f in topology.flows]

    def _apply(self, queues: List[int], t_row, o_row, arrivals_row, step: int, swap_row=None):
        queues = [Q + int(a) for Q, a in zip(queues, arrivals_row)]
        flags = self.scheduler.serviceable_flags(t_row, o_row)
        chosen = self.scheduler.select(flags, queues, step)
        if swap_row is None and chosen:
            swap_row = [float(s.uniforms(step)[0]) for s in self.swap_streams]
        served = []
        for i in chosen:
            if swap_row[i] < self.q[i]:
                queues[i] -= 1
                served.append(i)
        return queues, flags, chosen, served

    def step(self, state: SwitchState, snapshot: LinkSnapshot, arrivals_n: Sequence[int]) -> SwitchState:
        """Enqueue arrivals, schedule on the updated queues, attempt the swaps."""
        queues, _, chosen, served = self._apply(
            list(state.queues), snapshot.t, snapshot.o, arrivals_n, state.step,
        )
        k = len(queues)
        failed = set(chosen) - set(served)
        return SwitchState(
            step=state.step + 1,
            queues=tuple(queues),
            arrivals=tuple(a + int(x) for a, x in zip(state.arrivals, arrivals_n)),
            services=tuple(s + (1 if i in served else 0) for i, s in zip(range(k), state.services)),
            swap_failures=tuple(f + (1 if i in failed else 0) for i, f in zip(range(k), state.swap_failures)),
            scheduled=tuple(chosen),
            served=tuple(served),
        )

    def run(self) -> SimTrace:
        config = self.config
        topology = config.topology
        n, k = config.steps, topology.num_flows
        logger.debug(f"🔄 Simulating {n} steps, rates={list(config.arrivals.rates)}, seed={config.seed}")

        arrivals = config.arrivals.rows(self.arrival_streams, 0, n)
        t, o = link_state_rows(topology, self.link_streams, 0, n)
        swaps = np.column_stack([s.uniform_rows(0, n, 1)[:, 0] for s in self.swap_streams])

        qlen = np.zeros((n, k), dtype=np.int64)
        scheduled = np.zeros((n, k), dtype=bool)
        served = np.zeros((n, k), dtype=bool)
        serviceable_mask = np.zeros((n, k), dtype=bool)
        fifo = [deque() for _ in range(k)] if config.record_waits else None
        waits = [[] for _ in range(k)] if config.record_waits else None

        initial = list(config.initial_queues or (0,) * k)
        if fifo is not None:
            for i, count in enumerate(initial):
                fifo[i].extend([0] * count)

        queues = list(initial)
        t_rows, o_rows, arr_rows, swap_rows = t.tolist(), o.tolist(), arrivals.tolist(), swaps.tolist()
        for step in range(n):
            queues, flags, chosen, done = self._apply(
                queues, t_rows[step], o_rows[step], arr_rows[step], step, swap_rows[step],
            )
            qlen[step] = queues
            serviceable_mask[step] = flags
            for i in chosen:
                scheduled[step, i] = True
            for i in done:
                served[step, i] = True
            if fifo is not None:
                for i, count in enumerate(arr_rows[step]):
                    fifo[i].extend([step] * count)
                for i in done:
                    waits[i].append(step - fifo[i].popleft())

        return SimTrace(
            qlen=qlen,
            step_arrivals=arrivals,
            scheduled=scheduled,
            served=served,
            serviceable=serviceable_mask,
            initial_queues=np.array(initial, dtype=np.int64),
            config=config.to_dict(),
            waits=[np.array(w, dtype=np.int64) for w in waits] if waits is not None else None,
        )


def run(config: SimConfig) -> SimTrace:
    """Execute ``config.steps`` steps from the configured (default empty) queues."""
    return SwitchSimulator(config).run()


def check_trace(trace: SimTrace, topology: SwitchTopology) -> List[str]:
    """Conservation and scheduling invariants of a finished trace; empty list means all hold."""
    violations = []
    k = topology.num_flows
    expected = trace.initial_queues + trace.arrivals - trace.services
    if not np.array_equal(trace.qlen[-1], expected):
        violations.append(f"conservation broken: final {trace.qlen[-1].tolist()} != {expected.tolist()}")
    if np.any(trace.services > trace.arrivals + trace.initial_queues):
        violations.append("services exceed arrivals plus initial backlog")

    previous = np.concatenate([trace.initial_queues[None, :], trace.qlen[:-1]], axis=0)
    recursion = previous + trace.step_arrivals - trace.served.astype(np.int64)
    bad = np.flatnonzero(np.any(recursion != trace.qlen, axis=1))
    if bad.size:
        violations.append(f"queue recursion broken at step {int(bad[0])}")
    if np.any(trace.qlen < 0):
        violations.append("negative queue length")

    if np.any(trace.served & ~trace.scheduled):
        violations.append("a flow was served without being scheduled")
    if np.any(trace.scheduled & ~trace.serviceable):
        violations.append("an unserviceable flow was scheduled")
    for row in np.unique(trace.scheduled, axis=0):
        if not Matching(tuple(int(x) for x in row)).is_valid(topology):
            violations.append(f"scheduled set {row.astype(int).tolist()} is not a matching")
    if trace.scheduled.shape[1] != k:
        violations.append("trace width does not match the topology")
    return violations


def write_trace_csv(trace: SimTrace, path: Union[str, Path]) -> Path:
    """CSV with header ``step,q1,...,qK,qtotal``."""
    path = Path(path)
    k = trace.qlen.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["step"] + [f"q{i}" for i in range(1, k + 1)] + ["qtotal"])
        for step, (row, total) in enumerate(zip(trace.qlen.tolist(), trace.qtotal.tolist())):
            writer.writerow([step] + row + [total])
    logger.info(f"✅ Trace written to {path}")
    return path


def write_summary_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")
    return path
