#!/usr/bin/env python3
"""
Link-Level Formulas and Stochastic Link Sampling
================================================

Closed forms for a single switch-to-user link (direct-transmission capacity,
multiplexed heralding probability) and the per-time-step sampler that decides
which links hold an elementary entanglement, and in which orientation.

Random draws are block-addressable: the draws for step ``n`` of a stream are a
pure function of ``(seed, kind, index, n)``, so a run can be replayed, or a
single step inspected, without replaying everything before it.
"""

import logging
import math
import numbers
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Sequence, Tuple

import numpy as np

from errors import DomainError

if TYPE_CHECKING:
    from switch_model import SwitchTopology

logger = logging.getLogger(__name__)

# Rows of pre-drawn randomness per generator block
BLOCK_STEPS = 4096

STREAM_KINDS = {"link": 0, "arrival": 1, "swap": 2, "tie": 3}

# Uniforms consumed per link per step: success, then orientation
LINK_DRAWS = 2


def _check_probability(name: str, value: float, allow_zero: bool = True) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or math.isnan(value):
        raise DomainError(f"{name} must be a real number, got {value!r}")
    low_ok = value >= 0.0 if allow_zero else value > 0.0
    if not low_ok or value > 1.0:
        interval = "[0, 1]" if allow_zero else "(0, 1]"
        raise DomainError(f"{name} must lie in {interval}, got {value}")


def direct_capacity(eta: float) -> float:
    """Entanglement distribution capacity of a pure-loss channel, -log2(1 - eta) ebits/mode."""
    if isinstance(eta, bool) or not isinstance(eta, (int, float)) or math.isnan(eta):
        raise DomainError(f"eta must be a real number, got {eta!r}")
    if eta < 0.0 or eta >= 1.0:
        raise DomainError(f"transmissivity must satisfy 0 <= eta < 1, got {eta}")
    return max(0.0, -math.log2(1.0 - eta))


def repeater_rate_scaling(eta: float) -> float:
    """Small-eta scaling of the multiplexed scissor repeater's end-to-end rate (eta^(3/4))."""
    if eta < 0.0 or eta > 1.0:
        raise DomainError(f"transmissivity must lie in [0, 1], got {eta}")
    return eta ** 0.75


def herald_prob(pnla: float, m: int) -> float:
    """Probability that at least one of ``m`` multiplexed channels heralds: 1 - (1 - pnla)^m."""
    _check_probability("P_NLA", pnla, allow_zero=False)
    if isinstance(m, bool) or not isinstance(m, numbers.Integral) or m < 1:
        raise DomainError(f"multiplexing M must be an integer >= 1, got {m!r}")
    return 1.0 - (1.0 - pnla) ** int(m)


def multiplexing_for(pnla: float) -> int:
    """Channel count M = 1/P_NLA rounded to the nearest integer, never below 1."""
    _check_probability("P_NLA", pnla, allow_zero=False)
    return max(1, int(math.floor(1.0 / pnla + 0.5)))


def saturation_prob(pnla: float) -> float:
    """Heralding probability with M = 1/P_NLA; tends to 1 - 1/e from above as P_NLA -> 0."""
    return herald_prob(pnla, multiplexing_for(pnla))


def nla_success_prob(eta: float, scale: float = 1.0) -> float:
    """Optional parametric model P_NLA = scale * eta^(1/4), clamped to (0, 1]."""
    if eta <= 0.0 or eta > 1.0:
        raise DomainError(f"transmissivity must lie in (0, 1] for the NLA model, got {eta}")
    if scale <= 0.0:
        raise DomainError(f"NLA scale must be positive, got {scale}")
    return min(1.0, scale * eta ** 0.25)


@dataclass(frozen=True)
class RngStream:
    """One deterministic random stream, addressed by (seed, kind, index)."""
    seed: int
    kind: str
    index: int

    def __post_init__(self):
        if self.kind not in STREAM_KINDS:
            raise DomainError(f"unknown stream kind {self.kind!r}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def generator(self, block: int) -> np.random.Generator:
        """Independent generator for one block of ``BLOCK_STEPS`` steps."""
        seq = np.random.SeedSequence(
            entropy=self.seed,
            spawn_key=(STREAM_KINDS[self.kind], self.index, block),
        )
        return np.random.Generator(np.random.PCG64(seq))

    def uniforms(self, step: int, width: int = 1) -> np.ndarray:
        """The ``width`` uniforms this stream assigns to ``step``."""
        block, row = divmod(step, BLOCK_STEPS)
        return _uniform_block(self, block, width)[row]

    def uniform_rows(self, start: int, count: int, width: int = 1) -> np.ndarray:
        """Uniforms for steps ``start .. start+count-1`` as a ``(count, width)`` array."""
        return _rows(lambda b: _uniform_block(self, b, width), start, count)

    def poisson_rows(self, lam: float, start: int, count: int) -> np.ndarray:
        """Poisson(lam) counts for steps ``start .. start+count-1``."""
        return _rows(lambda b: _poisson_block(self, b, float(lam)), start, count)


def _rows(block_fn, start: int, count: int) -> np.ndarray:
    pieces = []
    step = start
    end = start + count
    while step < end:
        block, row = divmod(step, BLOCK_STEPS)
        take = min(BLOCK_STEPS - row, end - step)
        pieces.append(block_fn(block)[row:row + take])
        step += take
    if not pieces:
        return block_fn(0)[0:0]
    return np.concatenate(pieces, axis=0)


@lru_cache(maxsize=512)
def _uniform_block(stream: RngStream, block: int, width: int) -> np.ndarray:
    draws = stream.generator(block).random((BLOCK_STEPS, width))
    draws.setflags(write=False)
    return draws


@lru_cache(maxsize=512)
def _poisson_block(stream: RngStream, block: int, lam: float) -> np.ndarray:
    draws = stream.generator(block).poisson(lam, size=(BLOCK_STEPS,))
    draws.setflags(write=False)
    return draws


def make_streams(seed: int, kind: str, count: int) -> Tuple[RngStream, ...]:
    """One stream per link (or per flow) for the given kind."""
    return tuple(RngStream(seed=seed, kind=kind, index=i) for i in range(count))


@dataclass(frozen=True)
class LinkSnapshot:
    """Link outcomes of one time step: t[j] success, o[j] orientation (0 where t[j] == 0)."""
    t: Tuple[int, ...]
    o: Tuple[int, ...]
    step: int = 0

    def __post_init__(self):
        if len(self.t) != len(self.o):
            raise DomainError("t and o must have one entry per link")

    @classmethod
    def from_lists(cls, t: Sequence[int], o: Sequence[int] = None, step: int = 0) -> "LinkSnapshot":
        """Build a canonical snapshot; orientation bits of down links are stored as 0."""
        t = tuple(int(bool(x)) for x in t)
        o = tuple(0 for _ in t) if o is None else tuple(int(bool(x)) for x in o)
        o = tuple(oj if tj else 0 for tj, oj in zip(t, o))
        return cls(t=t, o=o, step=step)


def link_state_rows(topology: "SwitchTopology", streams: Sequence[RngStream],
                    start: int, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized link outcomes for a run of steps: ``(t, o)`` arrays of shape ``(count, L)``."""
    if len(streams) != len(topology.links):
        raise DomainError(f"need one stream per link ({len(topology.links)}), got {len(streams)}")
    t = np.zeros((count, len(streams)), dtype=np.int8)
    o = np.zeros((count, len(streams)), dtype=np.int8)
    for j, (link, stream) in enumerate(zip(topology.links, streams)):
        draws = stream.uniform_rows(start, count, LINK_DRAWS)
        up = draws[:, 0] < link.p
        t[:, j] = up
        o[:, j] = up & (draws[:, 1] < 0.5)
    return t, o


def sample_links(topology: "SwitchTopology", streams: Sequence[RngStream], step: int) -> LinkSnapshot:
    """Sample every link for time step ``step``; no state carries over between steps."""
    t, o = link_state_rows(topology, streams, step, 1)
    return LinkSnapshot(t=tuple(int(x) for x in t[0]), o=tuple(int(x) for x in o[0]), step=step)
