#!/usr/bin/env python3
"""
Empirical Stability Classification
==================================

A rate vector counts as stable when the least-squares slope of the queue length
over the whole horizon stays below a small threshold (1e-4 requests/step by
default). Finite horizons make near-boundary points prone to being labelled
stable: a queue that diverges slowly can still show a sub-threshold slope.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from errors import DomainError
from settings import DEFAULT_THRESHOLD

logger = logging.getLogger(__name__)


class Basis(str, Enum):
    TOTAL = "total"
    PER_FLOW_MAX = "per_flow_max"


@dataclass(frozen=True)
class StabilityVerdict:
    slope: float
    threshold: float
    stable: bool
    basis: Basis = Basis.TOTAL

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "threshold": self.threshold,
            "stable": self.stable,
            "basis": Basis(self.basis).value,
        }


def regression_slope(series: Sequence[float]) -> float:
    """OLS slope of ``series`` against its step index.

    The index is centred before accumulating, so the ratio stays accurate for
    horizons of 10^5 steps and more.
    """
    y = np.asarray(series, dtype=np.float64)
    n = y.shape[0]
    if y.ndim != 1 or n < 2:
        raise DomainError(f"regression needs a 1-D series of length >= 2, got shape {y.shape}")
    x = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def classify_series(series: Sequence[float], threshold: float = DEFAULT_THRESHOLD,
                    basis: Basis = Basis.TOTAL) -> StabilityVerdict:
    slope = regression_slope(series)
    return StabilityVerdict(slope=slope, threshold=threshold, stable=slope < threshold, basis=Basis(basis))


def classify(trace, threshold: float = DEFAULT_THRESHOLD,
             basis: Union[Basis, str] = Basis.TOTAL) -> StabilityVerdict:
    """Stable iff the slope of the chosen queue series is below ``threshold``.

    ``total`` regresses the summed queue length. ``per_flow_max`` takes the
    largest per-flow slope; since queues never go negative a diverging flow
    always shows in the total as well, so both agree up to the threshold scale.
    """
    if not threshold > 0:
        raise DomainError(f"stability threshold must be positive, got {threshold}")
    basis = Basis(basis)
    qlen = np.asarray(trace.qlen)
    if qlen.shape[0] == 0:
        raise DomainError("cannot classify an empty trace")
    if qlen.shape[0] == 1:
        return StabilityVerdict(slope=0.0, threshold=threshold, stable=0.0 < threshold, basis=basis)

    if basis is Basis.TOTAL:
        slope = regression_slope(qlen.sum(axis=1))
    else:
        slope = max(regression_slope(qlen[:, i]) for i in range(qlen.shape[1]))
    verdict = StabilityVerdict(slope=slope, threshold=threshold, stable=slope < threshold, basis=basis)
    logger.debug(f"Stability verdict: slope={slope:.3e} stable={verdict.stable}")
    return verdict
