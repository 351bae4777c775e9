#!/usr/bin/env python3
"""
Rate-Grid Sweeps
================

Runs one simulation per point of a regular lambda grid, classifies each queue
trace, and compares the verdicts against an analytic region. Grid points are
independent; they run on a joblib worker pool and come back in grid order
whatever the completion order, so the result CSV is byte-identical for a fixed
spec.
"""

import csv
import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from errors import CapacityError, DomainError, TopologyMismatchError
from rate_region import RateRegion, contains, tightest_facet
from settings import FULL_DLAM, FULL_STEPS, DEFAULT_THRESHOLD
from simulator import ArrivalModel, SimConfig, run
from stability import Basis, classify
from switch_model import FlowSpec

logger = logging.getLogger(__name__)

DEFAULT_WORK_CAP = 2e10


@dataclass(frozen=True)
class SweepSpec:
    """Grid ``lam_min .. lam_max`` in steps of ``dlam`` on every flow axis."""
    base: SimConfig
    lam_min: float = 0.0
    lam_max: float = 1.0
    dlam: float = 0.02
    steps: int = 20_000
    repetitions: int = 1
    region: Optional[RateRegion] = None
    threshold: float = DEFAULT_THRESHOLD
    basis: Basis = Basis.TOTAL
    workers: int = -1
    work_cap: float = DEFAULT_WORK_CAP

    def __post_init__(self):
        if self.dlam <= 0:
            raise DomainError(f"grid step must be positive, got {self.dlam}")
        if self.lam_min < 0 or self.lam_max < self.lam_min:
            raise DomainError(f"grid needs 0 <= lam_min <= lam_max, got [{self.lam_min}, {self.lam_max}]")
        if self.repetitions < 1 or self.steps < 1:
            raise DomainError("repetitions and steps must be at least 1")
        if not self.threshold > 0 or not self.work_cap > 0:
            raise DomainError("threshold and work cap must be positive")

    @classmethod
    def full_resolution(cls, base: SimConfig, **overrides) -> "SweepSpec":
        """Full-resolution protocol: dlam = 0.005 over [0, 1], 10^5 steps per point."""
        settings = dict(lam_min=0.0, lam_max=1.0, dlam=FULL_DLAM, steps=FULL_STEPS, threshold=DEFAULT_THRESHOLD)
        settings.update(overrides)
        return cls(base=base, **settings)

    @property
    def num_flows(self) -> int:
        return self.base.topology.num_flows

    def axis(self) -> List[float]:
        count = int(math.floor((self.lam_max - self.lam_min) / self.dlam + 1e-9)) + 1
        return [round(self.lam_min + k * self.dlam, 10) for k in range(count)]

    def grid_points(self) -> int:
        return len(self.axis()) ** self.num_flows

    def work_estimate(self) -> float:
        return float(self.grid_points()) * self.steps * self.repetitions


@dataclass(frozen=True)
class SweepRecord:
    coords: Tuple[int, ...]
    repetition: int
    lam: Tuple[float, ...]
    slope: float
    stable: bool
    inside: Optional[bool] = None

    @property
    def agree(self) -> Optional[bool]:
        return None if self.inside is None else self.inside == self.stable


@dataclass
class SweepResult:
    records: List[SweepRecord]
    num_flows: int
    dlam: float
    config: Dict[str, Any] = field(default_factory=dict)

    def header(self) -> List[str]:
        return [f"lam{i}" for i in range(1, self.num_flows + 1)] + ["slope", "stable", "inside", "agree"]

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Header ``lam1,lam2,lam3,slope,stable,inside,agree``; blank inside/agree without a region."""
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(self.header())
            for rec in self.records:
                writer.writerow(
                    [f"{x:.6f}" for x in rec.lam]
                    + [f"{rec.slope:.6e}", int(rec.stable), _flag(rec.inside), _flag(rec.agree)]
                )
        logger.info(f"✅ Sweep results written to {path}")
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], dlam: Optional[float] = None) -> "SweepResult":
        """Read a results CSV back (the grid step is inferred when not given)."""
        path = Path(path)
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        if not rows:
            raise DomainError(f"{path} is empty")
        header = rows[0]
        k = sum(1 for name in header if name.startswith("lam"))
        records = []
        for n, row in enumerate(rows[1:]):
            lam = tuple(float(x) for x in row[:k])
            inside = None if row[k + 2] == "" else row[k + 2] == "1"
            records.append(SweepRecord(coords=(n,), repetition=0, lam=lam, slope=float(row[k]),
                                       stable=row[k + 1] == "1", inside=inside))
        if dlam is None:
            values = sorted({x for rec in records for x in rec.lam})
            gaps = [b - a for a, b in zip(values, values[1:]) if b - a > 1e-12]
            dlam = round(min(gaps), 10) if gaps else 0.0
        return cls(records=records, num_flows=k, dlam=dlam)

    def summary(self) -> Dict[str, Any]:
        stable = sum(1 for r in self.records if r.stable)
        return {"points": len(self.records), "stable": stable, "unstable": len(self.records) - stable,
                "dlam": self.dlam, "config": self.config}


def _flag(value: Optional[bool]) -> str:
    return "" if value is None else str(int(value))


def point_seed(base_seed: int, coords: Sequence[int], repetition: int = 0) -> int:
    """64-bit seed of one grid point, mixed from the base seed and the grid coordinates.

    Mixing goes through numpy's SeedSequence hash, so a point's seed depends only
    on its own coordinates and adding points leaves the others untouched.
    """
    seq = np.random.SeedSequence(entropy=base_seed, spawn_key=(*coords, repetition))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _simulate_point(base: SimConfig, lam: Tuple[float, ...], steps: int, seed: int,
                    threshold: float, basis: Basis) -> Tuple[float, bool]:
    config = replace(base, arrivals=ArrivalModel(rates=lam, kind=base.arrivals.kind), steps=steps, seed=seed)
    verdict = classify(run(config), threshold=threshold, basis=basis)
    return verdict.slope, verdict.stable


def _tasks(spec: SweepSpec) -> Iterator[Tuple[Tuple[int, ...], int, Tuple[float, ...]]]:
    axis = spec.axis()
    for coords in itertools.product(range(len(axis)), repeat=spec.num_flows):
        lam = tuple(axis[c] for c in coords)
        for rep in range(spec.repetitions):
            yield coords, rep, lam


def run_sweep(spec: SweepSpec, progress: bool = True) -> SweepResult:
    """Simulate and classify every grid point; refuses when the work estimate exceeds the cap."""
    estimate = spec.work_estimate()
    if estimate > spec.work_cap:
        raise CapacityError(
            f"sweep of {spec.grid_points()} points x {spec.steps} steps x {spec.repetitions} "
            f"repetitions = {estimate:.3g} step-simulations exceeds cap {spec.work_cap:.3g}",
            estimate=estimate, cap=spec.work_cap,
        )
    if spec.region is not None and spec.region.num_flows != spec.num_flows:
        raise TopologyMismatchError("comparison region and topology have different flow counts")

    tasks = list(_tasks(spec))
    logger.info(f"🔄 Sweeping {len(tasks)} grid runs ({spec.steps} steps each, workers={spec.workers})")
    jobs = (
        delayed(_simulate_point)(spec.base, lam, spec.steps, point_seed(spec.base.seed, coords, rep),
                                 spec.threshold, spec.basis)
        for coords, rep, lam in tasks
    )
    outputs = Parallel(n_jobs=spec.workers, return_as="generator")(jobs)

    records = []
    q = spec.base.topology.q
    for (coords, rep, lam), (slope, stable) in tqdm(zip(tasks, outputs), total=len(tasks),
                                                     disable=not progress, desc="sweep"):
        inside = contains(spec.region, lam, q) if spec.region is not None else None
        records.append(SweepRecord(coords=coords, repetition=rep, lam=lam, slope=slope,
                                   stable=stable, inside=inside))

    result = SweepResult(
        records=records,
        num_flows=spec.num_flows,
        dlam=spec.dlam,
        config={**spec.base.to_dict(), "steps": spec.steps, "dlam": spec.dlam,
                "lam_min": spec.lam_min, "lam_max": spec.lam_max, "repetitions": spec.repetitions,
                "threshold": spec.threshold},
    )
    logger.info(f"📊 Sweep done: {result.summary()['stable']} of {len(records)} runs stable")
    return result


@dataclass(frozen=True)
class AgreementReport:
    stable_inside: int
    stable_outside: int
    unstable_inside: int
    unstable_outside: int
    far_points: int
    far_disagreements: int

    @property
    def total(self) -> int:
        return self.stable_inside + self.stable_outside + self.unstable_inside + self.unstable_outside

    @property
    def disagreements(self) -> int:
        return self.stable_outside + self.unstable_inside

    @property
    def disagreement_fraction(self) -> float:
        return self.disagreements / self.total if self.total else 0.0

    @property
    def far_disagreement_fraction(self) -> float:
        return self.far_disagreements / self.far_points if self.far_points else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stable_inside": self.stable_inside,
            "stable_outside": self.stable_outside,
            "unstable_inside": self.unstable_inside,
            "unstable_outside": self.unstable_outside,
            "total": self.total,
            "disagreement_fraction": self.disagreement_fraction,
            "far_points": self.far_points,
            "far_disagreement_fraction": self.far_disagreement_fraction,
        }


def _far_from_boundary(region: RateRegion, lam: Sequence[float], step: float,
                       q: Optional[Sequence[float]]) -> bool:
    # planes have nonnegative coefficients, so the box lam +/- step is uniformly
    # inside or outside iff its two extreme corners agree
    upper = [x + step for x in lam]
    lower = [max(0.0, x - step) for x in lam]
    return contains(region, upper, q) == contains(region, lower, q)


def agreement_report(result: SweepResult, region: RateRegion,
                     q: Optional[Sequence[float]] = None) -> AgreementReport:
    """Confusion counts of simulated verdicts against region membership."""
    if result.num_flows != region.num_flows:
        raise TopologyMismatchError(
            f"sweep covers {result.num_flows} flows but the region has {region.num_flows}"
        )
    counts = {"si": 0, "so": 0, "ui": 0, "uo": 0}
    far_points = far_bad = 0
    for rec in result.records:
        inside = contains(region, rec.lam, q)
        key = ("s" if rec.stable else "u") + ("i" if inside else "o")
        counts[key] += 1
        if _far_from_boundary(region, rec.lam, result.dlam, q):
            far_points += 1
            if inside != rec.stable:
                far_bad += 1
    report = AgreementReport(counts["si"], counts["so"], counts["ui"], counts["uo"], far_points, far_bad)
    logger.info(f"📊 Agreement: {report.disagreement_fraction:.4f} overall, "
                f"{report.far_disagreement_fraction:.4f} away from the boundary")
    return report


def entanglement_rates(lam: Sequence[float], flows: Sequence[FlowSpec], strict: bool = False) -> List[float]:
    """Ebits per step: lambda_i times the flow's reverse coherent information.

    Flows without an RCI count 1 ebit per request unless ``strict``.
    """
    if len(lam) != len(flows):
        raise DomainError(f"need one rate per flow ({len(flows)}), got {len(lam)}")
    rates = []
    for x, flow in zip(lam, flows):
        if flow.rci is None:
            if strict:
                raise DomainError(f"flow {flow.id} has no reverse coherent information")
            rates.append(x * 1.0)
        else:
            rates.append(x * flow.rci)
    return rates


def scale_to_facet(direction: Sequence[float], region: RateRegion, fraction: float,
                   q: Optional[Sequence[float]] = None) -> Tuple[float, ...]:
    """Rescale ``direction`` so its tightest plane is loaded to ``fraction`` of its bound."""
    if any(x < 0 for x in direction) or not any(x > 0 for x in direction):
        raise DomainError("probe direction must be nonnegative and nonzero")
    _, ratio = tightest_facet(region, direction, q)
    if not math.isfinite(ratio) or ratio <= 0:
        raise DomainError("probe direction hits a zero-capacity plane")
    return tuple(x * fraction / ratio for x in direction)


def write_sweep_summary(result: SweepResult, path: Union[str, Path],
                        report: Optional[AgreementReport] = None) -> Path:
    data = result.summary()
    if report is not None:
        data["agreement"] = report.to_dict()
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")
    return path
