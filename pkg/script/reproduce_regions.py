#!/usr/bin/env python3
"""
Batch Reproduction of the Stable-Region Figures

Sweeps every scenario (A, B, C) under both serviceability rules, writes the
results CSV, summary JSON and SVG for each, and prints the agreement with the
analytic region. Desk scale by default; --full-resolution switches to dlam=0.005
with 10^5 steps per point (a cluster-sized job).

Usage:
    python script/reproduce_regions.py <output_folder> [--p 0.632] [--full-resolution]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from errors import CapacityError  # noqa: E402
from plotting import write_region_svg  # noqa: E402
from rate_region import analytic_region, contains, region_to_json  # noqa: E402
from scheduler import ServiceRule  # noqa: E402
from settings import get_settings  # noqa: E402
from simulator import ArrivalModel, SimConfig, run  # noqa: E402
from stability import classify  # noqa: E402
from sweep import SweepSpec, agreement_report, run_sweep, scale_to_facet, write_sweep_summary  # noqa: E402
from switch_model import SCENARIO_TAGS, build_scenario  # noqa: E402

PROBE_DIRECTIONS = (
    (1.0, 1.0, 1.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0),
    (1.0, 1.0, 0.0), (1.0, 0.0, 1.0), (0.0, 1.0, 1.0), (1.0, 0.5, 0.25),
    (0.25, 1.0, 0.5), (0.5, 0.25, 1.0), (2.0, 1.0, 1.0), (1.0, 2.0, 1.0),
)


def probe_facets(topology, rule, region, steps: int, seed: int, threshold: float) -> dict:
    """Run a simulation at 90% and 110% of the tightest plane along fixed directions."""
    stats = {"inside_stable": 0, "inside_total": 0, "outside_unstable": 0, "outside_total": 0}
    for direction in PROBE_DIRECTIONS:
        for fraction in (0.9, 1.1):
            lam = scale_to_facet(direction, region, fraction)
            if any(x > 1.0 for x in lam):
                continue
            config = SimConfig(topology=topology, arrivals=ArrivalModel(rates=lam), rule=rule,
                               steps=steps, seed=seed)
            stable = classify(run(config), threshold=threshold).stable
            if contains(region, lam):
                stats["inside_total"] += 1
                stats["inside_stable"] += int(stable)
            else:
                stats["outside_total"] += 1
                stats["outside_unstable"] += int(not stable)
    return stats


def main():
    parser = argparse.ArgumentParser(description="Sweep every scenario and rule, writing CSV/JSON/SVG per run.")
    parser.add_argument("output_folder", help="Folder for the result files (created if missing)")
    parser.add_argument("--p", type=float, default=0.632, help="Uniform link heralding probability")
    parser.add_argument("--dlam", type=float, help="Grid step (default: CVSWITCH_DLAM)")
    parser.add_argument("--steps", type=int, help="Steps per point (default: CVSWITCH_STEPS)")
    parser.add_argument("--full-resolution", action="store_true", help="dlam=0.005 and 10^5 steps per point")
    parser.add_argument("--probes", action="store_true", help="Also run the 90%%/110%% plane probes")
    args = parser.parse_args()

    settings = get_settings()
    out = Path(args.output_folder)
    out.mkdir(parents=True, exist_ok=True)

    totals = {"runs": 0, "skipped": 0}
    for tag in SCENARIO_TAGS:
        topology = build_scenario(tag, args.p, 1.0).topology
        for rule in ServiceRule:
            name = f"scenario_{tag.lower()}_{rule.value}"
            print(f"\n📄 {name}")
            region = analytic_region(topology, rule)
            region_to_json(region, out / f"{name}_region.json")

            base = SimConfig(topology=topology, arrivals=ArrivalModel(rates=(0.0,) * 3), rule=rule,
                             steps=1, seed=settings.seed)
            common = dict(region=region, workers=settings.workers, work_cap=settings.sweep_work_cap)
            if args.full_resolution:
                spec = SweepSpec.full_resolution(base, **common)
            else:
                spec = SweepSpec(base=base, dlam=settings.dlam if args.dlam is None else args.dlam,
                                 steps=settings.steps if args.steps is None else args.steps,
                                 threshold=settings.threshold, **common)
            try:
                result = run_sweep(spec)
            except CapacityError as e:
                print(f"⚠️ Skipped: {e}")
                totals["skipped"] += 1
                continue

            result.to_csv(out / f"{name}.csv")
            report = agreement_report(result, region)
            write_sweep_summary(result, out / f"{name}.json", report)
            write_region_svg(out / f"{name}.svg", region, [(r.lam, r.stable) for r in result.records],
                             title=f"Scenario {tag}, {rule.value}, p={args.p}")
            print(f"  Disagreement: {report.disagreement_fraction:.4f} "
                  f"(far from boundary: {report.far_disagreement_fraction:.4f})")

            if args.probes:
                probes = probe_facets(topology, rule, region, spec.steps, settings.seed, spec.threshold)
                print(f"  Probes: {probes['inside_stable']}/{probes['inside_total']} stable inside, "
                      f"{probes['outside_unstable']}/{probes['outside_total']} unstable outside")
            totals["runs"] += 1

    print("\n✅ Reproduction Summary:")
    for key, val in totals.items():
        print(f"  {key.capitalize()}: {val}")


if __name__ == "__main__":
    main()
