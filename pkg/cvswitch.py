#!/usr/bin/env python3
"""
CV Quantum Repeating Switch - Command Line
==========================================

Analytic stable-rate regions, Max-Weight switch simulations, rate-grid sweeps
and SVG plots for a hub-and-spoke switch serving bipartite entanglement flows.

Usage:
    python cvswitch.py region   --scenario a --p 0.632 --rule any
    python cvswitch.py simulate --scenario a --p 0.632 --lam 0.2,0.2,0.2 --steps 100000
    python cvswitch.py sweep    --scenario c --p 0.632 --dlam 0.1 --steps 10000 --out sweep_c
    python cvswitch.py plot     --scenario c --p 0.632 --results sweep_c.csv --out sweep_c.svg
    python cvswitch.py capacity --eta 0.5

Exit codes: 0 success, 1 usage, 2 configuration, 3 resource cap.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from dotenv import load_dotenv

from errors import CapacityError, ConfigError, DomainError, TopologyMismatchError
from linkgen import direct_capacity, herald_prob, multiplexing_for, repeater_rate_scaling
from plotting import write_region_svg
from rate_region import analytic_region, binding_facets, boundary_samples_csv, load_region, region_to_json
from scheduler import ServiceRule, TieBreak, enumerate_matchings
from settings import FULL_DLAM, FULL_STEPS, SwitchSettings, get_settings
from simulator import ArrivalModel, SimConfig, run, write_summary_json, write_trace_csv
from stability import Basis, classify
from sweep import SweepResult, SweepSpec, agreement_report, entanglement_rates, run_sweep, write_sweep_summary
from switch_model import SwitchTopology, build_scenario, load_topology

logger = logging.getLogger("cvswitch")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3


class UsageError(Exception):
    pass


class SwitchArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; usage errors here exit with 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def or_default(value, default):
    """The flag value unless it was not given; explicit zeros are kept."""
    return default if value is None else value


def parse_lam(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--lam expects comma-separated numbers, got {text!r}") from None


def resolve_topology(args) -> SwitchTopology:
    """Topology from --config, or from --scenario with --p / --pnla [--m] and --q."""
    if args.config:
        return load_topology(args.config)
    if not args.scenario:
        raise UsageError("give either --config or --scenario")
    if args.p is not None:
        p = args.p
    elif args.pnla is not None:
        p = herald_prob(args.pnla, args.m if args.m is not None else multiplexing_for(args.pnla))
    else:
        raise UsageError("--scenario needs --p or --pnla")
    return build_scenario(args.scenario, p, args.q).topology


def add_topology_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON topology file")
    parser.add_argument("--scenario", type=str.upper, choices=["A", "B", "C"], help="Canonical 3-flow scenario")
    parser.add_argument("--p", type=float, help="Uniform link heralding probability")
    parser.add_argument("--pnla", type=float, help="Per-channel NLA success probability (derives p)")
    parser.add_argument("--m", type=int, help="Multiplexed channels per link (default round(1/pnla))")
    parser.add_argument("--q", type=float, default=1.0, help="Entanglement swap success probability (default: 1)")
    parser.add_argument("--rule", choices=["any", "parity"], default="any",
                        help="Serviceability rule: any orientation, or opposite parity only")


def cmd_region(args, settings: SwitchSettings) -> int:
    topology = resolve_topology(args)
    region = analytic_region(topology, ServiceRule.parse(args.rule), cap=settings.enumeration_cap)

    p = topology.uniform_p
    links = f"p = {p:.6g}" if p is not None else "heterogeneous links"
    print(f"📊 Stable request-rate region ({region.rule.value}, {links}):")
    for b in region.bounds:
        terms = " + ".join(f"λ{i}" for i in b.subset)
        print(f"  {terms} <= {b.bound:.6f}")
    print("Binding facets:")
    for b in binding_facets(region):
        print(f"  {list(b.subset)}: {b.bound:.6f}")

    if args.out:
        if args.format == "csv":
            boundary_samples_csv(region, args.out, step=args.sample_step)
        else:
            region_to_json(region, args.out)
        print(f"✅ Region saved to: {args.out}")
    return EXIT_OK


def cmd_simulate(args, settings: SwitchSettings) -> int:
    topology = resolve_topology(args)
    enumerate_matchings(topology, settings.max_flows)
    lam = parse_lam(args.lam) if args.lam else [0.0] * topology.num_flows
    if len(lam) != topology.num_flows:
        raise UsageError(f"--lam needs {topology.num_flows} rates, got {len(lam)}")

    config = SimConfig(
        topology=topology,
        arrivals=ArrivalModel(rates=tuple(lam), kind=args.arrivals),
        rule=ServiceRule.parse(args.rule),
        steps=or_default(args.steps, settings.steps),
        seed=settings.seed if args.seed is None else args.seed,
        tie_break=TieBreak(args.tie_break),
        record_waits=args.waits,
    )
    trace = run(config)
    verdict = classify(trace, threshold=or_default(args.threshold, settings.threshold), basis=Basis(args.basis))

    out = Path(args.out)
    write_trace_csv(trace, out.with_suffix(".csv"))
    ebits = [round(x, 6) for x in entanglement_rates(trace.throughput().tolist(), topology.flows)]
    write_summary_json({"verdict": verdict.to_dict(), **trace.summary(), "ebit_throughput": ebits},
                       out.with_suffix(".json"))

    status = "stable" if verdict.stable else "unstable"
    print(f"📋 λ={lam}: {status} (slope {verdict.slope:.3e}, threshold {verdict.threshold:g})")
    print(f"  Final queues: {trace.qlen[-1].tolist()}  Served: {trace.services.tolist()}")
    print(f"  Ebits per step: {ebits}")
    return EXIT_OK


def cmd_sweep(args, settings: SwitchSettings) -> int:
    topology = resolve_topology(args)
    enumerate_matchings(topology, settings.max_flows)
    rule = ServiceRule.parse(args.rule)
    base = SimConfig(
        topology=topology,
        arrivals=ArrivalModel(rates=(0.0,) * topology.num_flows, kind=args.arrivals),
        rule=rule,
        steps=1,
        seed=settings.seed if args.seed is None else args.seed,
    )
    region = None if args.no_compare else analytic_region(topology, rule, cap=settings.enumeration_cap)
    common = dict(
        region=region,
        repetitions=args.reps,
        threshold=or_default(args.threshold, settings.threshold),
        workers=settings.workers if args.workers is None else args.workers,
        work_cap=or_default(args.work_cap, settings.sweep_work_cap),
    )
    if args.full_resolution:
        spec = SweepSpec.full_resolution(base, **common)
    else:
        spec = SweepSpec(
            base=base, lam_min=args.lam_min, lam_max=args.lam_max,
            dlam=or_default(args.dlam, settings.dlam), steps=or_default(args.steps, settings.steps), **common,
        )

    result = run_sweep(spec, progress=not args.quiet)
    out = Path(args.out)
    result.to_csv(out.with_suffix(".csv"))
    report = agreement_report(result, region) if region is not None else None
    write_sweep_summary(result, out.with_suffix(".json"), report)

    summary = result.summary()
    print(f"📊 Sweep: {summary['stable']} stable / {summary['points']} runs")
    if report is not None:
        print(f"  Disagreement: {report.disagreement_fraction:.4f} overall, "
              f"{report.far_disagreement_fraction:.4f} beyond one grid step from the boundary")
    return EXIT_OK


def cmd_plot(args, settings: SwitchSettings) -> int:
    if args.region_file:
        region = load_region(args.region_file)
    else:
        region = analytic_region(resolve_topology(args), ServiceRule.parse(args.rule), cap=settings.enumeration_cap)
    points = []
    if args.results:
        result = SweepResult.from_csv(args.results)
        points = [(rec.lam, rec.stable) for rec in result.records]
    if region.num_flows != 3:
        print("⚠️  Plots support 3-flow switches only; use the CSV outputs instead")
        return EXIT_USAGE
    write_region_svg(args.out, region, points, title=args.title or f"Stable rate region ({region.rule.value})")
    print(f"✅ Plot saved to: {args.out}")
    return EXIT_OK


def cmd_capacity(args, settings: SwitchSettings) -> int:
    capacity = direct_capacity(args.eta)
    if args.compare:
        print(f"eta={args.eta}: direct {capacity:.6f} ebits/mode, repeater scaling eta^(3/4) = "
              f"{repeater_rate_scaling(args.eta):.6f}")
    else:
        print(f"{capacity:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = SwitchArgumentParser(description="CV quantum repeating switch: regions, simulations, sweeps")
    parser.add_argument("--log-level", help="Override CVSWITCH_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=SwitchArgumentParser)

    region = sub.add_parser("region", help="Analytic stable request-rate region")
    add_topology_flags(region)
    region.add_argument("--format", choices=["json", "csv"], default="json", help="Output format for --out")
    region.add_argument("--sample-step", type=float, default=0.05, help="Grid step of the CSV boundary samples")
    region.add_argument("--out", "-o", help="Output file")
    region.set_defaults(handler=cmd_region)

    simulate = sub.add_parser("simulate", help="Simulate one rate vector and classify stability")
    add_topology_flags(simulate)
    simulate.add_argument("--lam", help="Comma-separated request rates, one per flow")
    simulate.add_argument("--steps", type=int, help="Time steps (default: CVSWITCH_STEPS)")
    simulate.add_argument("--seed", type=int, help="Base seed (default: CVSWITCH_SEED)")
    simulate.add_argument("--threshold", type=float, help="Slope threshold (default 1e-4)")
    simulate.add_argument("--arrivals", choices=["bernoulli", "poisson"], default="bernoulli")
    simulate.add_argument("--basis", choices=[b.value for b in Basis], default=Basis.TOTAL.value)
    simulate.add_argument("--tie-break", choices=[t.value for t in TieBreak], default=TieBreak.LOWEST_INDEX.value)
    simulate.add_argument("--waits", action="store_true", help="Record FIFO waiting times")
    simulate.add_argument("--out", "-o", default="trace", help="Output prefix for .csv trace and .json verdict")
    simulate.set_defaults(handler=cmd_simulate)

    sweep = sub.add_parser("sweep", help="Grid sweep of rate vectors")
    add_topology_flags(sweep)
    sweep.add_argument("--dlam", type=float, help="Grid step (default: CVSWITCH_DLAM)")
    sweep.add_argument("--lam-min", type=float, default=0.0)
    sweep.add_argument("--lam-max", type=float, default=1.0)
    sweep.add_argument("--steps", type=int, help="Time steps per point (default: CVSWITCH_STEPS)")
    sweep.add_argument("--reps", type=int, default=1, help="Repetitions per grid point")
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--threshold", type=float)
    sweep.add_argument("--arrivals", choices=["bernoulli", "poisson"], default="bernoulli")
    sweep.add_argument("--workers", type=int, help="Parallel workers (default: CVSWITCH_WORKERS)")
    sweep.add_argument("--work-cap", type=float, help="Max points x steps x repetitions")
    sweep.add_argument("--full-resolution", action="store_true",
                       help=f"dlam={FULL_DLAM} over [0,1] with {FULL_STEPS} steps per point")
    sweep.add_argument("--no-compare", action="store_true", help="Skip the analytic region comparison")
    sweep.add_argument("--quiet", action="store_true", help="No progress bar")
    sweep.add_argument("--out", "-o", default="sweep", help="Output prefix for .csv results and .json summary")
    sweep.set_defaults(handler=cmd_sweep)

    plot = sub.add_parser("plot", help="SVG of a sweep result over the analytic region")
    add_topology_flags(plot)
    plot.add_argument("--results", help="Sweep results CSV")
    plot.add_argument("--region-file", help="Region JSON written by 'region --out'")
    plot.add_argument("--title", help="Figure title")
    plot.add_argument("--out", "-o", default="region.svg", help="Output SVG path")
    plot.set_defaults(handler=cmd_plot)

    capacity = sub.add_parser("capacity", help="Direct-transmission capacity -log2(1 - eta)")
    capacity.add_argument("--eta", type=float, required=True, help="Channel transmissivity in [0, 1)")
    capacity.add_argument("--compare", action="store_true", help="Also print the repeater eta^(3/4) scaling")
    capacity.set_defaults(handler=cmd_capacity)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    settings = get_settings()
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=(args.log_level or settings.log_level).upper())

    try:
        return args.handler(args, settings)
    except UsageError as e:
        print(f"Usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as e:
        print(f"Resource cap exceeded: {e}", file=sys.stderr)
        return EXIT_CAP
    except (DomainError, TopologyMismatchError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
