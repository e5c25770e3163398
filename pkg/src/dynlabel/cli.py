"""Command-line entry point.

    dynlabel run --seed 7 --events 1000 --pdelete 0.3 --model dynamic \
        --ports adversary --function distance --kfn pow:0.5 \
        --verify sampled:64 --invariants final --out metrics.csv

Prints a JSON verification report to stdout and exits nonzero when the
run recorded any mismatch, invariant violation or bound violation.
"""

from __future__ import annotations

import argparse
import sys

from .harness import RunConfig, generate_scenario, run
from .simnet import DEFAULT_PORT_CAP, format_scenario


def _build_parser():
    parser = argparse.ArgumentParser(prog="dynlabel")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replay a scenario through a scheme")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--events", type=int, default=100)
    p.add_argument("--pdelete", type=float, default=0.0)
    p.add_argument("--model", choices=["increasing", "dynamic"],
                   default="increasing")
    p.add_argument("--ports", choices=["designer", "adversary"],
                   default="designer")
    p.add_argument("--function",
                   choices=["ancestry", "distance", "seplevel", "routing"],
                   default="distance")
    p.add_argument("--kfn", default="pow:0.5",
                   help="quota rule: pow:E | logpow:E | const:K")
    p.add_argument("--watch", default="exact",
                   help="change tracker driving restarts")
    p.add_argument("--verify", default="sampled:64",
                   help="exhaustive | sampled:<m> | off")
    p.add_argument("--invariants", choices=["every-event", "final", "off"],
                   default="final")
    p.add_argument("--no-bounds", action="store_true",
                   help="skip budget-curve checks")
    p.add_argument("--port-cap", type=int, default=DEFAULT_PORT_CAP)
    p.add_argument("--scenario", help="replay this scenario file")
    p.add_argument("--out", help="write the per-event metrics CSV here")
    p.add_argument("--mem-out", help="write the final memory report CSV here")

    g = sub.add_parser("gen", help="write a random scenario file")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--events", type=int, default=100)
    g.add_argument("--pdelete", type=float, default=0.0)
    g.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "gen":
        events = generate_scenario(args.seed, args.events, args.pdelete)
        with open(args.out, "w") as fh:
            fh.write(format_scenario(events))
        return 0
    config = RunConfig(
        seed=args.seed, events=args.events, p_delete=args.pdelete,
        model=args.model, port_model=args.ports, function=args.function,
        quota_fn=args.kfn, tracker=args.watch, verify=args.verify,
        invariants=args.invariants, bounds=not args.no_bounds,
        port_cap=args.port_cap, scenario_path=args.scenario,
        out_path=args.out, mem_out_path=args.mem_out)
    report = run(config)
    print(report.to_json())
    return 0 if report.passed() else 1


if __name__ == "__main__":
    sys.exit(main())
