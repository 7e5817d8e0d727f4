"""Command-line entry point: run a scenario file or preset, write the CSV log.

Exit codes: 0 success, 2 configuration invalid, 3 plant solve failure,
4 consensus non-termination. On 3/4 the partial log (if any) is still written.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .consensus import ConsensusNonTermination
from .network import PlantNonConvergence
from .presets import PRESETS, preset_config
from .scenario import RunAborted, ScenarioError, emit_csv, run, scenario_from_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfmsim",
        description="Simulate an islanded microgrid of droop-controlled grid-forming "
        "inverters with distributed secondary voltage control.",
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", metavar="PATH", help="scenario configuration file (JSON)")
    source.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    parser.add_argument("--out", metavar="PATH", required=True, help="output CSV path")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress to stderr")
    parser.add_argument(
        "--epsilon", type=float, metavar="V", help="override the consensus target tolerance (volts)"
    )
    parser.add_argument(
        "--max-rounds", type=int, metavar="N", help="override the per-tick consensus round budget"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.preset:
            config = preset_config(args.preset)
        else:
            try:
                config = json.loads(Path(args.scenario).read_text(encoding="utf-8"))
            except (OSError, ValueError) as exc:
                print(f"error: cannot read scenario: {exc}", file=sys.stderr)
                return 2
            if not isinstance(config, dict):
                print("error: <file>: top-level value must be an object", file=sys.stderr)
                return 2
        if args.epsilon is not None or args.max_rounds is not None:
            config.setdefault("secondary", {})
            if args.epsilon is not None:
                config["secondary"]["epsilon_target_v"] = args.epsilon
            if args.max_rounds is not None:
                config["secondary"]["max_rounds"] = args.max_rounds
        scenario = scenario_from_config(config)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    def progress(snap):
        if args.verbose and snap.index % 20 == 0:
            print(
                f"t={snap.t:7.2f}s load={snap.load.active / 1e3:7.1f}kW "
                f"pcc={snap.equilibrium.pcc_voltage.magnitude:7.2f}V rounds={snap.consensus_rounds}",
                file=sys.stderr,
            )

    try:
        log = run(scenario, on_tick=progress if args.verbose else None)
    except RunAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.partial.rows:
            emit_csv(exc.partial, args.out)
            print(f"partial log written to {args.out}", file=sys.stderr)
        if isinstance(exc.__cause__, PlantNonConvergence):
            return 3
        if isinstance(exc.__cause__, ConsensusNonTermination):
            return 4
        return 3

    emit_csv(log, args.out)
    if args.verbose:
        print(f"wrote {len(log.rows)} rows to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
