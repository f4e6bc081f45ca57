"""Command line entry point ``arpfb``.

    arpfb run --config cfg.json --scenario closed_loop --seed 7 --out runs/a
    arpfb validate --config cfg.json

Exit codes: 0 success, 2 configuration error, 3 simulation failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import harness
from .config import ConfigError, load_config
from .controller import ControllerError
from .dynamics import IntegrationError
from .export import write_csv, write_json

log = logging.getLogger("arpfb")

EXIT_OK, EXIT_CONFIG, EXIT_SIM = 0, 2, 3


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arpfb", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario and write its outputs")
    r.add_argument("--config", type=Path, help="JSON config (defaults are used when omitted)")
    r.add_argument("--scenario", required=True, type=str.upper,
                   choices=[k.value for k in harness.Kind])
    r.add_argument("--seed", type=_u64, default=0)
    r.add_argument("--out", type=Path, required=True)
    r.add_argument("--trials", type=int)
    r.add_argument("--engine", choices=["lz", "ode"])
    r.add_argument("--workers", type=int)

    v = sub.add_parser("validate", help="check a config against the schema")
    v.add_argument("--config", type=Path, required=True)
    return p


def write_outputs(result, sc: harness.Scenario, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(result, harness.RunRecord):
        write_csv(out / "trace.csv", harness.TRACE_COLUMNS, result.trace)
        write_json(out / "record.json", result.to_json())
        write_json(out / "summary.json", result.summary())
        if sc.kind is harness.Kind.STERN_GERLACH:
            write_csv(out / "histogram.csv", ("position_mm", "population", "states"),
                      [(b.position, b.population, " ".join(s.label for s in b.states))
                       for b in result.sg.bins])
            prof = harness.stern_gerlach_readout(result, sc.setup)
            write_csv(out / "profile.csv", ("y_mm", "optical_density"),
                      zip(prof["y_mm"], prof["profile"]))
    elif sc.kind is harness.Kind.MONTE_CARLO:
        rows = result["per_trial"]
        cols = list(rows[0])
        write_csv(out / "trials.csv", cols, [[r[c] for c in cols] for r in rows])
        write_json(out / "record.json", {"config": sc.config, **result})
        write_json(out / "summary.json", {k: v for k, v in result.items() if k != "per_trial"})
    else:
        cols = list(result[0])
        write_csv(out / "scan.csv", cols, [[r[c] for c in cols] for r in result])
        write_json(out / "record.json", {"scenario": sc.kind.value, "seed": sc.seed,
                                         "config": sc.config, "rows": result})
        worst = max((r["abs_diff"] for r in result if r["abs_diff"] is not None), default=None)
        write_json(out / "summary.json", {"scenario": sc.kind.value, "points": len(result),
                                          "max_abs_diff": worst})


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok")
            return EXIT_OK
        if args.engine:
            cfg["dynamics"]["engine"] = args.engine
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("--trials must be >= 1")
            cfg["run"]["trials"] = args.trials
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            cfg["run"]["workers"] = args.workers
        sc = harness.Scenario(args.scenario, cfg, args.seed)
    except (ConfigError, ValueError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG

    started = time.perf_counter()
    try:
        result = harness.run(sc)
    except (IntegrationError, ControllerError) as exc:
        log.error("simulation failed: %s", exc)
        return EXIT_SIM
    except ValueError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    write_outputs(result, sc, args.out)
    log.info("%s finished in %.2f s -> %s", sc.kind.value, time.perf_counter() - started, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
