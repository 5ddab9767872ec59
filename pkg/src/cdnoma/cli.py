"""Command line entry point ``sim``.

    sim validate --scenario s.json
    sim run --experiment ber --receivers musa-pic,musa-mfb --eb 0:5:40 --out results/
"""

import argparse
import logging
import sys

import numpy as np

from .harness import PROFILES, ExperimentError, ExperimentSpec, apply_profile, emit, run
from .scenario import ScenarioError, config_hash, default_scenario, load_scenario


def parse_grid(text):
    """``"0:5:40"`` (inclusive range), ``"0,10,20"`` or a single value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"range must be start:step:stop, got {text!r}")
        try:
            start, step, stop = (float(p) for p in parts)
        except ValueError:
            raise argparse.ArgumentTypeError(f"non-numeric range {text!r}") from None
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError(f"empty or descending range {text!r}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(start + i * step) for i in range(n))
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def parse_ints(text):
    try:
        return tuple(int(v) for v in parse_grid(text))
    except argparse.ArgumentTypeError:
        raise
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _scenario(path):
    return default_scenario() if path is None else load_scenario(path)


def build_parser():
    p = argparse.ArgumentParser(prog="sim", description="Code-domain NOMA link-level Monte Carlo simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("--scenario", required=True)

    r = sub.add_parser("run", help="run a BER or AIR sweep")
    r.add_argument("--scenario", help="scenario JSON (default: bundled four-group layout)")
    r.add_argument("--experiment", choices=("ber", "air"), default="ber")
    r.add_argument("--receivers", default="musa-pic,musa-mfb", help="comma separated receiver names")
    r.add_argument("--eb", type=parse_grid, help="E_b/N_0 grid in dB, e.g. 0:5:40")
    r.add_argument("--users", type=parse_ints, help="users per group; turns the run into an overloading sweep")
    r.add_argument("--rf-chains", type=int, help="total RF chains, split equally over groups")
    r.add_argument("--users-per-group", type=int, help="resize every group")
    r.add_argument("--code-length", type=int, help="MUSA spreading length N_c")
    r.add_argument("--link", choices=("uplink", "downlink"), default="uplink")
    r.add_argument("--trials", type=int)
    r.add_argument("--symbols", type=int, help="NOMA symbols per user per point over all trials")
    r.add_argument("--seed", type=int)
    r.add_argument("--profile", choices=sorted(PROFILES))
    r.add_argument("--pic-iterations", type=int, default=4)
    r.add_argument("--air-cancellation", choices=("genie", "pic"), default="genie")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--out", required=True, help="output directory")
    return p


def _cmd_validate(args):
    cfg = load_scenario(args.scenario)
    print(f"ok {args.scenario} groups={len(cfg.groups)} antennas={cfg.antennas} hash={config_hash(cfg)}")
    return 0


def _cmd_run(args):
    cfg = _scenario(args.scenario)
    trials, symbols = None, 20000
    if args.profile:
        cfg, trials, symbols = apply_profile(cfg, args.profile)
    if args.code_length is not None:
        cfg = cfg.replace(code_length=args.code_length)
    if args.users_per_group is not None or args.rf_chains is not None:
        cfg = cfg.with_group_layout(users=args.users_per_group, rf_chains=args.rf_chains)
    spec = ExperimentSpec(
        cfg,
        tuple(r.strip() for r in args.receivers.split(",") if r.strip()),
        metrics=(args.experiment,),
        link=args.link,
        eb_db=args.eb,
        users=args.users,
        symbols=args.symbols if args.symbols is not None else symbols,
        trials=args.trials if args.trials is not None else trials,
        seed=args.seed,
        pic_iterations=args.pic_iterations,
        air_cancellation=args.air_cancellation,
        workers=args.workers,
    )
    records = run(spec)
    for path in emit(records, args.format, args.out):
        print(path)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_run(args)
    except (ScenarioError, ExperimentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
