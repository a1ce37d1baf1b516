"""Command line entry point ``stokes-cr``."""
import argparse
import logging
import sys

from .assembly import UndefinedLoadError
from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, run


def _m_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def build_parser():
    p = argparse.ArgumentParser(prog="stokes-cr",
                                description="Crouzeix-Raviart Stokes experiments on the unit square.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--nmax", type=int, default=None, help="finest refinement level")
    p.add_argument("--m", type=_m_list, default="1,10,20,40",
                   help="anisotropy factors for the anisotropic study (comma separated)")
    p.add_argument("--scheme", choices=("std", "mod", "both"), default=None)
    p.add_argument("--sk", choices=("direct", "piola"), default="direct",
                   help="realization of the local Stokes solves")
    p.add_argument("--out", default=None, help="output file (default: standard output)")
    p.add_argument("--format", choices=("csv", "pretty"), default="csv")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    m = args.m if isinstance(args.m, tuple) else _m_list(args.m)
    try:
        config = ExperimentConfig(args.experiment, n_max=args.nmax, m=m, scheme=args.scheme,
                                  sk=args.sk, out=args.out, format=args.format)
        table = run(config)
    except (ConfigError, UndefinedLoadError) as exc:
        print(f"stokes-cr: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"stokes-cr: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text = table.render(config.format)
    if config.out:
        with open(config.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
