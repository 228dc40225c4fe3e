"""Command-line entry point.

Exit codes: 0 success, 2 input error, 3 degenerate data, 4 internal invariant violation.
Every config key can also be set through a ``DNSJACK_<KEY>`` environment variable;
flags override the environment, which overrides the config file.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import ENV_PREFIX, load_config
from .errors import DegenerateDataError, DnsJackError, InputError, InvariantViolation
from .schemas import validate_outputs

log = logging.getLogger("dnsjack")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_INTERNAL = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--granularity-hours", type=int, dest="granularity_hours")
    common.add_argument("--preset", choices=["paper", "tpot_a", "tpot_b", "custom"])
    common.add_argument("--workers", type=int, help="worker threads for window-level work")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="dnsjack", description="Cryptojacking and malicious-domain detection from DNS logs.",
        epilog=f"Config keys may also be set as {ENV_PREFIX}<KEY> environment variables.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", parents=[common], help="extract 48-feature matrices")
    p.add_argument("--log", help="DNS query log")
    p.add_argument("--log-format", dest="log_format", choices=["csv", "jsonl"])
    p.add_argument("--benign")
    p.add_argument("--malicious")
    p.add_argument("--cryptojacked")

    p = sub.add_parser("similarity", parents=[common], help="compare feature distributions of two classes")
    p.add_argument("--class-a", dest="class_a")
    p.add_argument("--class-b", dest="class_b")
    p.add_argument("--features", help="comma-separated feature names")

    sub.add_parser("detect", parents=[common], help="score and classify DNs")

    p = sub.add_parser("audit", parents=[common], help="audit websites")
    p.add_argument("--signatures")
    p.add_argument("--corpus", help="directory with index.jsonl of fetched documents")
    p.add_argument("--urls", help="file of URLs to fetch over HTTP")
    p.add_argument("--captures", help="jsonl manifest of resource captures")
    p.add_argument("--whois", help="jsonl whois records")

    sub.add_parser("validate-outputs", parents=[common], help="check emitted files against their schemas")
    return parser


_NON_CONFIG = {"command", "config", "verbose", "features"}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "features":
            written = pipeline.run_features(cfg)
        elif args.command == "similarity":
            names = [n.strip() for n in args.features.split(",")] if args.features else None
            written = pipeline.run_similarity(cfg, features=names)
        elif args.command == "detect":
            written = pipeline.run_detect(cfg)
        elif args.command == "audit":
            written = pipeline.run_audit(cfg)
        else:
            checked, problems = validate_outputs(cfg.out)
            for problem in problems:
                print(f"INVALID {problem}", file=sys.stderr)
            print(f"checked {len(checked)} file(s), {len(problems)} problem(s)")
            if problems:
                raise InvariantViolation(f"{len(problems)} output file(s) failed validation")
            return EXIT_OK
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DegenerateDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DnsJackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # anything unexpected is an internal fault
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
