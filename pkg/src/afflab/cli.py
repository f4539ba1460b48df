"""``afflab`` command line: verify, sample, density, counterexamples."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import lab
from .group import AffineElement, is_bijective, mass_defect, pushforward_density, rn_integrability
from .poisson import GUARD_DIGITS, WindowSpec, sample_configurations
from .ultrametric import Ball, ResolutionError, check_prime, to_rational_string

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _load_json(text_or_path: str):
    path = Path(text_or_path)
    try:
        if path.suffix == ".json" or path.exists():
            return json.loads(path.read_text())
        return json.loads(text_or_path)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read JSON from {text_or_path!r}: {e}") from None


def cmd_verify(args) -> int:
    data = _load_json(args.config) if args.config else {}
    for key in ("prime", "seed", "samples", "out"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if args.suite is not None:
        data["suites"] = [args.suite]
    cfg = lab.LabConfig.from_json(data)
    result = lab.run_suite(cfg)
    if not cfg.out:
        for line in result.report_lines():
            print(line)
    print(result.summary(), file=sys.stderr if not cfg.out else sys.stdout)
    if result.documented:
        print("documented divergences:", file=sys.stderr if not cfg.out else sys.stdout)
        for r in result.documented:
            print(f"  {r.check_id}", file=sys.stderr if not cfg.out else sys.stdout)
    return result.exit_code


def cmd_sample(args) -> int:
    p = args.prime
    check_prime(p)
    window = Ball.from_json(_load_json(args.window), p)
    resolution = args.resolution if args.resolution is not None else window.level - GUARD_DIGITS
    if args.count < 0:
        raise UsageError("count must be nonnegative")
    for gamma in sample_configurations(WindowSpec.ball(window), args.count, args.seed, resolution):
        print(json.dumps(gamma.to_json()))
    return EXIT_OK


def cmd_density(args) -> int:
    g = AffineElement.from_json(_load_json(args.element))
    cert = is_bijective(g)
    out = {
        "rho": pushforward_density(g).to_json(),
        "mass_defect": to_rational_string(mass_defect(g)),
        "rn_integrability": to_rational_string(rn_integrability(g)),
        "bijective": cert.to_json(),
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_counterexamples(args) -> int:
    records = lab.counterexample_registry()
    for r in records:
        print(lab.dumps(r.to_json()))
    return EXIT_OK if lab.registry_complete(records) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="afflab", description="Verification lab for the p-adic step affine group.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--suite", choices=("all",) + lab.SUITES)
    v.add_argument("--prime", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--samples", type=int)
    v.add_argument("--out")
    v.add_argument("--config", help="JSON file with LabConfig fields")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sample", help="draw Poisson configurations in a ball")
    s.add_argument("--window", required=True, help='ball JSON, e.g. \'{"center":"0","level":1}\'')
    s.add_argument("--prime", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--resolution", type=int)
    s.set_defaults(func=cmd_sample)

    d = sub.add_parser("density", help="pushforward density and bijectivity of an element")
    d.add_argument("--element", required=True, help="element JSON file")
    d.set_defaults(func=cmd_density)

    c = sub.add_parser("counterexamples", help="print the counterexample registry")
    c.set_defaults(func=cmd_counterexamples)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, lab.InvalidConfig, ResolutionError, ValueError, KeyError) as e:
        print(f"afflab: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # noqa: BLE001
        print(f"afflab: unexpected failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
