"""Command line entry point: ``run``, ``sweep``, ``figure`` and ``selftest``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, FasArisError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _config(path):
    from .scenario import ScenarioConfig, load_config

    return load_config(path) if path else ScenarioConfig()


def cmd_run(args) -> int:
    from .bench import SCHEMES, run_scheme
    from .scenario import sample_scenario

    cfg = _config(args.config)
    draw = sample_scenario(cfg, args.seed)
    if args.scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {args.scheme!r}")
    rate, iters, ok, trace = run_scheme(args.scheme, draw, cfg, args.seed)
    if args.json:
        print(json.dumps({"scheme": args.scheme, "seed": args.seed, "rate_bits": rate,
                          "outer_iters": iters, "feasible": ok, "trace": trace}))
    else:
        print(f"scheme={args.scheme} seed={args.seed} rate={rate:.6f} bits/s/Hz "
              f"iterations={iters} feasible={ok}")
        print("trace: " + " ".join(f"{r:.6f}" for r in trace))
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .bench import load_spec, run_sweep, write_sweep

    cfg = _config(args.config)
    spec = load_spec(args.spec)
    result = run_sweep(spec, cfg)
    for p in write_sweep(result, cfg, args.out):
        print(p)
    for s in result.summary:
        print(f"{spec.parameter}={s.parameter_value:g} {s.scheme:<9s} mean={s.mean:.4f} "
              f"stderr={s.stderr:.4f} n={s.count}")
    return EXIT_OK


def cmd_figure(args) -> int:
    from .bench import SCHEMES, emit_figure_data

    cfg = _config(args.config)
    schemes = tuple(args.schemes.replace(",", " ").split()) if args.schemes else SCHEMES
    for p in emit_figure_data(args.figure_id, cfg, args.out, trials=args.trials, schemes=schemes,
                              seed_base=args.seed_base):
        print(p)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import selftest

    report = selftest(_config(args.config))
    print(report.format(), end="")
    return EXIT_OK if report.ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    from .bench import FIGURE_IDS

    ap = argparse.ArgumentParser(prog="fas-aris", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="optimize one scenario and print rate and trace")
    p.add_argument("--config", help="key = value config file (defaults if omitted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", default="proposed")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="parameter sweep from a spec file")
    p.add_argument("--config")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figure", help="CSV + SVG data for one figure")
    p.add_argument("figure_id", choices=FIGURE_IDS)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--schemes", help="comma separated subset (default: all)")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("selftest", help="run the numerical oracle checks")
    p.add_argument("--config")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FasArisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
