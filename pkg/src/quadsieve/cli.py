"""Command line entry point: ``quadsieve <subcommand> [--config file.json] [flags]``.

Exit codes: 0 success, 2 config error, 3 budget exceeded, 4 invariant violation,
1 any other library error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import BudgetExceeded, ConfigInvalid, QuadSieveError
from .harness import KINDS, ExperimentConfig, default_threads, emit, read_report, run

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_BUDGET, EXIT_INVARIANT = 0, 1, 2, 3, 4

# flag -> (config field or params key, type)
_COMMON = {
    "form": ("form", str),
    "m": ("m", int),
    "p0": ("p0", int),
    "h": ("h", int),
    "region": ("region", str),
    "height": ("height", str),
    "out": ("out", str),
    "format": ("format", str),
    "threads": ("threads", int),
    "point_cap": ("point_cap", int),
    "scan_cap": ("scan_cap", int),
    "time_cap": ("time_cap", float),
}

_PARAMS = {
    "count-mod": ["p", "k", "sub", "g"],
    "density": ["p", "all_primes_upto", "real", "ball", "prediction", "level", "p_cut"],
    "equidist": ["modulus", "residue", "schedule", "p_cut"],
    "sieve": ["f", "z", "y", "Sprime", "X"],
    "almost-prime": ["f", "M", "r", "budget", "Sprime"],
    "geom-sieve": ["f", "g", "M_grid"],
    "halfdim": ["a", "tail", "c", "c_scale", "B_grid"],
    "enumerate": [],
}

_FLAGS = {"real", "ball", "prediction"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quadsieve", description="Integral points, densities and sieves on q(x) = m.")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", help="JSON experiment document; flags override its fields")
        for flag, (_, typ) in _COMMON.items():
            sp.add_argument("--" + flag.replace("_", "-"), dest=flag, type=typ)
        sp.add_argument("--sup-norm", action="store_true", default=None)
        for key in _PARAMS[kind]:
            name = "--" + key.replace("_", "-")
            if key in _FLAGS:
                sp.add_argument(name, dest="param_" + key, action="store_true", default=None)
            else:
                sp.add_argument(name, dest="param_" + key)
    rp = sub.add_parser("report", help="print or convert a saved JSON report")
    rp.add_argument("path")
    rp.add_argument("--format", default="csv", choices=["csv", "json", "summary"])
    rp.add_argument("--out")
    return ap


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigInvalid("config", f"invalid JSON: {exc}") from None
    data["kind"] = args.command
    data.setdefault("params", {})
    for flag, (fld, _) in _COMMON.items():
        v = getattr(args, flag)
        if v is not None:
            data[fld] = v
    if args.sup_norm:
        data["sup_norm"] = True
    for key, v in vars(args).items():
        if key.startswith("param_") and v is not None:
            name = key[len("param_") :]
            if name == "sub":
                name = "f"
            data["params"][name] = v
    data.setdefault("threads", default_threads())
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            rep = read_report(args.path)
            if args.format == "summary":
                text = json.dumps({"summary": rep.summary, "warnings": rep.warnings, "hash": rep.input_hash}, indent=2, sort_keys=True) + "\n"
                if args.out:
                    with open(args.out, "w") as fh:
                        fh.write(text)
            else:
                text = emit(rep, args.out, args.format)
            if not args.out:
                sys.stdout.write(text)
            return EXIT_OK
        cfg = config_from_args(args)
        rep = run(cfg)
        text = emit(rep, cfg.out, cfg.format)
        if not cfg.out:
            sys.stdout.write(text)
        for w in rep.warnings:
            print(f"warning: {w}", file=sys.stderr)
        return EXIT_OK
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except AssertionError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (QuadSieveError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
