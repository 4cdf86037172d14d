"""Command-line interface: `dyndisc <subcommand> [--config FILE] [overrides]`.

Every subcommand resolves an ExperimentConfig (config file first, flags
override), runs the matching experiment runner, and reports where the
CSV/manifest/figure outputs landed.  `DYNDISC_OUT` sets the output root.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config, resolve_out_dir
from .exceptions import DyndiscError
from .runners import dispatch

# subcommand -> experiment kind; `converge` picks its kind from --path
SUBCOMMANDS = {
    "coeffs": "coeffs",
    "stability": "stability",
    "gen-data": "gen-data",
    "grid-discover": "grid-discover",
    "discover": "discover",
    "converge": "grid-converge",
    "netsize": "netsize",
    "opt-probe": "opt-probe",
    "predict": "predict",
    "region": "region",
    "appendix-unstable": "appendix-unstable",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file or manifest.json to rerun")
    parser.add_argument("--out", help="output directory (default $DYNDISC_OUT or ./runs)")
    parser.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    parser.add_argument("--model", help="model name (trig|lorenz|glycolytic|planar)")
    parser.add_argument("--family", help="scheme family: ab|am|bdf (repeatable via commas)")
    parser.add_argument("--steps", help="step counts, comma separated (e.g. 1,2,3,4)")
    parser.add_argument("--h", dest="h_values", help="step sizes, comma separated")
    parser.add_argument("--T", type=float, help="time horizon override")
    parser.add_argument("--N", type=int, help="sample count override (gen-data)")
    parser.add_argument("--x0", help="initial state, comma separated")
    parser.add_argument("--seed", help="seeds, comma separated")
    parser.add_argument("--profile", choices=["desk", "paper"], help="training profile")
    parser.add_argument("--epochs", type=int, help="training epochs override")
    parser.add_argument("--width", type=int, help="network width override")
    parser.add_argument("--depth", type=int, help="hidden layer count override")
    parser.add_argument("--no-aux", action="store_true", help="drop auxiliary conditions")
    parser.add_argument("--compare-aux", action="store_true",
                        help="run both with and without auxiliary conditions")
    parser.add_argument("--solver", choices=["fs", "gmres"], help="grid-path solver")
    parser.add_argument("--tol", type=float, help="GMRES stopping residual")
    parser.add_argument("--data", dest="data_file", help="trajectory CSV to ingest")
    parser.add_argument("--path", dest="discovery_path", choices=["grid", "net"],
                        help="discovery path for converge/region")
    parser.add_argument("--n-trajectories", type=int, help="region initial points N'")
    parser.add_argument("--scan", help="stability scan N values, comma separated")
    parser.add_argument(
        "--param", action="append", default=[], metavar="NAME=VALUE",
        help="model parameter override, repeatable",
    )


def _parse_list(text, cast):
    return [cast(v) for v in text.split(",") if v.strip() != ""]


def _apply_overrides(config_data: dict, args: argparse.Namespace) -> dict:
    if args.model:
        config_data["model"] = args.model
    if args.family:
        config_data["families"] = _parse_list(args.family, str)
    if args.steps:
        config_data["steps"] = _parse_list(args.steps, int)
    if args.h_values:
        config_data["h_values"] = _parse_list(args.h_values, float)
    if args.T is not None:
        config_data["T"] = args.T
    if args.N is not None:
        config_data["N"] = args.N
    if args.x0:
        config_data["x0"] = _parse_list(args.x0, float)
    if args.seed:
        config_data["seeds"] = _parse_list(args.seed, int)
    if args.profile:
        config_data["profile"] = args.profile
    if args.epochs is not None:
        config_data["epochs"] = args.epochs
    if args.width is not None:
        config_data["width"] = args.width
    if args.depth is not None:
        config_data["depth"] = args.depth
    if args.no_aux:
        config_data["with_aux"] = False
    if args.compare_aux:
        config_data["compare_aux"] = True
    if args.solver:
        config_data["solver"] = args.solver
    if args.tol is not None:
        config_data["gmres_tol"] = args.tol
    if args.data_file:
        config_data["data_file"] = args.data_file
    if args.discovery_path:
        config_data["discovery_path"] = args.discovery_path
    if args.n_trajectories is not None:
        config_data["n_trajectories"] = args.n_trajectories
    if args.scan:
        config_data["scan_N"] = _parse_list(args.scan, int)
    if args.no_figures:
        config_data["figures"] = False
    if args.param:
        params = dict(config_data.get("model_params", {}))
        for item in args.param:
            name, _, value = item.partition("=")
            if not _:
                raise DyndiscError(f"--param expects NAME=VALUE, got {item!r}")
            params[name] = float(value)
        config_data["model_params"] = params
    return config_data


def _resolve_config(command: str, args: argparse.Namespace) -> ExperimentConfig:
    kind = SUBCOMMANDS[command]
    if command == "converge":
        path = args.discovery_path
        if path is None and args.config:
            path = load_config(args.config, kind=kind).discovery_path
        kind = "net-converge" if path == "net" else "grid-converge"
    if args.config:
        base = load_config(args.config, kind=kind).to_dict()
        base["kind"] = kind
    else:
        base = {"kind": kind}
    return ExperimentConfig.from_dict(_apply_overrides(base, args))


def _print_coeffs(summary: dict) -> None:
    print(",".join(summary["columns"]))
    for row in summary["rows"]:
        print(",".join(str(v) for v in row))


def _print_stability(summary: dict) -> None:
    print("family,M,root_re,root_im,modulus,classification")
    for row in summary["root_rows"]:
        print(",".join(str(v) for v in row))
    if summary["scan_rows"]:
        print()
        print("family,M,N,kappa2")
        for row in summary["scan_rows"]:
            print(",".join(str(v) for v in row))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dyndisc",
        description="Discover ODE governing functions from trajectory samples "
        "with linear multistep schemes and network or grid approximants.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _add_common(p)
    rerun = sub.add_parser("rerun", help="re-execute a run from its manifest.json")
    rerun.add_argument("manifest")
    rerun.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            from .runners import rerun_manifest

            rerun_manifest(args.manifest, Path(args.out))
            print(f"rerun complete: {args.out}")
            return 0
        config = _resolve_config(args.command, args)
        out_dir = resolve_out_dir(config, args.out)
        summary = dispatch(config, out_dir)
        if args.command == "coeffs":
            _print_coeffs(summary)
        elif args.command == "stability":
            _print_stability(summary)
        print(f"outputs written to {out_dir}", file=sys.stderr)
        return 0
    except DyndiscError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
