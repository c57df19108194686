"""Command-line entry point: ``hybridapprox {norm,enumerate,approx,sweep,verify}``.

Each subcommand reads an optional JSON ``--config`` whose keys match the long
flag names (dashes or underscores); flags given on the command line win.
Exit codes: 0 pass, 1 check failure, 2 usage or config error, 3 resource
budget exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import __version__
from .approximators import apply_linear, apply_nonlinear, make_linear_plan, make_nonlinear_plan, plan_record
from .errors import ConfigError, FitError, HybridError, InfeasibleError, ParameterError, ResourceError
from .index_domain import cardinality_profile, enumerate_nabla_mu, delta_levels, layer_levels
from .rates import SweepConfig, run_sweeps, write_outputs
from .sequence import HybridSequence, load_sequence
from .spaces import SpaceParams, quasinorm
from .verify import CHECKS, load_config, run_checks, summarize, summary_json

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return {k.replace("-", "_"): v for k, v in obj.items()}


def _merged(args, keys) -> dict:
    """Config-file values overridden by every flag that was given."""
    out = _read_config(args.config)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out


def _space(value, name) -> SpaceParams:
    if value is None:
        raise ConfigError(f"missing {name} (flag --{name} 'kind,p,q,r,s' or config key)")
    if isinstance(value, dict):
        return SpaceParams.from_dict(value)
    return SpaceParams.parse(str(value))


def _sequence(value) -> HybridSequence:
    if value is None:
        raise ConfigError("missing sequence (flag --sequence PATH or config key)")
    if isinstance(value, dict):
        return HybridSequence.from_json_obj(value)
    try:
        return load_sequence(value)
    except OSError as exc:
        raise ConfigError(f"cannot read sequence {value}: {exc.strerror}") from None


def _emit(rows: list, fmt: str, out) -> None:
    """Print a list of flat dicts as CSV or a JSON document."""
    if fmt == "csv":
        buf = io.StringIO()
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        out.write(buf.getvalue())
    else:
        out.write(json.dumps(rows if len(rows) != 1 else rows[0], indent=2, sort_keys=True) + "\n")


# -- subcommands ------------------------------------------------------------------------


def cmd_norm(args, out) -> int:
    cfg = _merged(args, ["sequence", "space", "cell_budget"])
    seq = _sequence(cfg.get("sequence"))
    space = _space(cfg.get("space"), "space")
    kwargs = {"cell_budget": int(cfg["cell_budget"])} if space.kind == "f" and "cell_budget" in cfg else {}
    value = quasinorm(seq, space, **kwargs)
    _emit([{"space": ",".join(str(v) for v in space.to_dict().values()), "nnz": len(seq), "norm": value}],
          args.output, out)
    return EXIT_OK


def cmd_enumerate(args, out) -> int:
    cfg = _merged(args, ["alpha", "beta", "mu", "d", "what"])
    try:
        alpha, beta, mu, d = float(cfg["alpha"]), float(cfg["beta"]), int(cfg["mu"]), int(cfg.get("d", 1))
    except KeyError as exc:
        raise ConfigError(f"missing {exc.args[0]}") from None
    what = cfg.get("what", "delta")
    if what == "profile":
        rows = [{"mu": m, "delta": n, "layer": c} for m, n, c in cardinality_profile(alpha, beta, mu, d)]
    elif what in ("delta", "layer"):
        levels = (delta_levels if what == "delta" else layer_levels)(alpha, beta, mu, d)
        rows = [{"j": " ".join(str(int(x)) for x in row)} for row in levels]
    elif what == "nabla":
        rows = [{"j": " ".join(map(str, ix.level)), "k": " ".join(map(str, ix.shift))}
                for ix in enumerate_nabla_mu(alpha, beta, mu, d)]
    else:
        raise ConfigError(f"unknown enumeration {what!r}")
    if args.output == "json":
        out.write(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    else:
        _emit(rows, "csv", out)
    return EXIT_OK


def cmd_approx(args, out) -> int:
    cfg = _merged(args, ["sequence", "src", "tgt", "algorithm", "M", "epsilon", "kappa", "residual"])
    seq = _sequence(cfg.get("sequence"))
    src, tgt = _space(cfg.get("src"), "src"), _space(cfg.get("tgt"), "tgt")
    if "M" not in cfg:
        raise ConfigError("missing M")
    M = int(cfg["M"])
    algorithm = cfg.get("algorithm", "linear")
    if algorithm == "linear":
        plan = make_linear_plan(src, tgt, cfg.get("epsilon"))
        res = apply_linear(plan, M, seq)
    elif algorithm == "nonlinear":
        plan = make_nonlinear_plan(src, tgt, cfg.get("epsilon"), cfg.get("kappa"))
        res = apply_nonlinear(plan, M, seq)
    else:
        raise ConfigError(f"algorithm must be linear or nonlinear, got {algorithm!r}")
    if cfg.get("residual"):
        with open(cfg["residual"], "w") as fh:
            fh.write(res.residual.to_text())
    row = {"algorithm": algorithm, "M": M, "kept": res.dof, "input_nnz": len(seq),
           "error": quasinorm(res.residual, tgt)}
    if args.output == "json":
        row["plan"] = plan_record(plan, M, seq.dimension)
    _emit([row], args.output, out)
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    keys = ["d", "src", "tgt", "algorithm", "M_min", "M_max", "epsilon", "kappa", "input", "seed",
            "dof_budget", "input_budget", "fit_skip", "tolerance", "csv_path", "json_path"]
    cfg = _merged(args, keys)
    for name in ("src", "tgt"):
        space = cfg.get(name)
        if isinstance(space, str):
            cfg[name] = SpaceParams.parse(space).to_dict()
    if "d" not in cfg:
        cfg["d"] = 2
    config = SweepConfig.from_dict(cfg)
    reports = run_sweeps(config)
    write_outputs(config, reports)
    if args.output == "csv":
        for name, rep in reports.items():
            if len(reports) > 1:
                out.write(f"# {name}\n")
            out.write(rep.to_csv())
    else:
        out.write(json.dumps({k: r.to_dict() for k, r in reports.items()}, indent=2, sort_keys=True) + "\n")
    for name, rep in reports.items():
        print(f"{name}: slope {rep.fitted_slope:.4f} vs {rep.predicted_slope:.4f} "
              f"(tol {rep.tolerance}) -> {rep.verdict}", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in reports.values()) else EXIT_FAIL


def cmd_verify(args, out) -> int:
    cfg = load_config(args.config)
    if args.checks:
        cfg["checks"] = [c.strip() for c in args.checks.split(",") if c.strip()]
        unknown = [c for c in cfg["checks"] if c not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks {unknown}; available: {sorted(CHECKS)}")
    if args.seed is not None:
        cfg["seed"] = args.seed
    results, _ = run_checks(cfg, log=sys.stderr)
    summary = summarize(cfg, results)
    if args.output == "csv":
        rows = [{"check": c["name"], "passed": c["passed"]} for c in summary["checks"]]
        _emit(rows, "csv", out)
    else:
        out.write(summary_json(summary) + "\n")
    return EXIT_OK if summary["status"] == "pass" else EXIT_FAIL


# -- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridapprox", description="Hybrid-smoothness approximation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON file with default values for the flags")
        p.add_argument("--output", choices=["csv", "json"], default="json")

    p = sub.add_parser("norm", help="quasi-norm of a stored sequence")
    common(p)
    p.add_argument("--sequence", help="sequence file (text or JSON)")
    p.add_argument("--space", help="'kind,p,q,r,s', e.g. b,2,2,0,1")
    p.add_argument("--cell-budget", dest="cell_budget", type=int)
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("enumerate", help="level sets Delta_mu, layers and their sizes")
    common(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--mu", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--what", choices=["delta", "layer", "nabla", "profile"])
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("approx", help="apply the linear or non-linear scheme to a sequence")
    common(p)
    p.add_argument("--sequence")
    p.add_argument("--src")
    p.add_argument("--tgt")
    p.add_argument("--algorithm", choices=["linear", "nonlinear"])
    p.add_argument("--M", dest="M", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--residual", help="write the residual sequence to this path")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("sweep", help="error-versus-DOF sweep with slope fit")
    common(p)
    p.add_argument("--d", type=int)
    p.add_argument("--src")
    p.add_argument("--tgt")
    p.add_argument("--algorithm", choices=["linear", "nonlinear", "both"])
    p.add_argument("--M-min", dest="M_min", type=int)
    p.add_argument("--M-max", dest="M_max", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--input", choices=["stress", "fooling"])
    p.add_argument("--seed", type=int)
    p.add_argument("--dof-budget", dest="dof_budget", type=int)
    p.add_argument("--input-budget", dest="input_budget", type=int)
    p.add_argument("--fit-skip", dest="fit_skip", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--csv", dest="csv_path")
    p.add_argument("--json", dest="json_path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the registered checks and rate sweeps")
    common(p)
    p.add_argument("--checks", help="comma-separated subset of checks")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except ResourceError as exc:
        print(f"resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ParameterError, FitError, InfeasibleError) as exc:
        kind = ("config error" if isinstance(exc, ConfigError)
                else "fit error" if isinstance(exc, FitError) else "parameter error")
        print(f"{kind}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HybridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
