"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 the requested
method cannot be applied to the data (the message names alternatives).
"""
import argparse
import json
import sys

from . import rng as _rng
from .asymptotics import delta_diagnostics
from .errors import DataError, PreconditionError, WeakGraphError
from .harness import METHODS, ExperimentConfig, estimate_graph, run_coverage
from .io import dumps, export_graph, ingest_csv, write_csv
from .linalg import DataMatrix, sample_covariance
from .models import MODEL_KINDS, ModelSpec, sample

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PRECONDITION = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _add_model_args(p):
    p.add_argument("--model", choices=MODEL_KINDS)
    p.add_argument("--D", type=int)
    p.add_argument("--a", type=float, default=0.9)
    p.add_argument("--num-blocks", type=int, default=4)
    p.add_argument("--within-corr", type=float, default=0.5)
    p.add_argument("--num-edges", type=int, default=10)


def _add_method_args(p):
    p.add_argument("--method", choices=METHODS, default="bootstrap")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--B", type=int, default=1000)
    p.add_argument("--L", type=int)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--c-alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--multiplicity", choices=("paper_D2", "offdiag_pairs"), default="paper_D2")
    p.add_argument("--t-estimator", choices=("gaussian_plugin", "empirical", "finite_sample_literal"),
                   default="gaussian_plugin")
    p.add_argument("--super-variant", choices=("reuse_reps", "uniform_sample"), default="reuse_reps")
    p.add_argument("--N", type=int, default=2000)
    p.add_argument("--cluster-method", choices=("delta", "bootstrap", "super"), default="bootstrap")
    p.add_argument("--distance", dest="distance_kind",
                   choices=("one_minus_abs_corr", "euclidean_on_standardized"),
                   default="one_minus_abs_corr")
    p.add_argument("--workers", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="weakgraph", description="Graphs with a no-false-edge guarantee."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a data set from a model and write CSV")
    _add_model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("estimate", help="estimate a graph from a CSV file")
    p.add_argument("data")
    _add_method_args(p)
    p.add_argument("--format", choices=("json", "dot"), default="json")
    p.add_argument("--out")

    p = sub.add_parser("coverage", help="Monte Carlo coverage experiment")
    p.add_argument("--config", help="key=value lines or a JSON object; flags override it")
    _add_model_args(p)
    _add_method_args(p)
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--out", help="JSON report path (default stdout)")
    p.add_argument("--csv", help="also write a per-replicate CSV here")

    p = sub.add_parser("diagnostics", help="plug-in delta-method error readouts")
    p.add_argument("data")
    p.add_argument("--out")
    return parser


def _load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        if isinstance(raw.get("model"), dict):
            model = raw.pop("model")
            raw.update({k if k != "kind" else "model": v for k, v in model.items()})
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            raw[k] = v
    return {k.lstrip("-").replace("-", "_"): v for k, v in raw.items()}


def _parse_with_config(parser, argv):
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = _load_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        dests = {a.dest: a for a in sub._actions}
        defaults = {}
        for k, v in cfg.items():
            if k == "distance":
                k = "distance_kind"
            if k not in dests or k in ("help", "config"):
                raise UsageError(f"unknown config key {k!r}")
            action = dests[k]
            if isinstance(v, str) and action.type is not None:
                try:
                    v = action.type(v)
                except ValueError:
                    raise UsageError(f"bad value for {k}: {v!r}") from None
            if action.choices is not None and v not in action.choices:
                raise UsageError(f"{k} must be one of {list(action.choices)}")
            defaults[k] = v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _seed(args):
    return args.seed if args.seed is not None else _rng.default_seed(0)


def _model_spec(args):
    if args.model is None or args.D is None:
        raise UsageError("--model and --D are required")
    return ModelSpec(
        kind=args.model, D=args.D, a=args.a, num_blocks=args.num_blocks,
        within_corr=args.within_corr, num_edges=args.num_edges,
    )


def _method_opts(args):
    return {
        "B": args.B, "L": args.L, "epsilon": args.epsilon, "c_alpha": args.c_alpha,
        "multiplicity": args.multiplicity, "t_estimator": args.t_estimator,
        "super_variant": args.super_variant, "N": args.N,
        "cluster_method": args.cluster_method, "distance_kind": args.distance_kind,
    }


def _check_method_args(args):
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    if args.method in ("cluster", "restricted") and args.L is None:
        raise UsageError(f"--method {args.method} needs --L")
    if args.method == "finite" and args.c_alpha is None:
        raise UsageError("--method finite needs --c-alpha")
    if args.B < 100:
        raise UsageError("--B must be at least 100")


def cmd_simulate(args):
    X = sample(_model_spec(args), args.n, _seed(args))
    # non-numeric header so that ingest_csv recognizes it
    X = DataMatrix(X.values, [f"X{j + 1}" for j in range(X.D)])
    if args.out in (None, "-"):
        write_csv(X, sys.stdout)
    else:
        write_csv(X, args.out)


def cmd_estimate(args):
    _check_method_args(args)
    X = ingest_csv(args.data)
    G = estimate_graph(X, args.method, args.alpha, _seed(args), args.workers, **_method_opts(args))
    _write(export_graph(G, args.format), args.out)


def cmd_coverage(args):
    _check_method_args(args)
    if args.n is None:
        raise UsageError("--n is required")
    config = ExperimentConfig(
        model=_model_spec(args), n=args.n, alpha=args.alpha, method=args.method,
        reps=args.reps, seed=_seed(args), **_method_opts(args),
    )
    report = run_coverage(config, workers=args.workers)
    _write(dumps(report.to_dict()) + "\n", args.out)
    if args.csv:
        _write(report.to_csv(), args.csv)
    print(report.table(), file=sys.stderr)


def cmd_diagnostics(args):
    X = ingest_csv(args.data)
    diag = delta_diagnostics(sample_covariance(X.values), n=X.n)
    out = dict(diag.as_dict(), n=X.n, D=X.D)
    _write(dumps(out) + "\n", args.out)


_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "coverage": cmd_coverage,
    "diagnostics": cmd_diagnostics,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = _parse_with_config(parser, argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"weakgraph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"weakgraph: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"weakgraph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, UnicodeDecodeError) as exc:
        print(f"weakgraph: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PreconditionError as exc:
        msg = f"weakgraph: cannot apply method: {exc}"
        if exc.suggestion:
            msg += f"\nsuggestion: {exc.suggestion}"
        print(msg, file=sys.stderr)
        return EXIT_PRECONDITION
    except WeakGraphError as exc:
        print(f"weakgraph: method failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ValueError as exc:
        print(f"weakgraph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
