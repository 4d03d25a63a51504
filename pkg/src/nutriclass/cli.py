"""Command line: ``generate``, ``run`` and ``compare``.

Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or config error.
"""
import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import pipeline
from .errors import DomainError, NutriclassError, ReportVersionError
from .schema import default_schema, write_survey_csv
from .synthetic import GeneratorSpec, generate_columns, generate_synthetic

logger = logging.getLogger("nutriclass")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _csv_floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _csv_ints(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="nutriclass", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic survey CSV")
    g.add_argument("--n", type=int, default=21858, help="row count")
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--spec", help="JSON generator spec (overrides the built-in defaults)")
    g.add_argument("--out", required=True, help="CSV path to write")

    r = sub.add_parser("run", help="train and evaluate all models, write a report")
    r.add_argument("--config", help="JSON run config; flags below override it")
    r.add_argument("--out", required=True, help="output directory")
    src = r.add_mutually_exclusive_group()
    src.add_argument("--input", help="survey CSV to analyse")
    src.add_argument("--synthetic-n", type=int, help="synthetic row count")
    r.add_argument("--synthetic-seed", type=int)
    r.add_argument("--synthetic-spec", help="JSON generator spec")
    r.add_argument("--seed", type=int, help="master seed for split and model randomness")
    r.add_argument("--staging", choices=["min", "ZBMI", "WHZ2", "WAZ2", "HAZ2"])
    r.add_argument("--cutoffs", type=_csv_floats, help="three descending cutoffs, e.g. -1,-2,-3")
    r.add_argument("--test-fraction", type=float)
    r.add_argument("--models", type=lambda s: s.split(","), help="subset of dt,rf,svm,mlp")
    zs = r.add_mutually_exclusive_group()
    zs.add_argument("--include-zscores", dest="include_zscores", action="store_true", default=None)
    zs.add_argument("--exclude-zscores", dest="include_zscores", action="store_false")
    r.add_argument("--pca-target", type=float)
    r.add_argument("--tree-max-depth", type=int)
    r.add_argument("--n-trees", type=int)
    r.add_argument("--svm-sigma", type=float)
    r.add_argument("--svm-c", type=float)
    r.add_argument("--svm-tol", type=float)
    r.add_argument("--mlp-hidden", type=_csv_ints)
    r.add_argument("--epochs", type=int)
    r.add_argument("--batch-size", type=int)
    r.add_argument("--learning-rate", type=float)
    r.add_argument("--correlation-scope", choices=["full", "train"])
    r.add_argument("--negative-only", action="store_true", default=None,
                   help="keep only negative, significant correlations")
    r.add_argument("--wilson", action="store_true", default=None, help="Wilson accuracy interval")

    c = sub.add_parser("compare", help="tabulate metrics from two or more reports")
    c.add_argument("reports", nargs="+")
    c.add_argument("--labels", type=lambda s: s.split(","))
    c.add_argument("--out", help="also write the table as CSV")
    return p


def config_from_args(args):
    overrides = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            overrides = json.load(fh)
        overrides.pop("out_dir", None)

    def put(section, key, value):
        if value is None:
            return
        if section is None:
            overrides[key] = value
        else:
            overrides.setdefault(section, {})[key] = value

    if args.input is not None:
        overrides["input"] = {"csv": args.input, "synthetic": None}
    elif any(v is not None for v in (args.synthetic_n, args.synthetic_seed, args.synthetic_spec)):
        base = overrides.get("input", pipeline.DEFAULTS["input"])
        syn = dict(base.get("synthetic") or pipeline.DEFAULTS["input"]["synthetic"])
        for key, value in (("n", args.synthetic_n), ("seed", args.synthetic_seed),
                           ("spec", args.synthetic_spec)):
            if value is not None:
                syn[key] = value
        overrides["input"] = {"csv": None, "synthetic": syn}
    put(None, "seed", args.seed)
    put("staging", "aggregate", args.staging)
    put("staging", "cutoffs", args.cutoffs)
    put(None, "test_fraction", args.test_fraction)
    put(None, "models", args.models)
    put(None, "include_zscores", args.include_zscores)
    put("pca", "variance_target", args.pca_target)
    put("tree", "max_depth", args.tree_max_depth)
    put("forest", "n_trees", args.n_trees)
    put("svm", "sigma", args.svm_sigma)
    put("svm", "c", args.svm_c)
    put("svm", "tolerance", args.svm_tol)
    put("mlp", "hidden", args.mlp_hidden)
    put("mlp", "epochs", args.epochs)
    put("mlp", "batch_size", args.batch_size)
    put("mlp", "learning_rate", args.learning_rate)
    put("correlation", "scope", args.correlation_scope)
    if args.negative_only:
        put("correlation", "filter", "negative_significant")
    if args.wilson:
        put(None, "ci_method", "wilson")
    return pipeline.RunConfig.from_dict(overrides, out_dir=args.out)


def calibration_summary(spec, n, seed):
    cols = generate_columns(spec, n, seed)
    lines = [f"{'feature':<24}{'target mean':>12}{'mean':>9}{'target sd':>11}{'sd':>9}"]
    for name in default_schema().names:
        x = cols[name]
        lines.append(f"{name:<24}{spec.target_mean(name):>12.3f}{x.mean():>9.3f}"
                     f"{spec.target_sd(name):>11.3f}{x.std():>9.3f}")
    return "\n".join(lines)


def cmd_generate(args):
    if args.n < 1:
        raise UsageError(f"--n must be >= 1, got {args.n}")
    spec = GeneratorSpec.from_file(args.spec) if args.spec else GeneratorSpec.default()
    records = generate_synthetic(spec, n=args.n, seed=args.seed)
    out = Path(args.out)
    fd, tmp = tempfile.mkstemp(prefix=f".{out.name}.", dir=out.parent if str(out.parent) else ".")
    os.close(fd)
    try:
        write_survey_csv(records, tmp)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    print(f"wrote {len(records)} rows to {out}")
    print(calibration_summary(spec, args.n, args.seed))
    return EXIT_OK


def cmd_run(args):
    try:
        cfg = config_from_args(args)
    except (DomainError, json.JSONDecodeError, FileNotFoundError) as exc:
        raise UsageError(str(exc)) from exc
    path = pipeline.cmd_run(cfg)
    rep = json.loads(path.read_text())
    for name in pipeline.MODELS:
        if name not in rep["models"]:
            continue
        m = rep["models"][name]
        print(f"{m['title']:<22} accuracy {100 * m['metrics']['accuracy']:.2f}%")
    print(f"report: {path}")
    return EXIT_OK


def cmd_compare(args):
    try:
        table = pipeline.compare_reports(args.reports, args.labels)
    except (DomainError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"cannot compare: {exc}") from exc
    sys.stdout.write(table.render())
    if args.out:
        table.write_csv(args.out)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "compare": cmd_compare}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad usage
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ReportVersionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NutriclassError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
