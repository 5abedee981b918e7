"""Command-line interface.

Subcommands
-----------
estimate    KL divergence between two CSV samples, optionally with a
            subsampling confidence interval.
fit-sample  Fit a covariate model to a CSV and write a simulated sample.
experiment  Run an experiment described by a JSON config file.
benchmark   Run Gaussian known-truth benchmark cases from a JSON spec.

Exit codes: 0 on success, 1 for configuration or data problems (bad flags,
malformed files, schema mismatches), 2 when a statistically valid estimate
cannot be produced (duplicate points, infinite divergence, too many failed
subsampling replicates).  All numeric output carries 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import sys

from .data import dedup_rows, load_csv, schema_from_json, write_csv
from .errors import ConfigError, DataError, EstimationError, KldivError, ModelError
from .harness import load_config, run_experiment
from .mixed import kld_est_mixed
from .models import MODEL_KINDS, fit_covariate_model, sample_model, save_model
from .uq import SubsamplingConfig, subsample_ci


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; bad flags are a
    # configuration problem here, which the interface contract maps to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_schema(path):
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return schema_from_json(obj)


def _g17(v: float) -> str:
    return format(float(v), ".17g")


def _cmd_estimate(args) -> int:
    schema = _load_schema(args.schema)
    x = dedup_rows(load_csv(args.x_csv, schema, missing_token=args.missing_token))
    y = dedup_rows(load_csv(args.y_csv, schema, missing_token=args.missing_token))
    if args.ci:
        cfg = SubsamplingConfig(s=args.s, b_exponent=args.b_exp,
                                alpha=args.alpha, seed=args.seed)
        est = subsample_ci(x, y, kld_est_mixed, cfg)
        print(f"kl_estimate {_g17(est.value)}")
        print(f"ci_lower {_g17(est.ci[0])}")
        print(f"ci_upper {_g17(est.ci[1])}")
        print(f"level {_g17(est.level)}")
    else:
        est = kld_est_mixed(x, y)
        print(f"kl_estimate {_g17(est.value)}")
    print(f"n {est.n}")
    print(f"m {est.m}")
    return 0


def _cmd_fit_sample(args) -> int:
    schema = _load_schema(args.schema)
    data = dedup_rows(load_csv(args.data_csv, schema, missing_token=args.missing_token))
    model = fit_covariate_model(data, args.model)
    sample = dedup_rows(sample_model(model, args.m, args.seed))
    write_csv(sample, args.out, missing_token=args.missing_token)
    if args.save_model:
        save_model(model, args.save_model)
    print(f"wrote {sample.n_rows} rows to {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    rows, (csv_path, manifest_path) = run_experiment(cfg)
    print(f"wrote {len(rows)} rows to {csv_path}")
    print(f"manifest: {manifest_path}")
    return 0


def _cmd_benchmark(args) -> int:
    cfg = load_config(args.spec)
    if cfg.experiment != "benchmark":
        raise ConfigError(
            f"{args.spec}: expected experiment \"benchmark\", got {cfg.experiment!r}"
        )
    rows, (csv_path, manifest_path) = run_experiment(cfg)
    print(f"wrote {len(rows)} rows to {csv_path}")
    print(f"manifest: {manifest_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kldiv",
                     description="Sample-based KL divergence estimation and "
                                 "covariate distribution models")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate KL divergence between two CSV samples")
    p.add_argument("x_csv", help="sample from the first distribution (the p side)")
    p.add_argument("y_csv", help="sample from the second distribution (the q side)")
    p.add_argument("--schema", required=True, help="JSON list of {name, kind} columns")
    p.add_argument("--ci", action="store_true", help="add a subsampling confidence interval")
    p.add_argument("--alpha", type=float, default=0.05, help="CI significance level")
    p.add_argument("--s", type=int, default=1000, help="subsampling replicate count")
    p.add_argument("--b-exp", type=float, default=2.0 / 3.0,
                   help="subsample size exponent (b = ceil(n^b_exp))")
    p.add_argument("--seed", type=int, default=0, help="seed for the CI replicates")
    p.add_argument("--missing-token", default="", help="cell text marking missing values")
    p.set_defaults(fn=_cmd_estimate)

    p = sub.add_parser("fit-sample", help="fit a covariate model and write a sample CSV")
    p.add_argument("data_csv")
    p.add_argument("--schema", required=True, help="JSON list of {name, kind} columns")
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    p.add_argument("--m", type=int, default=10000, help="rows to simulate before dedup")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--save-model", default=None, help="also write the fitted model JSON")
    p.add_argument("--missing-token", default="", help="cell text marking missing values")
    p.set_defaults(fn=_cmd_fit_sample)

    p = sub.add_parser("experiment", help="run an experiment from a JSON config")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("benchmark", help="run Gaussian known-truth benchmark cases")
    p.add_argument("spec")
    p.set_defaults(fn=_cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EstimationError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KldivError as exc:  # any stragglers in the hierarchy
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
