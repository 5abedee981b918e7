"""Experiment orchestration: seeded, reproducible model-evaluation pipelines.

Five experiment designs share one pipeline skeleton — deduplicate the data,
split it in half, fit covariate models on the training half, draw a large
sample from each fitted model, deduplicate that sample, and estimate the KL
divergence from data to model sample with a subsampling confidence interval:

* ``eval``      — estimates against both the training and the test half;
* ``missing``   — injects MCAR missingness into the training half at each
                  requested fraction before fitting (Gaussian-copula models
                  only), always estimating against the complete test half;
* ``latent``    — fits on the observed columns only, and on all columns with
                  the sample marginalized down to the observed ones;
* ``scale``     — estimates on the original scale and on the uniform scale
                  (both sides mapped through margins fitted on train);
* ``benchmark`` — synthetic Gaussian pairs with known divergence, reporting
                  the analytic truth and a CI-coverage indicator per case.

Every random decision is derived from the single config seed by labelled
hashing, so reruns of the same config are byte-identical, and scenarios that
must coincide (a missing-fraction of zero versus a plain evaluation run) use
the same derived seeds and therefore produce identical numbers.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
from dataclasses import dataclass

import numpy as np

from .data import (
    Dataset, dedup_rows, from_continuous, inject_mcar, load_csv, make_dataset,
    schema_from_json, split_half,
)
from .errors import ConfigError, EstimationError, ModelError
from .kld import KlEstimate, kld_est_bc, kld_est_nn, kld_gaussian_analytic
from .mixed import kld_est_mixed
from .models import (
    MODEL_KINDS, fit_covariate_model, fit_margins, marginalize_columns,
    sample_model, to_uniform,
)
from .uq import SubsamplingConfig, ci_from_distribution, subsample_distribution

__all__ = [
    "ModelSpec", "BenchmarkCase", "ExperimentConfig", "ResultRow",
    "derive_seed", "config_from_json", "load_config", "run_experiment",
    "run_eval", "run_missing", "run_latent", "run_scale", "run_benchmark",
    "write_results", "write_manifest",
]

EXPERIMENTS = ("eval", "missing", "latent", "scale", "benchmark")

_ROW_FIELDS = (
    "experiment", "model", "scenario", "kl_estimate", "ci_lower", "ci_upper",
    "kl_clamped", "n_train", "n_test", "m_effective", "failures", "seed",
)
_BENCH_FIELDS = _ROW_FIELDS + ("truth", "covered")


def derive_seed(seed: int, *labels) -> int:
    """Deterministic 63-bit sub-seed from a root seed and a label path.

    Hashing (rather than offsetting) keeps unrelated purposes statistically
    independent and makes the derivation order-free: the label path is the
    only thing that matters.
    """
    msg = ":".join([str(int(seed))] + [str(lab) for lab in labels])
    digest = hashlib.sha256(msg.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """An internal model kind, or a named external sample CSV standing in
    for a model fitted elsewhere (vine copulas, imputation pipelines, ...)."""

    name: str
    kind: str                 # one of MODEL_KINDS, or "external"
    sample_path: str | None = None


@dataclass(frozen=True)
class BenchmarkCase:
    """One synthetic Gaussian-vs-Gaussian benchmark cell."""

    name: str
    mu1: tuple
    cov1: tuple
    mu2: tuple
    cov2: tuple
    n: int
    m: int


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    models: tuple[ModelSpec, ...] = ()
    data: str | None = None
    schema: tuple = ()
    missing_token: str = ""
    m: int = 10000
    seed: int = 0
    s: int = 1000
    b_exponent: float = 2.0 / 3.0
    alpha: float = 0.05
    missing_grid: tuple[float, ...] = ()
    missing_columns: tuple[str, ...] = ()
    observed: tuple[str, ...] = ()
    benchmark: tuple[BenchmarkCase, ...] = ()
    out_dir: str = "."

    def subsampling(self, ci_seed: int) -> SubsamplingConfig:
        return SubsamplingConfig(s=self.s, b_exponent=self.b_exponent,
                                 alpha=self.alpha, seed=ci_seed)


def _parse_models(entries) -> tuple[ModelSpec, ...]:
    specs = []
    for entry in entries:
        if isinstance(entry, str):
            kind = entry.lower()
            if kind not in MODEL_KINDS:
                raise ConfigError(f"unknown model {entry!r}; choose from {MODEL_KINDS}")
            specs.append(ModelSpec(kind, kind))
        elif isinstance(entry, dict) and "sample" in entry:
            name = str(entry.get("name", os.path.basename(str(entry["sample"]))))
            specs.append(ModelSpec(name, "external", str(entry["sample"])))
        else:
            raise ConfigError(
                f"bad model entry {entry!r}: use a kind name or "
                '{"name": ..., "sample": "file.csv"}'
            )
    if not specs:
        raise ConfigError("at least one model is required")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate model names: {names}")
    return tuple(specs)


def _parse_benchmark(entries) -> tuple[BenchmarkCase, ...]:
    cases = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ConfigError(f"benchmark case {i} must be an object")
        try:
            case = BenchmarkCase(
                name=str(entry.get("name", f"case{i}")),
                mu1=tuple(entry["mu1"]), cov1=tuple(map(tuple, entry["cov1"])),
                mu2=tuple(entry["mu2"]), cov2=tuple(map(tuple, entry["cov2"])),
                n=int(entry["n"]), m=int(entry["m"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"benchmark case {i}: {exc!r}") from None
        if case.n < 2 or case.m < 1:
            raise ConfigError(f"benchmark case {case.name!r}: need n >= 2, m >= 1")
        try:
            kld_gaussian_analytic(case.mu1, case.cov1, case.mu2, case.cov2)
        except ValueError as exc:
            raise ConfigError(f"benchmark case {case.name!r}: {exc}") from None
        cases.append(case)
    if not cases:
        raise ConfigError("benchmark requires at least one case")
    return tuple(cases)


_CONFIG_KEYS = {
    "experiment", "data", "schema", "missing_token", "models", "m", "seed",
    "s", "b_exponent", "alpha", "missing_grid", "missing_columns", "observed",
    "benchmark", "out_dir",
}


def config_from_json(obj, base_dir: str = ".") -> ExperimentConfig:
    """Validate a decoded config JSON object; paths resolve against `base_dir`."""
    if not isinstance(obj, dict):
        raise ConfigError("experiment config must be a JSON object")
    unknown = set(obj) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")

    experiment = str(obj.get("experiment", "")).lower()
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")

    def _path(p):
        p = str(p)
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    seed = obj.get("seed", 0)
    if not (isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0):
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    m = obj.get("m", 10000)
    if not (isinstance(m, int) and m >= 1):
        raise ConfigError(f"m must be a positive integer, got {m!r}")

    kwargs = dict(
        experiment=experiment,
        missing_token=str(obj.get("missing_token", "")),
        m=m, seed=seed,
        s=int(obj.get("s", 1000)),
        b_exponent=float(obj.get("b_exponent", 2.0 / 3.0)),
        alpha=float(obj.get("alpha", 0.05)),
        out_dir=_path(obj.get("out_dir", ".")),
    )

    if experiment == "benchmark":
        if "models" in obj or "data" in obj or "schema" in obj:
            raise ConfigError("benchmark configs take cases, not data/models")
        kwargs["benchmark"] = _parse_benchmark(obj.get("benchmark", []))
    else:
        if "data" not in obj or "schema" not in obj:
            raise ConfigError(f"experiment {experiment!r} requires data and schema")
        kwargs["data"] = _path(obj["data"])
        schema_obj = obj["schema"]
        if isinstance(schema_obj, str):
            # a path to a schema file, like the CLI's --schema flag
            with open(_path(schema_obj), encoding="utf-8") as fh:
                try:
                    schema_obj = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ConfigError(
                        f"{schema_obj}: invalid JSON ({exc})"
                    ) from None
        kwargs["schema"] = schema_from_json(schema_obj)
        models = _parse_models(obj.get("models", []))
        kwargs["models"] = tuple(
            ModelSpec(s.name, s.kind,
                      _path(s.sample_path) if s.sample_path else None)
            for s in models
        )

    if experiment == "missing":
        grid = tuple(float(p) for p in obj.get("missing_grid", ()))
        if not grid:
            raise ConfigError("missing experiment requires a missing_grid")
        if any(not 0.0 <= p < 1.0 for p in grid):
            raise ConfigError(f"missing_grid values must lie in [0, 1), got {grid}")
        kwargs["missing_grid"] = grid
        kwargs["missing_columns"] = tuple(str(c) for c in obj.get("missing_columns", ()))
        bad = [s.name for s in kwargs["models"] if s.kind not in ("gausscop", "external")]
        if bad:
            raise ConfigError(
                f"missing-data runs allow only gausscop or external models, got {bad}"
            )
    if experiment == "latent":
        observed = tuple(str(c) for c in obj.get("observed", ()))
        if not observed:
            raise ConfigError("latent experiment requires observed columns")
        names = [c.name for c in kwargs["schema"]]
        unknown_cols = [c for c in observed if c not in names]
        if unknown_cols:
            raise ConfigError(f"observed column(s) {unknown_cols!r} not in schema")
        kwargs["observed"] = observed

    # validates s / b_exponent / alpha ranges
    SubsamplingConfig(s=kwargs["s"], b_exponent=kwargs["b_exponent"],
                      alpha=kwargs["alpha"], seed=0)
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_json(obj, base_dir=os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# result rows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    experiment: str
    model: str
    scenario: str
    kl_estimate: float
    ci_lower: float
    ci_upper: float
    kl_clamped: float
    n_train: int
    n_test: int
    m_effective: int
    failures: int
    seed: int
    truth: float | None = None
    covered: int | None = None


def _make_row(cfg, model_name, scenario, est: KlEstimate, failures,
              n_train, n_test, truth=None) -> ResultRow:
    covered = None
    if truth is not None:
        covered = int(est.ci[0] <= truth <= est.ci[1])
    return ResultRow(
        experiment=cfg.experiment, model=model_name, scenario=str(scenario),
        kl_estimate=est.value, ci_lower=est.ci[0], ci_upper=est.ci[1],
        kl_clamped=max(0.0, est.value), n_train=n_train, n_test=n_test,
        m_effective=est.m, failures=failures, seed=cfg.seed,
        truth=truth, covered=covered,
    )


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_results(rows, path, experiment=None) -> None:
    """Emit result rows as CSV (17 significant digits on float fields)."""
    if experiment is None and rows:
        experiment = rows[0].experiment
    fields = _BENCH_FIELDS if experiment == "benchmark" else _ROW_FIELDS
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(getattr(row, f)) for f in fields])


def write_manifest(cfg: ExperimentConfig, rows, errors, path) -> None:
    """Reproducibility record: config echo, library versions, error log.

    Deliberately contains no timestamps or timings, so a rerun of the same
    config in the same environment is byte-identical.
    """
    from importlib import metadata
    try:
        pkg_version = metadata.version("kldiv")
    except metadata.PackageNotFoundError:
        pkg_version = "unknown"
    doc = {
        "experiment": cfg.experiment,
        "config": _config_echo(cfg),
        "rows": len(rows),
        "errors": errors,
        "versions": {
            "kldiv": pkg_version,
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
            "python": platform.python_version(),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _config_echo(cfg: ExperimentConfig):
    echo = {
        "experiment": cfg.experiment, "m": cfg.m, "seed": cfg.seed, "s": cfg.s,
        "b_exponent": cfg.b_exponent, "alpha": cfg.alpha, "out_dir": cfg.out_dir,
    }
    if cfg.experiment == "benchmark":
        echo["benchmark"] = [
            {"name": c.name, "mu1": list(c.mu1), "cov1": [list(r) for r in c.cov1],
             "mu2": list(c.mu2), "cov2": [list(r) for r in c.cov2],
             "n": c.n, "m": c.m}
            for c in cfg.benchmark
        ]
        return echo
    echo["data"] = cfg.data
    echo["missing_token"] = cfg.missing_token
    echo["schema"] = [{"name": c.name, "kind": c.kind} for c in cfg.schema]
    echo["models"] = [
        {"name": s.name, "kind": s.kind, "sample": s.sample_path}
        for s in cfg.models
    ]
    if cfg.experiment == "missing":
        echo["missing_grid"] = list(cfg.missing_grid)
        echo["missing_columns"] = list(cfg.missing_columns)
    if cfg.experiment == "latent":
        echo["observed"] = list(cfg.observed)
    return echo


# ---------------------------------------------------------------------------
# shared pipeline pieces
# ---------------------------------------------------------------------------

def _load_split(cfg):
    ds = load_csv(cfg.data, cfg.schema, missing_token=cfg.missing_token)
    ds = dedup_rows(ds)
    return split_half(ds, derive_seed(cfg.seed, "split"))


def _model_sample(cfg, spec: ModelSpec, train: Dataset) -> Dataset:
    """Fit + sample an internal model, or load an external sample; deduplicated."""
    if spec.kind == "external":
        sample = load_csv(spec.sample_path, cfg.schema, missing_token=cfg.missing_token)
    else:
        fitted = fit_covariate_model(train, spec.kind)
        sample = sample_model(fitted, cfg.m, derive_seed(cfg.seed, "sample", spec.name))
    return dedup_rows(sample)


def _estimate_row(cfg, x: Dataset, y: Dataset, ci_seed: int):
    """Full estimate plus subsampling CI; returns (estimate-with-ci, failures)."""
    sub_cfg = cfg.subsampling(ci_seed)
    est = kld_est_mixed(x, y)
    dist = subsample_distribution(x, y, kld_est_mixed, sub_cfg, theta_hat=est.value)
    ci = ci_from_distribution(est.value, dist, x.n_rows, sub_cfg)
    return est.with_ci(ci, 1.0 - cfg.alpha), dist.failures


class _ErrorLog:
    """Collects per-cell failures so one bad cell doesn't kill the run."""

    def __init__(self):
        self.entries = []

    def record(self, model, scenario, exc):
        self.entries.append({
            "model": model, "scenario": str(scenario),
            "error": f"{type(exc).__name__}: {exc}",
        })


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------

def run_eval(cfg: ExperimentConfig):
    """Fit on train, sample, estimate against both halves; rows + error log."""
    train, test = _load_split(cfg)
    rows, errors = [], _ErrorLog()
    for spec in cfg.models:
        try:
            sample = _model_sample(cfg, spec, train)
        except (ModelError, EstimationError) as exc:
            errors.record(spec.name, "fit", exc)
            continue
        for target_name, target in (("train", train), ("test", test)):
            try:
                est, failures = _estimate_row(
                    cfg, target, sample, derive_seed(cfg.seed, "ci", spec.name, target_name))
            except (ModelError, EstimationError) as exc:
                errors.record(spec.name, target_name, exc)
                continue
            rows.append(_make_row(cfg, spec.name, target_name, est, failures,
                                  train.n_rows, test.n_rows))
    return rows, errors.entries


def run_missing(cfg: ExperimentConfig):
    """MCAR injection into train at each grid fraction, then fit/sample/estimate.

    A fraction of zero leaves the training data untouched and uses the same
    derived seeds as ``eval``, so its rows coincide with the eval test rows.
    External samples do not depend on the injected fraction and are
    evaluated once, at scenario 0.
    """
    train, test = _load_split(cfg)
    columns = cfg.missing_columns or tuple(c.name for c in cfg.schema)
    rows, errors = [], _ErrorLog()
    for spec in cfg.models:
        if spec.kind == "external":
            try:
                sample = _model_sample(cfg, spec, train)
                est, failures = _estimate_row(
                    cfg, test, sample, derive_seed(cfg.seed, "ci", spec.name, "test"))
                rows.append(_make_row(cfg, spec.name, 0.0, est, failures,
                                      train.n_rows, test.n_rows))
            except (ModelError, EstimationError) as exc:
                errors.record(spec.name, "external", exc)
            continue
        for p in cfg.missing_grid:
            try:
                degraded = inject_mcar(train, p, columns,
                                       derive_seed(cfg.seed, "mcar"))
                fitted = fit_covariate_model(degraded, spec.kind)
                sample = dedup_rows(sample_model(
                    fitted, cfg.m, derive_seed(cfg.seed, "sample", spec.name)))
                est, failures = _estimate_row(
                    cfg, test, sample, derive_seed(cfg.seed, "ci", spec.name, "test"))
            except (ModelError, EstimationError) as exc:
                errors.record(spec.name, p, exc)
                continue
            rows.append(_make_row(cfg, spec.name, repr(float(p)), est, failures,
                                  train.n_rows, test.n_rows))
    return rows, errors.entries


def run_latent(cfg: ExperimentConfig):
    """Direct fit on observed columns vs full fit marginalized down to them.

    Both scenarios share the sampling and CI seeds, so with an empty latent
    set (observed = all columns) they are numerically identical.
    """
    train, test = _load_split(cfg)
    test_obs = marginalize_columns(test, cfg.observed)
    rows, errors = [], _ErrorLog()
    for spec in cfg.models:
        for scenario in ("direct", "marginalized"):
            if spec.kind == "external" and scenario == "direct":
                # an external sample was produced by a fit we cannot redo on
                # the observed columns alone; only its marginalization is usable
                errors.record(spec.name, scenario,
                              ModelError("external samples support only the "
                                         "marginalized scenario"))
                continue
            try:
                if spec.kind == "external":
                    sample = dedup_rows(marginalize_columns(
                        _model_sample(cfg, spec, train), cfg.observed))
                else:
                    if scenario == "direct":
                        fitted = fit_covariate_model(
                            marginalize_columns(train, cfg.observed), spec.kind)
                        raw = sample_model(fitted, cfg.m,
                                           derive_seed(cfg.seed, "sample", spec.name))
                    else:
                        fitted = fit_covariate_model(train, spec.kind)
                        raw = marginalize_columns(
                            sample_model(fitted, cfg.m,
                                         derive_seed(cfg.seed, "sample", spec.name)),
                            cfg.observed)
                    sample = dedup_rows(raw)
                est, failures = _estimate_row(
                    cfg, test_obs, sample, derive_seed(cfg.seed, "ci", spec.name))
            except (ModelError, EstimationError) as exc:
                errors.record(spec.name, scenario, exc)
                continue
            rows.append(_make_row(cfg, spec.name, scenario, est, failures,
                                  train.n_rows, test.n_rows))
    return rows, errors.entries


def _replace_continuous(ds: Dataset, new_cont) -> Dataset:
    return make_dataset(
        ds.schema, continuous=new_cont,
        discrete=ds.discrete if ds.d_discrete else None,
        missing=ds.missing, category_labels=ds.category_labels,
    )


def run_scale(cfg: ExperimentConfig):
    """Original-scale vs uniform-scale estimates, margins fitted on train.

    Clamping can collapse extreme values onto the same uniform coordinate,
    so the transformed datasets are deduplicated again before estimation.
    """
    train, test = _load_split(cfg)
    if not any(c.kind == "continuous" for c in cfg.schema):
        raise ConfigError("scale experiment requires continuous columns")
    margins = fit_margins(train)
    rows, errors = [], _ErrorLog()
    for spec in cfg.models:
        try:
            sample = _model_sample(cfg, spec, train)
            u_test = dedup_rows(_replace_continuous(test, to_uniform(test, margins)))
            u_sample = dedup_rows(_replace_continuous(sample, to_uniform(sample, margins)))
        except (ModelError, EstimationError) as exc:
            errors.record(spec.name, "fit", exc)
            continue
        cells = (("original", test, sample), ("uniform", u_test, u_sample))
        for scenario, x, y in cells:
            try:
                est, failures = _estimate_row(
                    cfg, x, y, derive_seed(cfg.seed, "ci", spec.name, scenario))
            except (ModelError, EstimationError) as exc:
                errors.record(spec.name, scenario, exc)
                continue
            rows.append(_make_row(cfg, spec.name, scenario, est, failures,
                                  train.n_rows, test.n_rows))
    return rows, errors.entries


def _gaussian_draw(rng, mu, cov, size):
    mu = np.asarray(mu, dtype=np.float64)
    chol = np.linalg.cholesky(np.asarray(cov, dtype=np.float64))
    return mu + rng.standard_normal((size, mu.size)) @ chol.T


def _on_continuous(fn):
    return lambda a, b: fn(a.continuous, b.continuous)


def run_benchmark(cfg: ExperimentConfig):
    """Known-truth Gaussian pairs through both estimators, with coverage flags."""
    estimators = (
        ("kld_est_bc", _on_continuous(kld_est_bc)),
        ("kld_est_nn", _on_continuous(lambda a, b: kld_est_nn(a, b, k=1))),
    )
    rows, errors = [], _ErrorLog()
    for case in cfg.benchmark:
        truth = kld_gaussian_analytic(case.mu1, case.cov1, case.mu2, case.cov2)
        rng = np.random.default_rng(derive_seed(cfg.seed, "bench", case.name))
        x = dedup_rows(from_continuous(_gaussian_draw(rng, case.mu1, case.cov1, case.n)))
        y = dedup_rows(from_continuous(_gaussian_draw(rng, case.mu2, case.cov2, case.m)))
        for est_name, estimator in estimators:
            sub_cfg = cfg.subsampling(derive_seed(cfg.seed, "ci", case.name, est_name))
            try:
                est = estimator(x, y)
                dist = subsample_distribution(x, y, estimator, sub_cfg,
                                              theta_hat=est.value)
                ci = ci_from_distribution(est.value, dist, x.n_rows, sub_cfg)
                est = est.with_ci(ci, 1.0 - cfg.alpha)
            except (ModelError, EstimationError) as exc:
                errors.record(est_name, case.name, exc)
                continue
            rows.append(_make_row(cfg, est_name, case.name, est, dist.failures,
                                  x.n_rows, 0, truth=truth))
    return rows, errors.entries


_RUNNERS = {
    "eval": run_eval,
    "missing": run_missing,
    "latent": run_latent,
    "scale": run_scale,
    "benchmark": run_benchmark,
}


def run_experiment(cfg: ExperimentConfig):
    """Dispatch on cfg.experiment, write CSV + manifest, return (rows, paths)."""
    rows, errors = _RUNNERS[cfg.experiment](cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    csv_path = os.path.join(cfg.out_dir, f"{cfg.experiment}_results.csv")
    manifest_path = os.path.join(cfg.out_dir, f"{cfg.experiment}_manifest.json")
    write_results(rows, csv_path, experiment=cfg.experiment)
    write_manifest(cfg, rows, errors, manifest_path)
    return rows, (csv_path, manifest_path)
