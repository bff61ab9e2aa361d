"""Command-line surface.

Subcommands:

* ``gaussian-risk``  closed-form risks/regret for a Gaussian task pair
  spec, optionally cross-checked against the Monte-Carlo and quadrature
  oracles (``--verify``);
* ``office-table``   the polynomial risk combiner applied to
  (input risk, output risk) rows, either the builtin Office-31 rows
  (checked against their published combined risks) or a CSV;
* ``predict``        signature-ridge return prediction with transfer,
  over a lag × order grid;
* ``portfolio``      Sharpe-portfolio transfer with prescreen risk;
* ``verify-props``   the randomized property sweeps, with a pass/fail
  summary on stderr and a machine-readable report on stdout.

Exit codes: 0 success; 2 validation failure (bad spec, bad CSV, broken
invariant); 3 numerical failure (singular covariance, degenerate
objective); 4 verification failure (an oracle gap beyond tolerance, a
builtin-table deviation, or a failed property sweep).  Reports go to
stdout unless ``--out`` is given; stderr carries diagnostics only.

All randomness enters through ``--seed`` and is threaded into
``SeededStream``; there are no hidden entropy sources, so reports are
byte-identical across runs.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .docio import (
    canonical_json,
    infer_period_days,
    parse_document,
    read_price_volume_csv,
    read_returns_csv,
    read_risk_rows_csv,
    validate_report,
    validate_spec,
)
from .divergence import wp_empirical_1d
from .errors import NumericalError, SpecFileError, ValidationError
from .gauss_transfer import (
    BasicCasePair,
    FeatureAugmentedPair,
    OutputAugmentedPair,
    basic_output_risk_kl,
    basic_output_risk_w,
    feature_aug_risk,
    output_aug_laws,
    output_aug_risk,
    regret_risk_identity,
)
from .gaussian import (
    AffineModel,
    GaussianJointTask,
    fit_optimal_affine,
    kl_gaussian,
    pushforward_affine,
    w2_gaussian_sq,
)
from .benchmarks import run_property_sweeps
from .mc import SeededStream, kl_quadrature_1d, mc_loss_gap, mc_w2_1d
from .portfolio import (
    ReturnsDataset,
    estimate_moments,
    prescreen_risk_w2,
    sharpe_optimize,
    sharpe_ratio,
)
from .regression import (
    RegressionDataset,
    Standardizer,
    concat_datasets,
    evaluate,
    predict as predict_with,
    pretrain_source,
    ridge_fit,
)
from .risk import OFFICE31_COMBINER, OFFICE31_TABLE, OFFICE31_TABLE_TOL, RiskPair, poly_risk
from .signature import signature_dim, windowed_signature_features, write_features_csv

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4

QUAD_ORACLE_TOL = 1e-6
DIVERGENCE_ORACLE_TOL = 1e-10


def _provenance(seed: int | None) -> dict:
    return {"tool": "transrisk", "tool_version": __version__, "seed": seed}


def _emit(report: dict, out_path: str | None) -> None:
    validate_report(report)
    text = canonical_json(report)
    if out_path:
        with open(out_path, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _load_spec(path: str) -> dict:
    try:
        with open(path) as handle:
            text = handle.read()
    except OSError as exc:
        raise SpecFileError(f"cannot read spec {path}: {exc}") from None
    doc = parse_document(text)
    validate_spec(doc)
    return doc


def _task_from_doc(doc: dict) -> GaussianJointTask:
    return GaussianJointTask(doc["dim_x"], doc["dim_y"],
                             np.asarray(doc["mean"]), np.asarray(doc["cov"]))


def _split_doc(split) -> dict:
    return {"total": float(split[0]), "variance_term": float(split[1]),
            "bias_term": float(split[2])}


def _oracle_entry(name: str, closed: float, oracle: float,
                  std_error: float | None, tol_abs: float | None) -> dict:
    gap = abs(closed - oracle)
    if std_error is not None:
        sigma_gap = gap / std_error if std_error > 0.0 else (0.0 if gap == 0.0 else math.inf)
        within = sigma_gap <= 3.0 or gap <= 1e-12
        entry = {"name": name, "closed_form": closed, "oracle": oracle,
                 "std_error": std_error, "abs_gap": gap,
                 "sigma_gap": min(sigma_gap, 1e6), "within": bool(within)}
    else:
        entry = {"name": name, "closed_form": closed, "oracle": oracle,
                 "abs_gap": gap, "sigma_gap": None,
                 "within": bool(gap <= tol_abs)}
    return entry


# --- gaussian-risk -------------------------------------------------------

def _basic_results(pair: BasicCasePair, variant: str) -> dict:
    results: dict = {"case": "basic"}
    if variant in ("w", "both"):
        w_split = basic_output_risk_w(pair)
        results["w"] = _split_doc(w_split)
        identity = regret_risk_identity(pair)
        results["regret"] = identity.regret
        results["residual"] = identity.residual
        results["risk_w_le_regret"] = bool(
            identity.risk_w <= identity.regret + 1e-9 * max(1.0, identity.regret))
    if variant in ("kl", "both"):
        kl_split = basic_output_risk_kl(pair)
        if math.isinf(kl_split.total):
            results["kl"] = None
            results["kl_note"] = "infinite: the target output law is degenerate"
        else:
            results["kl"] = _split_doc(kl_split)
    return results


def _basic_oracles(pair: BasicCasePair, variant: str, stream: SeededStream,
                   n_w2: int, n_loss: int) -> list[dict]:
    src_model = fit_optimal_affine(pair.source)
    tgt_model = fit_optimal_affine(pair.target)
    tgt = pair.target
    target_law = pushforward_affine(tgt_model, tgt.mean_x, tgt.cov_x)
    inter_law = pushforward_affine(src_model, tgt.mean_x, tgt.cov_x)
    entries = []
    if variant in ("kl", "both"):
        closed = basic_output_risk_kl(pair).total
        if math.isfinite(closed):
            entries.append(_oracle_entry(
                "kl_vs_quadrature", closed, kl_quadrature_1d(target_law, inter_law),
                None, QUAD_ORACLE_TOL))
    if variant in ("w", "both"):
        est, se = mc_w2_1d(target_law, inter_law, n_w2, stream.substream(1))
        entries.append(_oracle_entry(
            "w2_vs_sampling", basic_output_risk_w(pair).total, est, se, None))
        est, se = mc_loss_gap(src_model, tgt_model, tgt, n_loss, stream.substream(2))
        entries.append(_oracle_entry(
            "regret_vs_loss_gap", regret_risk_identity(pair).regret, est, se, None))
    return entries


def cmd_gaussian_risk(args) -> int:
    doc = _load_spec(args.spec)
    if doc["kind"] != "gaussian_pair":
        raise SpecFileError(f"gaussian-risk needs a gaussian_pair spec, got {doc['kind']}")
    case = doc["case"]
    source = _task_from_doc(doc["source"])
    target = _task_from_doc(doc["target"])
    stream = SeededStream(args.seed)
    entries: list[dict] = []

    if case == "basic":
        pair = BasicCasePair(source, target)
        results = _basic_results(pair, args.variant)
        if args.verify:
            entries = _basic_oracles(pair, args.variant, stream,
                                     args.mc_samples, args.mc_samples)
    elif case == "feature_aug":
        fpair = FeatureAugmentedPair(source, target)
        results = {"case": "feature_aug"}
        if args.variant in ("kl", "both"):
            split = feature_aug_risk(fpair, "kl")
            results["kl"] = None if math.isinf(split.total) else _split_doc(split)
        if args.variant in ("w", "both"):
            results["w"] = _split_doc(feature_aug_risk(fpair, "w"))
        if args.verify:
            tgt_model = fit_optimal_affine(target)
            src_model = fit_optimal_affine(source)
            target_law = pushforward_affine(tgt_model, target.mean_x, target.cov_x)
            inter_law = pushforward_affine(src_model, source.mean_x, source.cov_x)
            if args.variant in ("kl", "both") and results.get("kl") is not None:
                entries.append(_oracle_entry(
                    "kl_vs_quadrature", results["kl"]["total"],
                    kl_quadrature_1d(target_law, inter_law), None, QUAD_ORACLE_TOL))
            if args.variant in ("w", "both"):
                est, se = mc_w2_1d(target_law, inter_law, args.mc_samples,
                                   stream.substream(1))
                entries.append(_oracle_entry(
                    "w2_vs_sampling", results["w"]["total"], est, se, None))
    else:  # output_aug
        if "init_model" not in doc:
            raise SpecFileError("output_aug spec requires an init_model")
        init = AffineModel(np.asarray(doc["init_model"]["weight"]),
                           np.asarray(doc["init_model"]["intercept"]))
        opair = OutputAugmentedPair(source, target, init)
        results = {"case": "output_aug"}
        law_t, law_i = output_aug_laws(opair)
        results["target_law"] = {"mean": law_t.mean.tolist(), "cov": law_t.cov.tolist()}
        results["intermediate_law"] = {"mean": law_i.mean.tolist(),
                                       "cov": law_i.cov.tolist()}
        if args.variant in ("kl", "both"):
            split = output_aug_risk(opair, "kl")
            results["kl"] = (None if math.isinf(split.total) else
                             _split_doc((split.total, split.variance_term, split.bias_term)))
        if args.variant in ("w", "both"):
            split = output_aug_risk(opair, "w")
            results["w"] = _split_doc((split.total, split.variance_term, split.bias_term))
        if args.verify:
            if results.get("kl") is not None:
                entries.append(_oracle_entry(
                    "kl_vs_generic_divergence", results["kl"]["total"],
                    kl_gaussian(law_t, law_i), None, DIVERGENCE_ORACLE_TOL))
            if args.variant in ("w", "both"):
                entries.append(_oracle_entry(
                    "w2_vs_generic_divergence", results["w"]["total"],
                    w2_gaussian_sq(law_t, law_i), None, DIVERGENCE_ORACLE_TOL))

    report = {
        "version": 1,
        "kind": "gaussian_risk_report",
        "inputs": doc,
        "results": results,
        "provenance": _provenance(args.seed),
    }
    all_within = all(e["within"] for e in entries)
    if args.verify:
        report["oracle_check"] = {"entries": entries, "all_within": bool(all_within)}
    _emit(report, args.out)
    if args.verify and not all_within:
        print("oracle cross-check failed: gap beyond tolerance", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# --- office-table ---------------------------------------------------------

def cmd_office_table(args) -> int:
    if args.builtin:
        rows = [(label, ei, eo) for label, ei, eo, _ in OFFICE31_TABLE]
        published = {label: risk for label, _, _, risk in OFFICE31_TABLE}
    else:
        rows = read_risk_rows_csv(args.csv)
        published = {}

    out_rows = []
    max_dev = 0.0
    for label, ei, eo in rows:
        combined = poly_risk(RiskPair(ei, eo), OFFICE31_COMBINER)
        row = {"label": label, "input_risk": ei, "output_risk": eo,
               "combined_risk": combined}
        if label in published:
            row["published_risk"] = published[label]
            row["deviation"] = abs(combined - published[label])
            max_dev = max(max_dev, row["deviation"])
        out_rows.append(row)

    results: dict = {
        "combiner": {"coef_input": OFFICE31_COMBINER.coef_input,
                     "coef_output_sq": OFFICE31_COMBINER.coef_output_sq},
        "rows": out_rows,
    }
    if args.builtin:
        results["max_deviation"] = max_dev
        results["tolerance"] = OFFICE31_TABLE_TOL
        results["all_within"] = bool(max_dev <= OFFICE31_TABLE_TOL)

    report = {
        "version": 1,
        "kind": "office_table_report",
        "inputs": {"builtin": bool(args.builtin),
                   "csv": None if args.builtin else str(args.csv)},
        "results": results,
        "provenance": _provenance(None),
    }
    _emit(report, args.out)
    if args.builtin and not results["all_within"]:
        print(f"builtin table deviation {max_dev} exceeds {OFFICE31_TABLE_TOL}",
              file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# --- predict ---------------------------------------------------------------

def _asset_signature_dataset(path: str, lag: int, order: int):
    """Features, next-period log returns, and window-end dates for one asset."""
    dates, closes, volumes = read_price_volume_csv(path)
    log_pv = np.column_stack([np.log(closes), np.log(volumes)])
    features = windowed_signature_features(log_pv, lag, order)
    returns = np.diff(log_pv[:, 0])
    y = returns[lag - 1:]
    end_dates = dates[lag - 1:len(dates) - 1]
    return RegressionDataset(features[:-1], y), end_dates


def _split_by_date(data: RegressionDataset, end_dates, split_date):
    train_mask = np.array([d < split_date for d in end_dates])
    if not train_mask.any() or train_mask.all():
        raise ValidationError(
            f"split date {split_date} leaves an empty train or test side")
    return (RegressionDataset(data.features[train_mask], data.targets[train_mask]),
            RegressionDataset(data.features[~train_mask], data.targets[~train_mask]))


def _standardized(train: RegressionDataset, other: RegressionDataset,
                  feat_std: Standardizer, y_mean: float, y_std: float):
    return (RegressionDataset(feat_std.transform(train.features),
                              (train.targets - y_mean) / y_std),
            RegressionDataset(feat_std.transform(other.features),
                              (other.targets - y_mean) / y_std))


def _metrics_doc(theta, test: RegressionDataset) -> dict:
    m = evaluate(theta, test)
    return {"mse": m.mse, "r2": m.r2, "corr": m.corr,
            "corr_defined": bool(m.corr_defined),
            "transfer_risk": wp_empirical_1d(predict_with(theta, test.features),
                                             test.targets, 2.0)}


def cmd_predict(args) -> int:
    import datetime as _dt

    doc = _load_spec(args.job)
    if doc["kind"] != "regression_job":
        raise SpecFileError(f"predict needs a regression_job spec, got {doc['kind']}")
    try:
        split_date = _dt.date.fromisoformat(doc["split_date"])
    except ValueError:
        raise SpecFileError(f"split_date {doc['split_date']!r} is not ISO-8601") from None
    lags = doc["lag"] if isinstance(doc["lag"], list) else [doc["lag"]]
    orders = doc["order"] if isinstance(doc["order"], list) else [doc["order"]]
    lam_s = float(doc.get("lambda_source", 1.0))
    lam_t = float(doc.get("lambda_transfer", 5.0))

    grid = []
    target_period = None
    for lag in sorted(set(lags)):
        for order in sorted(set(orders)):
            source_trains = []
            for path in doc["source_csvs"]:
                data, end_dates = _asset_signature_dataset(path, lag, order)
                mask = np.array([d < split_date for d in end_dates])
                if not mask.any():
                    raise ValidationError(f"{path}: no source rows before split date")
                source_trains.append(
                    RegressionDataset(data.features[mask], data.targets[mask]))
            target_data, target_dates = _asset_signature_dataset(
                doc["target_csv"], lag, order)
            if target_period is None:
                raw_dates, _, _ = read_price_volume_csv(doc["target_csv"])
                target_period = infer_period_days(raw_dates)
            train, test = _split_by_date(target_data, target_dates, split_date)

            pooled = concat_datasets(source_trains)
            src_std = Standardizer(pooled.features)
            src_y_mean = float(pooled.targets.mean())
            src_y_std = float(pooled.targets.std()) or 1.0
            pooled_std, _ = _standardized(pooled, pooled, src_std, src_y_mean, src_y_std)

            tgt_std = Standardizer(train.features)
            y_mean = float(train.targets.mean())
            y_std = float(train.targets.std()) or 1.0
            train_std, test_std = _standardized(train, test, tgt_std, y_mean, y_std)
            if src_std.n_kept != tgt_std.n_kept:
                raise ValidationError(
                    "source and target standardizers dropped different feature columns")

            theta_source = pretrain_source(pooled_std, lam_s, fit_intercept=True)
            theta_direct = ridge_fit(train_std, lam_s, fit_intercept=True)
            theta_transfer = ridge_fit(train_std, lam_t, anchor=theta_source,
                                       fit_intercept=True)
            grid.append({
                "lag": lag,
                "order": order,
                "feature_dim": signature_dim(3, order),
                "train_rows": train.n_rows,
                "test_rows": test.n_rows,
                "direct": _metrics_doc(theta_direct, test_std),
                "transfer": _metrics_doc(theta_transfer, test_std),
                "target_standardization": {"mean": y_mean, "std": y_std},
            })

    if args.features_out:
        lag, order = sorted(set(lags))[0], sorted(set(orders))[0]
        dates, closes, volumes = read_price_volume_csv(doc["target_csv"])
        feats = windowed_signature_features(
            np.column_stack([np.log(closes), np.log(volumes)]), lag, order)
        write_features_csv(args.features_out, feats, 3, order)

    report = {
        "version": 1,
        "kind": "prediction_report",
        "inputs": doc,
        "results": {
            "grid": grid,
            "target_period_days": target_period,
            "note": "metrics are computed on targets standardized by "
                    "target-train statistics",
        },
        "provenance": _provenance(None),
    }
    _emit(report, args.out)
    return EXIT_OK


# --- portfolio ---------------------------------------------------------------

def cmd_portfolio(args) -> int:
    doc = _load_spec(args.job)
    if doc["kind"] != "portfolio_job":
        raise SpecFileError(f"portfolio needs a portfolio_job spec, got {doc['kind']}")
    penalty = float(doc.get("penalty", 0.2))
    seed = int(doc.get("seed", 0))

    datasets = {}
    names = {}
    for key in ("source_csv", "target_train_csv", "target_test_csv"):
        _, asset_names, rows = read_returns_csv(doc[key])
        datasets[key] = ReturnsDataset(np.asarray(rows))
        names[key] = asset_names
    counts = {k: d.n_assets for k, d in datasets.items()}
    if len(set(counts.values())) != 1:
        raise ValidationError(f"asset counts differ across files: {counts}")

    mu_s, sigma_s = estimate_moments(datasets["source_csv"])
    anchor = sharpe_optimize(mu_s, sigma_s)
    mu_tr, sigma_tr = estimate_moments(datasets["target_train_csv"])
    direct = sharpe_optimize(mu_tr, sigma_tr)
    transferred = sharpe_optimize(mu_tr, sigma_tr, anchor=anchor, penalty=penalty)
    mu_te, sigma_te = estimate_moments(datasets["target_test_csv"])

    risk_sq = prescreen_risk_w2(datasets["source_csv"], datasets["target_test_csv"])
    results = {
        "assets": names["target_train_csv"],
        "penalty": penalty,
        "pretrained_weights": anchor.weights.tolist(),
        "direct_weights": direct.weights.tolist(),
        "transferred_weights": transferred.weights.tolist(),
        "sharpe": {
            "direct_in_sample": sharpe_ratio(direct, mu_tr, sigma_tr),
            "direct_out_of_sample": sharpe_ratio(direct, mu_te, sigma_te),
            "transferred_in_sample": sharpe_ratio(transferred, mu_tr, sigma_tr),
            "transferred_out_of_sample": sharpe_ratio(transferred, mu_te, sigma_te),
        },
        "prescreen_risk_sq": risk_sq,
        "prescreen_risk": math.sqrt(max(risk_sq, 0.0)),
    }
    report = {
        "version": 1,
        "kind": "portfolio_report",
        "inputs": doc,
        "results": results,
        "provenance": _provenance(seed),
    }
    _emit(report, args.out)
    return EXIT_OK


# --- verify-props --------------------------------------------------------

def cmd_verify_props(args) -> int:
    sweeps = run_property_sweeps(args.seed, trials_scale=args.scale)
    rows = []
    for sweep in sweeps:
        status = "PASS" if sweep.passed else "FAIL"
        print(f"{status}  {sweep.name}: {sweep.checked - sweep.failed}/{sweep.checked} hold"
              + (f"  ({sweep.detail})" if sweep.detail else ""), file=sys.stderr)
        rows.append({"name": sweep.name, "checked": sweep.checked,
                     "failed": sweep.failed, "passed": sweep.passed,
                     "detail": sweep.detail})
    all_passed = all(sweep.passed for sweep in sweeps)
    report = {
        "version": 1,
        "kind": "property_report",
        "inputs": {"seed": args.seed, "scale": args.scale},
        "results": {"sweeps": rows, "all_passed": bool(all_passed)},
        "provenance": _provenance(args.seed),
    }
    _emit(report, args.out)
    return EXIT_OK if all_passed else EXIT_VERIFY


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transrisk",
        description="Transfer risk, regret, and transfer-learning pipelines "
                    "for Gaussian/linear task pairs")
    parser.add_argument("--version", action="version", version=f"transrisk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gaussian-risk", help="closed-form risks for a Gaussian task pair")
    p.add_argument("spec", help="task-pair spec document (JSON)")
    p.add_argument("--variant", choices=["kl", "w", "both"], default="both")
    p.add_argument("--verify", action="store_true",
                   help="cross-check closed forms against the independent oracles")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-samples", type=int, default=200_000,
                   help="Monte-Carlo sample count for --verify")
    p.add_argument("--jobs", type=int, default=1,
                   help="upper bound on internal parallelism (currently 1 process)")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_gaussian_risk)

    p = sub.add_parser("office-table", help="apply the risk combiner to benchmark rows")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--builtin", action="store_true",
                       help="use the six builtin Office-31 rows and check the "
                            "published combined-risk column")
    group.add_argument("--csv", help="CSV of label,input_risk,output_risk rows")
    p.add_argument("--out")
    p.set_defaults(func=cmd_office_table)

    p = sub.add_parser("predict", help="signature-ridge return prediction with transfer")
    p.add_argument("job", help="regression job spec (JSON)")
    p.add_argument("--features-out", help="also dump the target's signature features as CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("portfolio", help="Sharpe-portfolio transfer with prescreen risk")
    p.add_argument("job", help="portfolio job spec (JSON)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_portfolio)

    p = sub.add_parser("verify-props", help="run the randomized property sweeps")
    p.add_argument("--seed", type=int, default=20_240_401)
    p.add_argument("--scale", type=float, default=1.0,
                   help="scale factor on sweep sizes (e.g. 0.01 for a smoke run)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_props)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpecFileError, ValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
