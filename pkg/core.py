import os
import sys
import json
import logging
import argparse
import traceback

now_dir = os.getcwd()
sys.path.append(now_dir)

import numpy as np
import pandas as pd

from gmr.configs.config import Config, load_study_config
from gmr.lib.errors import GMRError
from gmr.lib.utils import (
    load_dataset,
    read_table,
    write_json,
    write_manifest,
    write_matrix_csv,
)
from gmr.train.process.model_compare import compare_models
from gmr.train.process.model_information import model_information
from gmr.train.process.model_io import load_model, save_model
from gmr.train.selection.cross_validation import cross_validate
from gmr.train.selection.select import select_models
from gmr.train.solver import FitConfig, fit
from gmr.train.utils import lambda_grid, trace_frame

config = Config()
logger = logging.getLogger("gmr")


def parse_grid(grid):
    """
    "start:stop:step" or a comma-separated list of lambdas.
    """
    if grid is None:
        cv = config.cv
        return lambda_grid(cv["lambda_start"], cv["lambda_stop"], cv["lambda_step"])
    if ":" in grid:
        start, stop, step = (float(part) for part in grid.split(":"))
        return lambda_grid(start, stop, step)
    return np.array([float(part) for part in grid.split(",") if part.strip()])


def parse_list(text, cast=float):
    return [cast(part) for part in str(text).split(",") if part.strip()]


def default_workers():
    return os.cpu_count() or 1


def export_fit(model, out_dir, name="model"):
    """
    Write the model JSON and the matrices of a fit as labelled CSVs.
    """
    os.makedirs(out_dir, exist_ok=True)
    predictor_names = [schema.name for schema in model.predictors]
    response_names = [schema.name for schema in model.responses]
    dims = [f"dim{s + 1}" for s in range(model.B.shape[1])]

    save_model(model, os.path.join(out_dir, f"{name}.json"), name=name)
    write_matrix_csv(os.path.join(out_dir, "B.csv"), model.B, predictor_names, dims)
    write_matrix_csv(os.path.join(out_dir, "V.csv"), model.V, response_names, dims)
    write_matrix_csv(
        os.path.join(out_dir, "implied_coefficients.csv"), model.A, predictor_names, response_names
    )
    pd.DataFrame(
        {
            "response": response_names,
            "kind": [schema.kind for schema in model.responses],
            "m": model.m,
        }
    ).to_csv(os.path.join(out_dir, "m.csv"), index=False, float_format="%.10g")

    threshold_rows = [
        (model.responses[r].name, j + 1, value)
        for r, thresholds in sorted(model.thresholds.items())
        for j, value in enumerate(thresholds)
    ]
    pd.DataFrame(threshold_rows, columns=["response", "threshold", "value"]).to_csv(
        os.path.join(out_dir, "thresholds.csv"), index=False, float_format="%.10g"
    )

    quantification_rows = []
    for schema in model.predictors:
        if not schema.is_discrete:
            continue
        quantification = model.quantifications[schema.name]
        for label, value, observed in zip(schema.categories, quantification.w, quantification.observed):
            quantification_rows.append((schema.name, schema.kind, label, value, bool(observed)))
    pd.DataFrame(
        quantification_rows, columns=["variable", "kind", "category", "quantification", "observed"]
    ).to_csv(os.path.join(out_dir, "quantifications.csv"), index=False, float_format="%.10g")

    trace_frame(model.trace).to_csv(
        os.path.join(out_dir, "trace.csv"), index=False, float_format="%.12g"
    )


def run_fit_script(
    data_path: str,
    schema_path: str,
    out_dir: str,
    rank: int,
    lambda1: float,
    lambda2: float,
    lambda3: float,
    seed: int,
    max_iters: int,
    tol: float,
    threshold_period: int,
    export_phi: bool,
):
    dataset = load_dataset(data_path, schema_path)
    fit_config = FitConfig.defaults(
        rank=rank,
        lambda1=lambda1,
        lambda2=lambda2,
        lambda3=lambda3,
        seed=seed,
        max_outer_iters=max_iters,
        rel_tolerance=tol,
        threshold_update_period=threshold_period,
    )
    print(f"Fitting rank {fit_config.rank} on {dataset.n_rows} rows...")
    model = fit(dataset, fit_config)
    export_fit(model, out_dir)
    if export_phi:
        transformed = model.transform.transform(dataset)
        write_matrix_csv(
            os.path.join(out_dir, "phi.csv"),
            transformed.Phi,
            [str(i) for i in range(dataset.n_rows)],
            dataset.predictor_names,
            index_name="row",
        )
    write_manifest(out_dir, "fit", {"data": data_path, "schema": schema_path, **fit_config.to_dict()}, seed=fit_config.seed)
    status = "converged" if model.converged else "stopped without converging"
    print(f"Model {status} after {model.iterations} iterations; outputs in {out_dir}.")
    return model


def run_cv_script(
    data_path: str,
    schema_path: str,
    out_dir: str,
    ranks: str,
    grid: str,
    penalty: str,
    ridge: float,
    folds: int,
    k_levels: str,
    seed: int,
    workers: int,
    unseen: str,
    max_iters: int,
    tol: float,
    plot: bool = False,
):
    cv = config.cv
    dataset = load_dataset(data_path, schema_path)
    lambdas = parse_grid(grid)
    rank_list = parse_list(ranks, int) if ranks else cv["ranks"]
    ks = parse_list(k_levels) if k_levels else cv["k_levels"]
    penalty = penalty or cv["penalty"]
    ridge = cv["ridge"] if ridge is None else ridge
    folds = folds or cv["folds"]
    base = FitConfig.defaults(seed=seed, max_outer_iters=max_iters, rel_tolerance=tol)

    print(
        f"Cross-validating {len(rank_list)} ranks x {len(lambdas)} lambdas x {folds} folds "
        f"with {workers} workers..."
    )
    cv_grid = cross_validate(
        dataset,
        ranks=rank_list,
        lambdas=lambdas,
        penalty=penalty,
        folds=folds,
        seed=base.seed,
        ridge=ridge,
        base_config=base,
        workers=workers,
        unseen=unseen or cv["unseen"],
    )
    selection = select_models(cv_grid, ks)

    os.makedirs(out_dir, exist_ok=True)
    cv_grid.fold_frame().to_csv(os.path.join(out_dir, "cv_folds.csv"), index=False, float_format="%.12g")
    cv_grid.curve_frame().to_csv(os.path.join(out_dir, "cv_curve.csv"), index=False, float_format="%.12g")
    if plot:
        from gmr.lib.plots import plot_cv_curve

        plot_cv_curve(cv_grid, selection, os.path.join(out_dir, "cv_curve.png"))
    summary = {
        "penalty": penalty,
        "ridge": ridge,
        "folds": folds,
        "seed": base.seed,
        "ranks": rank_list,
        "unseen_rows": cv_grid.unseen,
        "failures": cv_grid.failures,
        **selection.to_dict(),
    }
    write_json(summary, os.path.join(out_dir, "cv_summary.json"))
    write_manifest(
        out_dir,
        "cv",
        {
            "data": data_path,
            "schema": schema_path,
            "ranks": rank_list,
            "lambdas": [float(lam) for lam in lambdas],
            "penalty": penalty,
            "ridge": ridge,
            "folds": folds,
            "k_levels": ks,
            "fit": base.to_dict(),
        },
        seed=base.seed,
    )
    print(f"Selected S*={selection.s_star}, lambda_min={selection.lambda_min:g}.")
    for k, (rank, lam) in selection.lambda_kse.items():
        print(f"  {k:g}SE: S={rank}, lambda={lam:g}")
    return cv_grid, selection


def run_simulate_script(
    out_dir: str,
    study_path: str,
    scale: str,
    replications: int,
    grid: str,
    seed: int,
    workers: int,
    plot: bool = False,
):
    from gmr.simulation.study import run_study

    study = load_study_config(study_path) if study_path else config.simulation(scale)
    if replications is not None:
        study["replications"] = replications
    if seed is not None:
        study["seed"] = seed
    if grid:
        start, stop, step = (float(part) for part in grid.split(":"))
        study.update({"lambda_start": start, "lambda_stop": stop, "lambda_step": step})

    result = run_study(study, workers=workers)

    os.makedirs(out_dir, exist_ok=True)
    result.records.to_csv(os.path.join(out_dir, "replicates.csv"), index=False, float_format="%.10g")
    result.summary.to_csv(os.path.join(out_dir, "summary.csv"), index=False, float_format="%.10g")
    result.table().to_csv(os.path.join(out_dir, "summary_table.csv"), index=False)
    write_json(result.to_dict(), os.path.join(out_dir, "summary.json"))
    if plot and not result.records.empty:
        from gmr.lib.plots import plot_study

        plot_study(result.records, os.path.join(out_dir, "simulation.png"))
    write_manifest(out_dir, "simulate", study, seed=study["seed"])
    print(result.table().to_string(index=False))
    return result


def run_predict_script(model_path: str, data_path: str, out_path: str, unseen: str):
    from gmr.infer.infer import Predictor

    predictor = Predictor().load_model(model_path)
    predictions = predictor.predict_frame(read_table(data_path), unseen=unseen)
    if os.path.isdir(out_path) or not out_path.endswith(".csv"):
        os.makedirs(out_path, exist_ok=True)
        out_path = os.path.join(out_path, "predictions.csv")
    else:
        os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    predictions.to_csv(out_path, index=False, float_format="%.12g")
    print(f"Wrote {len(predictions)} predictions to {out_path}.")
    return predictions


def run_report_script(model_paths, out_dir: str, threshold: float):
    for path in model_paths:
        print(model_information(path, threshold=threshold))
    if len(model_paths) < 2:
        return None
    models = {os.path.splitext(os.path.basename(path))[0]: load_model(path) for path in model_paths}
    if len(models) < len(model_paths):
        models = {f"{i + 1}:{path}": load_model(path) for i, path in enumerate(model_paths)}
    mse, complexity = compare_models(models, threshold=threshold)
    print(mse.to_string(float_format=lambda value: f"{value:.5f}"))
    print(complexity.to_string(index=False))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        mse.to_csv(os.path.join(out_dir, "implied_coefficient_mse.csv"), float_format="%.10g")
        complexity.to_csv(os.path.join(out_dir, "model_complexity.csv"), index=False)
    return mse, complexity


def add_fit_arguments(parser):
    parser.add_argument("--seed", type=int, help="Seed of the initialization.", default=None)
    parser.add_argument("--max-iters", type=int, help="Maximum outer iterations.", default=None)
    parser.add_argument("--tol", type=float, help="Relative-decrease tolerance.", default=None)


def parse_arguments():
    parser = argparse.ArgumentParser(
        description="Penalized reduced-rank regression for mixed responses and predictors."
    )
    parser.add_argument("--verbose", action="store_true", help="Log debug messages.")
    subparsers = parser.add_subparsers(
        title="subcommands", dest="mode", help="Choose a mode"
    )

    # Parser for 'fit' mode
    fit_parser = subparsers.add_parser("fit", help="Fit one model.")
    fit_parser.add_argument("--data", type=str, help="CSV data file.", required=True)
    fit_parser.add_argument("--schema", type=str, help="JSON schema file.", required=True)
    fit_parser.add_argument("--out", type=str, help="Output directory.", required=True)
    fit_parser.add_argument("--rank", type=int, help="Rank S.", default=None)
    fit_parser.add_argument("--lambda1", type=float, help="Lasso weight.", default=None)
    fit_parser.add_argument("--lambda2", type=float, help="Ridge weight.", default=None)
    fit_parser.add_argument("--lambda3", type=float, help="Group lasso weight.", default=None)
    fit_parser.add_argument(
        "--threshold-period",
        type=int,
        help="Outer iterations between ordinal threshold updates.",
        default=None,
    )
    fit_parser.add_argument(
        "--export-phi", action="store_true", help="Also write the transformed predictors."
    )
    add_fit_arguments(fit_parser)

    # Parser for 'cv' mode
    cv_parser = subparsers.add_parser("cv", help="Cross-validate rank and penalty.")
    cv_parser.add_argument("--data", type=str, help="CSV data file.", required=True)
    cv_parser.add_argument("--schema", type=str, help="JSON schema file.", required=True)
    cv_parser.add_argument("--out", type=str, help="Output directory.", required=True)
    cv_parser.add_argument("--ranks", type=str, help="Comma-separated ranks.", default=None)
    cv_parser.add_argument(
        "--grid", type=str, help='Lambda grid, "start:stop:step" or a comma list.', default=None
    )
    cv_parser.add_argument(
        "--penalty", type=str, choices=["lasso", "group", "ridge"], default=None
    )
    cv_parser.add_argument("--ridge", type=float, help="Companion ridge weight.", default=None)
    cv_parser.add_argument("--folds", type=int, help="Number of folds.", default=None)
    cv_parser.add_argument("--k-levels", type=str, help="Comma-separated k values.", default=None)
    cv_parser.add_argument("--workers", type=int, default=default_workers())
    cv_parser.add_argument(
        "--unseen",
        type=str,
        choices=["zero", "error"],
        help="Held-out categories unseen in the training folds.",
        default=None,
    )
    cv_parser.add_argument("--plot", action="store_true", help="Also draw the CV curve.")
    add_fit_arguments(cv_parser)

    # Parser for 'simulate' mode
    simulate_parser = subparsers.add_parser("simulate", help="Run a simulation study.")
    simulate_parser.add_argument("--out", type=str, help="Output directory.", required=True)
    simulate_parser.add_argument("--config", type=str, help="Study JSON file.", default=None)
    simulate_parser.add_argument(
        "--scale", type=str, choices=["desk", "full"], help="Built-in study size.", default="desk"
    )
    simulate_parser.add_argument("--replications", type=int, default=None)
    simulate_parser.add_argument("--grid", type=str, help='"start:stop:step".', default=None)
    simulate_parser.add_argument("--seed", type=int, default=None)
    simulate_parser.add_argument("--workers", type=int, default=default_workers())
    simulate_parser.add_argument("--plot", action="store_true", help="Also draw TDR/FDR boxplots.")

    # Parser for 'predict' mode
    predict_parser = subparsers.add_parser("predict", help="Predict new rows.")
    predict_parser.add_argument("--model", type=str, help="Model JSON file.", required=True)
    predict_parser.add_argument("--data", type=str, help="CSV data file.", required=True)
    predict_parser.add_argument("--out", type=str, help="Output CSV or directory.", required=True)
    predict_parser.add_argument(
        "--unseen", type=str, choices=["zero", "error"], default="error"
    )

    # Parser for 'report' mode
    report_parser = subparsers.add_parser("report", help="Describe and compare models.")
    report_parser.add_argument("--model", type=str, nargs="+", help="Model JSON files.", required=True)
    report_parser.add_argument("--out", type=str, help="Output directory.", default=None)
    report_parser.add_argument(
        "--threshold", type=float, help="Selection threshold.", default=config.selection["threshold"]
    )

    return parser.parse_args()


def error_directory(args):
    out = getattr(args, "out", None)
    if not out:
        return now_dir
    if out.endswith(".csv"):
        return os.path.dirname(out) or now_dir
    return out


def write_error(args, record):
    try:
        write_json(record, os.path.join(error_directory(args), "error.json"))
    except OSError as error:
        print(f"Could not write error.json: {error}")
    print(json.dumps(record), file=sys.stderr)


def main():
    if len(sys.argv) == 1:
        print("Please run the script with '-h' for more information.")
        sys.exit(1)

    args = parse_arguments()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger("matplotlib").setLevel(logging.WARNING)

    try:
        if args.mode == "fit":
            run_fit_script(
                data_path=args.data,
                schema_path=args.schema,
                out_dir=args.out,
                rank=args.rank,
                lambda1=args.lambda1,
                lambda2=args.lambda2,
                lambda3=args.lambda3,
                seed=args.seed,
                max_iters=args.max_iters,
                tol=args.tol,
                threshold_period=args.threshold_period,
                export_phi=args.export_phi,
            )
        elif args.mode == "cv":
            run_cv_script(
                data_path=args.data,
                schema_path=args.schema,
                out_dir=args.out,
                ranks=args.ranks,
                grid=args.grid,
                penalty=args.penalty,
                ridge=args.ridge,
                folds=args.folds,
                k_levels=args.k_levels,
                seed=args.seed,
                workers=args.workers,
                unseen=args.unseen,
                max_iters=args.max_iters,
                tol=args.tol,
                plot=args.plot,
            )
        elif args.mode == "simulate":
            run_simulate_script(
                out_dir=args.out,
                study_path=args.config,
                scale=args.scale,
                replications=args.replications,
                grid=args.grid,
                seed=args.seed,
                workers=args.workers,
                plot=args.plot,
            )
        elif args.mode == "predict":
            run_predict_script(
                model_path=args.model,
                data_path=args.data,
                out_path=args.out,
                unseen=args.unseen,
            )
        elif args.mode == "report":
            run_report_script(
                model_paths=args.model,
                out_dir=args.out,
                threshold=args.threshold,
            )
    except GMRError as error:
        print(f"An error occurred during execution: {error}")
        write_error(args, error.to_dict())
        sys.exit(error.exit_code)
    except Exception as error:
        print(f"An error occurred during execution: {error}")
        traceback.print_exc()
        write_error(
            args,
            {"error": type(error).__name__, "message": str(error), "exit_code": 1, "details": {}},
        )
        sys.exit(1)


if __name__ == "__main__":
    main()
