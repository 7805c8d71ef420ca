import concurrent.futures
import logging
import time
from dataclasses import dataclass, field
from typing import List

import numpy as np
import pandas as pd
import tqdm

from gmr.lib.algorithm.penalty import PenaltySpec
from gmr.lib.errors import FitFailure, GMRError
from gmr.simulation.generate import Scenario, generate_dataset, selection_metrics
from gmr.train.selection.cross_validation import cross_validate
from gmr.train.selection.select import select_models
from gmr.train.solver import FitConfig, fit
from gmr.train.utils import lambda_grid

logger = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "tdr",
    "fdr",
    "tdr_numeric",
    "fdr_numeric",
    "tdr_binary",
    "fdr_binary",
    "tdr_ordinal",
    "fdr_ordinal",
]


@dataclass
class StudySummary:
    """
    Per-replicate selection metrics and their aggregates per scenario and
    penalization level.
    """

    records: pd.DataFrame
    failures: List[dict] = field(default_factory=list)

    @property
    def summary(self):
        if self.records.empty:
            return pd.DataFrame(columns=["scenario", "level"])
        grouped = self.records.groupby(["scenario", "level"], sort=False)
        metrics = [column for column in METRIC_COLUMNS if column in self.records]
        frame = grouped[metrics].agg(["mean", "std"])
        frame.columns = [f"{metric}_{stat}" for metric, stat in frame.columns]
        frame["replicates"] = grouped.size()
        return frame.reset_index()

    def table(self):
        """
        Scenario x level table of "mean (SD)" cells for TDR and FDR.
        """
        summary = self.summary
        rows = []
        for _, row in summary.iterrows():
            rows.append(
                {
                    "scenario": row["scenario"],
                    "level": row["level"],
                    "TDR": f"{row['tdr_mean']:.2f} ({row['tdr_std']:.2f})",
                    "FDR": f"{row['fdr_mean']:.2f} ({row['fdr_std']:.2f})",
                }
            )
        return pd.DataFrame(rows, columns=["scenario", "level", "TDR", "FDR"])

    def to_dict(self):
        return {
            "summary": self.summary.replace({np.nan: None}).to_dict(orient="records"),
            "failures": self.failures,
            "failed_replicates": len(self.failures),
        }


def scenarios_from_config(study):
    return [
        Scenario(
            n=int(item["n"]),
            noise=int(item["noise"]),
            responses=int(item["responses"]),
            coefficient_range=(float(study["coefficient_low"]), float(study["coefficient_high"])),
            ordinal_thresholds=tuple(float(t) for t in study["ordinal_thresholds"]),
        )
        for item in study["scenarios"]
    ]


def replicate_seed(seed, scenario_index, replicate):
    return int(np.random.SeedSequence([seed, scenario_index, replicate]).generate_state(1)[0])


def run_replicate(scenario: Scenario, seed, study):
    """
    Generate one dataset, cross-validate, refit at every penalization level
    and score the selected support.

    Returns:
        list[dict]: One record per level.
    """
    dataset, true_support, truth = generate_dataset(scenario, seed)
    base = FitConfig.defaults(
        max_outer_iters=study["max_outer_iters"],
        rel_tolerance=study["rel_tolerance"],
        seed=seed % (2**31),
    )
    lambdas = lambda_grid(study["lambda_start"], study["lambda_stop"], study["lambda_step"])
    grid = cross_validate(
        dataset,
        ranks=study["ranks"],
        lambdas=lambdas,
        penalty=study["penalty"],
        folds=study["folds"],
        seed=seed,
        ridge=study["ridge"],
        base_config=base,
        workers=1,
    )
    selection = select_models(grid, study["k_levels"])
    levels = ["min"] + [f"{int(k) if float(k).is_integer() else k}SE" for k in study["k_levels"]]
    records = []
    for level in levels:
        rank, lam = selection.level(level)
        spec = PenaltySpec.from_kind(study["penalty"], lam, ridge=study["ridge"])
        config = FitConfig.from_dict({**base.to_dict(), "rank": rank, "penalty": spec.to_dict()})
        model = fit(dataset, config)
        metrics = selection_metrics(
            model.B, true_support, study["selection_threshold"], kinds=truth["kinds"]
        )
        records.append({"level": level, "S": rank, "lambda": lam, **metrics})
    return records


def _run_job(job):
    index, scenario, seed, study = job
    try:
        return index, run_replicate(scenario, seed, study), None
    except GMRError as error:
        failure = FitFailure(error.message, cause=type(error).__name__)
        return index, None, failure.to_dict()


def run_study(study, workers=1):
    """
    Run every scenario of a study configuration for its number of
    replications.

    Args:
        study (dict): Study configuration (see gmr/configs/simulation.json).
        workers (int): Worker processes over replicates.
    """
    scenarios = scenarios_from_config(study)
    jobs = []
    for s, scenario in enumerate(scenarios):
        for replicate in range(int(study["replications"])):
            jobs.append(((s, replicate), scenario, replicate_seed(study["seed"], s, replicate), study))

    results = [None] * len(jobs)
    slots = {job[0]: position for position, job in enumerate(jobs)}
    failures = []

    def collect(index, records, failure):
        s, replicate = index
        if failure is not None:
            failures.append({"scenario": scenarios[s].label, "replicate": replicate, **failure})
            logger.warning("Replicate %d of %s failed: %s", replicate, scenarios[s].label, failure["message"])
            return
        results[slots[index]] = [
            {"scenario": scenarios[s].label, "replicate": replicate, **record} for record in records
        ]

    start_time = time.time()
    print(f"Starting simulation study '{study.get('name', 'study')}' with {len(jobs)} replicates...")
    with tqdm.tqdm(total=len(jobs), leave=True, desc="replicates") as pbar:
        if workers == 1:
            for job in jobs:
                collect(*_run_job(job))
                pbar.update(1)
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
                futures = [executor.submit(_run_job, job) for job in jobs]
                for future in concurrent.futures.as_completed(futures):
                    collect(*future.result())
                    pbar.update(1)
    print(f"Simulation study completed in {time.time() - start_time:.2f} seconds.")

    failures.sort(key=lambda item: (item["scenario"], item["replicate"]))
    rows = [record for chunk in results if chunk for record in chunk]
    return StudySummary(records=pd.DataFrame(rows), failures=failures)
