import concurrent.futures
import logging
import time
from dataclasses import dataclass, field
from typing import List

import numpy as np
import pandas as pd
import tqdm

from gmr.lib.algorithm.penalty import PenaltySpec
from gmr.lib.data import MixedDataset
from gmr.lib.errors import DimensionMismatch, FitFailure, GMRError, UnknownCategory
from gmr.train.selection.folds import make_folds, train_indices
from gmr.train.solver import FitConfig, fit

logger = logging.getLogger(__name__)


@dataclass
class CVGrid:
    """
    Cross-validated held-out losses over ranks x lambdas x folds.

    fold_losses holds the mean negative log-likelihood per held-out
    observation (summed over responses); pair_losses divides further by R.
    Failed cells are NaN.
    """

    lambdas: np.ndarray
    ranks: List[int]
    folds: int
    seed: int
    penalty: str
    ridge: float
    fold_losses: np.ndarray
    pair_losses: np.ndarray
    unseen: int = 0
    failures: List[dict] = field(default_factory=list)

    @property
    def cv_mean(self):
        return self.fold_losses.mean(axis=2)

    @property
    def cv_se(self):
        return self.fold_losses.std(axis=2, ddof=1) / np.sqrt(self.folds)

    @property
    def pair_mean(self):
        return self.pair_losses.mean(axis=2)

    def fold_frame(self):
        rows = []
        for i, rank in enumerate(self.ranks):
            for j, lam in enumerate(self.lambdas):
                for v in range(self.folds):
                    rows.append((rank, float(lam), v, self.fold_losses[i, j, v]))
        return pd.DataFrame(rows, columns=["S", "lambda", "fold", "loss"])

    def curve_frame(self):
        """
        Per-rank CV curve: APE and its standard error against lambda.
        """
        mean, se, pair = self.cv_mean, self.cv_se, self.pair_mean
        rows = []
        for i, rank in enumerate(self.ranks):
            for j, lam in enumerate(self.lambdas):
                rows.append((rank, float(lam), mean[i, j], se[i, j], pair[i, j]))
        return pd.DataFrame(rows, columns=["S", "lambda", "ape", "se", "ape_per_pair"])


def _evaluate_cell(dataset, held_out, config, unseen):
    """
    Fit on the training rows and score the held-out rows.
    """
    train = dataset.subset(train_indices(dataset.n_rows, held_out))
    test = dataset.subset(held_out)
    model = fit(train, config)
    breakdown, unseen_count = model.loss(test, unseen=unseen)
    n_test = test.n_rows
    return (
        breakdown.structural / n_test,
        breakdown.structural / (n_test * len(dataset.responses)),
        unseen_count,
    )


def _run_job(job):
    index, dataset, held_out, config, unseen = job
    try:
        return index, _evaluate_cell(dataset, held_out, config, unseen), None
    except UnknownCategory:
        raise
    except GMRError as error:
        failure = FitFailure(error.message, cause=type(error).__name__)
        return index, None, failure.to_dict()


def cross_validate(
    dataset: MixedDataset,
    ranks,
    lambdas,
    penalty="lasso",
    folds=10,
    seed=0,
    ridge=0.01,
    base_config: FitConfig = None,
    workers=1,
    unseen="zero",
):
    """
    V-fold cross-validation of the held-out negative log-likelihood.

    Every (rank, lambda, fold) cell is an independent job; results land in
    pre-indexed slots so they do not depend on completion order or on the
    number of workers.

    Args:
        dataset (MixedDataset): Full data.
        ranks (list[int]): Candidate ranks S.
        lambdas (list[float]): Penalty grid.
        penalty (str): lasso, group or ridge.
        folds (int): Number of folds V.
        seed (int): Seed of the fold assignment.
        ridge (float): Companion ridge weight.
        base_config (FitConfig, optional): Iteration settings for every fit.
        workers (int): Worker processes; 1 runs in-process.
        unseen (str): Policy for held-out categories unseen in training.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    ranks = [int(rank) for rank in ranks]
    if lambdas.size == 0 or not ranks:
        raise DimensionMismatch("The cross-validation grid is empty.")
    base = base_config or FitConfig.defaults()
    fold_rows = make_folds(dataset.n_rows, folds, seed)

    jobs = []
    for i, rank in enumerate(ranks):
        for j, lam in enumerate(lambdas):
            spec = PenaltySpec.from_kind(penalty, float(lam), ridge=ridge, epsilon=base.penalty.epsilon)
            config = FitConfig.from_dict({**base.to_dict(), "rank": rank, "penalty": spec.to_dict()})
            for v, held_out in enumerate(fold_rows):
                jobs.append(((i, j, v), dataset, held_out, config, unseen))

    shape = (len(ranks), lambdas.size, folds)
    fold_losses = np.full(shape, np.nan)
    pair_losses = np.full(shape, np.nan)
    unseen_total = 0
    failures = []

    def collect(index, result, failure):
        nonlocal unseen_total
        if failure is not None:
            i, j, v = index
            failures.append({"S": ranks[i], "lambda": float(lambdas[j]), "fold": v, **failure})
            logger.info("CV cell S=%d lambda=%g fold=%d failed: %s", ranks[i], lambdas[j], v, failure["message"])
            return
        fold_losses[index], pair_losses[index], unseen_count = result
        unseen_total += unseen_count

    start_time = time.time()
    with tqdm.tqdm(total=len(jobs), leave=True, desc="cv") as pbar:
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
    logger.info("Cross-validation of %d cells finished in %.2f seconds.", len(jobs), time.time() - start_time)
    if unseen_total:
        logger.warning("%d held-out rows fell in categories unseen in their training folds.", unseen_total)

    failures.sort(key=lambda item: (item["S"], item["lambda"], item["fold"]))
    return CVGrid(
        lambdas=lambdas,
        ranks=ranks,
        folds=folds,
        seed=seed,
        penalty=penalty,
        ridge=ridge,
        fold_losses=fold_losses,
        pair_losses=pair_losses,
        unseen=unseen_total,
        failures=failures,
    )
