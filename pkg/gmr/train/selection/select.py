from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from gmr.lib.errors import DimensionMismatch, EmptyFeasibleSet

# Relative tolerance for treating two CV means as tied.
TIE_TOLERANCE = 1e-12


@dataclass
class SelectionResult:
    """
    Outcome of the two-step rank / penalty selection.

    Args:
        s_star (int): Rank of the global minimum.
        lambda_min (float): Lambda of the global minimum.
        cv_min (float): CV mean at (s_star, lambda_min).
        se_min (float): Its standard error.
        lambda_kse (dict): k -> (S, lambda) chosen by the kSE rule.
        thresholds (dict): k -> CV threshold used for that k.
        per_rank (dict): rank -> lambda_min, APE and per-rank kSE choices.
    """

    s_star: int
    lambda_min: float
    cv_min: float
    se_min: float
    lambda_kse: Dict[float, Tuple[int, float]] = field(default_factory=dict)
    thresholds: Dict[float, float] = field(default_factory=dict)
    per_rank: Dict[int, dict] = field(default_factory=dict)

    def level(self, name):
        """
        (S, lambda) of a named level: "min" or "<k>SE".
        """
        if name == "min":
            return self.s_star, self.lambda_min
        return self.lambda_kse[float(name[:-2])]

    def to_dict(self):
        return {
            "s_star": self.s_star,
            "lambda_min": self.lambda_min,
            "cv_min": self.cv_min,
            "se_min": self.se_min,
            "lambda_kse": {
                _k_label(k): {"S": rank, "lambda": lam} for k, (rank, lam) in self.lambda_kse.items()
            },
            "thresholds": {_k_label(k): value for k, value in self.thresholds.items()},
            "per_rank": {str(rank): info for rank, info in self.per_rank.items()},
        }


def _k_label(k):
    return f"{int(k)}SE" if float(k).is_integer() else f"{k}SE"


def _largest_lambda(mean, lambdas, ranks, allowed, threshold):
    """
    Largest lambda (then smallest rank) among allowed ranks with mean <= threshold.
    """
    best = None
    for i, rank in enumerate(ranks):
        if not allowed(rank):
            continue
        for j in np.flatnonzero(mean[i] <= threshold):
            key = (lambdas[j], -rank)
            if best is None or key > best[0]:
                best = (key, rank, float(lambdas[j]))
    if best is None:
        raise EmptyFeasibleSet("No grid cell lies below the CV threshold.", threshold=threshold)
    return best[1], best[2]


def select_models(grid, ks=(1, 2, 3)):
    """
    Global CV minimum plus the kSE choices restricted to ranks <= S*.

    Ties at the minimum go to the larger lambda, then the smaller rank. For
    each k the threshold is CV(lambda*, S*) + k SE(lambda*, S*). Per rank,
    the same rule is applied around that rank's own minimum.

    Args:
        grid (CVGrid): Cross-validation results; NaN cells are ignored.
        ks (list[float]): Multipliers k >= 0.
    """
    mean = np.where(np.isnan(grid.cv_mean), np.inf, grid.cv_mean)
    se = grid.cv_se
    lambdas = np.asarray(grid.lambdas, dtype=float)
    ranks = list(grid.ranks)
    if not np.isfinite(mean).any():
        raise EmptyFeasibleSet("Every cross-validation cell failed.")

    best = mean.min()
    tied = best + TIE_TOLERANCE * (1.0 + abs(best))
    s_star, lambda_min = _largest_lambda(mean, lambdas, ranks, lambda rank: True, tied)
    i_star = ranks.index(s_star)
    j_star = int(np.flatnonzero(lambdas == lambda_min)[0])
    cv_min = float(mean[i_star, j_star])
    se_min = float(se[i_star, j_star])

    result = SelectionResult(s_star=s_star, lambda_min=lambda_min, cv_min=cv_min, se_min=se_min)
    for k in ks:
        k = float(k)
        threshold = cv_min + k * se_min if k > 0 else tied
        result.thresholds[k] = float(threshold)
        result.lambda_kse[k] = _largest_lambda(
            mean, lambdas, ranks, lambda rank: rank <= s_star, threshold
        )

    for i, rank in enumerate(ranks):
        if not np.isfinite(mean[i]).any():
            continue
        rank_best = mean[i].min()
        rank_tied = rank_best + TIE_TOLERANCE * (1.0 + abs(rank_best))
        j_min = int(np.flatnonzero(mean[i] <= rank_tied)[-1])
        info = {
            "lambda_min": float(lambdas[j_min]),
            "ape": float(mean[i, j_min]),
            "se": float(se[i, j_min]),
            "ape_per_pair": float(grid.pair_mean[i, j_min]),
            "lambda_kse": {},
        }
        for k in ks:
            threshold = mean[i, j_min] + float(k) * se[i, j_min] if k > 0 else rank_tied
            j_k = int(np.flatnonzero(mean[i] <= threshold)[-1])
            info["lambda_kse"][_k_label(float(k))] = float(lambdas[j_k])
        result.per_rank[rank] = info
    return result


def count_parameters(predictors, responses, rank, observed_categories=None):
    """
    Number of free parameters of a fitted model:
    (P + R - S) S + sum over discrete predictors (C_p - 2)
    + one intercept per numeric or binary response
    + sum over ordinal responses (C_r - 1).

    Args:
        predictors (list[VariableSchema]): Predictor schemas.
        responses (list[VariableSchema]): Response schemas.
        rank (int): Rank S.
        observed_categories (dict, optional): Name -> category count actually
            observed, used in place of the declared count.
    """
    P = len(predictors)
    R = len(responses)
    if not 1 <= rank <= min(P, R):
        raise DimensionMismatch(f"Rank {rank} must lie between 1 and min(P, R) = {min(P, R)}.")
    counts = observed_categories or {}

    def categories(schema):
        return counts.get(schema.name, schema.n_categories)

    K = (P + R - rank) * rank
    K += sum(categories(schema) - 2 for schema in predictors if schema.is_discrete)
    K += sum(1 for schema in responses if schema.kind in ("numeric", "binary"))
    K += sum(categories(schema) - 1 for schema in responses if schema.kind == "ordinal")
    return K
