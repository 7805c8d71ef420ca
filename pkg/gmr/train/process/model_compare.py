import itertools

import numpy as np
import pandas as pd

from gmr.lib.errors import DimensionMismatch
from gmr.train.selection.select import count_parameters


def implied_coefficient_mse(fit_a, fit_b):
    """
    Mean squared difference between the implied coefficient matrices B V'
    of two fits over the same predictors and responses.
    """
    A_a = fit_a.A if hasattr(fit_a, "A") else np.asarray(fit_a, dtype=float)
    A_b = fit_b.A if hasattr(fit_b, "A") else np.asarray(fit_b, dtype=float)
    if A_a.shape != A_b.shape:
        raise DimensionMismatch(
            f"Implied coefficient matrices differ in shape: {A_a.shape} vs {A_b.shape}."
        )
    return float(np.mean((A_a - A_b) ** 2))


def compare_models(models, threshold=0.01):
    """
    Pairwise implied-coefficient MSE table and a complexity table (rank,
    parameter count K, informative predictors) for named models.

    Args:
        models (dict): Name -> ModelFit.
        threshold (float): Selection threshold on max_s |b_ps|.
    """
    names = list(models)
    mse = pd.DataFrame(np.zeros((len(names), len(names))), index=names, columns=names)
    for a, b in itertools.combinations(names, 2):
        value = implied_coefficient_mse(models[a], models[b])
        mse.loc[a, b] = mse.loc[b, a] = value

    complexity = pd.DataFrame(
        [
            {
                "model": name,
                "S": model.B.shape[1],
                "K": count_parameters(model.predictors, model.responses, model.B.shape[1]),
                "informative_predictors": int(model.active_predictors(threshold).sum()),
            }
            for name, model in models.items()
        ]
    )
    return mse, complexity
