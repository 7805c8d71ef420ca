import numpy as np
from sklearn.isotonic import isotonic_regression


def monotone_regression(values, weights=None):
    """
    Weighted least-squares projection onto non-decreasing vectors
    (pool-adjacent-violators).

    Args:
        values (np.ndarray): Values to project, in category order.
        weights (np.ndarray, optional): Positive weights. Defaults to ones.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return values.copy()
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if np.any(weights <= 0):
            raise ValueError("Monotone regression weights must be positive.")
    return isotonic_regression(values, sample_weight=weights, increasing=True)
