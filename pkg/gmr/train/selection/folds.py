import numpy as np

from gmr.lib.errors import DimensionMismatch


def make_folds(n_rows, folds, seed):
    """
    Split row indices into near-equal folds after a seeded shuffle.

    Args:
        n_rows (int): Number of rows N.
        folds (int): Number of folds V (at least 2).
        seed (int): Seed of the shuffle.

    Returns:
        list[np.ndarray]: Sorted held-out indices of each fold.
    """
    if folds < 2:
        raise DimensionMismatch(f"Cross-validation needs at least 2 folds, got {folds}.")
    if n_rows < folds:
        raise DimensionMismatch(f"Cannot split {n_rows} rows into {folds} folds.")
    permutation = np.random.default_rng(seed).permutation(n_rows)
    return [np.sort(part) for part in np.array_split(permutation, folds)]


def train_indices(n_rows, held_out):
    mask = np.ones(n_rows, dtype=bool)
    mask[held_out] = False
    return np.flatnonzero(mask)
