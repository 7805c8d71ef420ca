from dataclasses import dataclass

import numpy as np

from gmr.lib.errors import InvalidPenaltyCombination

EPSILON = 1e-10


@dataclass(frozen=True)
class PenaltySpec:
    """
    Penalty weights: lambda1 (lasso), lambda2 (ridge), lambda3 (group lasso).

    Lasso and group lasso are mutually exclusive; ridge combines with either.
    """

    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda3: float = 0.0
    epsilon: float = EPSILON

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise InvalidPenaltyCombination(f"{name} must be a finite non-negative number.")
        if self.lambda1 > 0 and self.lambda3 > 0:
            raise InvalidPenaltyCombination("Lasso and group lasso cannot be combined.")
        if self.epsilon <= 0:
            raise InvalidPenaltyCombination("epsilon must be positive.")

    @classmethod
    def from_kind(cls, kind, strength, ridge=0.0, epsilon=EPSILON):
        """
        Build the spec used along a cross-validation grid.

        Args:
            kind (str): lasso, group or ridge.
            strength (float): Weight of the chosen penalty.
            ridge (float): Companion ridge weight for lasso or group.
        """
        if kind == "lasso":
            return cls(lambda1=strength, lambda2=ridge, epsilon=epsilon)
        if kind == "group":
            return cls(lambda3=strength, lambda2=ridge, epsilon=epsilon)
        if kind == "ridge":
            return cls(lambda2=strength + ridge, epsilon=epsilon)
        raise InvalidPenaltyCombination(f"Unknown penalty kind '{kind}'.")

    def to_dict(self):
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda3": self.lambda3,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, record):
        return cls(**{key: float(value) for key, value in record.items()})


def penalty_value(B, spec: PenaltySpec):
    """
    P(B) = lambda1 sum|b| + lambda2 sum b^2 + lambda3 sum_p ||b_p||.
    """
    B = np.asarray(B, dtype=float)
    return float(
        spec.lambda1 * np.abs(B).sum()
        + spec.lambda2 * (B**2).sum()
        + spec.lambda3 * np.linalg.norm(B, axis=1).sum()
    )


def majorization_diagonal(B0, spec: PenaltySpec):
    """
    Diagonal D of the quadratic majorizer of P at B0, returned as a P x S
    array; ravel(order="F") gives the entries in vec(B) order.
    """
    B0 = np.asarray(B0, dtype=float)
    D = np.full(B0.shape, spec.lambda2)
    if spec.lambda1 > 0:
        D += 0.5 * spec.lambda1 / np.maximum(np.abs(B0), spec.epsilon)
    if spec.lambda3 > 0:
        row_norms = np.linalg.norm(B0, axis=1, keepdims=True)
        D += 0.5 * spec.lambda3 / np.maximum(row_norms, spec.epsilon)
    return D


def majorizer_constant(B0, spec: PenaltySpec):
    """
    Constant c(B0) with vec(B0)' D vec(B0) + c(B0) = P(B0).
    """
    B0 = np.asarray(B0, dtype=float)
    D = majorization_diagonal(B0, spec)
    return penalty_value(B0, spec) - float((D * B0**2).sum())
