from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.special import expit, log_expit

from gmr.lib.errors import DimensionMismatch, InvalidFamily

PROBABILITY_FLOOR = 1e-12
LOG_FLOOR = np.log(PROBABILITY_FLOOR)

# Upper bounds of the second derivative of the per-entry loss in theta.
LOGISTIC_CURVATURE = 0.25
ORDINAL_CURVATURE = 0.5


@dataclass
class ResponseFamilyParams:
    """
    Nuisance parameters of the response families.

    Args:
        sigma2 (float, optional): Shared variance of the numeric responses.
        thresholds (dict): Response index to strictly increasing thresholds.
    """

    sigma2: Optional[float] = None
    thresholds: Dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.thresholds = {
            int(r): np.asarray(t, dtype=float) for r, t in self.thresholds.items()
        }

    def validate(self, kinds):
        if "numeric" in kinds:
            check_sigma2(self.sigma2)
        for r, kind in enumerate(kinds):
            if kind == "ordinal":
                if r not in self.thresholds:
                    raise InvalidFamily(f"Ordinal response {r} has no thresholds.")
                check_thresholds(self.thresholds[r])
        return self


@dataclass
class LossBreakdown:
    total: float
    per_response: np.ndarray
    structural: float
    penalty: float


def check_sigma2(sigma2):
    if sigma2 is None or not np.isfinite(sigma2) or sigma2 <= 0:
        raise InvalidFamily(f"sigma2 must be positive, got {sigma2}.")


def check_thresholds(thresholds):
    thresholds = np.asarray(thresholds, dtype=float)
    if not np.all(np.isfinite(thresholds)) or np.any(np.diff(thresholds) <= 0):
        raise InvalidFamily("Ordinal thresholds must be finite and strictly increasing.")


def canonical_params(Phi, B, V, m):
    """
    Canonical parameters Theta = 1 m' + Phi B V'.

    Args:
        Phi (np.ndarray): N x P transformed predictors.
        B (np.ndarray): P x S coefficients.
        V (np.ndarray): R x S loadings.
        m (np.ndarray): Length R intercepts (0 for ordinal responses).
    """
    Phi, B, V, m = (np.asarray(a, dtype=float) for a in (Phi, B, V, m))
    if Phi.shape[1] != B.shape[0] or B.shape[1] != V.shape[1] or V.shape[0] != m.shape[0]:
        raise DimensionMismatch(
            f"Cannot combine Phi {Phi.shape}, B {B.shape}, V {V.shape} and m {m.shape}."
        )
    return m[None, :] + Phi @ (B @ V.T)


def _ordinal_bounds(y, thresholds):
    extended = np.concatenate(([-np.inf], thresholds, [np.inf]))
    codes = np.asarray(y).astype(int)
    return extended[codes], extended[codes - 1]


def _ordinal_log_mass(y, theta, thresholds):
    # log(F(a) - F(b)) = log F(a) + log(1 - F(b)) + log(1 - exp(b - a))
    upper, lower = _ordinal_bounds(y, thresholds)
    a = upper - theta
    b = lower - theta
    with np.errstate(invalid="ignore"):
        log_mass = log_expit(a) + log_expit(-b) + np.log(-np.expm1(b - a))
    return np.maximum(log_mass, LOG_FLOOR)


def response_loss(kind, y, theta, sigma2=None, thresholds=None):
    """
    Summed negative log-likelihood of one response column.

    Args:
        kind (str): numeric, binary or ordinal.
        y (np.ndarray): Observed values (0/1 for binary, codes for ordinal).
        theta (np.ndarray): Canonical parameters of the column.
        sigma2 (float, optional): Variance of numeric responses.
        thresholds (np.ndarray, optional): Thresholds of an ordinal response.
    """
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if kind == "numeric":
        check_sigma2(sigma2)
        residual = y - theta
        return float(
            residual @ residual / (2.0 * sigma2)
            + 0.5 * y.shape[0] * np.log(2.0 * np.pi * sigma2)
        )
    if kind == "binary":
        q = 2.0 * y - 1.0
        return float(-log_expit(q * theta).sum())
    if kind == "ordinal":
        check_thresholds(thresholds)
        return float(-_ordinal_log_mass(y, theta, thresholds).sum())
    raise InvalidFamily(f"Unknown response kind '{kind}'.")


def loss_gradient(kind, y, theta, sigma2=None, thresholds=None):
    """
    Derivative of each row's loss with respect to its canonical parameter.
    """
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if kind == "numeric":
        check_sigma2(sigma2)
        return (theta - y) / sigma2
    if kind == "binary":
        q = 2.0 * y - 1.0
        return -q * expit(-q * theta)
    if kind == "ordinal":
        check_thresholds(thresholds)
        upper, lower = _ordinal_bounds(y, thresholds)
        # d/dtheta of -log(F(a) - F(b)) reduces to 1 - F(a) - F(b).
        return 1.0 - expit(upper - theta) - expit(lower - theta)
    raise InvalidFamily(f"Unknown response kind '{kind}'.")


def ordinal_category_probs(theta, thresholds):
    """
    Cumulative-logit category probabilities, P(y <= c) = F(t_c - theta).

    Args:
        theta (float or np.ndarray): Canonical parameter(s).
        thresholds (np.ndarray): Strictly increasing thresholds (length C - 1).

    Returns:
        np.ndarray: Length C vector, or N x C matrix for an array of theta.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    check_thresholds(thresholds)
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    cumulative = expit(thresholds[None, :] - theta_arr[:, None])
    n = theta_arr.shape[0]
    cumulative = np.hstack([np.zeros((n, 1)), cumulative, np.ones((n, 1))])
    probs = np.maximum(np.diff(cumulative, axis=1), PROBABILITY_FLOOR)
    # the mass added by flooring comes out of the modal category (>= 1/C)
    rows = np.arange(n)
    modal = np.argmax(probs, axis=1)
    probs[rows, modal] -= probs.sum(axis=1) - 1.0
    return probs[0] if np.ndim(theta) == 0 else probs


def predict_ordinal_category(theta, thresholds):
    """
    Category c with t_{c-1} <= theta < t_c; a theta equal to a threshold goes
    to the upper category.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    categories = np.searchsorted(thresholds, np.asarray(theta, dtype=float), side="right") + 1
    return int(categories) if np.ndim(theta) == 0 else categories


def majorization_constant(kinds, sigma2=None):
    """
    Uniform curvature bound kappa over all response entries.

    Logistic entries are bounded by 1/4, numeric ones by 1/sigma2 and
    cumulative-logit ones by 1/2.
    """
    kappa = LOGISTIC_CURVATURE
    if "numeric" in kinds:
        check_sigma2(sigma2)
        kappa = max(kappa, 1.0 / sigma2)
    if "ordinal" in kinds:
        kappa = max(kappa, ORDINAL_CURVATURE)
    return kappa


def working_response(Theta, Xi, kappa):
    """
    MM working matrix Z = Theta - Xi / kappa.
    """
    return np.asarray(Theta, dtype=float) - np.asarray(Xi, dtype=float) / kappa


def per_response_losses(Y, Theta, kinds, family: ResponseFamilyParams):
    return np.array(
        [
            response_loss(
                kind, Y[:, r], Theta[:, r], family.sigma2, family.thresholds.get(r)
            )
            for r, kind in enumerate(kinds)
        ]
    )


def gradient_matrix(Y, Theta, kinds, family: ResponseFamilyParams):
    Xi = np.empty_like(Theta, dtype=float)
    for r, kind in enumerate(kinds):
        Xi[:, r] = loss_gradient(
            kind, Y[:, r], Theta[:, r], family.sigma2, family.thresholds.get(r)
        )
    return Xi


def loss_breakdown(Y, Theta, kinds, family, penalty=0.0):
    per_response = per_response_losses(Y, Theta, kinds, family)
    structural = float(per_response.sum())
    return LossBreakdown(
        total=structural + float(penalty),
        per_response=per_response,
        structural=structural,
        penalty=float(penalty),
    )
