import inspect
import logging

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator, cg
from scipy.special import log_expit, logit

from gmr.lib.algorithm.likelihood import _ordinal_log_mass, response_loss
from gmr.lib.algorithm.monotone import monotone_regression
from gmr.lib.algorithm.scaling import Quantification, rescale_quantification
from gmr.lib.errors import (
    DegenerateSVD,
    DimensionMismatch,
    EmptyCategory,
    SingularSystem,
)

logger = logging.getLogger(__name__)

SIGMA2_FLOOR = 1e-8
THRESHOLD_GAP = 1e-3
CUMULATIVE_CLIP = 1e-6
SVD_TOLERANCE = 1e-14

# scipy renamed the relative tolerance of cg from tol to rtol.
_CG_RTOL = "rtol" if "rtol" in inspect.signature(cg).parameters else "tol"


def update_B(Z_tilde, Phi, V, D, kappa, B0=None, dense_limit=5000):
    """
    Minimize (kappa/2) ||Z~ - Phi B V'||^2 + vec(B)' D vec(B) over B.

    With V column-orthonormal the normal equations split into one P x P
    system per latent dimension s:
    (kappa Phi'Phi + 2 diag(D[:, s])) b_s = kappa Phi' Z~ v_s.

    Args:
        Z_tilde (np.ndarray): N x R centered working matrix.
        Phi (np.ndarray): N x P transformed predictors.
        V (np.ndarray): R x S loadings.
        D (np.ndarray): P x S majorization diagonal.
        kappa (float): Majorization constant.
        B0 (np.ndarray, optional): Starting point for the iterative solver.
        dense_limit (int): Largest P*S solved by Cholesky factorization.
    """
    P = Phi.shape[1]
    S = V.shape[1]
    if D.shape != (P, S) or Z_tilde.shape != (Phi.shape[0], V.shape[0]):
        raise DimensionMismatch("update_B received non-conformable blocks.")

    gram = kappa * (Phi.T @ Phi)
    rhs = kappa * (Phi.T @ (Z_tilde @ V))
    B = np.empty((P, S))
    for s in range(S):
        if P * S <= dense_limit:
            lhs = gram + np.diag(2.0 * D[:, s])
            try:
                factor = cho_factor(lhs, lower=True, check_finite=False)
            except LinAlgError:
                raise SingularSystem(
                    "Penalized normal equations are singular; add a ridge penalty.",
                    dimension=s,
                )
            B[:, s] = cho_solve(factor, rhs[:, s], check_finite=False)
        else:
            B[:, s] = _solve_cg(gram, 2.0 * D[:, s], rhs[:, s], None if B0 is None else B0[:, s])
    if not np.all(np.isfinite(B)):
        raise SingularSystem("Penalized normal equations produced non-finite coefficients.")
    return B


def _solve_cg(gram, diagonal, rhs, x0):
    operator = LinearOperator(
        gram.shape, matvec=lambda x: gram @ x + diagonal * x, dtype=float
    )
    solution, info = cg(operator, rhs, x0=x0, maxiter=10 * gram.shape[0], **{_CG_RTOL: 1e-12})
    if info < 0:
        raise SingularSystem("Conjugate gradients broke down on the B system.")
    if info > 0:
        logger.warning("Conjugate gradients stopped after %d iterations without converging.", info)
    return solution


def update_V(Z_tilde, Phi, B):
    """
    Column-orthonormal V minimizing ||Z~ - Phi B V'||^2 (orthogonal Procrustes).

    With the SVD B'Phi'Z~ = P Delta Q', the minimizer is V = Q P'.
    """
    M = B.T @ (Phi.T @ Z_tilde)
    P_, delta, Qt = np.linalg.svd(M, full_matrices=False)
    if delta.size == 0 or delta.max() <= SVD_TOLERANCE * max(1.0, np.abs(M).max()):
        raise DegenerateSVD("B'Phi'Z~ has no non-zero singular value.")
    return Qt.T @ P_.T


def update_intercepts(Z_residual, kinds):
    """
    Column means of the working residual Z - Phi B V'; 0 for ordinal responses.
    """
    m = np.asarray(Z_residual, dtype=float).mean(axis=0)
    m[[kind == "ordinal" for kind in kinds]] = 0.0
    return m


def update_sigma2(E):
    """
    Shared numeric variance, sum of squared residuals over N * R_N - 1.

    Args:
        E (np.ndarray): N x R_N residuals of the numeric responses.
    """
    E = np.asarray(E, dtype=float)
    dof = max(E.size - 1, 1)
    return max(float((E**2).sum()) / dof, SIGMA2_FLOOR)


def update_quantification(Z_tilde, Phi, A, p, indicator, current: Quantification):
    """
    Least-squares update of the quantifications of predictor p with the other
    columns of Phi held fixed.

    Returns None when row p of A is zero, in which case w_p stays as it is.

    Args:
        Z_tilde (np.ndarray): N x R centered working matrix.
        Phi (np.ndarray): N x P current transformed predictors.
        A (np.ndarray): P x R implied coefficients B V'.
        p (int): Column of the predictor in Phi.
        indicator (IndicatorMatrix): Coding of predictor p.
        current (Quantification): Current quantification of predictor p.
    """
    a_p = A[p]
    norm2 = float(a_p @ a_p)
    if norm2 <= 0.0:
        return None
    partial = Z_tilde - Phi @ A + np.outer(Phi[:, p], a_p)
    u = partial @ a_p / norm2
    counts = indicator.counts
    observed = counts > 0
    w = np.zeros(counts.shape[0])
    w[observed] = (indicator.G.T @ u)[observed] / counts[observed]
    if current.kind == "ordinal":
        w[observed] = monotone_regression(w[observed], counts[observed] * norm2)
    return rescale_quantification(w, indicator, current.kind)


def observed_categories(y, n_categories):
    counts = np.bincount(np.asarray(y, dtype=int), minlength=n_categories + 1)[1:]
    return counts > 0


def _collapse(y, observed):
    # rank of each observed code among the observed categories
    rank = np.cumsum(observed)
    return rank[np.asarray(y, dtype=int) - 1]


def expand_thresholds(tau, observed):
    """
    Spread thresholds estimated on the observed categories over all C - 1
    positions. Positions that do not split the observed categories are placed
    a small gap away from their neighbours.
    """
    n_categories = observed.shape[0]
    obs = np.flatnonzero(observed) + 1
    n_obs = obs.shape[0]
    split = np.array([np.sum(obs <= j) for j in range(1, n_categories)])
    t = np.full(n_categories - 1, np.nan)
    for k in range(1, n_obs):
        t[np.flatnonzero(split == k)[-1]] = tau[k - 1]
    for j in range(n_categories - 1):
        if split[j] == n_obs:
            t[j] = t[j - 1] + THRESHOLD_GAP
    for j in reversed(range(n_categories - 1)):
        if not np.isnan(t[j]):
            continue
        filled = np.flatnonzero(~np.isnan(t[:j]))
        if filled.size == 0:
            gap = THRESHOLD_GAP
        else:
            missing = j - filled[-1]
            gap = min(THRESHOLD_GAP, (t[j + 1] - t[filled[-1]]) / (missing + 1))
        t[j] = t[j + 1] - gap
    return t


def initial_thresholds(y, n_categories):
    """
    Thresholds from marginal cumulative frequencies, logit(P(y <= c)).
    """
    observed = observed_categories(y, n_categories)
    if observed.sum() < 2:
        raise EmptyCategory("An ordinal response needs at least two observed categories.")
    collapsed = _collapse(y, observed)
    n_obs = int(observed.sum())
    cumulative = np.array([np.mean(collapsed <= k) for k in range(1, n_obs)])
    cumulative = np.clip(cumulative, CUMULATIVE_CLIP, 1.0 - CUMULATIVE_CLIP)
    return expand_thresholds(logit(cumulative), observed)


def _unpack(x):
    return x[0] + np.concatenate(([0.0], np.cumsum(np.exp(x[1:]))))


def _pack(t):
    return np.concatenate(([t[0]], np.log(np.diff(t))))


def _threshold_objective(x, y, theta):
    t = _unpack(x)
    log_mass = _ordinal_log_mass(y, theta, t)
    extended = np.concatenate(([-np.inf], t, [np.inf]))
    codes = np.asarray(y, dtype=int)
    a = extended[codes] - theta
    b = extended[codes - 1] - theta
    with np.errstate(invalid="ignore", over="ignore"):
        # f(a) / pi and f(b) / pi, zero at infinite bounds
        upper = np.where(np.isfinite(a), np.exp(log_expit(a) + log_expit(-a) - log_mass), 0.0)
        lower = np.where(np.isfinite(b), np.exp(log_expit(b) + log_expit(-b) - log_mass), 0.0)
    K = t.shape[0]
    grad_t = np.zeros(K)
    inner_upper = codes <= K
    np.add.at(grad_t, codes[inner_upper] - 1, -upper[inner_upper])
    inner_lower = codes >= 2
    np.add.at(grad_t, codes[inner_lower] - 2, lower[inner_lower])
    grad = np.empty_like(x)
    grad[0] = grad_t.sum()
    if K > 1:
        tail = np.cumsum(grad_t[::-1])[::-1][1:]
        grad[1:] = np.exp(x[1:]) * tail
    return float(-log_mass.sum()), grad


def update_thresholds(y, theta, n_categories, current=None):
    """
    Minimize the cumulative-logit negative log-likelihood of one ordinal
    response over its thresholds with theta fixed.

    Categories without observations are merged for the estimation and their
    thresholds re-inserted afterwards. If current thresholds are given, the
    result is only accepted when it does not increase the loss.

    Args:
        y (np.ndarray): Category codes 1..C.
        theta (np.ndarray): Canonical parameters of the response.
        n_categories (int): Declared category count C.
        current (np.ndarray, optional): Thresholds before the update.
    """
    y = np.asarray(y, dtype=int)
    theta = np.asarray(theta, dtype=float)
    observed = observed_categories(y, n_categories)
    if observed.sum() < 2:
        raise EmptyCategory("An ordinal response needs at least two observed categories.")
    if not observed.all():
        logger.warning(
            "Ordinal response categories %s are empty; merging them for threshold estimation.",
            (np.flatnonzero(~observed) + 1).tolist(),
        )
    collapsed = _collapse(y, observed)
    n_obs = int(observed.sum())

    start = _initial_collapsed(collapsed, n_obs, theta)
    bounds = [(None, None)] + [(np.log(1e-10), None)] * (n_obs - 2)
    result = minimize(
        _threshold_objective,
        _pack(start),
        args=(collapsed, theta),
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"gtol": 1e-8, "ftol": 1e-15, "maxiter": 1000},
    )
    candidate = expand_thresholds(_unpack(result.x), observed)
    if current is None:
        return candidate
    current = np.asarray(current, dtype=float)
    if response_loss("ordinal", y, theta, thresholds=candidate) <= response_loss(
        "ordinal", y, theta, thresholds=current
    ):
        return candidate
    return current


def _initial_collapsed(collapsed, n_obs, theta):
    cumulative = np.array([np.mean(collapsed <= k) for k in range(1, n_obs)])
    cumulative = np.clip(cumulative, CUMULATIVE_CLIP, 1.0 - CUMULATIVE_CLIP)
    return logit(cumulative) + theta.mean()
