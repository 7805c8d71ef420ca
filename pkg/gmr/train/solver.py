import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.special import logit

from gmr.configs.config import Config
from gmr.lib.algorithm.likelihood import (
    ResponseFamilyParams,
    canonical_params,
    gradient_matrix,
    loss_breakdown,
    majorization_constant,
    response_loss,
    working_response,
)
from gmr.lib.algorithm.penalty import (
    PenaltySpec,
    majorization_diagonal,
    penalty_value,
)
from gmr.lib.algorithm.scaling import PredictorTransform, apply_quantification
from gmr.lib.algorithm.updates import (
    SIGMA2_FLOOR,
    initial_thresholds,
    update_B,
    update_intercepts,
    update_quantification,
    update_sigma2,
    update_thresholds,
    update_V,
)
from gmr.lib.data import MixedDataset, VariableSchema
from gmr.lib.errors import (
    DegenerateQuantification,
    DegenerateSVD,
    DimensionMismatch,
    NonDecreasingLoss,
)
from gmr.train.utils import relative_decrease

logger = logging.getLogger(__name__)

PENALTY_KEYS = ("lambda1", "lambda2", "lambda3", "epsilon")
MARGINAL_CLIP = 1e-3


@dataclass
class FitConfig:
    """
    Settings of a single fit.

    Args:
        rank (int): Number of latent dimensions S.
        penalty (PenaltySpec): Penalty weights.
        max_outer_iters (int): Cap on outer block-relaxation iterations.
        rel_tolerance (float): Stop once the relative decrease falls below it.
        seed (int): Seed of the random initialization.
        threshold_update_period (int): Outer iterations between threshold updates.
        zero_tolerance (float): |b| below this is stored as an exact zero.
        dense_limit (int): Largest P*S solved by Cholesky; larger uses CG.
        strict_descent (bool): Raise NonDecreasingLoss on an increasing step.
        descent_slack (float): Absolute per-step increase tolerated before that.
    """

    rank: int = 2
    penalty: PenaltySpec = field(default_factory=PenaltySpec)
    max_outer_iters: int = 2000
    rel_tolerance: float = 1e-8
    seed: int = 0
    threshold_update_period: int = 1
    zero_tolerance: float = 1e-8
    dense_limit: int = 5000
    strict_descent: bool = True
    descent_slack: float = 1e-10

    @classmethod
    def from_dict(cls, record):
        record = dict(record)
        penalty = record.pop("penalty", None)
        lambdas = {key: record.pop(key) for key in PENALTY_KEYS if key in record}
        if penalty is None:
            penalty = PenaltySpec(**{k: float(v) for k, v in lambdas.items()})
        elif isinstance(penalty, dict):
            penalty = PenaltySpec.from_dict(penalty)
        known = {name for name in cls.__dataclass_fields__ if name != "penalty"}
        return cls(penalty=penalty, **{k: v for k, v in record.items() if k in known})

    @classmethod
    def defaults(cls, **overrides):
        record = Config().fit
        record.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(record)

    def to_dict(self):
        return {
            "rank": self.rank,
            "penalty": self.penalty.to_dict(),
            "max_outer_iters": self.max_outer_iters,
            "rel_tolerance": self.rel_tolerance,
            "seed": self.seed,
            "threshold_update_period": self.threshold_update_period,
            "zero_tolerance": self.zero_tolerance,
            "dense_limit": self.dense_limit,
            "strict_descent": self.strict_descent,
            "descent_slack": self.descent_slack,
        }


@dataclass
class ModelFit:
    """
    A fitted model: coefficients, loadings, intercepts, family parameters,
    the predictor transform, and the convergence record.
    """

    predictors: List[VariableSchema]
    responses: List[VariableSchema]
    transform: PredictorTransform
    B: np.ndarray
    V: np.ndarray
    m: np.ndarray
    sigma2: Optional[float]
    thresholds: Dict[int, np.ndarray]
    config: FitConfig
    trace: List[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    n_rows: int = 0

    @property
    def A(self):
        return self.B @ self.V.T

    @property
    def kinds(self):
        return [schema.kind for schema in self.responses]

    @property
    def family(self):
        return ResponseFamilyParams(sigma2=self.sigma2, thresholds=self.thresholds)

    @property
    def quantifications(self):
        return self.transform.quantifications

    def active_predictors(self, threshold):
        """
        Predictors with max_s |b_ps| above the selection threshold.
        """
        if self.B.shape[1] == 0:
            return np.zeros(self.B.shape[0], dtype=bool)
        return np.abs(self.B).max(axis=1) > threshold

    def theta(self, X_raw, unseen="error"):
        """
        Canonical parameters of raw predictor rows.
        """
        transformed = self.transform.transform_columns(X_raw, unseen=unseen)
        return canonical_params(transformed.Phi, self.B, self.V, self.m), transformed.unseen

    def loss(self, dataset: MixedDataset, unseen="error"):
        """
        Per-response negative log-likelihood of a dataset under this model.
        """
        Theta, unseen_count = self.theta(dataset.X_raw, unseen=unseen)
        breakdown = loss_breakdown(
            dataset.Y, Theta, self.kinds, self.family, penalty_value(self.B, self.config.penalty)
        )
        return breakdown, unseen_count

    def to_dict(self):
        return {
            "schema": [schema.to_dict() for schema in self.predictors + self.responses],
            "transform": self.transform.to_dict(),
            "B": self.B.tolist(),
            "V": self.V.tolist(),
            "m": self.m.tolist(),
            "sigma2": self.sigma2,
            "thresholds": {str(r): t.tolist() for r, t in self.thresholds.items()},
            "config": self.config.to_dict(),
            "trace": [float(value) for value in self.trace],
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "n_rows": int(self.n_rows),
        }

    @classmethod
    def from_dict(cls, record):
        schemas = [VariableSchema.from_dict(item) for item in record["schema"]]
        predictors = [schema for schema in schemas if schema.role == "predictor"]
        responses = [schema for schema in schemas if schema.role == "response"]
        rank = int(record["config"]["rank"])
        return cls(
            predictors=predictors,
            responses=responses,
            transform=PredictorTransform.from_dict(predictors, record["transform"]),
            B=np.asarray(record["B"], dtype=float).reshape(len(predictors), rank),
            V=np.asarray(record["V"], dtype=float).reshape(len(responses), rank),
            m=np.asarray(record["m"], dtype=float),
            sigma2=record.get("sigma2"),
            thresholds={int(r): np.asarray(t, dtype=float) for r, t in record["thresholds"].items()},
            config=FitConfig.from_dict(record["config"]),
            trace=list(record.get("trace", [])),
            converged=bool(record.get("converged", False)),
            iterations=int(record.get("iterations", 0)),
            n_rows=int(record.get("n_rows", 0)),
        )


class _State:
    """
    Mutable parameter blocks of a running fit.
    """

    def __init__(self, Phi, B, V, m, family):
        self.Phi = Phi
        self.B = B
        self.V = V
        self.m = m
        self.family = family


def _initial_state(dataset, config, transform, rng):
    kinds = dataset.response_kinds
    Y = dataset.Y
    N, R = Y.shape
    P = len(dataset.predictors)
    Phi = transform.transform(dataset).Phi

    m = np.zeros(R)
    thresholds = {}
    numeric_columns = [r for r, kind in enumerate(kinds) if kind == "numeric"]
    for r, schema in enumerate(dataset.responses):
        if schema.kind == "numeric":
            m[r] = Y[:, r].mean()
        elif schema.kind == "binary":
            m[r] = logit(np.clip(Y[:, r].mean(), MARGINAL_CLIP, 1.0 - MARGINAL_CLIP))
        else:
            thresholds[r] = initial_thresholds(Y[:, r], schema.n_categories)
    sigma2 = None
    if numeric_columns:
        centered = Y[:, numeric_columns] - m[numeric_columns]
        sigma2 = max(float((centered**2).sum()) / max(centered.size - 1, 1), SIGMA2_FLOOR)
    family = ResponseFamilyParams(sigma2=sigma2, thresholds=thresholds).validate(kinds)

    B = 0.01 * rng.standard_normal((P, config.rank))
    Theta0 = np.tile(m, (N, 1))
    kappa = majorization_constant(kinds, sigma2)
    Z_tilde = working_response(Theta0, gradient_matrix(Y, Theta0, kinds, family), kappa) - m
    cross = Phi.T @ Z_tilde
    _, singular, Wt = np.linalg.svd(cross, full_matrices=False)
    if singular.size and singular.max() > 0:
        V = Wt[: config.rank].T.copy()
    else:
        V = np.eye(R, config.rank)
    return _State(Phi, B, V, m, family)


def _objective(state, dataset, penalty):
    Theta = canonical_params(state.Phi, state.B, state.V, state.m)
    breakdown = loss_breakdown(
        dataset.Y, Theta, dataset.response_kinds, state.family, penalty_value(state.B, penalty)
    )
    return breakdown.total


def _update_sigma2(state, dataset):
    kinds = dataset.response_kinds
    numeric_columns = [r for r, kind in enumerate(kinds) if kind == "numeric"]
    if not numeric_columns:
        return
    Theta = canonical_params(state.Phi, state.B, state.V, state.m)
    E = dataset.Y[:, numeric_columns] - Theta[:, numeric_columns]

    def numeric_loss(sigma2):
        return sum(
            response_loss("numeric", dataset.Y[:, r], Theta[:, r], sigma2=sigma2)
            for r in numeric_columns
        )

    candidate = update_sigma2(E)
    if numeric_loss(candidate) > numeric_loss(state.family.sigma2):
        candidate = max(float((E**2).sum()) / E.size, SIGMA2_FLOOR)
    state.family.sigma2 = candidate


def _update_thresholds(state, dataset):
    Theta = canonical_params(state.Phi, state.B, state.V, state.m)
    for r, schema in enumerate(dataset.responses):
        if schema.kind == "ordinal":
            state.family.thresholds[r] = update_thresholds(
                dataset.Y[:, r],
                Theta[:, r],
                schema.n_categories,
                current=state.family.thresholds[r],
            )


def _canonicalize(B, V, Phi):
    """
    Order latent dimensions by decreasing norm of the columns of Phi B and make
    the largest-magnitude entry of every V column positive.
    """
    order = np.argsort(-np.linalg.norm(Phi @ B, axis=0), kind="stable")
    B = B[:, order].copy()
    V = V[:, order].copy()
    for s in range(V.shape[1]):
        if V[np.argmax(np.abs(V[:, s])), s] < 0:
            V[:, s] *= -1.0
            B[:, s] *= -1.0
    return B, V


def fit(dataset: MixedDataset, config: FitConfig):
    """
    Fit the penalized reduced-rank model by block relaxation.

    Each outer iteration builds the working matrix Z from the current
    canonical parameters and then updates, in turn, the intercepts m, the
    coefficients B, the loadings V, the quantifications of each discrete
    predictor, the numeric variance and (periodically) the ordinal
    thresholds. Iteration stops when the relative decrease of the penalized
    negative log-likelihood falls below config.rel_tolerance.

    Args:
        dataset (MixedDataset): Complete training data.
        config (FitConfig): Rank, penalty and iteration settings.
    """
    P = len(dataset.predictors)
    R = len(dataset.responses)
    if not 1 <= config.rank <= min(P, R):
        raise DimensionMismatch(
            f"Rank {config.rank} must lie between 1 and min(P, R) = {min(P, R)}.",
            rank=config.rank,
        )
    kinds = dataset.response_kinds
    rng = np.random.default_rng(config.seed)
    transform = PredictorTransform(dataset.predictors).initialize(dataset, rng)
    indicators = transform.indicators(dataset)
    state = _initial_state(dataset, config, transform, rng)
    penalty = config.penalty

    current = _objective(state, dataset, penalty)
    trace = [current]
    converged = False
    iteration = 0
    logger.info(
        "Fitting rank %d with lambda1=%g lambda2=%g lambda3=%g on %d rows.",
        config.rank, penalty.lambda1, penalty.lambda2, penalty.lambda3, dataset.n_rows,
    )

    for iteration in range(1, config.max_outer_iters + 1):
        Theta = canonical_params(state.Phi, state.B, state.V, state.m)
        kappa = majorization_constant(kinds, state.family.sigma2)
        Xi = gradient_matrix(dataset.Y, Theta, kinds, state.family)
        Z = working_response(Theta, Xi, kappa)

        state.m = update_intercepts(Z - state.Phi @ state.B @ state.V.T, kinds)
        Z_tilde = Z - state.m

        D = majorization_diagonal(state.B, penalty)
        state.B = update_B(
            Z_tilde, state.Phi, state.V, D, kappa, B0=state.B, dense_limit=config.dense_limit
        )

        try:
            state.V = update_V(Z_tilde, state.Phi, state.B)
        except DegenerateSVD:
            logger.debug("Iteration %d: B is zero, keeping V.", iteration)

        A = state.B @ state.V.T
        for p, schema in enumerate(dataset.predictors):
            if not schema.is_discrete:
                continue
            indicator = indicators[schema.name]
            try:
                quantification = update_quantification(
                    Z_tilde, state.Phi, A, p, indicator, transform.quantifications[schema.name]
                )
            except DegenerateQuantification:
                logger.debug("Iteration %d: keeping quantification of %s.", iteration, schema.name)
                quantification = None
            if quantification is not None:
                transform.quantifications[schema.name] = quantification
                state.Phi[:, p] = apply_quantification(indicator, quantification)

        _update_sigma2(state, dataset)
        if iteration % config.threshold_update_period == 0:
            _update_thresholds(state, dataset)

        previous = current
        current = _objective(state, dataset, penalty)
        trace.append(current)
        if current - previous > config.descent_slack:
            message = f"Penalized loss rose from {previous:.12g} to {current:.12g} at iteration {iteration}."
            if config.strict_descent:
                raise NonDecreasingLoss(message, iteration=iteration)
            logger.warning(message)
        if relative_decrease(previous, current) < config.rel_tolerance:
            converged = True
            break

    if not converged:
        logger.warning("No convergence after %d outer iterations.", iteration)
    else:
        logger.info("Converged after %d iterations, loss %.6f.", iteration, current)

    B = np.where(np.abs(state.B) < config.zero_tolerance, 0.0, state.B)
    B, V = _canonicalize(B, state.V, state.Phi)
    return ModelFit(
        predictors=list(dataset.predictors),
        responses=list(dataset.responses),
        transform=transform,
        B=B,
        V=V,
        m=state.m,
        sigma2=state.family.sigma2,
        thresholds=state.family.thresholds,
        config=config,
        trace=trace,
        converged=converged,
        iterations=iteration,
        n_rows=dataset.n_rows,
    )
