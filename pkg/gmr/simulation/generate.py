from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from gmr.lib.data import MixedDataset, VariableSchema

N_INFORMATIVE_NUMERIC = 5
N_INFORMATIVE_BINARY = 3
N_INFORMATIVE_ORDINAL = 2
N_INFORMATIVE = N_INFORMATIVE_NUMERIC + N_INFORMATIVE_BINARY + N_INFORMATIVE_ORDINAL
TRUE_RANK = 2
ORDINAL_LEVELS = ("1", "2", "3", "4")
QUARTILE_CUTS = norm.ppf([0.25, 0.5, 0.75])


@dataclass(frozen=True)
class Scenario:
    """
    One simulation setting.

    Args:
        n (int): Sample size.
        noise (int): Number of uninformative predictors.
        responses (int): Number of responses R, split evenly over numeric,
            binary and ordinal.
        coefficient_range (tuple): Magnitude range of the informative rows of B.
        ordinal_thresholds (tuple): Thresholds of the ordinal responses.
    """

    n: int
    noise: int
    responses: int
    coefficient_range: Tuple[float, float] = (0.5, 1.0)
    ordinal_thresholds: Tuple[float, ...] = field(default=(-2.0, 0.0, 2.0))

    @property
    def n_predictors(self):
        return N_INFORMATIVE + self.noise

    @property
    def label(self):
        return f"n={self.n},noise={self.noise},R={self.responses}"


def _quartile_codes(rng, n):
    return 1 + np.searchsorted(QUARTILE_CUTS, rng.standard_normal(n))


def _standardize(column):
    column = np.asarray(column, dtype=float)
    return (column - column.mean()) / column.std(ddof=1)


def response_kinds(n_responses):
    """
    Kinds of R responses: the first third numeric, then binary, then ordinal.
    """
    third = n_responses // 3
    n_numeric = n_responses - 2 * third
    return ["numeric"] * n_numeric + ["binary"] * third + ["ordinal"] * third


def generate_dataset(scenario: Scenario, seed):
    """
    Draw a mixed dataset with a known sparse rank-2 coefficient matrix.

    The first 10 predictors are informative (5 standard normal, 3
    Bernoulli(0.5), 2 quartile-cut four-level ordinals). The remaining ones
    are noise: half standard normal, half quartile-cut ordinals.

    Args:
        scenario (Scenario): Sizes and generation constants.
        seed (int): Replicate seed.

    Returns:
        tuple: (MixedDataset, true_support, truth) where truth holds B, V and
        the predictor kinds.
    """
    rng = np.random.default_rng(seed)
    n = scenario.n
    n_noise_numeric = scenario.noise // 2
    n_noise_ordinal = scenario.noise - n_noise_numeric

    kinds = (
        ["numeric"] * N_INFORMATIVE_NUMERIC
        + ["binary"] * N_INFORMATIVE_BINARY
        + ["ordinal"] * N_INFORMATIVE_ORDINAL
        + ["numeric"] * n_noise_numeric
        + ["ordinal"] * n_noise_ordinal
    )
    predictors = []
    X_raw = {}
    for p, kind in enumerate(kinds):
        name = f"x{p + 1:03d}"
        if kind == "numeric":
            predictors.append(VariableSchema(name, "numeric"))
            X_raw[name] = rng.standard_normal(n)
        elif kind == "binary":
            predictors.append(VariableSchema(name, "binary", ("0", "1")))
            X_raw[name] = 1 + (rng.random(n) < 0.5).astype(int)
        else:
            predictors.append(VariableSchema(name, "ordinal", ORDINAL_LEVELS))
            X_raw[name] = _quartile_codes(rng, n)

    P = len(kinds)
    low, high = scenario.coefficient_range
    B = np.zeros((P, TRUE_RANK))
    magnitude = rng.uniform(low, high, size=(N_INFORMATIVE, TRUE_RANK))
    sign = rng.choice([-1.0, 1.0], size=(N_INFORMATIVE, TRUE_RANK))
    B[:N_INFORMATIVE] = sign * magnitude
    V, _ = np.linalg.qr(rng.standard_normal((scenario.responses, TRUE_RANK)))

    Phi = np.column_stack([_standardize(X_raw[schema.name]) for schema in predictors])
    Theta = Phi @ B @ V.T

    responses = []
    Y = np.empty((n, scenario.responses))
    thresholds = np.asarray(scenario.ordinal_thresholds, dtype=float)
    levels = tuple(str(c) for c in range(1, thresholds.size + 2))
    for r, kind in enumerate(response_kinds(scenario.responses)):
        name = f"y{r + 1:02d}"
        theta = Theta[:, r]
        if kind == "numeric":
            responses.append(VariableSchema(name, "numeric", role="response"))
            Y[:, r] = theta + rng.standard_normal(n)
        elif kind == "binary":
            responses.append(VariableSchema(name, "binary", ("0", "1"), role="response"))
            Y[:, r] = (rng.random(n) < expit(theta)).astype(float)
        else:
            responses.append(VariableSchema(name, "ordinal", levels, role="response"))
            latent = theta + rng.logistic(size=n)
            Y[:, r] = 1 + (thresholds[None, :] < latent[:, None]).sum(axis=1)

    true_support = np.zeros(P, dtype=bool)
    true_support[:N_INFORMATIVE] = True
    dataset = MixedDataset(predictors=predictors, responses=responses, X_raw=X_raw, Y=Y)
    truth = {"B": B, "V": V, "kinds": kinds}
    return dataset, true_support, truth


def _rates(selected, true_support):
    tp = int(np.sum(selected & true_support))
    fp = int(np.sum(selected & ~true_support))
    fn = int(np.sum(~selected & true_support))
    tdr = tp / (tp + fn) if tp + fn else 0.0
    fdr = fp / (tp + fp) if tp + fp else 0.0
    return tdr, fdr, tp, fp, fn


def selection_metrics(B_hat, true_support, threshold=0.01, kinds=None):
    """
    True and false discovery rates of predictor selection.

    A predictor is selected iff max_s |b_ps| > threshold. FDR is 0 when
    nothing is selected. With kinds given, rates are also reported per
    predictor kind.

    Args:
        B_hat (np.ndarray): Estimated P x S coefficients.
        true_support (np.ndarray): Boolean informative mask.
        threshold (float): Selection threshold.
        kinds (list[str], optional): Predictor kinds for the breakdown.
    """
    B_hat = np.asarray(B_hat, dtype=float)
    true_support = np.asarray(true_support, dtype=bool)
    if B_hat.ndim == 1:
        B_hat = B_hat[:, None]
    selected = (
        np.abs(B_hat).max(axis=1) > threshold
        if B_hat.shape[1]
        else np.zeros(B_hat.shape[0], dtype=bool)
    )
    tdr, fdr, tp, fp, fn = _rates(selected, true_support)
    metrics = {"tdr": tdr, "fdr": fdr, "tp": tp, "fp": fp, "fn": fn, "selected": int(selected.sum())}
    if kinds is not None:
        kinds = np.asarray(kinds)
        for kind in ("numeric", "binary", "ordinal"):
            mask = kinds == kind
            if not mask.any():
                continue
            kind_tdr, kind_fdr, *_ = _rates(selected[mask], true_support[mask])
            metrics[f"tdr_{kind}"] = kind_tdr if true_support[mask].any() else np.nan
            metrics[f"fdr_{kind}"] = kind_fdr
    return metrics
