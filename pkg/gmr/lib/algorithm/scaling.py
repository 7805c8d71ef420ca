import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from gmr.lib.errors import (
    ConstantColumn,
    DegenerateQuantification,
    DimensionMismatch,
    UnknownCategory,
)

logger = logging.getLogger(__name__)

# Relative floor below which a standard deviation counts as zero.
SD_FLOOR = 1e-12


@dataclass
class IndicatorMatrix:
    """
    One-hot coding G_p of a discrete column (N x C_p).
    """

    G: np.ndarray
    column_categories: tuple

    @property
    def counts(self):
        return self.G.sum(axis=0)

    @property
    def codes(self):
        return np.argmax(self.G, axis=1) + 1


@dataclass
class Quantification:
    """
    Category quantifications w_p of a discrete predictor.

    Args:
        w (np.ndarray): One value per declared category.
        kind (str): nominal, ordinal or binary.
        observed (np.ndarray): False for categories absent from the fitting rows.
    """

    w: np.ndarray
    kind: str
    observed: np.ndarray = None

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.observed is None:
            self.observed = np.ones(self.w.shape[0], dtype=bool)
        self.observed = np.asarray(self.observed, dtype=bool)

    def to_dict(self):
        return {
            "w": self.w.tolist(),
            "kind": self.kind,
            "observed": self.observed.tolist(),
        }

    @classmethod
    def from_dict(cls, record):
        return cls(w=record["w"], kind=record["kind"], observed=record.get("observed"))


@dataclass
class TransformedPredictors:
    """
    Transformed predictor matrix Phi with per-column provenance.
    """

    Phi: np.ndarray
    provenance: List[str]
    unseen: int = 0


def numeric_moments(column):
    """
    Mean and sample standard deviation (denominator N - 1) of a numeric column.
    """
    column = np.asarray(column, dtype=float)
    if column.shape[0] < 2:
        raise ConstantColumn("A numeric column needs at least two rows.")
    mean = column.mean()
    sd = column.std(ddof=1)
    if sd <= SD_FLOOR * max(1.0, np.abs(column).max()):
        raise ConstantColumn("Numeric column has zero standard deviation.")
    return mean, sd


def standardize_numeric(column):
    """
    Center a numeric column and scale it to unit sample variance.

    Args:
        column (np.ndarray): Raw numeric values.
    """
    mean, sd = numeric_moments(column)
    return (np.asarray(column, dtype=float) - mean) / sd


def build_indicator(column, n_categories, categories=None):
    """
    Build the indicator matrix of a column of 1-based category codes.

    Args:
        column (np.ndarray): Category codes in 1..n_categories.
        n_categories (int): Number of declared categories C_p.
        categories (tuple, optional): Labels of the categories, in order.
    """
    codes = np.asarray(column)
    if codes.size and (
        (codes < 1).any() or (codes > n_categories).any() or (codes != np.round(codes)).any()
    ):
        bad = codes[(codes < 1) | (codes > n_categories) | (codes != np.round(codes))][0]
        raise UnknownCategory(
            f"Category code {bad} is outside 1..{n_categories}.", value=bad
        )
    G = np.zeros((codes.shape[0], n_categories))
    G[np.arange(codes.shape[0]), codes.astype(int) - 1] = 1.0
    if categories is None:
        categories = tuple(str(c) for c in range(1, n_categories + 1))
    return IndicatorMatrix(G=G, column_categories=tuple(categories))


def apply_quantification(indicator: IndicatorMatrix, quantification):
    """
    Map each row to the quantification of its observed category (G_p w_p).
    """
    w = quantification.w if isinstance(quantification, Quantification) else np.asarray(quantification, dtype=float)
    if indicator.G.shape[1] != w.shape[0]:
        raise DimensionMismatch(
            f"Indicator has {indicator.G.shape[1]} categories but {w.shape[0]} quantifications were given."
        )
    return indicator.G @ w


def rescale_quantification(w, indicator: IndicatorMatrix, kind="nominal"):
    """
    Affinely rescale quantifications so that G_p w_p has mean 0 and sample
    variance 1. Categories without observations are filled afterwards (see
    fill_unobserved) and do not enter the moments.

    Args:
        w (np.ndarray): Raw quantifications, one per category.
        indicator (IndicatorMatrix): Coding of the rows the moments refer to.
        kind (str): nominal, ordinal or binary.
    """
    w = np.asarray(w, dtype=float)
    counts = indicator.counts
    if counts.shape[0] != w.shape[0]:
        raise DimensionMismatch(
            f"Indicator has {counts.shape[0]} categories but {w.shape[0]} quantifications were given."
        )
    n = counts.sum()
    observed = counts > 0
    if n < 2:
        raise DegenerateQuantification("Quantification needs at least two rows.")
    mean = counts @ w / n
    variance = counts @ (w - mean) ** 2 / (n - 1)
    scale = max(1.0, np.abs(w[observed]).max())
    if variance <= (SD_FLOOR * scale) ** 2:
        raise DegenerateQuantification("Quantified column is constant.")
    rescaled = (w - mean) / np.sqrt(variance)
    return Quantification(
        w=fill_unobserved(rescaled, observed, kind), kind=kind, observed=observed
    )


def fill_unobserved(w, observed, kind):
    """
    Give categories without observations a value that keeps the invariants:
    0 (the centered mean) for nominal and binary, the nearest observed lower
    value (else the nearest upper one) for ordinal.
    """
    w = np.array(w, dtype=float)
    if observed.all():
        return w
    if kind != "ordinal":
        w[~observed] = 0.0
        return w
    observed_idx = np.flatnonzero(observed)
    for c in np.flatnonzero(~observed):
        lower = observed_idx[observed_idx < c]
        w[c] = w[lower[-1]] if lower.size else w[observed_idx[observed_idx > c][0]]
    return w


class PredictorTransform:
    """
    Fitted transformation of the raw predictors into Phi: training means and
    standard deviations of numeric columns and quantifications of discrete ones.
    """

    def __init__(self, schemas):
        self.schemas = list(schemas)
        self.moments: Dict[str, tuple] = {}
        self.quantifications: Dict[str, Quantification] = {}

    @property
    def names(self):
        return [schema.name for schema in self.schemas]

    def initialize(self, dataset, rng):
        """
        Fit numeric moments and starting quantifications on a dataset:
        standardized category ranks for ordinal and binary predictors and
        standardized random normal values for nominal ones.
        """
        for schema in self.schemas:
            column = dataset.X_raw[schema.name]
            if schema.kind == "numeric":
                self.moments[schema.name] = numeric_moments(column)
                continue
            indicator = build_indicator(column, schema.n_categories, schema.categories)
            if schema.kind == "nominal":
                start = rng.standard_normal(schema.n_categories)
            else:
                start = np.arange(1, schema.n_categories + 1, dtype=float)
            try:
                self.quantifications[schema.name] = rescale_quantification(
                    start, indicator, schema.kind
                )
            except DegenerateQuantification:
                raise DegenerateQuantification(
                    f"Predictor {schema.name} has a single observed category.",
                    variable=schema.name,
                )
        return self

    def indicators(self, dataset):
        return {
            schema.name: build_indicator(
                dataset.X_raw[schema.name], schema.n_categories, schema.categories
            )
            for schema in self.schemas
            if schema.is_discrete
        }

    def transform_columns(self, X_raw, unseen="error"):
        """
        Transform raw predictor columns with the fitted moments and
        quantifications.

        Args:
            X_raw (dict): Column name to raw values (codes for discrete columns).
            unseen (str): "error" raises UnknownCategory for categories that
                were not observed when fitting; "zero" maps them to 0.
        """
        columns = []
        provenance = []
        unseen_rows = 0
        for schema in self.schemas:
            column = np.asarray(X_raw[schema.name], dtype=float)
            if schema.kind == "numeric":
                mean, sd = self.moments[schema.name]
                columns.append((column - mean) / sd)
                provenance.append("numeric-standardized")
                continue
            indicator = build_indicator(column, schema.n_categories, schema.categories)
            quantification = self.quantifications[schema.name]
            phi = apply_quantification(indicator, quantification)
            hit = ~quantification.observed[indicator.codes - 1] if column.size else np.zeros(0, bool)
            if hit.any():
                if unseen == "error":
                    label = schema.categories[indicator.codes[hit][0] - 1]
                    raise UnknownCategory(
                        f"Category '{label}' of {schema.name} was not observed when fitting.",
                        variable=schema.name,
                        value=label,
                    )
                phi[hit] = 0.0
                unseen_rows += int(hit.sum())
                logger.warning(
                    "%d rows of %s fall in categories unseen during fitting; using 0.",
                    int(hit.sum()),
                    schema.name,
                )
            columns.append(phi)
            provenance.append("quantified")
        n = len(next(iter(X_raw.values()))) if X_raw else 0
        Phi = np.column_stack(columns) if columns else np.zeros((n, 0))
        return TransformedPredictors(Phi=Phi.reshape(n, len(self.schemas)), provenance=provenance, unseen=unseen_rows)

    def transform(self, dataset, unseen="error"):
        return self.transform_columns(dataset.X_raw, unseen=unseen)

    def to_dict(self):
        return {
            "moments": {name: [float(m), float(s)] for name, (m, s) in self.moments.items()},
            "quantifications": {
                name: quantification.to_dict()
                for name, quantification in self.quantifications.items()
            },
        }

    @classmethod
    def from_dict(cls, schemas, record):
        transform = cls(schemas)
        transform.moments = {name: tuple(value) for name, value in record["moments"].items()}
        transform.quantifications = {
            name: Quantification.from_dict(value)
            for name, value in record["quantifications"].items()
        }
        return transform
