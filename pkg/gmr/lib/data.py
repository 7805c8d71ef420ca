from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from gmr.lib.errors import MissingValue, SchemaError, UnknownCategory

PREDICTOR_KINDS = ("numeric", "binary", "nominal", "ordinal")
RESPONSE_KINDS = ("numeric", "binary", "ordinal")
ROLES = ("predictor", "response")


@dataclass(frozen=True)
class VariableSchema:
    """
    Declared measurement level of one column.

    Args:
        name (str): Column name in the data file.
        kind (str): One of numeric, binary, nominal, ordinal.
        categories (tuple): Ordered category labels; empty for numeric columns.
        role (str): predictor or response.
    """

    name: str
    kind: str
    categories: tuple = ()
    role: str = "predictor"

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        if self.role not in ROLES:
            raise SchemaError(f"Variable {self.name}: unknown role '{self.role}'.")
        allowed = PREDICTOR_KINDS if self.role == "predictor" else RESPONSE_KINDS
        if self.kind not in allowed:
            raise SchemaError(
                f"Variable {self.name}: kind '{self.kind}' is not allowed for a {self.role}."
            )
        if self.kind == "numeric":
            if self.categories:
                raise SchemaError(f"Numeric variable {self.name} declares categories.")
            return
        if self.kind == "binary" and len(self.categories) != 2:
            raise SchemaError(f"Binary variable {self.name} needs exactly 2 categories.")
        if len(self.categories) < 2:
            raise SchemaError(f"Variable {self.name} needs at least 2 categories.")
        if len(set(self.categories)) != len(self.categories):
            raise SchemaError(f"Variable {self.name} repeats a category label.")

    @property
    def is_discrete(self):
        return self.kind != "numeric"

    @property
    def n_categories(self):
        return len(self.categories)

    def code(self, label):
        """
        Return the 1-based category index of a label in declared order.
        """
        try:
            return self.categories.index(str(label)) + 1
        except ValueError:
            raise UnknownCategory(
                f"Value '{label}' is not a declared category of {self.name}.",
                variable=self.name,
                value=label,
            )

    def to_dict(self):
        return {
            "name": self.name,
            "role": self.role,
            "kind": self.kind,
            "categories": list(self.categories),
        }

    @classmethod
    def from_dict(cls, record):
        try:
            return cls(
                name=str(record["name"]),
                kind=str(record["kind"]),
                categories=tuple(record.get("categories", ())),
                role=str(record.get("role", "predictor")),
            )
        except KeyError as error:
            raise SchemaError(f"Schema record is missing the field {error}.")


@dataclass
class MixedDataset:
    """
    Complete mixed-type data: raw predictor columns and the response matrix.

    Discrete predictor columns hold 1-based category codes. Y holds reals for
    numeric responses, 0/1 for binary and 1..C_r for ordinal responses.
    """

    predictors: List[VariableSchema]
    responses: List[VariableSchema]
    X_raw: Dict[str, np.ndarray]
    Y: np.ndarray
    row_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        if self.Y.ndim == 1:
            self.Y = self.Y.reshape(-1, 1)
        n = self.Y.shape[0]
        if self.Y.shape[1] != len(self.responses):
            raise SchemaError(
                f"Y has {self.Y.shape[1]} columns but {len(self.responses)} responses are declared."
            )
        if self.row_ids is None:
            self.row_ids = np.arange(n)
        self.X_raw = dict(self.X_raw)
        for schema in self.predictors:
            if schema.name not in self.X_raw:
                raise SchemaError(f"Predictor {schema.name} has no data column.")
            column = np.asarray(self.X_raw[schema.name], dtype=float)
            if column.shape != (n,):
                raise SchemaError(f"Predictor {schema.name} has {column.shape[0]} rows, expected {n}.")
            if np.isnan(column).any():
                raise MissingValue(f"Predictor {schema.name} contains missing values.")
            if schema.is_discrete:
                _check_codes(column, schema)
                column = column.astype(int)
            self.X_raw[schema.name] = column
        if np.isnan(self.Y).any():
            raise MissingValue("The response matrix contains missing values.")
        for r, schema in enumerate(self.responses):
            if schema.kind == "binary" and not np.isin(self.Y[:, r], (0.0, 1.0)).all():
                raise UnknownCategory(f"Binary response {schema.name} is not coded 0/1.")
            if schema.kind == "ordinal":
                _check_codes(self.Y[:, r], schema)

    @property
    def n_rows(self):
        return self.Y.shape[0]

    @property
    def predictor_names(self):
        return [schema.name for schema in self.predictors]

    @property
    def response_names(self):
        return [schema.name for schema in self.responses]

    @property
    def response_kinds(self):
        return [schema.kind for schema in self.responses]

    @property
    def schema(self):
        return list(self.predictors) + list(self.responses)

    def subset(self, rows):
        """
        Return the dataset restricted to the given row indices.
        """
        rows = np.asarray(rows, dtype=int)
        return MixedDataset(
            predictors=list(self.predictors),
            responses=list(self.responses),
            X_raw={name: column[rows] for name, column in self.X_raw.items()},
            Y=self.Y[rows],
            row_ids=self.row_ids[rows],
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, schemas: Sequence[VariableSchema]):
        """
        Build a dataset from a frame of string cells, matching category labels
        exactly against the declared schema.
        """
        frame = frame.copy()
        missing = [schema.name for schema in schemas if schema.name not in frame.columns]
        if missing:
            raise SchemaError(f"Columns declared in the schema are absent from the data: {missing}.")

        predictors = [schema for schema in schemas if schema.role == "predictor"]
        responses = [schema for schema in schemas if schema.role == "response"]
        if not predictors or not responses:
            raise SchemaError("The schema needs at least one predictor and one response.")

        X_raw = {schema.name: parse_column(frame[schema.name], schema) for schema in predictors}
        Y = np.column_stack(
            [parse_column(frame[schema.name], schema) for schema in responses]
        ) if len(frame) else np.zeros((0, len(responses)))
        for r, schema in enumerate(responses):
            if schema.kind == "binary":
                Y[:, r] -= 1.0
        return cls(predictors=predictors, responses=responses, X_raw=X_raw, Y=Y)


def _check_codes(column, schema):
    bad = (column < 1) | (column > schema.n_categories) | (column != np.round(column))
    if bad.any():
        value = column[np.argmax(bad)]
        raise UnknownCategory(
            f"Variable {schema.name} has category code {value} outside 1..{schema.n_categories}.",
            variable=schema.name,
            value=value,
        )


def parse_column(series: pd.Series, schema: VariableSchema):
    values = series.astype(str).str.strip()
    if (values == "").any():
        raise MissingValue(f"Column {schema.name} contains missing values.")
    if schema.kind == "numeric":
        try:
            return pd.to_numeric(values, errors="raise").to_numpy(dtype=float)
        except ValueError as error:
            raise SchemaError(f"Numeric column {schema.name} holds a non-numeric value: {error}")
    return np.array([schema.code(label) for label in values], dtype=float)
