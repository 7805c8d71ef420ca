import numpy as np
import pytest
from scipy.special import expit

from gmr.lib.data import MixedDataset, VariableSchema
from gmr.lib.utils import dataset_frame, save_schema


def make_mixed_dataset(n=150, seed=0):
    """
    Small dataset with every predictor and response kind: two numeric, one
    binary, one nominal and one ordinal predictor; numeric, binary and
    three-category ordinal responses.
    """
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    x3 = rng.integers(1, 3, n)
    x4 = rng.integers(1, 4, n)
    x5 = rng.integers(1, 5, n)

    eta1 = 0.8 * x1 - 0.5 * x2 + 0.6 * (x3 == 2)
    eta2 = 0.5 * x1 + 0.7 * (x4 == 2) - 0.4 * (x5 - 2.5)
    y1 = 1.0 + eta1 + rng.standard_normal(n)
    y2 = (rng.random(n) < expit(eta2)).astype(float)
    latent = eta1 + rng.logistic(size=n)
    y3 = 1.0 + (latent > -1.0) + (latent > 1.0)

    predictors = [
        VariableSchema("x1", "numeric"),
        VariableSchema("x2", "numeric"),
        VariableSchema("x3", "binary", ("no", "yes")),
        VariableSchema("x4", "nominal", ("a", "b", "c")),
        VariableSchema("x5", "ordinal", ("1", "2", "3", "4")),
    ]
    responses = [
        VariableSchema("y1", "numeric", role="response"),
        VariableSchema("y2", "binary", ("0", "1"), role="response"),
        VariableSchema("y3", "ordinal", ("low", "mid", "high"), role="response"),
    ]
    X_raw = {"x1": x1, "x2": x2, "x3": x3, "x4": x4, "x5": x5}
    return MixedDataset(
        predictors=predictors,
        responses=responses,
        X_raw=X_raw,
        Y=np.column_stack([y1, y2, y3]),
    )


def make_random_mixed_dataset(seed, n=100):
    """
    Seeded mixed dataset with eight predictors (three numeric, one binary,
    two nominal, two ordinal) and four responses (numeric, binary and two
    ordinal) driven by a random rank-2 signal.
    """
    rng = np.random.default_rng(seed)
    predictors = [VariableSchema(f"n{p}", "numeric") for p in range(3)]
    predictors.append(VariableSchema("b0", "binary", ("0", "1")))
    predictors += [VariableSchema(f"c{p}", "nominal", ("a", "b", "c")) for p in range(2)]
    predictors += [VariableSchema(f"o{p}", "ordinal", ("1", "2", "3", "4")) for p in range(2)]

    X_raw = {}
    for schema in predictors:
        if schema.kind == "numeric":
            X_raw[schema.name] = rng.standard_normal(n)
        else:
            X_raw[schema.name] = rng.integers(1, schema.n_categories + 1, n)
    X = np.column_stack([X_raw[schema.name] for schema in predictors]).astype(float)
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    Theta = X @ rng.normal(0.0, 0.5, (8, 2)) @ rng.normal(0.0, 1.0, (2, 4))

    latent = Theta[:, 2:] + rng.logistic(size=(n, 2))
    Y = np.column_stack(
        [
            Theta[:, 0] + rng.standard_normal(n),
            (rng.random(n) < expit(Theta[:, 1])).astype(float),
            1.0 + (latent[:, 0, None] > np.array([-1.5, 0.0, 1.5])).sum(axis=1),
            1.0 + (latent[:, 1, None] > np.array([-0.7, 0.7])).sum(axis=1),
        ]
    )
    responses = [
        VariableSchema("r0", "numeric", role="response"),
        VariableSchema("r1", "binary", ("0", "1"), role="response"),
        VariableSchema("r2", "ordinal", ("1", "2", "3", "4"), role="response"),
        VariableSchema("r3", "ordinal", ("1", "2", "3"), role="response"),
    ]
    return MixedDataset(predictors=predictors, responses=responses, X_raw=X_raw, Y=Y)


def make_numeric_dataset(n=80, P=4, R=2, seed=0, noise=0.5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, P))
    Y = 0.5 + X @ rng.standard_normal((P, R)) + noise * rng.standard_normal((n, R))
    predictors = [VariableSchema(f"x{p}", "numeric") for p in range(P)]
    responses = [VariableSchema(f"y{r}", "numeric", role="response") for r in range(R)]
    return MixedDataset(
        predictors=predictors,
        responses=responses,
        X_raw={f"x{p}": X[:, p] for p in range(P)},
        Y=Y,
    )


def write_dataset_files(dataset, directory, name="data"):
    data_path = directory / f"{name}.csv"
    schema_path = directory / f"{name}_schema.json"
    dataset_frame(dataset).to_csv(data_path, index=False)
    save_schema(dataset.schema, str(schema_path))
    return str(data_path), str(schema_path)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def mixed_dataset():
    return make_mixed_dataset()


@pytest.fixture
def numeric_dataset():
    return make_numeric_dataset()


@pytest.fixture
def dataset_files(tmp_path, mixed_dataset):
    return write_dataset_files(mixed_dataset, tmp_path)
