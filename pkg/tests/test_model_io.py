import json

import numpy as np
import pandas as pd
import pytest

from gmr.infer.infer import Predictor
from gmr.lib.algorithm.penalty import PenaltySpec
from gmr.lib.algorithm.scaling import PredictorTransform
from gmr.lib.data import VariableSchema
from gmr.lib.errors import DimensionMismatch, SchemaError, UnknownCategory
from gmr.train.process.model_compare import compare_models, implied_coefficient_mse
from gmr.train.process.model_information import model_information
from gmr.train.process.model_io import load_model, model_hash, read_model_document, save_model
from gmr.train.solver import FitConfig, ModelFit, fit

WORKED_VALUES = [0.80, 5.03, 0.32, -1.81, 0.13, 0.15, -0.22]
WORKED_COEFFICIENTS = [0.09, -0.27, 0.04, 0.00, 0.05, -0.01, 0.05]
WORKED_THRESHOLDS = [-5.10, -4.63, -3.39, -2.40, 0.09, 3.05]


def worked_example_model():
    """
    Rank-1 model over seven already-scaled predictors and one seven-category
    ordinal response.
    """
    predictors = [VariableSchema(f"p{j}", "numeric") for j in range(7)]
    responses = [VariableSchema("SH", "ordinal", [str(c) for c in range(1, 8)], role="response")]
    transform = PredictorTransform(predictors)
    transform.moments = {schema.name: (0.0, 1.0) for schema in predictors}
    return ModelFit(
        predictors=predictors,
        responses=responses,
        transform=transform,
        B=np.array(WORKED_COEFFICIENTS)[:, None],
        V=np.ones((1, 1)),
        m=np.zeros(1),
        sigma2=None,
        thresholds={0: np.array(WORKED_THRESHOLDS)},
        config=FitConfig.defaults(rank=1),
    )


@pytest.fixture(scope="module")
def fitted():
    from conftest import make_mixed_dataset

    dataset = make_mixed_dataset()
    config = FitConfig.defaults(rank=1, lambda1=0.3, lambda2=0.01, max_outer_iters=60)
    return dataset, fit(dataset, config)


class TestModelIO:
    def test_round_trip(self, tmp_path, fitted):
        dataset, model = fitted
        path = tmp_path / "model.json"
        document = save_model(model, str(path))
        assert document["model_name"] == "model"
        assert document["model_hash"] == model_hash(model.to_dict())

        restored = load_model(str(path))
        np.testing.assert_array_equal(restored.B, model.B)
        np.testing.assert_array_equal(restored.V, model.V)
        assert restored.thresholds.keys() == model.thresholds.keys()
        np.testing.assert_allclose(
            restored.theta(dataset.X_raw)[0], model.theta(dataset.X_raw)[0], atol=1e-12
        )

    def test_not_a_model(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"format": "something-else"}))
        with pytest.raises(SchemaError):
            read_model_document(str(path))
        path.write_text("{not json")
        with pytest.raises(SchemaError):
            load_model(str(path))

    def test_information(self, tmp_path, fitted):
        _, model = fitted
        path = tmp_path / "fit.json"
        save_model(model, str(path), name="survey")
        info = model_information(str(path))
        assert "Model Name: survey" in info
        assert "Rank: 1" in info
        assert "Parameters (K):" in info


class TestCompare:
    def test_identical(self, fitted):
        _, model = fitted
        assert implied_coefficient_mse(model, model) == 0.0

    def test_single_entry(self, rng):
        A = rng.standard_normal((4, 3))
        B = A.copy()
        B[2, 1] += 0.3
        assert implied_coefficient_mse(A, B) == pytest.approx(0.09 / 12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            implied_coefficient_mse(np.zeros((2, 2)), np.zeros((3, 2)))

    def test_tables(self, fitted):
        dataset, model = fitted
        ridge = fit(dataset, FitConfig.defaults(rank=1, lambda2=5.0, max_outer_iters=60))
        mse, complexity = compare_models({"lasso": model, "ridge": ridge})
        assert mse.loc["lasso", "ridge"] == mse.loc["ridge", "lasso"] > 0
        assert mse.loc["lasso", "lasso"] == 0.0
        assert list(complexity["K"]) == [complexity["K"][0]] * 2
        assert list(complexity.columns) == ["model", "S", "K", "informative_predictors"]


class TestPredictor:
    def test_worked_example(self):
        predictor = Predictor(worked_example_model())
        X_raw = {f"p{j}": np.array([value]) for j, value in enumerate(WORKED_VALUES)}
        predictions = predictor.predict(X_raw)
        assert abs(predictions["SH_theta"][0] - (-1.27)) < 0.01
        assert predictions["SH_category"][0] == "5"
        probs = predictions[[f"SH_p_{c}" for c in range(1, 8)]].to_numpy()
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)

    def test_constant_numeric_prediction(self):
        predictors = [VariableSchema("x", "numeric")]
        responses = [VariableSchema("y", "numeric", role="response")]
        transform = PredictorTransform(predictors)
        transform.moments = {"x": (1.0, 2.0)}
        model = ModelFit(
            predictors=predictors,
            responses=responses,
            transform=transform,
            B=np.zeros((1, 1)),
            V=np.ones((1, 1)),
            m=np.array([2.5]),
            sigma2=1.0,
            thresholds={},
            config=FitConfig.defaults(rank=1),
        )
        predictions = Predictor(model).predict_frame(pd.DataFrame({"x": ["0.1", "7", "-3"]}))
        np.testing.assert_allclose(predictions["y_value"], 2.5)
        np.testing.assert_array_equal(predictions["row"], [0, 1, 2])

    def test_empty_input(self, fitted):
        dataset, model = fitted
        frame = pd.DataFrame({name: pd.Series([], dtype=str) for name in dataset.predictor_names})
        predictions = Predictor(model).predict_frame(frame)
        assert len(predictions) == 0
        assert "y3_category" in predictions.columns

    def test_families(self, fitted):
        dataset, model = fitted
        predictions = Predictor(model).predict(dataset.X_raw)
        assert predictions["y2_prob"].between(0, 1).all()
        assert set(predictions["y3_category"]) <= {"low", "mid", "high"}
        np.testing.assert_allclose(predictions["y1_value"], predictions["y1_theta"])

    def test_unknown_label(self, fitted):
        dataset, model = fitted
        frame = pd.DataFrame({name: ["1"] for name in dataset.predictor_names})
        frame["x4"] = ["zzz"]
        with pytest.raises(UnknownCategory):
            Predictor(model).predict_frame(frame)

    def test_penalty_spec_survives(self, fitted, tmp_path):
        _, model = fitted
        path = tmp_path / "m.json"
        save_model(model, str(path))
        assert load_model(str(path)).config.penalty == PenaltySpec(lambda1=0.3, lambda2=0.01)
