import logging

import numpy as np
import pandas as pd
from scipy.special import expit

from gmr.lib.algorithm.likelihood import ordinal_category_probs, predict_ordinal_category
from gmr.lib.data import parse_column
from gmr.lib.errors import SchemaError
from gmr.train.process.model_io import load_model

logger = logging.getLogger(__name__)


class Predictor:
    """
    Predictions from a fitted model for new rows of raw predictors.
    """

    def __init__(self, model=None):
        self.model = model
        self.loaded_model = None

    def load_model(self, model_path):
        """
        Loads a model file written by the fit command.

        Args:
            model_path (str): Path to the model JSON.
        """
        if self.loaded_model != model_path:
            self.model = load_model(model_path)
            self.loaded_model = model_path
            logger.info("Loaded model %s", model_path)
        return self

    def parse_predictors(self, frame: pd.DataFrame):
        """
        Raw predictor columns of a frame of string cells, coded against the
        model's schema. Response columns, if present, are ignored.
        """
        missing = [schema.name for schema in self.model.predictors if schema.name not in frame.columns]
        if missing:
            raise SchemaError(f"Columns required by the model are absent from the data: {missing}.")
        return {
            schema.name: parse_column(frame[schema.name], schema)
            if len(frame)
            else np.zeros(0)
            for schema in self.model.predictors
        }

    def predict_theta(self, X_raw, unseen="error"):
        Theta, _ = self.model.theta(X_raw, unseen=unseen)
        return Theta

    def predict(self, X_raw, unseen="error"):
        """
        Per row and response: theta and the prediction of its family, that is
        the value (numeric), P(y = 1) (binary), or the category and the
        category probabilities (ordinal).

        Args:
            X_raw (dict): Raw predictor columns.
            unseen (str): "error" or "zero" for categories unseen when fitting.
        """
        Theta = self.predict_theta(X_raw, unseen=unseen)
        columns = {}
        for r, schema in enumerate(self.model.responses):
            theta = Theta[:, r]
            columns[f"{schema.name}_theta"] = theta
            if schema.kind == "numeric":
                columns[f"{schema.name}_value"] = theta
            elif schema.kind == "binary":
                columns[f"{schema.name}_prob"] = expit(theta)
            else:
                thresholds = self.model.thresholds[r]
                categories = predict_ordinal_category(theta, thresholds)
                columns[f"{schema.name}_category"] = np.asarray(
                    [schema.categories[c - 1] for c in np.atleast_1d(categories)], dtype=object
                )
                probs = ordinal_category_probs(theta, thresholds)
                for c, label in enumerate(schema.categories):
                    columns[f"{schema.name}_p_{label}"] = probs[:, c]
        return pd.DataFrame(columns)

    def predict_frame(self, frame: pd.DataFrame, unseen="error"):
        predictions = self.predict(self.parse_predictors(frame), unseen=unseen)
        predictions.insert(0, "row", np.arange(len(frame)))
        return predictions
