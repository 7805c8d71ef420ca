import datetime
import hashlib
import json
import os

from gmr.configs.config import Config
from gmr.lib.errors import SchemaError
from gmr.train.solver import ModelFit

FORMAT = "gmr-model"


def model_hash(record):
    """
    sha256 of the parameter content, independent of creation metadata.
    """
    payload = json.dumps(record, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def save_model(model: ModelFit, model_path, name=None):
    """
    Write a fitted model as a versioned JSON document.

    Args:
        model (ModelFit): Fitted model.
        model_path (str): Destination file.
        name (str, optional): Model name stored in the document.
    """
    model_dir = os.path.dirname(model_path)
    if model_dir:
        os.makedirs(model_dir, exist_ok=True)

    body = model.to_dict()
    document = {
        "format": FORMAT,
        "version": Config().version,
        "model_name": name or os.path.splitext(os.path.basename(model_path))[0],
        "creation_date": datetime.datetime.now().isoformat(),
        "model_hash": model_hash(body),
        "model": body,
    }
    with open(model_path, "w") as f:
        json.dump(document, f, indent=4)
    return document


def read_model_document(model_path):
    with open(model_path, "r") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as error:
            raise SchemaError(f"{model_path} is not a valid model file: {error}")
    if document.get("format") != FORMAT or "model" not in document:
        raise SchemaError(f"{model_path} is not a gmr model file.")
    return document


def load_model(model_path):
    """
    Load a model written by save_model.
    """
    document = read_model_document(model_path)
    try:
        return ModelFit.from_dict(document["model"])
    except (KeyError, ValueError, TypeError) as error:
        raise SchemaError(f"{model_path} is missing model fields: {error}")
