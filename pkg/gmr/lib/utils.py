import json
import os
import sys

import numpy as np
import pandas as pd

from gmr.configs.config import Config
from gmr.lib.data import MixedDataset, VariableSchema
from gmr.lib.errors import SchemaError


def load_schema(schema_path):
    """
    Read a schema sidecar: a JSON list of records (name, role, kind,
    categories), or an object holding that list under "variables".

    Args:
        schema_path (str): Path to the schema JSON.
    """
    if not os.path.isfile(schema_path):
        raise SchemaError(f"Schema file not found: {schema_path}")
    with open(schema_path, "r", encoding="utf-8") as f:
        try:
            records = json.load(f)
        except json.JSONDecodeError as error:
            raise SchemaError(f"Schema file {schema_path} is not valid JSON: {error}")
    if isinstance(records, dict):
        records = records.get("variables", [])
    schemas = [VariableSchema.from_dict(record) for record in records]
    names = [schema.name for schema in schemas]
    if len(set(names)) != len(names):
        raise SchemaError("The schema declares a variable twice.")
    return schemas


def save_schema(schemas, schema_path):
    write_json({"variables": [schema.to_dict() for schema in schemas]}, schema_path)


def read_table(data_path):
    """
    Read a CSV with a header row, keeping every cell as an exact string.
    """
    if not os.path.isfile(data_path):
        raise SchemaError(f"Data file not found: {data_path}")
    return pd.read_csv(data_path, dtype=str, keep_default_na=False, encoding="utf-8")


def load_dataset(data_path, schema_path):
    return MixedDataset.from_frame(read_table(data_path), load_schema(schema_path))


def dataset_frame(dataset: MixedDataset):
    """
    Frame of category labels and numbers that load_dataset reads back.
    """
    columns = {}
    for schema in dataset.predictors:
        values = dataset.X_raw[schema.name]
        columns[schema.name] = (
            [schema.categories[int(code) - 1] for code in values] if schema.is_discrete else values
        )
    for r, schema in enumerate(dataset.responses):
        values = dataset.Y[:, r]
        if schema.kind == "binary":
            columns[schema.name] = [schema.categories[int(v)] for v in values]
        elif schema.kind == "ordinal":
            columns[schema.name] = [schema.categories[int(v) - 1] for v in values]
        else:
            columns[schema.name] = values
    return pd.DataFrame(columns)


def write_matrix_csv(path, matrix, row_labels, column_labels, index_name="variable"):
    frame = pd.DataFrame(np.asarray(matrix, dtype=float), index=list(row_labels), columns=list(column_labels))
    frame.index.name = index_name
    frame.to_csv(path, float_format="%.10g")
    return frame


def write_json(record, path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(record, f, indent=4, sort_keys=True, default=_to_builtin)
        f.write("\n")


def _to_builtin(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_manifest(out_dir, command, arguments, seed=None):
    """
    Record the command, its configuration and the tool version next to the outputs.
    """
    write_json(
        {
            "command": command,
            "arguments": arguments,
            "seed": seed,
            "version": Config().version,
            "python": sys.version.split()[0],
        },
        os.path.join(out_dir, "manifest.json"),
    )
