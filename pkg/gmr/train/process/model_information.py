from datetime import datetime

from gmr.train.process.model_io import read_model_document
from gmr.train.solver import ModelFit
from gmr.train.selection.select import count_parameters


def prettify_date(date_str):
    if date_str is None:
        return "None"
    try:
        date_time_obj = datetime.strptime(date_str, "%Y-%m-%dT%H:%M:%S.%f")
        return date_time_obj.strftime("%Y-%m-%d %H:%M:%S")
    except ValueError:
        return "Invalid date format"


def model_information(path, threshold=0.01):
    document = read_model_document(path)
    model = ModelFit.from_dict(document["model"])

    print(f"Loaded model from {path}")

    rank = model.B.shape[1]
    penalty = model.config.penalty
    active = [
        schema.name
        for schema, selected in zip(model.predictors, model.active_predictors(threshold))
        if selected
    ]
    kinds = {}
    for schema in model.predictors:
        kinds[schema.kind] = kinds.get(schema.kind, 0) + 1
    responses = ", ".join(f"{schema.name} ({schema.kind})" for schema in model.responses)
    final_loss = f"{model.trace[-1]:.6f}" if model.trace else "None"

    return (
        f"Model Name: {document.get('model_name', 'None')}\n"
        f"Version: {document.get('version', 'None')}\n"
        f"Creation Date: {prettify_date(document.get('creation_date'))}\n"
        f"Rows: {model.n_rows}\n"
        f"Predictors: {len(model.predictors)} {kinds}\n"
        f"Responses: {responses}\n"
        f"Rank: {rank}\n"
        f"Penalty: lambda1={penalty.lambda1} lambda2={penalty.lambda2} lambda3={penalty.lambda3}\n"
        f"Iterations: {model.iterations}\n"
        f"Converged: {model.converged}\n"
        f"Final Penalized NLL: {final_loss}\n"
        f"Parameters (K): {count_parameters(model.predictors, model.responses, rank)}\n"
        f"Active Predictors ({len(active)} at {threshold}): {', '.join(active) or 'None'}\n"
        f"Hash: {document.get('model_hash', 'None')}\n"
    )
