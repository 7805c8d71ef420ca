import json
import os

config_dir = os.path.dirname(os.path.abspath(__file__))

config_files = [
    "defaults.json",
    "simulation.json",
    "simulation_full.json",
]


def singleton(cls):
    instances = {}

    def get_instance(*args, **kwargs):
        if cls not in instances:
            instances[cls] = cls(*args, **kwargs)
        return instances[cls]

    return get_instance


@singleton
class Config:
    def __init__(self):
        self.json_config = self.load_config_json()
        self.version = self.json_config["defaults.json"]["version"]

    def load_config_json(self):
        configs = {}
        for config_file in config_files:
            with open(os.path.join(config_dir, config_file), "r") as f:
                configs[config_file] = json.load(f)
        return configs

    @property
    def fit(self):
        return dict(self.json_config["defaults.json"]["fit"])

    @property
    def cv(self):
        return dict(self.json_config["defaults.json"]["cv"])

    @property
    def selection(self):
        return dict(self.json_config["defaults.json"]["selection"])

    def simulation(self, scale="desk"):
        name = "simulation_full.json" if scale == "full" else "simulation.json"
        return json.loads(json.dumps(self.json_config[name]))


def load_study_config(path):
    """
    Load a simulation study file, filling absent keys from the desk defaults.
    """
    study = Config().simulation("desk")
    with open(path, "r") as f:
        study.update(json.load(f))
    return study
