"""Networks with modulated dense layers for missing and low-quality tabular
data, plus degradation injectors and statistical evaluation machinery."""

from .configs import ExperimentConfig, load_config
from .data import TabularDataset, generate_simulation, load_csv
from .degrade import DegradeSpec
from .harness import run_experiment
from .layers import LayerSpec, NetworkSpec, init_params, network_forward
from .training import TrainConfig

__all__ = [
    "DegradeSpec", "ExperimentConfig", "LayerSpec", "NetworkSpec",
    "TabularDataset", "TrainConfig", "generate_simulation", "init_params",
    "load_config", "load_csv", "network_forward", "run_experiment",
]
