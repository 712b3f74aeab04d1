"""Data-driven power control: numpy MLPs, normalization, datasets, estimators."""

from .dataset import (Dataset, dl_features, gather_links, read_dataset, scatter_links,
                      split_tags, ul_features, write_dataset)
from .inference import predict_allocation, project_dl, project_ul
from .mlp import (E2E_DL_HIDDEN, E2E_UL_HIDDEN, UNFOLDED_HIDDEN, AdamConfig, AdamState,
                  MlpParams, MlpSpec, adam_init, adam_step, backward, forward, init_params,
                  mae_loss)
from .models import (PowerMLPRegressor, TrainConfig, TrainingDiverged, UnfoldedPowerNet,
                     load_model, save_model, train_network)
from .normalize import InputNormalizer, OutputNormalizer

__all__ = [
    "AdamConfig", "AdamState", "Dataset", "E2E_DL_HIDDEN", "E2E_UL_HIDDEN", "InputNormalizer",
    "MlpParams", "MlpSpec", "OutputNormalizer", "PowerMLPRegressor", "TrainConfig",
    "TrainingDiverged", "UNFOLDED_HIDDEN", "UnfoldedPowerNet", "adam_init", "adam_step",
    "backward", "dl_features", "forward", "gather_links", "init_params", "load_model",
    "mae_loss", "predict_allocation", "project_dl", "project_ul", "read_dataset",
    "save_model", "scatter_links", "split_tags", "train_network", "ul_features",
    "write_dataset",
]
