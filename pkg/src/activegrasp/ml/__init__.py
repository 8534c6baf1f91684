"""Learned next-view policies: features, linear models, and a Q-network.

Everything here runs on plain dense numpy arrays; the models are small
enough that hand-rolled training loops are both fast and fully
reproducible.
"""
from .features import height_map, state_vector, STATE_DIM_FN
from .linear import PCAModel, pca_fit, pca_transform, LogisticClassifier, LDAClassifier
from .qnet import QNetwork, gradient_check, train_q
from .dataset import generate_direction_dataset
from .io import save_model, load_model

__all__ = [
    "height_map",
    "state_vector",
    "STATE_DIM_FN",
    "PCAModel",
    "pca_fit",
    "pca_transform",
    "LogisticClassifier",
    "LDAClassifier",
    "QNetwork",
    "gradient_check",
    "train_q",
    "generate_direction_dataset",
    "save_model",
    "load_model",
]
