"""Unfolded network: autodiff engine, layers, regularizers, model, training."""

from .autodiff import Tensor, backward as graph_backward
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import merge_complex, split_complex
from .loss import nmpe, nmpe_graph
from .model import (
    NetConfig,
    NetParams,
    Tape,
    backward,
    forward,
    forward_batch,
    init_params,
    reconstruct,
)
from .train import (TrainConfig, TrainingDiverged, check_point,
                    gradient_check, relu_margin, train)

__all__ = [
    "Tensor", "graph_backward", "load_checkpoint", "save_checkpoint",
    "merge_complex", "split_complex", "nmpe", "nmpe_graph",
    "NetConfig", "NetParams", "Tape", "backward", "forward", "forward_batch",
    "init_params", "reconstruct", "TrainConfig", "TrainingDiverged",
    "gradient_check", "train", "check_point", "relu_margin",
]
