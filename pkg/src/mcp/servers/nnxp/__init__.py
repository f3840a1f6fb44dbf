# nnxp package: exemplar-parallel MNIST training engine and its MCP server
from .connectome import Connectome, init_connectome
from .trainer import MergeMode, TrainerConfig, train

__all__ = ["Connectome", "MergeMode", "TrainerConfig", "init_connectome", "train"]
