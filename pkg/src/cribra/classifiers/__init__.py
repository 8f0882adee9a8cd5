from .fusion import EmbeddingTable, fuse, fused_matrix, read_embeddings, write_embeddings
from .mlp import MlpConfig, MlpModel, predict_mlp, train_mlp
from .model_io import load_model, save_model
from .standardize import Standardizer
from .svm import SvmConfig, SvmModel, predict_svm, rbf_kernel, train_svm

__all__ = [
    "EmbeddingTable",
    "MlpConfig",
    "MlpModel",
    "Standardizer",
    "SvmConfig",
    "SvmModel",
    "fuse",
    "fused_matrix",
    "load_model",
    "predict_mlp",
    "predict_svm",
    "rbf_kernel",
    "read_embeddings",
    "save_model",
    "train_mlp",
    "train_svm",
    "write_embeddings",
]
