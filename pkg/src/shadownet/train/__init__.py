"""Toy-scale MLP training with SHADOW synthetic-data augmentation."""
from .data import Dataset, gen_blobs, load_csv, load_idx, split, write_idx
from .mlp import Grads, MlpParams, label_agreement, mlp_backward, mlp_forward, predict
from .shadow import SynthOptions, regularizer_grad, shadow_synthesize, smooth3x3
from .loop import TrainConfig, TrainState, evaluate, train, train_epoch

__all__ = ["Dataset", "gen_blobs", "load_csv", "load_idx", "split", "write_idx", "Grads", "MlpParams",
           "label_agreement", "mlp_backward", "mlp_forward", "predict", "SynthOptions",
           "regularizer_grad", "shadow_synthesize", "smooth3x3", "TrainConfig", "TrainState",
           "evaluate", "train", "train_epoch"]
