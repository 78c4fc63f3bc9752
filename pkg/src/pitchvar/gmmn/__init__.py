"""Conditional GMMN: generator network, CMMD loss and training."""

from .cmmd import CmmdConfig, cmmd_exact, cmmd_grad, cmmd_loss_and_grad, cmmd_rff, cmmd_weight
from .kernels import RffBasis, gaussian_kernel, gram, rff_map
from .network import GmmnModel, backward, forward, forward_batch, identity_model, init_model
from .serialize import load_model, save_model
from .train import TrainResult, TrainState, adagrad_step, evaluate_loss, train

__all__ = [
    "CmmdConfig", "GmmnModel", "RffBasis", "TrainResult", "TrainState",
    "adagrad_step", "backward", "cmmd_exact", "cmmd_grad", "cmmd_loss_and_grad",
    "cmmd_rff", "cmmd_weight", "evaluate_loss", "forward", "forward_batch",
    "gaussian_kernel", "gram", "identity_model", "init_model", "load_model",
    "rff_map", "save_model", "train",
]
