"""CMMD training of the generator with AdaGrad."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..errors import NumericError
from .cmmd import CmmdConfig, cmmd_loss_and_grad, cmmd_weight
from .kernels import RffBasis
from .network import GmmnModel, Params, backward, forward_batch, init_model

log = logging.getLogger(__name__)

ADAGRAD_EPS = 1e-8
DEFAULT_LR = 0.005
DEFAULT_EPOCHS = 10
DEFAULT_BATCH = 13000


@dataclass
class TrainState:
    """Mutable optimiser state: AdaGrad accumulators and the frozen noise table."""

    params: Params
    accum: Params
    noise: NDArray[np.float64]
    lr: float = DEFAULT_LR
    epoch: int = 0

    @classmethod
    def start(cls, model: GmmnModel, noise: NDArray[np.float64], lr: float = DEFAULT_LR) -> "TrainState":
        params = {k: v.copy() for k, v in model.params.items()}
        noise = np.array(noise, dtype=np.float64)
        noise.setflags(write=False)
        return cls(params, {k: np.zeros_like(v) for k, v in params.items()}, noise, lr)


def adagrad_step(state: TrainState, grads: Params) -> Params:
    """In-place AdaGrad update; returns the updated parameters."""
    for name, g in grads.items():
        if g.shape != state.params[name].shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != {state.params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
    for name, g in grads.items():
        state.accum[name] += g * g
        state.params[name] -= state.lr * g / (np.sqrt(state.accum[name]) + ADAGRAD_EPS)
    return state.params


def draw_noise(n: int, dim: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """Prior noise, U[-1, 1) per component."""
    return rng.uniform(-1.0, 1.0, size=(n, dim))


def _as_pair_arrays(pairs) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[0], np.ndarray):
        cond, targ = pairs
    else:
        pairs = list(pairs)
        if not pairs:
            raise ValueError("no training pairs")
        cond = np.array([np.atleast_1d(c) for c, _ in pairs], dtype=np.float64)
        targ = np.array([np.atleast_1d(t) for _, t in pairs], dtype=np.float64)
    cond = np.asarray(cond, dtype=np.float64)
    targ = np.asarray(targ, dtype=np.float64)
    if cond.ndim == 1:
        cond = cond[:, None]
    if targ.ndim == 1:
        targ = targ[:, None]
    if cond.shape != targ.shape or cond.shape[0] == 0:
        raise ValueError("conditions and targets must be nonempty and of equal shape")
    return cond, targ


def batch_loss_and_grads(model: GmmnModel, cond, targ, noise, cfg: CmmdConfig, basis=None):
    """CMMD on one batch and its parameter gradients."""
    out, cache = forward_batch(model, cond, noise, keep=True)
    L = cmmd_weight(cond, cfg, basis)
    loss, g_out = cmmd_loss_and_grad(L, targ, out, cfg.sigma_out)
    return loss, backward(model, cache, g_out)


@dataclass
class TrainResult:
    model: GmmnModel
    history: list[float] = field(default_factory=list)


def train(
    pairs,
    cfg: CmmdConfig = CmmdConfig(),
    epochs: int = DEFAULT_EPOCHS,
    batch_size: Optional[int] = None,
    seed: int = 0,
    lr: float = DEFAULT_LR,
    noise_dim: int = 10,
    hidden: int = 128,
    n_layers: int = 3,
    zero_output: bool = False,
    model: Optional[GmmnModel] = None,
) -> TrainResult:
    """Fit the generator to (condition, natural target) segment pairs.

    Conditions and targets must already be normalised with the same
    :class:`~pitchvar.modspec.MsNormalizer`. One noise vector per segment is
    drawn from ``seed`` before training and reused in every epoch. Each epoch
    visits the segments in a seeded permutation, split into near-equal
    batches of at most ``batch_size``; ``history`` holds the mean batch loss
    of each epoch, measured before that batch's update.
    """
    cond, targ = _as_pair_arrays(pairs)
    n = cond.shape[0]
    batch_size = min(DEFAULT_BATCH if batch_size is None else int(batch_size), n)
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    ss_init, ss_noise, ss_order, ss_rff = np.random.SeedSequence(seed).spawn(4)
    if model is None:
        model = init_model(cond.shape[1], noise_dim, hidden, n_layers,
                           seed=int(ss_init.generate_state(1)[0]), zero_output=zero_output)
        model = GmmnModel(model.cond_dim, model.noise_dim, model.hidden, model.n_layers,
                          model.params, seed, model.residual)
    elif model.cond_dim != cond.shape[1]:
        raise ValueError("model condition dimension does not match the data")
    noise = draw_noise(n, model.noise_dim, np.random.default_rng(ss_noise))
    state = TrainState.start(model, noise, lr)
    order_rng = np.random.default_rng(ss_order)
    basis = None
    if cfg.mode == "rff":
        basis = RffBasis.draw(cond.shape[1], cfg.sigma_in, cfg.rff_dim, int(ss_rff.generate_state(1)[0]))
    n_batches = -(-n // batch_size)
    if cfg.mode == "exact" and n // n_batches < 2:
        log.warning("exact-mode batches hold fewer than 2 segments")

    history = []
    for epoch in range(epochs):
        perm = order_rng.permutation(n)
        losses = []
        for idx in np.array_split(perm, n_batches):
            current = model.with_params(state.params)
            # overflow is caught by the finiteness checks below
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = batch_loss_and_grads(current, cond[idx], targ[idx], state.noise[idx], cfg, basis)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch + 1}")
            adagrad_step(state, grads)
            losses.append(loss)
        state.epoch = epoch + 1
        history.append(float(np.mean(losses)))
        log.info("epoch %d/%d  cmmd %.6g", epoch + 1, epochs, history[-1])
    final = model.with_params({k: v.copy() for k, v in state.params.items()})
    return TrainResult(final, history)


def evaluate_loss(model: GmmnModel, pairs, cfg: CmmdConfig = CmmdConfig(), seed: int = 0,
                  batch_size: Optional[int] = None) -> float:
    """Mean CMMD over batches with fresh seeded noise; no update."""
    cond, targ = _as_pair_arrays(pairs)
    n = cond.shape[0]
    batch_size = min(DEFAULT_BATCH if batch_size is None else batch_size, n)
    rng = np.random.default_rng(seed)
    noise = draw_noise(n, model.noise_dim, rng)
    losses = []
    for idx in np.array_split(np.arange(n), -(-n // batch_size)):
        out = forward_batch(model, cond[idx], noise[idx])
        L = cmmd_weight(cond[idx], CmmdConfig(cfg.lam, cfg.sigma_in, cfg.sigma_out, cfg.rff_dim, "exact"))
        losses.append(cmmd_loss_and_grad(L, targ[idx], out, cfg.sigma_out)[0])
    return float(np.mean(losses))
