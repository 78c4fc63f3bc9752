"""GLU feed-forward generator with an input-to-output residual.

Input is ``[condition, noise]``. Each hidden layer computes
``(x W_lin^T + b_lin) * sigmoid(x W_gate^T + b_gate)``; a linear output layer
follows and the condition slice of the input is added to its result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

Params = dict[str, NDArray[np.float64]]


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def param_names(n_layers: int) -> list[str]:
    names = []
    for i in range(n_layers):
        names += [f"glu{i}.W_lin", f"glu{i}.b_lin", f"glu{i}.W_gate", f"glu{i}.b_gate"]
    return names + ["out.W", "out.b"]


@dataclass(frozen=True)
class GmmnModel:
    cond_dim: int
    noise_dim: int
    hidden: int
    n_layers: int
    params: Params = field(repr=False)
    seed: int = 0
    residual: bool = True

    def __post_init__(self):
        shapes = expected_shapes(self.cond_dim, self.noise_dim, self.hidden, self.n_layers)
        if set(self.params) != set(shapes):
            raise ValueError("parameter names do not match the architecture")
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {self.params[name].shape}")

    @property
    def input_dim(self) -> int:
        return self.cond_dim + self.noise_dim

    def with_params(self, params: Params) -> "GmmnModel":
        return GmmnModel(self.cond_dim, self.noise_dim, self.hidden, self.n_layers,
                         params, self.seed, self.residual)

    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())


def expected_shapes(cond_dim: int, noise_dim: int, hidden: int, n_layers: int) -> dict[str, tuple]:
    shapes = {}
    fan_in = cond_dim + noise_dim
    for i in range(n_layers):
        shapes[f"glu{i}.W_lin"] = (hidden, fan_in)
        shapes[f"glu{i}.b_lin"] = (hidden,)
        shapes[f"glu{i}.W_gate"] = (hidden, fan_in)
        shapes[f"glu{i}.b_gate"] = (hidden,)
        fan_in = hidden
    shapes["out.W"] = (cond_dim, fan_in)
    shapes["out.b"] = (cond_dim,)
    return shapes


def init_model(
    cond_dim: int = 1,
    noise_dim: int = 10,
    hidden: int = 128,
    n_layers: int = 3,
    seed: int = 0,
    zero_output: bool = False,
) -> GmmnModel:
    """Glorot-uniform weights, zero biases.

    With ``zero_output`` the output layer starts at zero, so the untrained
    model is the identity on the condition.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in expected_shapes(cond_dim, noise_dim, hidden, n_layers).items():
        if len(shape) == 1 or (zero_output and name.startswith("out.")):
            params[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
    return GmmnModel(cond_dim, noise_dim, hidden, n_layers, params, seed)


def identity_model(cond_dim: int = 1, noise_dim: int = 10, hidden: int = 128, n_layers: int = 3) -> GmmnModel:
    """All-zero weights: output equals the condition."""
    params = {k: np.zeros(s) for k, s in expected_shapes(cond_dim, noise_dim, hidden, n_layers).items()}
    return GmmnModel(cond_dim, noise_dim, hidden, n_layers, params, 0)


def _batch_inputs(model: GmmnModel, condition, noise):
    c = np.asarray(condition, dtype=np.float64)
    n = np.asarray(noise, dtype=np.float64)
    single = c.ndim <= 1 and n.ndim == 1
    c = c.reshape(-1, model.cond_dim) if c.ndim <= 1 else c
    n = n.reshape(1, -1) if n.ndim == 1 else n
    if c.shape[1] != model.cond_dim:
        raise ValueError(f"condition has dimension {c.shape[1]}, model expects {model.cond_dim}")
    if n.shape[1] != model.noise_dim:
        raise ValueError(f"noise has dimension {n.shape[1]}, model expects {model.noise_dim}")
    if c.shape[0] != n.shape[0]:
        raise ValueError("condition and noise batches differ in size")
    if not np.all(np.isfinite(c)):
        raise ValueError("condition must be finite")
    return c, n, single


def forward_batch(model: GmmnModel, cond: NDArray, noise: NDArray, keep: bool = False):
    """Forward pass on (B, cond_dim) and (B, noise_dim) arrays.

    Returns the (B, cond_dim) output, plus the activation cache when ``keep``.
    """
    p = model.params
    x = np.concatenate([cond, noise], axis=1)
    cache = []
    for i in range(model.n_layers):
        u = x @ p[f"glu{i}.W_lin"].T + p[f"glu{i}.b_lin"]
        s = sigmoid(x @ p[f"glu{i}.W_gate"].T + p[f"glu{i}.b_gate"])
        cache.append((x, u, s))
        x = u * s
    y = x @ p["out.W"].T + p["out.b"]
    if model.residual:
        y = y + cond
    if keep:
        return y, (cache, x)
    return y


def forward(model: GmmnModel, condition: ArrayLike, noise: ArrayLike) -> NDArray[np.float64]:
    """Filtered MS values for one segment or a batch of segments."""
    c, n, single = _batch_inputs(model, condition, noise)
    y = forward_batch(model, c, n)
    return y[0] if single else y


def backward(model: GmmnModel, cache, grad_out: NDArray[np.float64]) -> Params:
    """Parameter gradients given dLoss/dOutput for a cached forward pass."""
    p = model.params
    layers, h = cache
    grads = {
        "out.W": grad_out.T @ h,
        "out.b": grad_out.sum(axis=0),
    }
    g = grad_out @ p["out.W"]
    for i in reversed(range(model.n_layers)):
        x, u, s = layers[i]
        du = g * s
        dv = g * u * s * (1.0 - s)
        grads[f"glu{i}.W_lin"] = du.T @ x
        grads[f"glu{i}.b_lin"] = du.sum(axis=0)
        grads[f"glu{i}.W_gate"] = dv.T @ x
        grads[f"glu{i}.b_gate"] = dv.sum(axis=0)
        if i:
            g = du @ p[f"glu{i}.W_lin"] + dv @ p[f"glu{i}.W_gate"]
    return grads
