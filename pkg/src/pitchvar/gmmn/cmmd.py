"""Conditional maximum mean discrepancy between natural and generated MS.

With conditions ``C``, natural targets ``N`` and generated samples ``F`` (all
T' rows), the loss is

    (1/T'^2) * [tr(L K_nn) + tr(L K_ff) - 2 tr(L K_nf)],
    L = Ht^-1 H Ht^-1,   Ht = H + lam * I,

where ``H`` is the Gaussian Gram matrix of the conditions (bandwidth
``sigma_in``) and the ``K`` matrices use ``sigma_out``. ``L`` depends only on
the conditions, so it is a constant for backpropagation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .kernels import RffBasis, as_rows, gram, gram_expm1


@dataclass(frozen=True)
class CmmdConfig:
    lam: float = 0.01
    sigma_in: float = 100.0
    sigma_out: float = 1.0
    rff_dim: int = 1024
    mode: Literal["exact", "rff"] = "exact"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be > 0")
        if not (self.sigma_in > 0 and self.sigma_out > 0):
            raise ValueError("kernel bandwidths must be > 0")
        if self.rff_dim < 1:
            raise ValueError("rff_dim must be >= 1")
        if self.mode not in ("exact", "rff"):
            raise ValueError(f"unknown mode {self.mode!r}")


def _check_sets(S_cond, S_nat, S_filt):
    C, N, F = as_rows(S_cond), as_rows(S_nat), as_rows(S_filt)
    if not (C.shape[0] == N.shape[0] == F.shape[0]):
        raise ValueError("condition, natural and filtered sets differ in segment count")
    if C.shape[0] == 0:
        raise ValueError("empty segment set")
    if N.shape[1] != F.shape[1]:
        raise ValueError("natural and filtered vectors differ in dimension")
    return C, N, F


def weight_exact(S_cond: ArrayLike, cfg: CmmdConfig) -> NDArray[np.float64]:
    """``L = Ht^-1 H Ht^-1`` via a Cholesky solve.

    A wide input kernel makes ``H`` nearly all-ones, and storing it directly
    rounds away the structure that ``L`` amplifies by ``1/lam``. ``H`` is
    therefore split as ``11^T + E`` with ``E = expm1(-d^2/sigma^2)`` and the
    system is solved in an orthonormal basis whose first vector is ``1/sqrt(T')``,
    where the all-ones part is a single diagonal entry.
    """
    C = as_rows(S_cond)
    t = C.shape[0]
    E = gram_expm1(C, C, cfg.sigma_in)
    v = _reflector(t)
    Hq = _reflect_both(E, v)
    Hq[0, 0] += t
    Hq = 0.5 * (Hq + Hq.T)
    Hinv = _spd_inverse(Hq + cfg.lam * np.eye(t))
    L = _reflect_both(Hinv @ Hq @ Hinv, v)
    return 0.5 * (L + L.T)


def _spd_inverse(A: NDArray[np.float64]) -> NDArray[np.float64]:
    c, info = scipy.linalg.lapack.dpotrf(A, lower=1)
    if info:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    inv, info = scipy.linalg.lapack.dpotri(c, lower=1)
    if info:
        raise np.linalg.LinAlgError("inverse failed")
    inv = np.tril(inv)
    return inv + np.tril(inv, -1).T


def _reflector(t: int) -> Optional[NDArray[np.float64]]:
    """Unit vector ``v`` with ``(I - 2vv^T) e_1 = 1/sqrt(t)``; None when t == 1."""
    v = np.full(t, 1.0 / np.sqrt(t))
    v[0] -= 1.0
    norm = np.linalg.norm(v)
    return None if norm == 0.0 else v / norm


def _reflect_both(A: NDArray[np.float64], v: Optional[NDArray[np.float64]]) -> NDArray[np.float64]:
    """``Q A Q`` for the symmetric reflector ``Q = I - 2vv^T``, in O(T'^2)."""
    if v is None:
        return A.copy()
    A = A - 2.0 * np.outer(v, v @ A)
    return A - 2.0 * np.outer(A @ v, v)


def weight_rff(S_cond: ArrayLike, cfg: CmmdConfig, basis: RffBasis) -> NDArray[np.float64]:
    """``L`` with ``H ~ Phi^T Phi`` and Woodbury for the regularised inverse.

    ``Ht^-1 = (1/lam) (I - Phi^T (lam I_D + Phi Phi^T)^-1 Phi)``, so
    ``L = P P^T`` with ``P = Ht^-1 Phi^T`` and only a D x D system is solved.
    """
    Phi = basis.features(as_rows(S_cond)).T  # D x T'
    D = Phi.shape[0]
    inner = cfg.lam * np.eye(D) + Phi @ Phi.T
    fac = scipy.linalg.cho_factor(inner, lower=True)
    PhiT = Phi.T
    P = (PhiT - PhiT @ scipy.linalg.cho_solve(fac, Phi @ PhiT)) / cfg.lam
    return P @ P.T


def _loss_from_weight(L, N, F, sigma_out):
    t = N.shape[0]
    K_nn = gram(N, N, sigma_out)
    K_ff = gram(F, F, sigma_out)
    K_nf = gram(N, F, sigma_out)
    # L is symmetric, so tr(L K_nf) = sum(L * K_nf); with F == N all three
    # Gram matrices are bitwise equal and the loss is exactly zero
    return float((np.sum(L * K_nn) + np.sum(L * K_ff) - 2.0 * np.sum(L * K_nf)) / t ** 2)


def cmmd_exact(S_cond: ArrayLike, S_nat: ArrayLike, S_filt: ArrayLike, cfg: CmmdConfig = CmmdConfig()) -> float:
    C, N, F = _check_sets(S_cond, S_nat, S_filt)
    return _loss_from_weight(weight_exact(C, cfg), N, F, cfg.sigma_out)


def cmmd_rff(
    S_cond: ArrayLike, S_nat: ArrayLike, S_filt: ArrayLike, cfg: CmmdConfig, basis: RffBasis
) -> float:
    C, N, F = _check_sets(S_cond, S_nat, S_filt)
    return _loss_from_weight(weight_rff(C, cfg, basis), N, F, cfg.sigma_out)


def cmmd_weight(S_cond: ArrayLike, cfg: CmmdConfig, basis: Optional[RffBasis] = None) -> NDArray[np.float64]:
    if cfg.mode == "rff":
        if basis is None:
            raise ValueError("rff mode needs an RffBasis")
        return weight_rff(S_cond, cfg, basis)
    return weight_exact(S_cond, cfg)


def cmmd_loss_and_grad(
    L: NDArray[np.float64], S_nat: ArrayLike, S_filt: ArrayLike, sigma_out: float
) -> tuple[float, NDArray[np.float64]]:
    """Loss and its gradient w.r.t. each generated vector, for a fixed weight ``L``.

    Uses ``d/db exp(-||a-b||^2/s^2) = (2/s^2) (a - b) k(a, b)``.
    """
    N, F = as_rows(S_nat), as_rows(S_filt)
    t = N.shape[0]
    K_nn = gram(N, N, sigma_out)
    K_ff = gram(F, F, sigma_out)
    K_fn = gram(F, N, sigma_out)  # K_fn[j, i] = k(n_i, f_j)
    loss = (np.sum(L * K_nn) + np.sum(L * K_ff) - 2.0 * np.sum(L * K_fn)) / t ** 2
    c = 2.0 / sigma_out ** 2
    A = L * K_ff  # symmetric
    B = L * K_fn  # B[j, i] = L[j, i] k(n_i, f_j); L symmetric
    # d tr(L K_ff)/d f_j = 2 sum_i L_ij c (f_i - f_j) k(f_i, f_j)
    g_ff = 2.0 * c * (A @ F - A.sum(1)[:, None] * F)
    # d tr(L K_nf)/d f_j = sum_i L_ij c (n_i - f_j) k(n_i, f_j)
    g_nf = c * (B @ N - B.sum(1)[:, None] * F)
    grad = (g_ff - 2.0 * g_nf) / t ** 2
    return float(loss), grad


def cmmd_grad(
    S_cond: ArrayLike, S_nat: ArrayLike, S_filt: ArrayLike, cfg: CmmdConfig = CmmdConfig(),
    basis: Optional[RffBasis] = None,
) -> NDArray[np.float64]:
    """Gradient of the CMMD loss w.r.t. every filtered-MS vector, shape (T', d)."""
    C, N, F = _check_sets(S_cond, S_nat, S_filt)
    return cmmd_loss_and_grad(cmmd_weight(C, cfg, basis), N, F, cfg.sigma_out)[1]
