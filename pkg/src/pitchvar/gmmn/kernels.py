"""Gaussian kernel, Gram matrices and random Fourier features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray


def gaussian_kernel(a: ArrayLike, b: ArrayLike, sigma: float) -> float:
    """``exp(-||a - b||^2 / sigma^2)``."""
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError("kernel arguments differ in dimension")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    d = a - b
    return float(np.exp(-np.dot(d, d) / sigma ** 2))


def as_rows(x: ArrayLike) -> NDArray[np.float64]:
    """View a list of vectors (or a 1-D array of scalars) as an (n, d) matrix."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("expected a list of vectors")
    return arr


def sq_dists(A: NDArray[np.float64], B: NDArray[np.float64]) -> NDArray[np.float64]:
    if A.shape[0] * B.shape[0] * A.shape[1] <= 4_000_000:
        return np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
    d = np.sum(A ** 2, 1)[:, None] + np.sum(B ** 2, 1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def _pair_sq_dists(A, B):
    if A.shape[1] == 1:
        # exact differences avoid the cancellation of the expanded form
        return (A - B.T) ** 2
    return sq_dists(A, B)


def gram(A: ArrayLike, B: ArrayLike, sigma: float) -> NDArray[np.float64]:
    """Gaussian Gram matrix with entry (i, j) = k(A[i], B[j])."""
    A = as_rows(A)
    B = as_rows(B)
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("empty vector list")
    if A.shape[1] != B.shape[1]:
        raise ValueError("vector lists differ in dimension")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    return np.exp(-_pair_sq_dists(A, B) / sigma ** 2)


def gram_expm1(A: ArrayLike, B: ArrayLike, sigma: float) -> NDArray[np.float64]:
    """``gram(A, B, sigma) - 1`` without the rounding of forming the kernel first."""
    A = as_rows(A)
    B = as_rows(B)
    return np.expm1(-_pair_sq_dists(A, B) / sigma ** 2)


@dataclass(frozen=True)
class RffBasis:
    """Random Fourier features for ``exp(-||x - y||^2 / sigma^2)``.

    Frequencies are drawn from N(0, 2/sigma^2 I) and phases from U[0, 2pi).
    """

    W: NDArray[np.float64]
    b: NDArray[np.float64]
    sigma: float

    @classmethod
    def draw(cls, dim: int, sigma: float, n_features: int = 1024, seed: int = 0) -> "RffBasis":
        if n_features < 1:
            raise ValueError("n_features must be >= 1")
        rng = np.random.default_rng(seed)
        W = rng.normal(0.0, np.sqrt(2.0) / sigma, size=(n_features, dim))
        b = rng.uniform(0.0, 2.0 * np.pi, size=n_features)
        return cls(W, b, float(sigma))

    @property
    def n_features(self) -> int:
        return self.b.size

    def features(self, X: ArrayLike) -> NDArray[np.float64]:
        """Feature rows, shape (n, D)."""
        X = as_rows(X)
        return np.sqrt(2.0 / self.n_features) * np.cos(X @ self.W.T + self.b)


def rff_map(x: ArrayLike, basis: RffBasis) -> NDArray[np.float64]:
    """D-dimensional feature vector of a single input."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return basis.features(x[None, :])[0]
