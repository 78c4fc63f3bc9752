"""Independent reference implementations used as test oracles.

Everything here is written from the defining formulas with plain loops or
arbitrary precision, sharing no code with the package.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np


def mp_cmmd(C, N, F, lam=0.01, sigma_in=100.0, sigma_out=1.0, dps=40):
    """CMMD evaluated in ``dps``-digit arithmetic with an explicit matrix inverse."""
    with mpmath.workdps(dps):
        C, N, F = (np.atleast_2d(np.asarray(x, float).reshape(len(x), -1)) for x in (C, N, F))
        t = C.shape[0]

        def k(a, b, s):
            d = sum((mpmath.mpf(float(x)) - mpmath.mpf(float(y))) ** 2 for x, y in zip(a, b))
            return mpmath.exp(-d / mpmath.mpf(s) ** 2)

        H = mpmath.matrix(t, t)
        for i in range(t):
            for j in range(t):
                H[i, j] = k(C[i], C[j], sigma_in)
        Ht = H + mpmath.mpf(lam) * mpmath.eye(t)
        Hi = Ht ** -1
        L = Hi * H * Hi
        tot = mpmath.mpf(0)
        for i in range(t):
            for j in range(t):
                tot += L[i, j] * (k(N[j], N[i], sigma_out) + k(F[j], F[i], sigma_out) - 2 * k(N[j], F[i], sigma_out))
        return float(tot / t ** 2)


def dense_cmmd(C, N, F, lam=0.01, sigma_in=100.0, sigma_out=1.0):
    """Float64 dense evaluation with a direct solve, written from the formula."""
    C, N, F = (np.asarray(x, float).reshape(len(x), -1) for x in (C, N, F))
    t = len(C)

    def G(A, B, s):
        return np.array([[math.exp(-float(np.sum((a - b) ** 2)) / s ** 2) for b in B] for a in A])

    H = G(C, C, sigma_in)
    Hi = np.linalg.solve(H + lam * np.eye(t), np.eye(t))
    L = Hi @ H @ Hi
    return float(np.trace(L @ G(N, N, sigma_out)) + np.trace(L @ G(F, F, sigma_out))
                 - 2 * np.trace(L @ G(N, F, sigma_out))) / t ** 2


def naive_forward(params, n_layers, cond, noise, residual=True):
    """Loop-based GLU network forward pass for a single input vector."""
    x = list(cond) + list(noise)
    for i in range(n_layers):
        Wl, bl = params[f"glu{i}.W_lin"], params[f"glu{i}.b_lin"]
        Wg, bg = params[f"glu{i}.W_gate"], params[f"glu{i}.b_gate"]
        h = []
        for r in range(Wl.shape[0]):
            lin = bl[r] + sum(Wl[r, c] * x[c] for c in range(len(x)))
            gate = bg[r] + sum(Wg[r, c] * x[c] for c in range(len(x)))
            h.append(lin / (1.0 + math.exp(-gate)))
        x = h
    W, b = params["out.W"], params["out.b"]
    y = [b[r] + sum(W[r, c] * x[c] for c in range(len(x))) for r in range(W.shape[0])]
    if residual:
        y = [v + c for v, c in zip(y, cond)]
    return np.array(y)


def naive_dft_segment(seg):
    """Nonnegative-frequency DFT bins of one real segment by direct summation."""
    n = len(seg)
    return np.array([sum(seg[t] * complex(math.cos(-2 * math.pi * m * t / n), math.sin(-2 * math.pi * m * t / n))
                         for t in range(n)) for m in range(n // 2 + 1)])


def periodic_hann(n):
    return np.array([0.5 - 0.5 * math.cos(2 * math.pi * i / n) for i in range(n)])


def central_difference(f, x, h):
    """Central finite-difference gradient of scalar ``f`` at array ``x`` (modified in place, restored)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return g


def norm_rel_error(a, b):
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if den == 0 else float(np.linalg.norm(a - b) / den)
