"""Matrix-free linear operators for blur, tomography and inpainting.

Vectors of length N = n*n are related to n x n images by column stacking
(``vec``/``unvec``); every operator works on the stacked vectors but is
applied via small n x n matrix products, never an N x N matrix.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from ._tomo_kernels import trace_rays

__all__ = [
    "LinearOperator",
    "vec",
    "unvec",
    "gaussian_blur_operator",
    "shaking_blur_operator",
    "tomography_operator",
    "inpainting_operator",
    "identity_operator",
    "from_dense",
]


def vec(X):
    """Stack the columns of an n x n matrix into a length-n^2 vector."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {X.shape}")
    return X.reshape(-1, order="F")


def unvec(x, n):
    """Inverse of :func:`vec`: reshape a length-n^2 vector column-major."""
    x = np.asarray(x)
    if x.size != n * n:
        raise ValueError(f"expected a vector of length {n * n}, got {x.size}")
    return x.reshape(n, n, order="F")


@dataclass(frozen=True)
class LinearOperator:
    """Matrix-free forward map with its adjoint.

    ``apply`` maps R^N -> R^M, ``apply_adjoint`` maps R^M -> R^N, and
    ``image_side`` is n with n^2 = N.  Instances are immutable and their
    maps are pure, so they are safe to share across threads.
    """

    rows: int
    cols: int
    image_side: int
    apply: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    apply_adjoint: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    kind: str = "explicit-dense"

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("operator dimensions must be positive")
        if self.image_side * self.image_side != self.cols:
            raise ValueError(
                f"image_side^2 = {self.image_side ** 2} != cols = {self.cols}"
            )

    @property
    def shape(self):
        return (self.rows, self.cols)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.size != self.cols:
            raise ValueError(f"expected length {self.cols}, got {x.size}")
        return self.apply(x)

    def rmatvec(self, y):
        y = np.asarray(y, dtype=float)
        if y.size != self.rows:
            raise ValueError(f"expected length {self.rows}, got {y.size}")
        return self.apply_adjoint(y)

    def to_dense(self):
        """Assemble the explicit matrix column by column (test-scale only)."""
        A = np.empty((self.rows, self.cols))
        e = np.zeros(self.cols)
        for j in range(self.cols):
            e[j] = 1.0
            A[:, j] = self.apply(e)
            e[j] = 0.0
        return A

    def save_dense(self, path):
        """Write the explicit matrix as plain text, one row per line."""
        np.savetxt(path, self.to_dense(), fmt="%.17g")


def from_dense(A, image_side=None):
    """Wrap an explicit matrix as a LinearOperator."""
    A = np.asarray(A, dtype=float)
    m, n_cols = A.shape
    if image_side is None:
        image_side = int(round(np.sqrt(n_cols)))
    return LinearOperator(
        rows=m,
        cols=n_cols,
        image_side=image_side,
        apply=lambda x, A=A: A @ x,
        apply_adjoint=lambda y, A=A: A.T @ y,
        kind="explicit-dense",
    )


def identity_operator(n):
    N = n * n
    return LinearOperator(
        rows=N,
        cols=N,
        image_side=n,
        apply=lambda x: np.array(x, dtype=float, copy=True),
        apply_adjoint=lambda y: np.array(y, dtype=float, copy=True),
        kind="explicit-dense",
    )


def _blur_band_matrix(n, sigma, bandwidth):
    """Banded Toeplitz factor with Gaussian samples, rows summing to 1."""
    B = np.zeros((n, n))
    idx = np.arange(n)
    for d in range(-bandwidth, bandwidth + 1):
        if sigma > 0:
            w = np.exp(-(d * d) / (2.0 * sigma * sigma))
        else:
            w = 1.0 if d == 0 else 0.0
        rows = idx[(idx + d >= 0) & (idx + d < n)]
        B[rows, rows + d] = w
    B /= B.sum(axis=1, keepdims=True)
    return B


def gaussian_blur_operator(n, sigma, bandwidth):
    """Separable Gaussian blur A = B (x) B with zero boundary conditions.

    ``apply`` computes vec(B @ X @ B.T) in O(n^3) flops.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0 and bandwidth > 0:
        raise ValueError("sigma must be positive for a nontrivial band")
    if bandwidth > n:
        raise ValueError("bandwidth must not exceed n")
    B = _blur_band_matrix(n, sigma, bandwidth)

    def apply(x, B=B, n=n):
        return vec(B @ unvec(x, n) @ B.T)

    def apply_adjoint(y, B=B, n=n):
        return vec(B.T @ unvec(y, n) @ B)

    N = n * n
    return LinearOperator(N, N, n, apply, apply_adjoint, kind="blur")

# expose the factor for tests against the explicit Kronecker form
gaussian_blur_operator.band_matrix = _blur_band_matrix


def shaking_blur_operator(n, n_steps=8, seed=0):
    """Motion-style blur averaging shifted copies along a random walk.

    Each shift by (di, dj) acts as S_r @ X @ S_c.T with zero boundary,
    so the operator stays a cheap sum of two-sided products.
    """
    rng = np.random.default_rng(seed)
    di, dj = 0, 0
    trajectory = [(0, 0)]
    for _ in range(max(n_steps - 1, 0)):
        di += int(rng.integers(-1, 2))
        dj += int(rng.integers(-1, 2))
        trajectory.append((di, dj))

    def shift(M, d, axis):
        out = np.zeros_like(M)
        if d == 0:
            out[:] = M
        elif d > 0:
            if axis == 0:
                out[d:, :] = M[:-d, :]
            else:
                out[:, d:] = M[:, :-d]
        else:
            if axis == 0:
                out[:d, :] = M[-d:, :]
            else:
                out[:, :d] = M[:, -d:]
        return out

    w = 1.0 / len(trajectory)

    def apply(x, n=n):
        X = unvec(x, n)
        out = np.zeros_like(X)
        for di, dj in trajectory:
            out += shift(shift(X, di, 0), dj, 1)
        return vec(w * out)

    def apply_adjoint(y, n=n):
        Y = unvec(y, n)
        out = np.zeros_like(Y)
        for di, dj in trajectory:
            out += shift(shift(Y, -di, 0), -dj, 1)
        return vec(w * out)

    N = n * n
    return LinearOperator(N, N, n, apply, apply_adjoint, kind="blur")


def tomography_operator(n, angles, detector_count):
    """Parallel-beam projector with exact chord-length weights.

    One row per (angle, detector) ray; the adjoint is the transpose
    (back-projection).  Assembled once as a sparse matrix via the
    Siddon traversal in :mod:`lrkrylov._tomo_kernels`.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if angles.size == 0:
        raise ValueError("at least one projection angle is required")
    if detector_count < 1:
        raise ValueError("detector_count must be >= 1")
    spacing = n / detector_count
    offsets = (np.arange(detector_count) - (detector_count - 1) / 2.0) * spacing
    rows, cols, vals = trace_rays(n, angles, offsets)
    M = angles.size * detector_count
    N = n * n
    A = sp.csr_matrix((vals, (rows, cols)), shape=(M, N))
    At = A.T.tocsr()
    return LinearOperator(
        rows=M,
        cols=N,
        image_side=n,
        apply=lambda x, A=A: A @ x,
        apply_adjoint=lambda y, At=At: At @ y,
        kind="tomography",
    )


def inpainting_operator(n, mask, blur):
    """Blur then keep only the pixels where ``mask`` is true."""
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if mask.size != n * n:
        raise ValueError(f"mask must have length {n * n}, got {mask.size}")
    if not mask.any():
        raise ValueError("mask keeps no pixels")
    if blur.rows != n * n or blur.cols != n * n:
        raise ValueError("blur operator must be n^2 x n^2")
    keep = np.flatnonzero(mask)

    def apply(x):
        return blur.apply(x)[keep]

    def apply_adjoint(y):
        full = np.zeros(n * n)
        full[keep] = y
        return blur.apply_adjoint(full)

    return LinearOperator(
        rows=keep.size,
        cols=n * n,
        image_side=n,
        apply=apply,
        apply_adjoint=apply_adjoint,
        kind="inpainting",
    )
