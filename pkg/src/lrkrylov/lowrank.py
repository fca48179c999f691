"""SVD-based primitives: rank truncation, singular value shrinkage, the
smooth Schatten-p surrogate, and the reweighting transform built from
Kronecker products of SVD factors.

The weight matrix W = I (x) diag(w) and the orthogonal transform
S = V^T (x) U^T are never materialized; all applications go through
n x n three-matrix products (O(n^3) flops for vectors of length n^2).
"""

from dataclasses import dataclass

import numpy as np

from .linops import unvec, vec

__all__ = [
    "SvdTriple",
    "Reweighter",
    "svd",
    "truncate",
    "shrink",
    "smooth_schatten",
    "smooth_schatten_gradient",
    "build_reweighter",
    "build_reweighter_from_basis",
    "identity_reweighter",
    "apply_transform",
    "precondition",
]


@dataclass(frozen=True)
class SvdTriple:
    """Full SVD factors U, sigma (nonincreasing), V of a square matrix."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.sigma) @ self.V.T


def svd(X):
    """Full SVD with a deterministic sign convention.

    The largest-magnitude entry of each column of U is made positive so
    repeated factorizations of the same matrix agree across runs.
    """
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix has non-finite entries")
    U, s, Vt = np.linalg.svd(X)
    V = Vt.T
    flip = np.sign(U[np.argmax(np.abs(U), axis=0), np.arange(U.shape[1])])
    flip[flip == 0] = 1.0
    return SvdTriple(U * flip, s, V * flip)


def truncate(c, kappa):
    """Best rank-kappa approximation of the matricized vector (tau_kappa)."""
    c = np.asarray(c, dtype=float)
    n = int(round(np.sqrt(c.size)))
    if not 1 <= kappa <= n:
        raise ValueError(f"kappa must be in [1, {n}], got {kappa}")
    f = svd(unvec(c, n))
    Ck = (f.U[:, :kappa] * f.sigma[:kappa]) @ f.V[:, :kappa].T
    return vec(Ck)


def shrink(X, tau):
    """Singular value shrinkage D_tau(X) = U max(Sigma - tau, 0) V^T."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    f = svd(X)
    return (f.U * np.maximum(f.sigma - tau, 0.0)) @ f.V.T


def smooth_schatten(X, p, gamma):
    """Smooth Schatten-p value Tr((X^T X + gamma I)^{p/2})."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    s = np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False)
    return float(np.sum((s * s + gamma) ** (p / 2.0)))


def smooth_schatten_gradient(X, p, gamma):
    """Gradient p (X X^T + gamma I)^{p/2 - 1} X, computed via the SVD."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    f = svd(X)
    scale = p * (f.sigma**2 + gamma) ** (p / 2.0 - 1.0)
    return (f.U * (scale * f.sigma)) @ f.V.T


@dataclass(frozen=True)
class Reweighter:
    """The pair (W, S) stored implicitly through SVD factors.

    S = V^T (x) U^T and W = I (x) diag(inv_weights**-1); ``inv_weights``
    (the diagonal of W^{-1}) is stored because it stays finite for the
    basis-vector variant, where plain weights can blow up at sigma = 0.
    """

    U: np.ndarray
    V: np.ndarray
    inv_weights: np.ndarray
    p: float
    gamma: float

    @property
    def side(self):
        return self.U.shape[0]


def identity_reweighter(n, p=1.0, gamma=1.0):
    """W_0 = I, S_0 = I: the starting reweighter of every solver."""
    eye = np.eye(n)
    return Reweighter(eye, eye, np.ones(n), p, gamma)


def build_reweighter(Xk, p, gamma):
    """Reweighter from the current iterate: inverse weights
    (sigma_i^2 + gamma)^{1/2 - p/4}."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    f = svd(np.asarray(Xk, dtype=float))
    inv_w = (f.sigma**2 + gamma) ** (0.5 - p / 4.0)
    return Reweighter(f.U, f.V, inv_w, p, gamma)


def build_reweighter_from_basis(v_i, p, gamma):
    """Reweighter from a basis vector ("(v)" variant): inverse weights
    sigma_i^{1/2 - p/4} taken from the SVD of unvec(v_i)."""
    v_i = np.asarray(v_i, dtype=float)
    if not np.any(v_i):
        raise ValueError("basis vector is zero")
    n = int(round(np.sqrt(v_i.size)))
    f = svd(unvec(v_i, n))
    inv_w = f.sigma ** (0.5 - p / 4.0)
    return Reweighter(f.U, f.V, inv_w, p, gamma)


def _weight_diag(rw, power):
    """Diagonal of W^power (power applied to the row index of unvec)."""
    if power == 0:
        return None
    with np.errstate(divide="ignore"):
        return rw.inv_weights ** (-power)


def apply_transform(rw, v, direction, weight_power=0):
    """Apply S or S^T with an optional weight in the transformed domain.

    direction "S":            W^q @ (S v)   = vec(D (U^T unvec(v) V))
    direction "S_transpose":  S^T @ (W^q v) = vec(U (D unvec(v)) V^T)

    so round-tripping with weight_power 0 is the identity, and composing
    ("S", q) then ("S_transpose", 0) gives S^T W^q S.
    """
    v = np.asarray(v, dtype=float)
    n = rw.side
    if v.size != n * n:
        raise ValueError(f"expected length {n * n}, got {v.size}")
    M = unvec(v, n)
    d = _weight_diag(rw, weight_power)
    if direction == "S":
        out = rw.U.T @ M @ rw.V
        if d is not None:
            out = d[:, None] * out
    elif direction == "S_transpose":
        if d is not None:
            M = d[:, None] * M
        out = rw.U @ M @ rw.V.T
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return vec(out)


def precondition(rw, v, weight_power):
    """Composite S^T W^q S v in one O(n^3) chain."""
    v = np.asarray(v, dtype=float)
    n = rw.side
    M = rw.U.T @ unvec(v, n) @ rw.V
    d = _weight_diag(rw, weight_power)
    if d is not None:
        M = d[:, None] * M
    return vec(rw.U @ M @ rw.V.T)
