"""Desk-scale test problem generators, noise injection, and metrics.

Three families mirror the experiment setups: a rank-2 "binary star"
deblurring problem, a rank-4 smooth phantom with limited-angle
parallel-beam tomography, and blur-then-undersample inpainting with
rank-capped synthetic textures (or a user-supplied image file).
All generators are deterministic given their seed.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linops import (
    LinearOperator,
    gaussian_blur_operator,
    inpainting_operator,
    shaking_blur_operator,
    tomography_operator,
    unvec,
    vec,
)
from .lowrank import svd, truncate

__all__ = [
    "TestProblem",
    "star_problem",
    "phantom_problem",
    "inpainting_problem",
    "relative_error",
    "normalized_spectrum",
    "write_pgm",
    "read_pgm",
]


@dataclass(frozen=True)
class TestProblem:
    op: LinearOperator
    b: np.ndarray
    b_exact: np.ndarray
    x_exact: np.ndarray
    noise_level: float
    seed: int

    @property
    def noise_norm(self):
        """||eta||_2, the natural epsilon for the discrepancy principle."""
        return float(np.linalg.norm(self.b - self.b_exact))


def _add_noise(op, x_exact, noise_level, rng, seed):
    b_exact = op.matvec(x_exact)
    if noise_level > 0:
        eta = rng.standard_normal(b_exact.size)
        eta *= noise_level * np.linalg.norm(b_exact) / np.linalg.norm(eta)
        b = b_exact + eta
    else:
        b = b_exact.copy()
    return TestProblem(op, b, b_exact, x_exact, noise_level, seed)


def _gaussian_profile(n, center, width):
    t = np.arange(n)
    return np.exp(-((t - center) ** 2) / (2.0 * width**2))


def star_problem(n, noise_level=1e-3, sigma_blur=2.0, seed=0, bandwidth=None):
    """Deblurring of an exactly rank-2 two-spot image."""
    if n < 16:
        raise ValueError("n must be at least 16")
    rng = np.random.default_rng(seed)
    g1r = _gaussian_profile(n, 0.38 * n, 0.03 * n)
    g1c = _gaussian_profile(n, 0.44 * n, 0.03 * n)
    g2r = _gaussian_profile(n, 0.58 * n, 0.025 * n)
    g2c = _gaussian_profile(n, 0.56 * n, 0.025 * n)
    X = np.outer(g1r, g1c) + 0.8 * np.outer(g2r, g2c)
    if bandwidth is None:
        bandwidth = min(int(4 * sigma_blur) + 1, n)
    op = gaussian_blur_operator(n, sigma_blur, bandwidth)
    return _add_noise(op, vec(X), noise_level, rng, seed)


def _bump_profile(n, center, width):
    """Smooth concave bump: raised cosine, zero outside its support."""
    t = np.arange(n)
    u = (t - center) / width
    prof = np.cos(np.clip(u, -1.0, 1.0) * np.pi / 2.0) ** 2
    prof[np.abs(u) >= 1.0] = 0.0
    return prof


def phantom_problem(n, noise_level=1e-2, angle_span_degrees=90.0,
                    n_angles=60, detector_count=None, seed=0):
    """Limited-angle tomography of an exactly rank-4 smooth phantom."""
    if not 0 < angle_span_degrees < 180:
        raise ValueError("angle span must lie in (0, 180) degrees")
    rng = np.random.default_rng(seed)
    if detector_count is None:
        detector_count = n
    centers = [(0.50, 0.50), (0.45, 0.55), (0.58, 0.42), (0.40, 0.40)]
    widths = [0.75, 0.60, 0.50, 0.42]
    amps = [1.0, 0.3, 0.15, 0.08]
    X = np.zeros((n, n))
    for (cr, cc), w, a in zip(centers, widths, amps):
        X += a * np.outer(_bump_profile(n, cr * n, w * n),
                          _bump_profile(n, cc * n, w * n))
    angles = np.deg2rad(np.linspace(0.0, angle_span_degrees, n_angles,
                                    endpoint=False))
    op = tomography_operator(n, angles, detector_count)
    return _add_noise(op, vec(X), noise_level, rng, seed)


def _house_texture(n):
    """Piecewise-smooth blocky texture (stand-in for a natural image)."""
    i = np.arange(n)[:, None] / n
    j = np.arange(n)[None, :] / n
    X = 0.4 + 0.3 * np.cos(2 * np.pi * i) * np.cos(2 * np.pi * j)
    X += 0.5 * ((i > 0.35) & (i < 0.8) & (j > 0.25) & (j < 0.75))
    X += 0.3 * ((i > 0.15) & (i < 0.35) & (np.abs(j - 0.5) < 0.35 * (i / 0.35)))
    X += 0.15 * np.sin(9 * np.pi * j) * (i > 0.5)
    return X


def _peppers_texture(n):
    """Smooth blobby texture with gentle spectral decay."""
    i = np.arange(n)[:, None] / n
    j = np.arange(n)[None, :] / n
    X = 0.5 + 0.25 * np.sin(3 * np.pi * i) * np.cos(2 * np.pi * j)
    for cr, cc, w, a in [(0.3, 0.35, 0.18, 0.5), (0.65, 0.6, 0.22, 0.45),
                         (0.5, 0.2, 0.12, 0.35), (0.75, 0.3, 0.1, 0.3)]:
        X += a * np.exp(-(((i - cr) ** 2 + (j - cc) ** 2) / (2 * w**2)))
    return X


def _structured_mask(n, missing_fraction, rng):
    """Remove seeded random rectangles and disks until the target
    fraction of pixels is gone."""
    keep = np.ones((n, n), dtype=bool)
    target_missing = int(round(missing_fraction * n * n))
    guard = 0
    while (n * n - keep.sum()) < target_missing and guard < 10_000:
        guard += 1
        if rng.random() < 0.5:
            h = int(rng.integers(2, max(n // 6, 3)))
            w = int(rng.integers(2, max(n // 6, 3)))
            r = int(rng.integers(0, n - h))
            c = int(rng.integers(0, n - w))
            keep[r:r + h, c:c + w] = False
        else:
            rad = int(rng.integers(1, max(n // 10, 2)))
            cr = int(rng.integers(rad, n - rad))
            cc = int(rng.integers(rad, n - rad))
            ii, jj = np.ogrid[:n, :n]
            keep[(ii - cr) ** 2 + (jj - cc) ** 2 <= rad * rad] = False
    if not keep.any():
        keep[0, 0] = True
    return vec(keep.astype(float)) > 0.5


def inpainting_problem(image="peppers-like", n=64, rank_cap=50,
                       missing_fraction=0.4, pattern="random",
                       noise_level=1e-2, seed=0, blur_steps=6):
    """Blur-then-undersample inpainting with a rank-capped exact image.

    ``image`` selects a built-in texture ("house-like" / "peppers-like")
    or a path to a PGM file; ``pattern`` is "random" (i.i.d. Bernoulli
    missing pixels) or "structured" (seeded rectangles and disks).
    """
    if rank_cap > n:
        raise ValueError("rank_cap must not exceed n")
    rng = np.random.default_rng(seed)
    if image == "house-like":
        X = _house_texture(n)
    elif image == "peppers-like":
        X = _peppers_texture(n)
    else:
        X = read_pgm(image)
        if X.shape != (n, n):
            raise ValueError(
                f"image file has shape {X.shape}, expected ({n}, {n})")
    x_exact = truncate(vec(X), rank_cap)
    if pattern == "random":
        mask = rng.random(n * n) >= missing_fraction
        if not mask.any():
            mask[0] = True
    elif pattern == "structured":
        mask = _structured_mask(n, missing_fraction, rng)
    else:
        raise ValueError(f"unknown mask pattern {pattern!r}")
    blur = shaking_blur_operator(n, n_steps=blur_steps, seed=seed)
    op = inpainting_operator(n, mask, blur)
    return _add_noise(op, x_exact, noise_level, rng, seed)


def relative_error(x, x_exact):
    x = np.asarray(x, dtype=float)
    x_exact = np.asarray(x_exact, dtype=float)
    if x.size != x_exact.size:
        raise ValueError("length mismatch")
    denom = np.linalg.norm(x_exact)
    if denom == 0:
        raise ValueError("exact solution is zero")
    return float(np.linalg.norm(x_exact - x) / denom)


def normalized_spectrum(x, drop_below=None):
    """Singular values of unvec(x) divided by the largest; values below
    ``drop_below`` (e.g. 1e-3 for export) are omitted when requested."""
    x = np.asarray(x, dtype=float)
    n = int(round(np.sqrt(x.size)))
    s = svd(unvec(x, n)).sigma
    top = s[0] if s.size and s[0] > 0 else 1.0
    s = s / top
    if drop_below is not None:
        s = s[s >= drop_below]
    return s


def write_pgm(path, X, lo=None, hi=None):
    """Write a 16-bit binary PGM, linearly rescaled to [0, 65535]."""
    X = np.asarray(X, dtype=float)
    lo = X.min() if lo is None else lo
    hi = X.max() if hi is None else hi
    scale = 65535.0 / (hi - lo) if hi > lo else 0.0
    data = np.clip((X - lo) * scale, 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{X.shape[1]} {X.shape[0]}\n65535\n".encode())
        fh.write(data.tobytes())


def read_pgm(path):
    """Read a binary (P5) PGM into floats in [0, 1]."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError(f"unsupported PGM magic {magic!r} in {path}")
        fields = []
        while len(fields) < 3:
            line = fh.readline()
            if not line:
                raise ValueError(f"truncated PGM header in {path}")
            if line.startswith(b"#"):
                continue
            fields += line.split()
        w, h, maxval = (int(f) for f in fields)
        dtype = ">u2" if maxval > 255 else np.uint8
        data = np.frombuffer(fh.read(), dtype=dtype, count=w * h)
    return data.reshape(h, w).astype(float) / maxval


def export_problem(problem, directory, params=None):
    """Write a problem as PGM images plus JSON metadata."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n = problem.op.image_side
    write_pgm(directory / "x_exact.pgm", unvec(problem.x_exact, n))
    meta = {
        "seed": problem.seed,
        "noise_level": problem.noise_level,
        "rows": problem.op.rows,
        "cols": problem.op.cols,
        "image_side": n,
        "kind": problem.op.kind,
        "params": params or {},
    }
    np.savetxt(directory / "b.txt", problem.b, fmt="%.17g")
    np.savetxt(directory / "b_exact.txt", problem.b_exact, fmt="%.17g")
    np.savetxt(directory / "x_exact.txt", problem.x_exact, fmt="%.17g")
    (directory / "problem.json").write_text(json.dumps(meta, indent=2))
