"""Small dense linear-algebra helpers shared across the package."""

from __future__ import annotations

import numpy as np

__all__ = ["check_symmetric", "psd_sqrt", "cholesky_jitter", "min_eigenvalue"]


def check_symmetric(mat: np.ndarray, name: str, tol: float = 1e-12) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {mat.shape}")
    scale = max(1.0, np.abs(mat).max())
    if np.abs(mat - mat.T).max() > tol * scale:
        raise ValueError(f"{name} must be symmetric within {tol}")
    return 0.5 * (mat + mat.T)


def psd_sqrt(mat: np.ndarray, clip: float = 1e-12) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues below `clip` (relative to the largest) are treated as zero,
    so rank-deficient inputs are fine.
    """
    mat = 0.5 * (mat + np.asarray(mat, dtype=float).T)
    w, v = np.linalg.eigh(mat)
    floor = clip * max(w.max(initial=0.0), 1.0)
    if w.min(initial=0.0) < -1e-8 * max(w.max(initial=0.0), 1.0):
        raise ValueError("matrix is not positive semidefinite")
    w = np.where(w < floor, 0.0, w)
    return (v * np.sqrt(w)) @ v.T


def cholesky_jitter(mat: np.ndarray, max_tries: int = 8) -> np.ndarray:
    """Cholesky factor of a PSD matrix, escalating diagonal jitter on failure."""
    mat = np.asarray(mat, dtype=float)
    scale = max(np.abs(mat).max(), 1e-300)
    jitter = 0.0
    for _ in range(max_tries):
        try:
            return np.linalg.cholesky(mat + jitter * np.eye(mat.shape[0]))
        except np.linalg.LinAlgError:
            jitter = 1e-12 * scale if jitter == 0.0 else 10.0 * jitter
    raise np.linalg.LinAlgError(
        f"Cholesky failed even with jitter {jitter:.1e}; matrix is not PSD")


def min_eigenvalue(mat: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (mat + mat.T))[0])
