"""Flat dense vector arithmetic for model parameters and updates.

All vectors are 1-D float64 numpy arrays of a fixed dimension d. The two
transforms at the heart of the feddpc strategy live here: orthogonal
projection of a client update onto the previous aggregate update, and
adaptive rescaling of the orthogonal residual.
"""

from __future__ import annotations

import numpy as np

#: Norms at or below this are treated as zero (degenerate direction).
DEFAULT_EPS = 1e-12


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or Inf components."""


def dot(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.dot(a, b))


def norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.dot(a, a)))


def project(update: np.ndarray, onto: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Orthogonal projection of `update` onto the line spanned by `onto`.

    Returns the zero vector when `onto` is degenerate (norm <= eps), which
    makes round one of a simulation, where the previous aggregate update is
    still zero, pass updates through unchanged via `residual`.
    """
    if update.shape != onto.shape:
        raise ValueError(f"dimension mismatch: {update.shape[0]} vs {onto.shape[0]}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if norm(onto) <= eps:
        return np.zeros_like(onto)
    out = (np.dot(update, onto) / np.dot(onto, onto)) * onto
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("projection produced non-finite components")
    return out


def residual(update: np.ndarray, prev_global: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Component of `update` orthogonal to `prev_global`.

    Equals `update` unchanged when `prev_global` is degenerate.
    """
    return update - project(update, prev_global, eps)


def adaptive_scale(
    original: np.ndarray, resid: np.ndarray, lam: float, eps: float = DEFAULT_EPS
) -> np.ndarray:
    """Rescale a residual by (lam + |original| / |resid|).

    The norm ratio is the cosecant of the angle between the original update
    and the direction it was projected onto, so updates more aligned with
    the previous aggregate update are amplified more. A degenerate residual
    (original parallel to the projection target) yields the zero vector.
    """
    if original.shape != resid.shape:
        raise ValueError(f"dimension mismatch: {original.shape[0]} vs {resid.shape[0]}")
    resid_norm = norm(resid)
    if resid_norm <= eps:
        return np.zeros_like(resid)
    scale = lam + norm(original) / resid_norm
    if not np.isfinite(scale):
        raise NonFiniteError(f"adaptive scale factor is non-finite: {scale}")
    return scale * resid
