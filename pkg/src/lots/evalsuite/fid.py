"""Frechet distance between two feature distributions."""

from __future__ import annotations

import numpy as np
from scipy import linalg

from ..errors import InvalidInputError

EIG_CLAMP_TOL = 1e-10


def _mean_cov(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 2:
        raise InvalidInputError("need an (n, m) feature matrix with n >= 2")
    if not np.isfinite(f).all():
        raise InvalidInputError("features contain non-finite values")
    mu = f.mean(axis=0)
    cov = np.cov(f, rowvar=False, ddof=1)
    return mu, np.atleast_2d(cov)


def _psd_sqrt(sym: np.ndarray) -> np.ndarray:
    vals, vecs = linalg.eigh(sym)
    vals = np.where(vals < EIG_CLAMP_TOL, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(features_a: np.ndarray, features_b: np.ndarray) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The product square root comes from the eigendecomposition of the
    symmetrized product sqrt(S_a) S_b sqrt(S_a); eigenvalues below tolerance
    clamp to zero.
    """
    mu_a, cov_a = _mean_cov(features_a)
    mu_b, cov_b = _mean_cov(features_b)
    if mu_a.shape != mu_b.shape:
        raise InvalidInputError("feature dimensions differ between the two sets")

    sqrt_a = _psd_sqrt(cov_a)
    inner = sqrt_a @ cov_b @ sqrt_a
    vals = linalg.eigvalsh((inner + inner.T) / 2.0)
    vals = np.where(vals < EIG_CLAMP_TOL, 0.0, vals)
    trace_sqrt = float(np.sqrt(vals).sum())

    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * trace_sqrt)
    return max(value, 0.0)
