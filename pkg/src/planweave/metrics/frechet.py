"""Frechet distance between Gaussians fitted to feature sets:
||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2).

Matrix square roots use symmetric eigendecomposition with eigenvalues clamped
at zero; a small ridge is added to both covariances when either is near
singular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-9
PSD_TOL = 1e-6
RIDGE = 1e-6
NEAR_SINGULAR = 1e-10


@dataclass(frozen=True)
class DistributionMoments:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        if mean.ndim != 1 or cov.ndim != 2:
            raise ValueError("mean must be a vector and covariance a matrix")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"covariance shape {cov.shape} does not match mean dimension {mean.size}"
            )
        if not np.allclose(cov, cov.T, atol=SYMMETRY_TOL):
            raise ValueError("covariance must be symmetric within 1e-9")


def moments_from_features(features: np.ndarray) -> DistributionMoments:
    """Fit mean and covariance to a feature set of shape (n_samples, dim)."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 2:
        raise ValueError("features must be a 2-D array (samples x dim)")
    if features.shape[0] < 2:
        raise ValueError("need at least 2 feature vectors to estimate a covariance")
    mean = features.mean(axis=0)
    cov = np.cov(features, rowvar=False)
    cov = np.atleast_2d(cov)
    return DistributionMoments(mean=mean, covariance=(cov + cov.T) / 2.0)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(matrix)
    values = np.clip(values, 0.0, None)
    return (vectors * np.sqrt(values)) @ vectors.T


def _check_psd(cov: np.ndarray, label: str) -> float:
    values = np.linalg.eigvalsh(cov)
    floor = -PSD_TOL * max(1.0, float(np.abs(values).max(initial=1.0)))
    if values.min(initial=0.0) < floor:
        raise ValueError(f"{label} covariance is not PSD beyond tolerance")
    return float(values.min(initial=0.0))


def frechet_distance(a: DistributionMoments, b: DistributionMoments) -> float:
    """Distance between two moment pairs of equal dimension; >= 0."""
    if a.mean.shape != b.mean.shape:
        raise ValueError(
            f"dimension mismatch: {a.mean.shape[0]} vs {b.mean.shape[0]}"
        )
    min_a = _check_psd(a.covariance, "first")
    min_b = _check_psd(b.covariance, "second")

    cov_a = a.covariance
    cov_b = b.covariance
    scale = max(1.0, float(np.trace(cov_a) + np.trace(cov_b)))
    if min(min_a, min_b) < NEAR_SINGULAR * scale:
        eye = np.eye(cov_a.shape[0])
        cov_a = cov_a + RIDGE * eye
        cov_b = cov_b + RIDGE * eye

    sqrt_a = _psd_sqrt(cov_a)
    inner = sqrt_a @ cov_b @ sqrt_a
    inner = (inner + inner.T) / 2.0
    trace_sqrt = float(np.sqrt(np.clip(np.linalg.eigvalsh(inner), 0.0, None)).sum())

    mean_diff = a.mean - b.mean
    value = float(mean_diff @ mean_diff) + float(
        np.trace(cov_a) + np.trace(cov_b) - 2.0 * trace_sqrt
    )
    return max(0.0, value)
