"""Principal-component baseline: linear embeddings for comparison runs."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset


@dataclass(frozen=True)
class PcaModel:
    """Mean vector plus orthonormal component rows, by descending variance."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def pca_fit(d, components: int) -> PcaModel:
    """Eigendecomposition of the sample covariance.

    Sign convention: the largest-magnitude entry of each component is
    positive, which pins an otherwise arbitrary choice.
    """
    X = d.features if isinstance(d, Dataset) else np.asarray(d, dtype=np.float64)
    n, m = X.shape
    if not 1 <= components <= min(n, m):
        raise ValueError(f"components must be in [1, {min(n, m)}], got {components}")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = (centered.T @ centered) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:components]
    comps = eigvecs[:, order].T.copy()
    variances = np.maximum(eigvals[order], 0.0)
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean, comps, variances)


def pca_transform(model: PcaModel, points) -> np.ndarray:
    """Project points onto the components: (points - mean) @ components.T."""
    X = points.features if isinstance(points, Dataset) else np.asarray(points, dtype=np.float64)
    if X.shape[1] != model.mean.shape[0]:
        raise ValueError(f"points have width {X.shape[1]}, model expects "
                         f"{model.mean.shape[0]}")
    return (X - model.mean) @ model.components.T
