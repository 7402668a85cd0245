"""Seeded synthetic 2D Gaussian mixtures (ring and grid layouts) and latent sampling."""

from __future__ import annotations
import logging
import math
from dataclasses import dataclass
import numpy as np
import pandas as pd
from ._utils import make_rng, box_muller

logger = logging.getLogger("mclgan")


@dataclass
class MixtureSpec:
    """Isotropic Gaussian mixture: component centers, shared per-dimension std and component weights."""

    centers: np.ndarray
    std: float
    weights: np.ndarray

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.centers) < 1:
            raise ValueError("a mixture needs at least one component")
        if not self.std > 0:
            raise ValueError(f"std must be positive, got {self.std}")
        if self.weights.shape != (len(self.centers),):
            raise ValueError(f"expected {len(self.centers)} weights, got shape {self.weights.shape}")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("component weights must be non-negative and sum to 1")

    @property
    def n_components(self) -> int:
        return len(self.centers)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


@dataclass
class SampleBatch:
    """Sampled points with the index of the component each one was drawn from."""

    points: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return len(self.points)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.points[:, 0], "y": self.points[:, 1], "component": self.labels})

    def to_csv(self, path: str):
        logger.info("writing %s samples to %s", len(self), path)
        self.to_frame().to_csv(path, index=False)


def ring_mixture(n_components: int = 8, radius: float = math.sqrt(2), std: float = 0.05) -> MixtureSpec:
    """Equally weighted components with centers at angles 2*pi*i/n on a circle.

    :param n_components: Number of components (>= 1).
    :param radius: Radius of the circle.
    :param std: Standard deviation in each dimension."""
    if n_components < 1:
        raise ValueError(f"n_components must be >= 1, got {n_components}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    angles = 2 * np.pi * np.arange(n_components) / n_components
    centers = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    return MixtureSpec(centers, std, np.full(n_components, 1.0 / n_components))


def grid_mixture(n_per_side: int = 5, spacing: float = 2.0, std: float = 0.05) -> MixtureSpec:
    """Equally weighted components on a square grid centered at the origin (5x5 grid by default)."""
    if n_per_side < 1:
        raise ValueError(f"n_per_side must be >= 1, got {n_per_side}")
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    ticks = (np.arange(n_per_side) - (n_per_side - 1) / 2) * spacing
    xx, yy = np.meshgrid(ticks, ticks)
    centers = np.column_stack([xx.ravel(), yy.ravel()])
    n = len(centers)
    return MixtureSpec(centers, std, np.full(n, 1.0 / n))


def sample_mixture(spec: MixtureSpec, n: int, seed: int) -> SampleBatch:
    """Draws n points: a component by inverse CDF on the weights, then Box-Muller Gaussian noise.

    Deterministic given (spec, n, seed)."""
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    rng = make_rng(seed, "data")
    cdf = np.cumsum(spec.weights)
    labels = np.searchsorted(cdf, rng.random(n), side="right")
    labels = np.minimum(labels, spec.n_components - 1)  # guards cdf[-1] slightly below 1
    noise = box_muller(rng, (n, spec.dim))
    return SampleBatch(spec.centers[labels] + spec.std * noise, labels)


def sample_latents(n: int, d_z: int, seed: int) -> np.ndarray:
    """n x d_z i.i.d. standard normal latents."""
    if n < 0 or d_z < 1:
        raise ValueError(f"invalid latent batch shape ({n}, {d_z})")
    return box_muller(make_rng(seed, "latent"), (n, d_z))


class MixtureStream:
    """Endless source of real batches for one training run.

    Keeps its own Philox stream, so consecutive calls yield fresh samples while a run stays reproducible."""

    def __init__(self, spec: MixtureSpec, seed: int):
        self.spec = spec
        self._rng = make_rng(seed, "real")
        self._cdf = np.cumsum(spec.weights)

    def draw(self, n: int) -> SampleBatch:
        labels = np.minimum(np.searchsorted(self._cdf, self._rng.random(n), side="right"), self.spec.n_components - 1)
        noise = box_muller(self._rng, (n, self.spec.dim))
        return SampleBatch(self.spec.centers[labels] + self.spec.std * noise, labels)
