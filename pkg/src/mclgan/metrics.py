"""Evaluation of generated samples and of the discriminator assignment statistics."""

from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union
import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import entropy
from sklearn.cluster import KMeans
from .data_synth import MixtureSpec, SampleBatch
from .mcl import ExpertAssignment
from ._utils import make_rng

logger = logging.getLogger("mclgan")

PRD_EPSILON = 1e-10
PRD_N_LAMBDAS = 1001


@dataclass
class CoverageReport:
    """Mode coverage of a sample set on a known mixture.

    counts[i] is the number of samples assigned to component i (nearest center) that lie
    within the distance threshold of that center."""

    modes_covered: int
    high_quality_ratio: float
    counts: np.ndarray
    n_samples: int = 0

    @property
    def n_modes(self) -> int:
        return len(self.counts)


def _points(samples) -> np.ndarray:
    points = samples.points if isinstance(samples, SampleBatch) else np.asarray(samples, dtype=np.float64)
    return points.reshape(-1, points.shape[-1]) if points.size else np.zeros((0, 2))


def mode_coverage(samples: Union[SampleBatch, np.ndarray], spec: MixtureSpec, dist_threshold: Optional[float] = None, count_threshold: float = 0.01) -> CoverageReport:
    """Counts the mixture components that received a share of high quality samples.

    Each sample is assigned to its nearest component center (lowest index on ties). A sample is
    of high quality if it lies within dist_threshold of that center, and a mode is covered if at
    least count_threshold of all samples are high quality samples assigned to it.

    :param samples: n x d points.
    :param spec: The mixture the samples should reproduce.
    :param dist_threshold: Distance threshold, by default 3 standard deviations of the mixture.
    :param count_threshold: Minimum fraction of all samples for a covered mode."""
    if dist_threshold is None:
        dist_threshold = 3 * spec.std
    if not dist_threshold > 0 or not count_threshold > 0:
        raise ValueError(f"thresholds must be positive, got dist_threshold={dist_threshold}, count_threshold={count_threshold}")
    points = _points(samples)
    if len(points) == 0:
        return CoverageReport(0, 0.0, np.zeros(spec.n_components, dtype=np.int64), 0)
    dist = cdist(points, spec.centers)
    nearest = np.argmin(dist, axis=1)
    close = dist[np.arange(len(points)), nearest] <= dist_threshold
    counts = np.bincount(nearest[close], minlength=spec.n_components)
    covered = (counts > 0) & (counts >= count_threshold * len(points))
    return CoverageReport(int(covered.sum()), float(close.mean()), counts, len(points))


@dataclass
class UtilizationHistogram:
    """Expert assignment counts per discriminator over a window of assignment rows."""

    counts: np.ndarray
    window_size: int
    k: int = 1

    @property
    def n_models(self) -> int:
        return len(self.counts)

    @property
    def shares(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else np.zeros(len(self.counts))

    def entropy(self) -> float:
        return utilization_entropy(self.counts)


def utilization_entropy(counts: np.ndarray) -> float:
    """Entropy of the count distribution divided by log M: 1 for uniform use, 0 for a monopoly (and for M=1)."""
    counts = np.asarray(counts, dtype=np.float64)
    if len(counts) < 2 or counts.sum() == 0:
        return 0.0
    return float(entropy(counts) / np.log(len(counts)))


def utilization(assignments: Iterable[Union[ExpertAssignment, np.ndarray]], window: Optional[int] = None) -> tuple[UtilizationHistogram, float]:
    """Histogram of expert assignments over the last `window` rows.

    :param assignments: Assignments of consecutive steps; their rows are pooled in order.
    :param window: Number of most recent rows to count, all if None.
    :return: The histogram and its normalized entropy."""
    blocks = [a.indicators if isinstance(a, ExpertAssignment) else np.asarray(a) for a in assignments]
    if not blocks:
        raise ValueError("utilization needs at least one assignment")
    rows = np.concatenate([np.atleast_2d(b) for b in blocks])
    if window is not None:
        if window < 1:
            raise ValueError(f"window must be positive, got {window}")
        rows = rows[-window:]
    k = int(rows[0].sum()) if len(rows) else 1
    hist = UtilizationHistogram(rows.sum(axis=0).astype(np.int64), len(rows), k)
    return hist, hist.entropy()


def active_discriminators(histogram: Union[UtilizationHistogram, np.ndarray], activity_threshold: float = 0.01) -> int:
    """Number of discriminators whose share of the expert assignments exceeds activity_threshold."""
    if isinstance(histogram, UtilizationHistogram):
        shares = histogram.shares
    else:
        counts = np.asarray(histogram, dtype=np.float64)
        shares = counts / counts.sum() if counts.sum() else counts
    return int(np.sum(shares > activity_threshold))


# precision and recall for distributions


def kmeans_seed(seed: int) -> int:
    """Integer random_state for sklearn, drawn from the "kmeans" stream of seed."""
    return int(make_rng(seed, "kmeans").integers(2**31 - 1))


def bin_histograms(real: np.ndarray, fake: np.ndarray, n_bins: int = 20, seed: int = 0, n_restarts: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Clusters the pooled samples with k-means and returns the bin distributions of real and fake samples.

    k-means is run n_restarts times and the lowest inertia solution is kept (sklearn's n_init). Its
    initialisation is seeded from the "kmeans" stream of seed."""
    real, fake = _points(real), _points(fake)
    if len(real) == 0 or len(fake) == 0:
        raise ValueError("PRD needs non-empty real and fake sample sets")
    if n_bins < 2:
        raise ValueError(f"n_bins must be at least 2, got {n_bins}")
    pooled = np.concatenate([real, fake])
    if len(pooled) < n_bins:
        raise ValueError(f"{len(pooled)} samples cannot fill {n_bins} bins")
    kmeans = KMeans(n_clusters=n_bins, n_init=n_restarts, random_state=kmeans_seed(seed))
    labels = kmeans.fit_predict(pooled)
    p = np.bincount(labels[: len(real)], minlength=n_bins) / len(real)
    q = np.bincount(labels[len(real) :], minlength=n_bins) / len(fake)
    return p, q


def prd_curve(p: np.ndarray, q: np.ndarray, n_lambdas: int = PRD_N_LAMBDAS, epsilon: float = PRD_EPSILON) -> tuple[np.ndarray, np.ndarray]:
    """Precision and recall of q (model) with respect to p (reference) over a grid of slopes lambda.

    The slopes are tan(theta) for n_lambdas angles evenly spaced in [epsilon, pi/2 - epsilon].
    precision(lambda) = sum min(lambda p, q), recall(lambda) = precision(lambda) / lambda.

    :return: precision and recall arrays, clipped to [0, 1]."""
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError(f"histograms must be vectors of equal length, got {p.shape} and {q.shape}")
    if n_lambdas < 3:
        raise ValueError(f"n_lambdas must be at least 3, got {n_lambdas}")
    slopes = np.tan(np.linspace(epsilon, np.pi / 2 - epsilon, n_lambdas))
    precision = np.minimum(slopes[:, None] * p[None, :], q[None, :]).sum(axis=1)
    recall = precision / slopes
    return np.clip(precision, 0, 1), np.clip(recall, 0, 1)


def f_beta_score(precision: np.ndarray, recall: np.ndarray, beta: float) -> float:
    """Maximum over the curve of (1 + beta^2) P R / (beta^2 P + R); points with P = R = 0 score 0."""
    precision, recall = np.asarray(precision), np.asarray(recall)
    denominator = beta**2 * precision + recall
    scores = np.divide((1 + beta**2) * precision * recall, denominator, out=np.zeros_like(precision), where=denominator > 0)
    return float(scores.max())


def prd_f_scores(real_samples, fake_samples, n_bins: int = 20, seed: int = 0, n_restarts: int = 10) -> tuple[float, float]:
    """F_8 (recall weighted, mode coverage) and F_1/8 (precision weighted, sample quality) of the PRD curve."""
    p, q = bin_histograms(real_samples, fake_samples, n_bins, seed, n_restarts)
    precision, recall = prd_curve(p, q)
    return f_beta_score(precision, recall, 8.0), f_beta_score(precision, recall, 1 / 8)


@dataclass
class MetricsRecord:
    """Evaluation of one training checkpoint; as_row() gives the metrics.csv row."""

    step: int
    coverage: CoverageReport
    f8: float
    f1_8: float
    histogram: UtilizationHistogram
    entropy: float
    active_disc: int
    losses: dict[str, float] = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {"step": self.step}
        row.update(self.losses)
        row.update(
            coverage=self.coverage.modes_covered,
            hq_ratio=self.coverage.high_quality_ratio,
            F8=self.f8,
            F1_8=self.f1_8,
            entropy=self.entropy,
            active_disc=self.active_disc,
        )
        return row
