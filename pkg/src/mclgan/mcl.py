"""Multiple choice learning: top-k expert selection, oracle loss and confident oracle loss."""

from __future__ import annotations
import itertools
import logging
from dataclasses import dataclass
from typing import Union
import numpy as np
from . import grad_core as gc
from .grad_core import DiffNode

logger = logging.getLogger("mclgan")


@dataclass
class ExpertAssignment:
    """Binary N x M indicator matrix with exactly k ones per row.

    Entry (i, m) is 1 if model m is one of the k experts of sample i."""

    indicators: np.ndarray
    k: int

    def __post_init__(self):
        self.indicators = np.asarray(self.indicators, dtype=np.int8)
        if self.indicators.ndim != 2:
            raise ValueError(f"assignment must be a matrix, got shape {self.indicators.shape}")
        if not 1 <= self.k <= self.indicators.shape[1]:
            raise ValueError(f"k={self.k} outside [1, {self.indicators.shape[1]}]")
        assert np.all(self.indicators.sum(axis=1) == self.k), "each assignment row must contain exactly k experts"

    @property
    def shape(self) -> tuple[int, int]:
        return self.indicators.shape

    @property
    def n_models(self) -> int:
        return self.indicators.shape[1]

    def mask(self) -> np.ndarray:
        """Indicators as float64, ready to multiply a loss matrix."""
        return self.indicators.astype(np.float64)

    def counts(self) -> np.ndarray:
        """Number of samples assigned to each model."""
        return self.indicators.sum(axis=0).astype(np.int64)

    def expert_ids(self) -> np.ndarray:
        """Index of the first expert of every row."""
        return np.argmax(self.indicators, axis=1)


def _check_k(k: int, n_models: int):
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if k > n_models:
        raise ValueError(f"cannot choose k={k} experts out of {n_models} models")


def _values(x: Union[DiffNode, np.ndarray]) -> np.ndarray:
    values = x.value if isinstance(x, DiffNode) else np.asarray(x, dtype=np.float64)
    if values.ndim == 1:
        values = values[None, :]
    if values.ndim != 2 or values.size == 0:
        raise ValueError(f"expected a non-empty N x M matrix, got shape {values.shape}")
    return values


def select_topk(scores: Union[DiffNode, np.ndarray], k: int, higher_is_better: bool = True) -> ExpertAssignment:
    """Marks the k best models of every row; ties go to the lowest model index.

    :param scores: N x M array (or DiffNode). A vector is treated as a single row.
    :param k: Number of experts per row, 1 <= k <= M.
    :param higher_is_better: If False, the k lowest entries are selected (as for losses)."""
    values = _values(scores)
    _check_k(k, values.shape[1])
    # stable sort keeps equal entries in index order
    order = np.argsort(-values if higher_is_better else values, axis=1, kind="stable")[:, :k]
    indicators = np.zeros(values.shape, dtype=np.int8)
    np.put_along_axis(indicators, order, 1, axis=1)
    return ExpertAssignment(indicators, k)


def assign_by_label(labels: np.ndarray, n_models: int) -> ExpertAssignment:
    """One expert per sample chosen by its ground-truth label: model labels[i] % n_models."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
        raise ValueError(f"labels must be a vector of integers, got {labels.dtype} array of shape {labels.shape}")
    if np.any(labels < 0):
        raise ValueError("labels must be non-negative")
    if n_models < 1:
        raise ValueError(f"n_models must be positive, got {n_models}")
    indicators = np.zeros((len(labels), n_models), dtype=np.int8)
    indicators[np.arange(len(labels)), labels % n_models] = 1
    return ExpertAssignment(indicators, 1)


def oracle_loss(losses: Union[DiffNode, np.ndarray], k: int = 1) -> tuple[DiffNode, ExpertAssignment]:
    """Sum over samples of the k smallest per-model losses.

    :param losses: N x M loss matrix (entry (i, m) is the loss of model m on sample i); DiffNodes keep their graph.
    :param k: Number of models that are charged per sample.
    :return: The scalar loss and the assignment marking the minimizing models."""
    losses = gc.as_node(losses)
    values = _values(losses)
    if not np.all(np.isfinite(values)):
        raise ValueError("loss matrix has non-finite entries")
    assignment = select_topk(values, k, higher_is_better=False)
    return gc.sum_(gc.reshape(losses, values.shape) * assignment.mask()), assignment


def brute_force_oracle_loss(losses: np.ndarray, k: int = 1) -> float:
    """Reference oracle loss by enumerating every k-subset of models per row."""
    values = _values(losses)
    _check_k(k, values.shape[1])
    total = 0.0
    for row in values:
        total += min(sum(row[list(subset)]) for subset in itertools.combinations(range(len(row)), k))
    return total


def cmcl_loss(
    distributions: Union[DiffNode, np.ndarray],
    targets: np.ndarray,
    assignment: ExpertAssignment,
    beta: float = 1.0,
) -> DiffNode:
    """Confident oracle loss over categorical predictions.

    Experts pay the negative log likelihood of the target class; every other model pays
    beta * KL(U || P_m), pulling it towards the uniform distribution U over the C classes.

    :param distributions: N x M x C array of per-model class distributions.
    :param targets: N integer class labels.
    :param assignment: N x M expert assignment.
    :param beta: Non-negative weight of the confidence term."""
    distributions = gc.as_node(distributions)
    if distributions.ndim != 3:
        raise ValueError(f"distributions must be N x M x C, got shape {distributions.shape}")
    n, m, c = distributions.shape
    if assignment.shape != (n, m):
        raise ValueError(f"assignment shape {assignment.shape} does not match distributions {(n, m)}")
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    targets = np.asarray(targets)
    if targets.shape != (n,) or np.any(targets < 0) or np.any(targets >= c):
        raise ValueError(f"targets must be {n} class indices in [0, {c})")
    gc.check_distribution(distributions.value, "per-model distribution")

    flat = gc.reshape(distributions, (n * m, c))
    log_p = gc.safe_log(flat)
    one_hot = np.zeros((n * m, c))
    one_hot[np.arange(n * m), np.repeat(targets, m)] = 1.0
    nll = -gc.sum_(log_p * one_hot, axis=1)
    uniform = np.full((n * m, c), 1.0 / c)
    kl_to_uniform = gc.sum_((np.log(uniform) - log_p) * uniform, axis=1)
    v = assignment.mask().reshape(-1)
    return gc.sum_(nll * v) + beta * gc.sum_(kl_to_uniform * (1.0 - v))
