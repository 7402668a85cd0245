"""Loss suite of the multiple-discriminator GAN.

Expert terms (real and fake samples), soft-label non-expert terms, the balance losses on
temperature softmax assignment statistics, L1 sparsity of real scores and the weighted
totals for both players. All losses take DiffNodes and return scalar DiffNodes.

Scores are sigmoid outputs D_m(x), logits the values before the sigmoid. Three loss
families are supported: "standard" (cross entropy), "least_squares" and "hinge".
"""

from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Union
import numpy as np
from . import grad_core as gc
from .grad_core import DiffNode
from .mcl import ExpertAssignment

logger = logging.getLogger("mclgan")

LossVariant = Literal["standard", "least_squares", "hinge"]
Reduction = Literal["sum", "mean", "element_mean"]
REDUCTIONS = ("sum", "mean", "element_mean")
GeneratorObjective = Literal["saturating", "non_saturating"]
ScheduleKind = Literal["constant", "linear", "exponential"]
LOSS_VARIANTS = ("standard", "least_squares", "hinge")

Mask = Union[ExpertAssignment, np.ndarray]


def balance_weight(step: int, base: float, half_life: float = 5000, schedule_kind: ScheduleKind = "exponential") -> float:
    """Weight of a balance loss after `step` training steps.

    * constant: base
    * exponential: base * 0.5 ** (step / half_life)
    * linear: base * max(0, 1 - step / (2 * half_life)), so it also halves at half_life and reaches 0 at twice that.
    """
    if step < 0:
        raise ValueError(f"step must be non-negative, got {step}")
    if base < 0:
        raise ValueError(f"balance weight must be non-negative, got {base}")
    if schedule_kind == "constant":
        return float(base)
    if not half_life > 0:
        raise ValueError(f"half_life must be positive, got {half_life}")
    if schedule_kind == "exponential":
        return float(base * 0.5 ** (step / half_life))
    if schedule_kind == "linear":
        return float(base * max(0.0, 1.0 - step / (2.0 * half_life)))
    raise ValueError(f"unknown schedule kind {schedule_kind}")


@dataclass
class LossWeights:
    """Weights and settings of the total losses.

    :param alpha: Weight of the non-expert (soft label) losses.
    :param beta_d: Initial weight of the discriminator balance loss.
    :param beta_g: Initial weight of the generator balance loss.
    :param gamma: Weight of the L1 sparsity loss on real scores.
    :param tau: Softmax temperature of the balance losses.
    :param k: Number of experts per sample.
    :param mu: Target share of every discriminator; uniform if None.
    :param soft_label: Label pair [a, 1 - a] for non-experts.
    :param variant: Loss family.
    :param reduction: "sum" evaluates the batch sums as written, "mean" divides them by the batch size,
        "element_mean" by the number of batch x M entries (the sparsity term follows; the balance KLs are per batch
        and keep their scale).
    :param generator_objective: "saturating" minimizes sum u log(1 - D), "non_saturating" minimizes -sum u log D.
    :param schedule: Decay of beta_d and beta_g over training steps, see balance_weight.
    :param half_life_d: Half life of beta_d in steps.
    :param half_life_g: Half life of beta_g in steps."""

    alpha: float = 0.01
    beta_d: float = 0.5
    beta_g: float = 0.0
    gamma: float = 0.0
    tau: float = 1.0
    k: int = 1
    mu: Optional[np.ndarray] = None
    soft_label: tuple[float, float] = (0.5, 0.5)
    variant: LossVariant = "standard"
    reduction: Reduction = "sum"
    generator_objective: GeneratorObjective = "saturating"
    schedule: ScheduleKind = "exponential"
    half_life_d: float = 5000
    half_life_g: float = 5000

    def __post_init__(self):
        for name in ("alpha", "beta_d", "beta_g", "gamma"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {value}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.mu is not None:
            self.mu = np.asarray(self.mu, dtype=np.float64)
            gc.check_distribution(self.mu, "mu")
        self.soft_label = _check_soft_label(self.soft_label)
        if self.variant not in LOSS_VARIANTS:
            raise ValueError(f"unknown loss variant {self.variant}, choose from {LOSS_VARIANTS}")
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"unknown reduction {self.reduction}, choose from {REDUCTIONS}")

    def target_distribution(self, n_models: int) -> np.ndarray:
        if self.mu is None:
            return np.full(n_models, 1.0 / n_models)
        if len(self.mu) != n_models:
            raise ValueError(f"mu has {len(self.mu)} entries for {n_models} discriminators")
        return self.mu

    def beta_d_at(self, step: int) -> float:
        return balance_weight(step, self.beta_d, self.half_life_d, self.schedule)

    def beta_g_at(self, step: int) -> float:
        return balance_weight(step, self.beta_g, self.half_life_g, self.schedule)


@dataclass
class BatchOutputs:
    """Discriminator outputs of one training step and the expert assignments derived from them.

    For the discriminator update the fake outputs come from detached samples; for the generator
    update the discriminator parameters are frozen and real_logits are treated as constant."""

    real_logits: DiffNode
    real_scores: DiffNode
    fake_logits: DiffNode
    fake_scores: DiffNode
    v: Optional[ExpertAssignment] = None
    u: Optional[ExpertAssignment] = None


def _check_soft_label(soft_label) -> tuple[float, float]:
    pair = tuple(float(a) for a in np.atleast_1d(soft_label))
    if len(pair) == 1:
        pair = (pair[0], 1.0 - pair[0])
    if len(pair) != 2 or min(pair) < 0 or abs(sum(pair) - 1.0) > 1e-9:
        raise ValueError(f"soft label must be a probability pair, got {soft_label}")
    return pair


def _mask(assignment: Mask, shape: tuple) -> np.ndarray:
    mask = assignment.mask() if isinstance(assignment, ExpertAssignment) else np.asarray(assignment, dtype=np.float64)
    if mask.shape != shape:
        raise ValueError(f"assignment shape {mask.shape} does not match scores {shape}")
    return mask


def _scores(scores) -> DiffNode:
    scores = gc.as_node(scores)
    if scores.ndim != 2:
        raise ValueError(f"scores must be a batch x M matrix, got shape {scores.shape}")
    return scores


def _logits(scores: DiffNode, logits) -> DiffNode:
    if logits is None:
        # logit of the clamped score
        return gc.safe_log(scores) - gc.safe_log(1.0 - scores)
    logits = gc.as_node(logits)
    if logits.shape != scores.shape:
        raise ValueError(f"logits shape {logits.shape} does not match scores {scores.shape}")
    return logits


def _reduce(terms: DiffNode, reduction: Reduction) -> DiffNode:
    total = gc.sum_(terms)
    if reduction == "mean":
        return total / float(terms.shape[0])
    if reduction == "element_mean":
        return total / float(np.prod(terms.shape))
    if reduction != "sum":
        raise ValueError(f"unknown reduction {reduction}")
    return total


def soft_label_cross_entropy(scores, soft_label=(0.5, 0.5)) -> DiffNode:
    """Elementwise -a log s - (1 - a) log(1 - s) for the label pair [a, 1 - a]."""
    a, b = _check_soft_label(soft_label)
    scores = gc.as_node(scores)
    return -(a * gc.safe_log(scores) + b * gc.safe_log(1.0 - scores))


# expert losses


def expert_loss_real(scores, assignment: Mask, variant: LossVariant = "standard", logits=None, reduction: Reduction = "sum") -> DiffNode:
    """Real samples, charged to their expert discriminators only.

    standard: -sum v log D; least_squares: sum v (D - 1)^2; hinge: sum v max(0, 1 - logit)."""
    scores = _scores(scores)
    v = _mask(assignment, scores.shape)
    if variant == "standard":
        terms = -gc.safe_log(scores) * v
    elif variant == "least_squares":
        terms = gc.square(scores - 1.0) * v
    elif variant == "hinge":
        terms = gc.relu(1.0 - _logits(scores, logits)) * v
    else:
        raise ValueError(f"unknown loss variant {variant}")
    return _reduce(terms, reduction)


def expert_loss_fake_disc(fake_scores, variant: LossVariant = "standard", logits=None, reduction: Reduction = "sum") -> DiffNode:
    """Fake samples must be rejected by every discriminator (no mask).

    standard: -sum log(1 - D); least_squares: sum D^2; hinge: sum max(0, 1 + logit)."""
    scores = _scores(fake_scores)
    if variant == "standard":
        terms = -gc.safe_log(1.0 - scores)
    elif variant == "least_squares":
        terms = gc.square(scores)
    elif variant == "hinge":
        terms = gc.relu(1.0 + _logits(scores, logits))
    else:
        raise ValueError(f"unknown loss variant {variant}")
    return _reduce(terms, reduction)


def expert_loss_gen(
    fake_scores,
    assignment: Mask,
    variant: LossVariant = "standard",
    logits=None,
    reduction: Reduction = "sum",
    objective: GeneratorObjective = "saturating",
) -> DiffNode:
    """Generator loss against the expert discriminators of every fake sample.

    standard: sum u log(1 - D) (saturating) or -sum u log D (non_saturating);
    least_squares: sum u (D - 1)^2; hinge: -sum u logit."""
    scores = _scores(fake_scores)
    u = _mask(assignment, scores.shape)
    if variant == "standard":
        if objective == "saturating":
            terms = gc.safe_log(1.0 - scores) * u
        elif objective == "non_saturating":
            terms = -gc.safe_log(scores) * u
        else:
            raise ValueError(f"unknown generator objective {objective}")
    elif variant == "least_squares":
        terms = gc.square(scores - 1.0) * u
    elif variant == "hinge":
        terms = -_logits(scores, logits) * u
    else:
        raise ValueError(f"unknown loss variant {variant}")
    return _reduce(terms, reduction)


# non-expert losses


def _nonexpert(scores, assignment: Mask, soft_label, variant: LossVariant, reduction: Reduction) -> DiffNode:
    scores = _scores(scores)
    others = 1.0 - _mask(assignment, scores.shape)
    if variant in ("standard", "hinge"):
        terms = soft_label_cross_entropy(scores, soft_label) * others
    elif variant == "least_squares":
        a, _ = _check_soft_label(soft_label)
        terms = gc.square(scores - a) * others
    else:
        raise ValueError(f"unknown loss variant {variant}")
    return _reduce(terms, reduction)


def nonexpert_loss_real(scores, assignment: Mask, soft_label=(0.5, 0.5), variant: LossVariant = "standard", reduction: Reduction = "sum") -> DiffNode:
    """Pushes the non-expert scores of real samples towards the soft label.

    Cross entropy against [a, 1 - a] (standard and hinge) or (D - a)^2 (least_squares)."""
    return _nonexpert(scores, assignment, soft_label, variant, reduction)


def nonexpert_loss_gen(fake_scores, assignment: Mask, soft_label=(0.5, 0.5), variant: LossVariant = "standard", reduction: Reduction = "sum") -> DiffNode:
    """Counterpart of nonexpert_loss_real over fake samples, masked with the generator experts u."""
    return _nonexpert(fake_scores, assignment, soft_label, variant, reduction)


# balance losses


def assignment_distribution(logits, tau: float) -> DiffNode:
    """Batch mean of the row-wise temperature softmax over discriminator logits."""
    logits = gc.as_node(logits)
    if logits.ndim != 2:
        raise ValueError(f"logits must be a batch x M matrix, got shape {logits.shape}")
    return gc.mean(gc.softmax_temperature(logits, tau), axis=0)


def balance_loss_disc(real_logits, mu: Optional[np.ndarray] = None, tau: float = 1.0) -> DiffNode:
    """KL(mu || q), q being the assignment distribution of the real batch; mu defaults to uniform."""
    q = assignment_distribution(real_logits, tau)
    if mu is None:
        mu = np.full(q.shape, 1.0 / q.shape[0])
    return gc.kl_divergence(np.asarray(mu, dtype=np.float64), q)


def balance_loss_gen(real_logits, fake_logits, tau: float = 1.0) -> DiffNode:
    """KL(q || o) between the real and fake assignment distributions; q is a constant target."""
    q = assignment_distribution(gc.as_node(real_logits).detach(), tau)
    o = assignment_distribution(fake_logits, tau)
    if q.shape != o.shape:
        raise ValueError(f"real and fake logits disagree on the number of discriminators: {q.shape} vs {o.shape}")
    return gc.kl_divergence(q.value, o)


def sparsity_loss(real_scores, reduction: Reduction = "mean") -> DiffNode:
    """Mean over the batch of the L1 norm of the (non-negative) score vectors.

    "element_mean" also divides by the number of discriminators, "sum" keeps the batch sum."""
    scores = _scores(real_scores)
    return _reduce(scores, reduction)


# totals


def disc_loss_terms(outputs: BatchOutputs, weights: LossWeights, schedule_step: int = 0) -> dict[str, DiffNode]:
    """Weighted components of the discriminator loss; terms with weight 0 are constant zeros."""
    if outputs.v is None:
        raise ValueError("the discriminator loss needs the real sample assignment v")
    kw = dict(variant=weights.variant, reduction=weights.reduction)
    terms = {
        "expert_real": expert_loss_real(outputs.real_scores, outputs.v, logits=outputs.real_logits, **kw),
        "expert_fake": expert_loss_fake_disc(outputs.fake_scores, logits=outputs.fake_logits, **kw),
    }
    zero = DiffNode(0.0)
    terms["nonexpert_real"] = weights.alpha * nonexpert_loss_real(outputs.real_scores, outputs.v, weights.soft_label, **kw) if weights.alpha else zero
    beta_d = weights.beta_d_at(schedule_step)
    if beta_d:
        mu = weights.target_distribution(outputs.real_logits.shape[1])
        terms["balance_disc"] = beta_d * balance_loss_disc(outputs.real_logits, mu, weights.tau)
    else:
        terms["balance_disc"] = zero
    sparsity_reduction = "element_mean" if weights.reduction == "element_mean" else "mean"
    terms["sparsity"] = weights.gamma * sparsity_loss(outputs.real_scores, sparsity_reduction) if weights.gamma else zero
    return terms


def gen_loss_terms(outputs: BatchOutputs, weights: LossWeights, schedule_step: int = 0) -> dict[str, DiffNode]:
    """Weighted components of the generator loss; terms with weight 0 are constant zeros."""
    if outputs.u is None:
        raise ValueError("the generator loss needs the fake sample assignment u")
    kw = dict(variant=weights.variant, reduction=weights.reduction)
    terms = {
        "expert_gen": expert_loss_gen(outputs.fake_scores, outputs.u, logits=outputs.fake_logits, objective=weights.generator_objective, **kw),
    }
    zero = DiffNode(0.0)
    terms["nonexpert_gen"] = weights.alpha * nonexpert_loss_gen(outputs.fake_scores, outputs.u, weights.soft_label, **kw) if weights.alpha else zero
    beta_g = weights.beta_g_at(schedule_step)
    terms["balance_gen"] = beta_g * balance_loss_gen(outputs.real_logits, outputs.fake_logits, weights.tau) if beta_g else zero
    return terms


def total_disc_loss(outputs: BatchOutputs, weights: LossWeights, schedule_step: int = 0) -> DiffNode:
    """expert_real + expert_fake + alpha * nonexpert_real + beta_d(step) * balance_disc + gamma * sparsity"""
    return _total(disc_loss_terms(outputs, weights, schedule_step))


def total_gen_loss(outputs: BatchOutputs, weights: LossWeights, schedule_step: int = 0) -> DiffNode:
    """expert_gen + alpha * nonexpert_gen + beta_g(step) * balance_gen"""
    return _total(gen_loss_terms(outputs, weights, schedule_step))


def _total(terms: dict[str, DiffNode]) -> DiffNode:
    total = None
    for term in terms.values():
        total = term if total is None else total + term
    return total
