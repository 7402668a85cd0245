"""
mclgan: multiple choice learning for GANs, one generator trained against M expert discriminators.

.. data:: PRESETS

    Named settings of the synthetic experiments, as used by TrainConfig.from_preset().
"""

try:
    from importlib.metadata import distribution
except ModuleNotFoundError:
    from importlib_metadata import distribution  # py3.7
__version__ = distribution("mclgan").version
from .grad_core import DiffNode, Adam, AdamState, backward, softmax_temperature, kl_divergence, adam_step
from .nets import GeneratorNet, MultiDiscriminator, save_checkpoint, load_checkpoint
from .mcl import ExpertAssignment, select_topk, oracle_loss, cmcl_loss
from .gan_losses import LossWeights, BatchOutputs, total_disc_loss, total_gen_loss
from .data_synth import MixtureSpec, SampleBatch, ring_mixture, grid_mixture, sample_mixture, sample_latents
from .metrics import CoverageReport, UtilizationHistogram, MetricsRecord, mode_coverage, utilization, active_discriminators, prd_f_scores
from .trainer import (
    TrainConfig,
    PRESETS,
    TrainingDiverged,
    RunLog,
    train_step,
    balance_weight,
    run_experiment,
    run_sweep,
    evaluate_checkpoint,
)


__all__ = [
    "DiffNode",
    "Adam",
    "AdamState",
    "backward",
    "softmax_temperature",
    "kl_divergence",
    "adam_step",
    "GeneratorNet",
    "MultiDiscriminator",
    "save_checkpoint",
    "load_checkpoint",
    "ExpertAssignment",
    "select_topk",
    "oracle_loss",
    "cmcl_loss",
    "LossWeights",
    "BatchOutputs",
    "total_disc_loss",
    "total_gen_loss",
    "MixtureSpec",
    "SampleBatch",
    "ring_mixture",
    "grid_mixture",
    "sample_mixture",
    "sample_latents",
    "CoverageReport",
    "UtilizationHistogram",
    "MetricsRecord",
    "mode_coverage",
    "utilization",
    "active_discriminators",
    "prd_f_scores",
    "TrainConfig",
    "PRESETS",
    "TrainingDiverged",
    "RunLog",
    "train_step",
    "balance_weight",
    "run_experiment",
    "run_sweep",
    "evaluate_checkpoint",
]
