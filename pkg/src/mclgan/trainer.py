"""Alternating training of one generator against M expert discriminators.

Every step updates the discriminators on fresh real and fake batches (expert selection v
from the real scores) and then the generator against the frozen discriminators (expert
selection u from the fake scores). run_experiment wraps the loop with periodic evaluation,
snapshots and output files; run_sweep repeats it over a hyperparameter grid and seeds.
"""

from __future__ import annotations
import dataclasses
import logging
import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Literal, Optional, get_type_hints
import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm
from . import grad_core as gc
from .data_synth import MixtureSpec, MixtureStream, grid_mixture, ring_mixture, sample_mixture
from .decorators import experimental, log_failure
from .gan_losses import (
    BatchOutputs,
    GeneratorObjective,
    LossVariant,
    LossWeights,
    Reduction,
    ScheduleKind,
    balance_weight,
    disc_loss_terms,
    gen_loss_terms,
)
from .mcl import ExpertAssignment, assign_by_label, select_topk
from .metrics import MetricsRecord, active_discriminators, mode_coverage, prd_f_scores, utilization
from .nets import GeneratorNet, MultiDiscriminator, collect_grads, discriminator_from_arrays, load_checkpoint
from ._utils import box_muller, format_value, make_rng, parse_value, read_key_values

__all__ = [
    "TrainConfig",
    "PRESETS",
    "TrainState",
    "StepResult",
    "TrainingDiverged",
    "RunLog",
    "init_state",
    "train_step",
    "balance_weight",
    "evaluate",
    "run_experiment",
    "run_sweep",
    "evaluate_checkpoint",
]

logger = logging.getLogger("mclgan")

DISC_TERMS = ("expert_real", "expert_fake", "nonexpert_real", "balance_disc", "sparsity")
GEN_TERMS = ("expert_gen", "nonexpert_gen", "balance_gen")
LOSS_COLUMNS = DISC_TERMS + ("disc_total",) + GEN_TERMS + ("gen_total",)


@dataclass
class TrainConfig:
    """All settings of a training run.

    tau, lr_d and lr_g default to None, which resolves to tau=1, lr=2e-4 (tau=0.1, lr=1e-4 for the
    least squares variant). mu defaults to the uniform target distribution."""

    # architecture
    n_disc: int = 8
    k: int = 1
    d_z: int = 2
    g_hidden: tuple[int, ...] = (128, 128, 128)
    d_hidden: tuple[int, ...] = (128, 128, 128)
    leaky_slope: float = 0.2
    # losses
    variant: LossVariant = "standard"
    alpha: float = 0.01
    beta_d: float = 0.5
    beta_g: float = 0.0
    gamma: float = 0.0
    tau: Optional[float] = None
    mu: Optional[tuple[float, ...]] = None
    soft_label: float = 0.5
    reduction: Reduction = "element_mean"
    generator_objective: GeneratorObjective = "saturating"
    assignment: Literal["mcl", "label"] = "mcl"
    balance_schedule: ScheduleKind = "exponential"
    half_life_d: float = 5000.0
    half_life_g: float = 5000.0
    # optimization
    lr_d: Optional[float] = None
    lr_g: Optional[float] = None
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_real: int = 64
    batch_latent: int = 128
    d_steps: int = 1
    gen_experts_after_disc_update: bool = True
    # run
    steps: int = 50000
    eval_interval: int = 1000
    eval_samples: int = 10000
    snapshot_steps: tuple[int, ...] = (1000, 5000, 50000)
    snapshot_samples: int = 2000
    seed: int = 0
    # data
    data: Literal["ring", "grid"] = "ring"
    n_components: int = 8
    radius: float = math.sqrt(2)
    grid_spacing: float = 2.0
    data_std: float = 0.05
    # evaluation
    coverage_sigmas: float = 3.0
    count_threshold: float = 0.01
    prd_bins: int = 20
    prd_restarts: int = 10
    activity_threshold: float = 0.01
    utilization_window: int = 100

    def __post_init__(self):
        self.g_hidden, self.d_hidden, self.snapshot_steps = tuple(self.g_hidden), tuple(self.d_hidden), tuple(self.snapshot_steps)
        if self.mu is not None:
            self.mu = tuple(float(m) for m in self.mu)
        if self.n_disc < 1:
            raise ValueError(f"n_disc must be positive, got {self.n_disc}")
        if not 1 <= self.k <= self.n_disc:
            raise ValueError(f"k must be in [1, n_disc={self.n_disc}], got {self.k}")
        for name in ("batch_real", "batch_latent", "d_steps", "eval_interval", "eval_samples", "d_z"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.steps < 0:
            raise ValueError(f"steps must be non-negative, got {self.steps}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.mu is not None and len(self.mu) != self.n_disc:
            raise ValueError(f"mu has {len(self.mu)} entries for {self.n_disc} discriminators")
        if self.assignment not in ("mcl", "label"):
            raise ValueError(f"unknown assignment {self.assignment}, choose from mcl, label")
        if self.assignment == "label" and self.k != 1:
            raise ValueError(f"label assignment picks one expert per sample, got k={self.k}")
        # validates the loss settings
        self.loss_weights()

    @property
    def effective_tau(self) -> float:
        if self.tau is not None:
            return self.tau
        return 0.1 if self.variant == "least_squares" else 1.0

    @property
    def effective_lr_d(self) -> float:
        if self.lr_d is not None:
            return self.lr_d
        return 1e-4 if self.variant == "least_squares" else 2e-4

    @property
    def effective_lr_g(self) -> float:
        if self.lr_g is not None:
            return self.lr_g
        return 1e-4 if self.variant == "least_squares" else 2e-4

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            alpha=self.alpha,
            beta_d=self.beta_d,
            beta_g=self.beta_g,
            gamma=self.gamma,
            tau=self.effective_tau,
            k=self.k,
            mu=None if self.mu is None else np.array(self.mu),
            soft_label=(self.soft_label, 1.0 - self.soft_label),
            variant=self.variant,
            reduction=self.reduction,
            generator_objective=self.generator_objective,
            schedule=self.balance_schedule,
            half_life_d=self.half_life_d,
            half_life_g=self.half_life_g,
        )

    def mixture(self) -> MixtureSpec:
        if self.data == "ring":
            return ring_mixture(self.n_components, self.radius, self.data_std)
        if self.data == "grid":
            side = math.isqrt(self.n_components)
            if side * side != self.n_components:
                raise ValueError(f"a grid mixture needs a square number of components, got {self.n_components}")
            return grid_mixture(side, self.grid_spacing, self.data_std)
        raise ValueError(f"unknown data kind {self.data}")

    @classmethod
    def field_types(cls) -> dict[str, Any]:
        hints = get_type_hints(cls)
        return {f.name: hints[f.name] for f in dataclasses.fields(cls)}

    @classmethod
    def parse_fields(cls, entries: dict[str, str]) -> dict[str, Any]:
        """Converts "key": "text" pairs to typed values; unknown keys raise ValueError."""
        types = cls.field_types()
        unknown = sorted(set(entries) - set(types))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        parsed = {}
        for key, text in entries.items():
            try:
                parsed[key] = parse_value(text, types[key])
            except ValueError as e:
                raise ValueError(f"invalid value for config key {key}: {e}") from e
        return parsed

    def with_overrides(self, **overrides) -> TrainConfig:
        """Validated copy with some fields replaced."""
        unknown = sorted(set(overrides) - set(self.field_types()))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return dataclasses.replace(self, **overrides)

    @classmethod
    def load(cls, path: str, base: Optional[TrainConfig] = None) -> TrainConfig:
        """Reads a flat "key = value" config file. Keys not in the file keep the values of base (defaults if None)."""
        base = cls() if base is None else base
        return base.with_overrides(**cls.parse_fields(read_key_values(path)))

    @classmethod
    def from_preset(cls, name: str, **overrides) -> TrainConfig:
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name}, choose from {', '.join(PRESETS)}")
        return cls(**{**PRESETS[name], **overrides})

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def save(self, path: str):
        with open(path, "w") as fh:
            fh.write("# mclgan training configuration\n")
            for key, value in self.to_dict().items():
                fh.write(f"{key} = {format_value(value)}\n")


PRESETS: dict[str, dict[str, Any]] = {
    "standard8": {"n_disc": 8, "k": 1},
    "baseline": {"n_disc": 1, "k": 1, "beta_d": 0.0},
    "hinge2": {"variant": "hinge", "n_disc": 2, "k": 1},
    "sparsity20": {"n_disc": 20, "k": 1, "gamma": 1e-5},
    "sparsity_stable": {"n_disc": 20, "k": 1, "gamma": 2e-4},
    "hinge_balance": {"variant": "hinge", "beta_d": 0.5, "beta_g": 10.0},
    "least_squares": {"variant": "least_squares", "lr_d": 1e-4, "lr_g": 1e-4, "tau": 0.1, "beta_g": 1.0},
    "label8": {"n_disc": 8, "k": 1, "assignment": "label"},
}
"""Settings of the synthetic experiments: the 8-ring reproduction, its single discriminator baseline,
the hinge model with two discriminators, the sparsity runs with 20 discriminators and the
balance settings of the hinge and least squares studies and the model whose real samples are assigned
to discriminators by their mixture component instead of by expert selection."""


class TrainingDiverged(RuntimeError):
    """A loss became non-finite; carries the batches of the failing step."""

    def __init__(self, step: int, losses: dict[str, float], real: np.ndarray, latent: np.ndarray, fake: np.ndarray):
        bad = [name for name, value in losses.items() if not np.isfinite(value)]
        super().__init__(f"training diverged at step {step}: non-finite {', '.join(bad)}")
        self.step = step
        self.losses = losses
        self.real, self.latent, self.fake = real, latent, fake

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns kind, index, column, value holding the losses and the three batches."""
        parts = [pd.DataFrame({"kind": "loss", "index": 0, "column": list(self.losses), "value": list(self.losses.values())})]
        for kind, batch in (("real", self.real), ("latent", self.latent), ("fake", self.fake)):
            rows, columns = np.indices(batch.shape)
            parts.append(pd.DataFrame({"kind": kind, "index": rows.ravel(), "column": columns.ravel(), "value": batch.ravel()}))
        return pd.concat(parts, ignore_index=True)


@dataclass
class TrainState:
    """Everything that changes during training."""

    config: TrainConfig
    generator: GeneratorNet
    discriminator: MultiDiscriminator
    opt_g: gc.Adam
    opt_d: gc.Adam
    real_stream: MixtureStream
    latent_rng: np.random.Generator
    step: int = 0
    recent_v: deque = field(default_factory=deque)


@dataclass
class StepResult:
    """Losses, assignments and batches of one train_step."""

    step: int
    losses: dict[str, float]
    v: ExpertAssignment
    u: ExpertAssignment
    real: np.ndarray
    latent: np.ndarray
    fake: np.ndarray


def init_state(config: TrainConfig) -> TrainState:
    """Fresh networks, optimizers and random streams, all derived from config.seed."""
    spec = config.mixture()
    gen = GeneratorNet(config.d_z, spec.dim, config.g_hidden, "relu", config.seed)
    disc = MultiDiscriminator(spec.dim, config.n_disc, config.d_hidden, "leaky_relu", config.leaky_slope, config.seed)
    betas = (config.adam_beta1, config.adam_beta2)
    return TrainState(
        config=config,
        generator=gen,
        discriminator=disc,
        opt_g=gc.Adam(gen.params, config.effective_lr_g, betas, config.adam_eps),
        opt_d=gc.Adam(disc.params, config.effective_lr_d, betas, config.adam_eps),
        real_stream=MixtureStream(spec, config.seed),
        latent_rng=make_rng(config.seed, "latent"),
        recent_v=deque(maxlen=config.utilization_window),
    )


def _floats(terms: dict[str, gc.DiffNode]) -> dict[str, float]:
    return {name: float(node) for name, node in terms.items()}


def _discriminator_update(state: TrainState, weights: LossWeights, real: np.ndarray, z: np.ndarray, labels: np.ndarray):
    gen, disc = state.generator, state.discriminator
    fake = gen.forward(z, gen.parameter_nodes(frozen=True)).detach()
    d_nodes = disc.parameter_nodes()
    real_logits, real_scores = disc.forward(real, d_nodes)
    fake_logits, fake_scores = disc.forward(fake, d_nodes)
    if state.config.assignment == "label":
        v = assign_by_label(labels, disc.n_heads)
    else:
        v = select_topk(real_scores, weights.k)
    outputs = BatchOutputs(real_logits, real_scores, fake_logits, fake_scores, v=v)
    terms = disc_loss_terms(outputs, weights, state.step)
    total = sum(terms.values(), gc.DiffNode(0.0))
    losses = _floats(terms)
    losses["disc_total"] = float(total)
    if not np.isfinite(losses["disc_total"]):
        raise TrainingDiverged(state.step, losses, real, z, fake.value)
    state.opt_d.step(collect_grads(d_nodes, gc.backward(total)))
    return losses, outputs, fake.value


def _generator_update(state: TrainState, weights: LossWeights, real: np.ndarray, z: np.ndarray, disc_outputs: BatchOutputs):
    gen, disc = state.generator, state.discriminator
    frozen = disc.parameter_nodes(frozen=True)
    g_nodes = gen.parameter_nodes()
    fake = gen.forward(z, g_nodes)
    fake_logits, fake_scores = disc.forward(fake, frozen)
    if state.config.gen_experts_after_disc_update:
        u = select_topk(fake_scores, weights.k)
        real_logits = disc.forward(real, frozen)[0]
    else:
        u = select_topk(disc_outputs.fake_scores, weights.k)
        real_logits = disc_outputs.real_logits.detach()
    outputs = BatchOutputs(real_logits, disc_outputs.real_scores.detach(), fake_logits, fake_scores, u=u)
    terms = gen_loss_terms(outputs, weights, state.step)
    total = sum(terms.values(), gc.DiffNode(0.0))
    losses = _floats(terms)
    losses["gen_total"] = float(total)
    if not np.isfinite(losses["gen_total"]):
        raise TrainingDiverged(state.step, losses, real, z, fake.value)
    state.opt_g.step(collect_grads(g_nodes, gc.backward(total)))
    return losses, u


def train_step(state: TrainState) -> StepResult:
    """One training step; updates state in place.

    (a) draw N_d real samples and N_g latents, (b) select the expert discriminators v of the real
    samples (by their mixture component when config.assignment is "label"), (c) Adam step of the
    discriminators on the total discriminator loss (repeated d_steps times with fresh batches),
    (d) select the experts u of the fake samples, by default with the updated discriminators,
    (e) Adam step of the generator on the total generator loss.

    :raises TrainingDiverged: If a total loss is not finite."""
    config = state.config
    weights = config.loss_weights()
    for _ in range(config.d_steps):
        batch = state.real_stream.draw(config.batch_real)
        real = batch.points
        z = box_muller(state.latent_rng, (config.batch_latent, config.d_z))
        d_losses, disc_outputs, fake = _discriminator_update(state, weights, real, z, batch.labels)
    g_losses, u = _generator_update(state, weights, real, z, disc_outputs)
    losses = {**d_losses, **g_losses}
    logger.debug("step %s: %s", state.step, ", ".join(f"{name}={value:.4g}" for name, value in losses.items()))
    state.recent_v.append(disc_outputs.v)
    state.step += 1
    return StepResult(state.step, losses, disc_outputs.v, u, real, z, fake)


def _generate(gen: GeneratorNet, n: int, seed: int, *key: int) -> np.ndarray:
    z = box_muller(make_rng(seed, "eval", *key), (n, gen.d_z))
    return gen.forward(z, gen.parameter_nodes(frozen=True)).value


def evaluate(state: TrainState, losses: Optional[dict[str, float]] = None, real_eval: Optional[np.ndarray] = None) -> MetricsRecord:
    """Metrics of the current generator on a fresh evaluation batch and of the recent expert assignments."""
    config = state.config
    spec = config.mixture()
    fake = _generate(state.generator, config.eval_samples, config.seed, state.step)
    if real_eval is None:
        real_eval = sample_mixture(spec, config.eval_samples, config.seed).points
    coverage = mode_coverage(fake, spec, config.coverage_sigmas * spec.std, config.count_threshold)
    f8, f1_8 = prd_f_scores(real_eval, fake, config.prd_bins, config.seed, config.prd_restarts)
    if state.recent_v:
        hist, ent = utilization(state.recent_v)
    else:
        hist, ent = utilization([np.zeros((0, config.n_disc), dtype=np.int8)])
    if losses is None:
        losses = dict.fromkeys(LOSS_COLUMNS, np.nan)
    record = MetricsRecord(state.step, coverage, f8, f1_8, hist, ent, active_discriminators(hist, config.activity_threshold), dict(losses))
    logger.info(
        "step %s: %s/%s modes covered, hq ratio %.3f, F8 %.3f, F1/8 %.3f, entropy %.3f, %s active discriminators",
        record.step,
        coverage.modes_covered,
        coverage.n_modes,
        coverage.high_quality_ratio,
        f8,
        f1_8,
        ent,
        record.active_disc,
    )
    return record


def snapshot(state: TrainState) -> pd.DataFrame:
    """Generated points with the index of their (first) expert discriminator."""
    config = state.config
    points = _generate(state.generator, config.snapshot_samples, config.seed, state.step, 1)
    _, scores = state.discriminator.forward(points, state.discriminator.parameter_nodes(frozen=True))
    expert_id = select_topk(scores, config.k).expert_ids()
    return pd.DataFrame({"x": points[:, 0], "y": points[:, 1], "expert_id": expert_id})


class RunLog:
    """Result of run_experiment: evaluation records, per-step losses, snapshots and the final parameters."""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.records: list[MetricsRecord] = []
        self.losses: list[dict[str, float]] = []
        self.snapshots: dict[int, pd.DataFrame] = {}
        self.utilization: dict[int, np.ndarray] = {}
        self.checkpoints: dict[int, dict[str, np.ndarray]] = {}
        self.checkpoint_path: Optional[str] = None

    def __len__(self):
        return len(self.records)

    def __repr__(self):
        return f"RunLog({len(self.records)} records, {len(self.losses)} steps, seed={self.config.seed})"

    @property
    def final(self) -> MetricsRecord:
        return self.records[-1]

    from ._run_io import metrics_table, losses_table, utilization_table, checkpoint_arrays, write_outputs


@log_failure
def run_experiment(config: TrainConfig, out_dir: Optional[str] = None, progress_bar: bool = False) -> RunLog:
    """Trains for config.steps steps, evaluating at step 0, every eval_interval steps and at the final step.
    Snapshots, utilization counts and checkpoints are kept at config.snapshot_steps and at the final step.

    :param config: The run settings.
    :param out_dir: If given, metrics.csv, losses.csv, snapshot_<step>.csv, utilization_<step>.csv,
        checkpoint_<step>.mclg, config.echo and, on divergence, diagnostic_<step>.csv are written there.
    :param progress_bar: Show a tqdm progress bar over the training steps."""
    logger.info("starting run with %s discriminators, %s loss, seed %s, %s steps", config.n_disc, config.variant, config.seed, config.steps)
    state = init_state(config)
    log = RunLog(config)
    real_eval = sample_mixture(config.mixture(), config.eval_samples, config.seed).points
    log.records.append(evaluate(state, real_eval=real_eval))
    _keep_snapshot(state, log)
    try:
        for _ in tqdm(range(config.steps), unit="steps", disable=not progress_bar):
            result = train_step(state)
            log.losses.append(result.losses)
            if state.step % config.eval_interval == 0 or state.step == config.steps:
                log.records.append(evaluate(state, result.losses, real_eval))
            _keep_snapshot(state, log)
    except TrainingDiverged as e:
        logger.error(str(e))
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, f"diagnostic_{e.step}.csv")
            e.to_frame().to_csv(path, index=False)
            logger.info("diagnostic batches written to %s", path)
        raise
    log.checkpoints[state.step] = log.checkpoint_arrays(state)
    if out_dir is not None:
        log.write_outputs(out_dir)
    return log


def _keep_snapshot(state: TrainState, log: RunLog):
    config = state.config
    final = config.steps > 0 and state.step == config.steps
    if state.step not in config.snapshot_steps and not final:
        return
    log.snapshots[state.step] = snapshot(state)
    if state.recent_v:
        log.utilization[state.step] = utilization(state.recent_v)[0].counts
    else:
        log.utilization[state.step] = np.zeros(config.n_disc, dtype=np.int64)
    log.checkpoints[state.step] = log.checkpoint_arrays(state)


def _sweep_point(config: TrainConfig, out_dir: Optional[str], progress_bar: bool) -> RunLog:
    return run_experiment(config, out_dir, progress_bar)


@experimental
def _run_parallel(jobs: list, n_jobs: int) -> list[RunLog]:
    return Parallel(n_jobs=n_jobs)(delayed(_sweep_point)(*job) for job in jobs)


def run_sweep(
    config: TrainConfig,
    param: str,
    values: list,
    seeds: int = 1,
    n_jobs: int = 1,
    out_dir: Optional[str] = None,
    progress_bar: bool = False,
) -> list[RunLog]:
    """One run per (value, seed) with config.<param> = value and seeds config.seed, config.seed + 1, ...

    Sweeping the seed itself runs seeds value, value + 1, ... for every value.

    Values given as strings are parsed according to the type of the parameter. Runs are independent;
    with n_jobs > 1 they execute in parallel worker processes. The result list (and the rows of
    sweep_summary.csv in out_dir) follow the order of values, then seeds. sweep_aggregate.csv holds the
    mean and standard deviation of every metric per value.

    :return: The RunLog of every run, each echoing its config."""
    if param not in TrainConfig.field_types():
        raise ValueError(f"unknown sweep parameter {param}")
    if seeds < 1:
        raise ValueError(f"seeds must be positive, got {seeds}")
    typed = [TrainConfig.parse_fields({param: v})[param] if isinstance(v, str) else v for v in values]
    jobs = []
    for value in typed:
        base_seed = value if param == "seed" else config.seed
        for i in range(seeds):
            point = config.with_overrides(**{param: value, "seed": base_seed + i})
            run_dir = None if out_dir is None else os.path.join(out_dir, f"{param}={format_value(value)}_seed{point.seed}")
            jobs.append((point, run_dir, progress_bar and n_jobs == 1))
    logger.info("sweeping %s over %s values x %s seeds (%s runs)", param, len(typed), seeds, len(jobs))
    if n_jobs == 1:
        logs = [_sweep_point(*job) for job in tqdm(jobs, unit="runs", disable=not progress_bar)]
    else:
        logs = _run_parallel(jobs, n_jobs)
    if out_dir is not None:
        summary = sweep_summary(logs, param)
        path = os.path.join(out_dir, "sweep_summary.csv")
        summary.to_csv(path, index=False)
        logger.info("sweep summary written to %s", path)
        sweep_aggregate(summary, param).to_csv(os.path.join(out_dir, "sweep_aggregate.csv"), index=False)
    return logs


def sweep_summary(logs: list[RunLog], param: str) -> pd.DataFrame:
    """Final record of every run with the swept value and the seed."""
    rows = []
    for log in logs:
        row = {param: format_value(getattr(log.config, param)), "seed": log.config.seed}
        row.update(log.final.as_row())
        rows.append(row)
    return pd.DataFrame(rows)


def sweep_aggregate(summary: pd.DataFrame, param: str) -> pd.DataFrame:
    """Mean and standard deviation over seeds of every metric, one row per swept value.

    Columns are <param>, runs and <metric>_mean, <metric>_std for each numeric column of the summary."""
    metrics = [c for c in summary.columns if c not in (param, "seed", "step") and pd.api.types.is_numeric_dtype(summary[c])]
    grouped = summary.groupby(param, sort=False)[metrics]
    stats = grouped.agg(["mean", "std"])
    stats.columns = [f"{metric}_{stat}" for metric, stat in stats.columns]
    stats.insert(0, "runs", grouped.size())
    return stats.reset_index()


def evaluate_checkpoint(path: str, config: TrainConfig, n: int, seed: int = 0) -> dict[str, Any]:
    """Coverage and PRD scores of n samples from a saved generator on the mixture of config.

    :return: Dict with modes_covered, n_modes, hq_ratio, F8 and F1_8."""
    arrays = load_checkpoint(path)
    gen = GeneratorNet.from_arrays(arrays, prefix="generator.")
    spec = config.mixture()
    if gen.d_x != spec.dim:
        raise ValueError(f"checkpoint generator produces {gen.d_x}-d samples, the mixture is {spec.dim}-d")
    fake = _generate(gen, n, seed)
    real = sample_mixture(spec, n, seed).points
    coverage = mode_coverage(fake, spec, config.coverage_sigmas * spec.std, config.count_threshold)
    f8, f1_8 = prd_f_scores(real, fake, config.prd_bins, seed, config.prd_restarts)
    return {"modes_covered": coverage.modes_covered, "n_modes": coverage.n_modes, "hq_ratio": coverage.high_quality_ratio, "F8": f8, "F1_8": f1_8}


def load_discriminator(path: str) -> MultiDiscriminator:
    """Discriminator stored in a run checkpoint."""
    return discriminator_from_arrays(load_checkpoint(path), prefix="discriminator.")
