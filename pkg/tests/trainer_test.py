import copy
import hashlib
import logging
import os
import numpy as np
import pandas as pd
import pytest
from mclgan import trainer
from mclgan import gan_losses
from mclgan.gan_losses import BatchOutputs
from mclgan.data_synth import MixtureStream
from mclgan.mcl import assign_by_label, select_topk
from mclgan.trainer import PRESETS, TrainConfig, TrainingDiverged, init_state, run_experiment, run_sweep, train_step


def _digest(params):
    return hashlib.sha256(b"".join(params[name].tobytes() for name in sorted(params))).hexdigest()


def test_balance_weight_reexported():
    assert trainer.balance_weight(0, 0.5, 5000, "exponential") == 0.5
    assert trainer.balance_weight(5000, 0.5, 5000, "exponential") == pytest.approx(0.25)
    assert trainer.balance_weight(12345, 0.5, 5000, "constant") == 0.5


def test_config_defaults():
    config = TrainConfig()
    assert (config.n_disc, config.k, config.batch_real, config.batch_latent) == (8, 1, 64, 128)
    assert (config.adam_beta1, config.adam_beta2) == (0.5, 0.999)
    assert config.effective_lr_d == config.effective_lr_g == 2e-4
    assert config.effective_tau == 1.0
    assert config.steps == 50000 and config.snapshot_steps == (1000, 5000, 50000)
    least_squares = TrainConfig(variant="least_squares")
    assert least_squares.effective_tau == 0.1 and least_squares.effective_lr_g == 1e-4
    assert TrainConfig(variant="least_squares", tau=0.5).effective_tau == 0.5
    weights = config.loss_weights()
    assert weights.alpha == 0.01 and weights.beta_d == 0.5 and weights.soft_label == (0.5, 0.5)
    assert config.mixture().n_components == 8
    assert config.reduction == "element_mean" and config.assignment == "mcl"


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(k=3, n_disc=2),
        dict(k=0),
        dict(n_disc=0),
        dict(batch_real=0),
        dict(batch_latent=0),
        dict(steps=-1),
        dict(seed=-2),
        dict(mu=(0.5, 0.5)),
        dict(alpha=-0.1),
        dict(variant="wasserstein"),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


def test_grid_config():
    assert TrainConfig(data="grid", n_components=25).mixture().n_components == 25
    with pytest.raises(ValueError):
        TrainConfig(data="grid", n_components=8).mixture()


def test_config_file_round_trip(tmp_path, tiny_config):
    config = tiny_config.with_overrides(mu=(0.2, 0.3, 0.5), gen_experts_after_disc_update=False, variant="hinge")
    path = str(tmp_path / "run.cfg")
    config.save(path)
    assert TrainConfig.load(path) == config


def test_config_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# toy run\nn_disc = 4\nalpha=0.1  # weight of the soft labels\ng_hidden = 16,16\ntau = none\n")
    config = TrainConfig.load(str(path))
    assert config.n_disc == 4 and config.alpha == 0.1 and config.g_hidden == (16, 16) and config.tau is None
    assert config.beta_d == 0.5
    path.write_text("n_disc = 4\nlearning_rate = 0.1\n")
    with pytest.raises(ValueError, match="learning_rate"):
        TrainConfig.load(str(path))
    path.write_text("n_disc = four\n")
    with pytest.raises(ValueError, match="n_disc"):
        TrainConfig.load(str(path))
    path.write_text("n_disc 4\n")
    with pytest.raises(ValueError):
        TrainConfig.load(str(path))


def test_presets():
    assert set(PRESETS) >= {"standard8", "baseline", "hinge2", "sparsity20"}
    hinge = TrainConfig.from_preset("hinge2")
    assert hinge.variant == "hinge" and hinge.n_disc == 2
    assert TrainConfig.from_preset("baseline").n_disc == 1
    assert TrainConfig.from_preset("sparsity20", seed=4).gamma == 1e-5
    assert TrainConfig.from_preset("least_squares").effective_lr_g == 1e-4
    with pytest.raises(ValueError):
        TrainConfig.from_preset("stylegan")
    with pytest.raises(ValueError):
        TrainConfig().with_overrides(n_heads=3)


def test_zero_learning_rates_leave_parameters(tiny_config):
    state = init_state(tiny_config.with_overrides(lr_d=0.0, lr_g=0.0))
    before = _digest(state.generator.params), _digest(state.discriminator.params)
    result = train_step(state)
    assert (_digest(state.generator.params), _digest(state.discriminator.params)) == before
    assert result.step == state.step == 1
    assert all(np.isfinite(value) for value in result.losses.values())


def test_step_updates_both_networks(tiny_config):
    state = init_state(tiny_config)
    before = _digest(state.generator.params), _digest(state.discriminator.params)
    train_step(state)
    after = _digest(state.generator.params), _digest(state.discriminator.params)
    assert after[0] != before[0] and after[1] != before[1]


def test_update_separation(tiny_config):
    state = init_state(tiny_config)
    seen = {}
    gen_before = _digest(state.generator.params)
    d_step, g_step = state.opt_d.step, state.opt_g.step

    def disc_update(grads):
        seen["gen_at_disc_update"] = _digest(state.generator.params)
        d_step(grads)
        seen["disc_after_disc_update"] = _digest(state.discriminator.params)

    def gen_update(grads):
        seen["disc_at_gen_update"] = _digest(state.discriminator.params)
        g_step(grads)

    state.opt_d.step, state.opt_g.step = disc_update, gen_update
    train_step(state)
    assert seen["gen_at_disc_update"] == gen_before
    assert seen["disc_at_gen_update"] == seen["disc_after_disc_update"] == _digest(state.discriminator.params)


def test_training_is_deterministic(tiny_config):
    def losses(config):
        state = init_state(config)
        return [train_step(state).losses for _ in range(100)]

    assert losses(tiny_config) == losses(tiny_config)
    assert losses(tiny_config) != losses(tiny_config.with_overrides(seed=4))


def test_step_losses_match_recomputation(tiny_config):
    config = tiny_config.with_overrides(alpha=0.1, beta_g=1.0, gamma=0.01)
    state = init_state(config)
    for _ in range(3):
        train_step(state)
    before = copy.deepcopy(state)
    result = train_step(state)
    weights = config.loss_weights()

    # discriminator phase, parameters before the step
    fake = before.generator(result.latent).value
    real_logits, real_scores = before.discriminator(result.real)
    fake_logits, fake_scores = before.discriminator(fake)
    v = select_topk(real_scores.value, config.k)
    assert np.array_equal(v.indicators, result.v.indicators)
    terms = gan_losses.disc_loss_terms(BatchOutputs(real_logits, real_scores, fake_logits, fake_scores, v=v), weights, before.step)
    for name, node in terms.items():
        assert result.losses[name] == pytest.approx(float(node), rel=1e-12, abs=1e-15)
    assert result.losses["disc_total"] == pytest.approx(float(gan_losses.total_disc_loss(BatchOutputs(real_logits, real_scores, fake_logits, fake_scores, v=v), weights, before.step)), rel=1e-12)

    # generator phase: old generator against the updated discriminators
    assert np.array_equal(fake, result.fake)
    fake_logits, fake_scores = state.discriminator(fake)
    real_logits, real_scores = state.discriminator(result.real)
    u = select_topk(fake_scores.value, config.k)
    assert np.array_equal(u.indicators, result.u.indicators)
    terms = gan_losses.gen_loss_terms(BatchOutputs(real_logits, real_scores, fake_logits, fake_scores, u=u), weights, before.step)
    for name, node in terms.items():
        assert result.losses[name] == pytest.approx(float(node), rel=1e-12, abs=1e-15)


def test_update_order_and_discriminator_steps(tiny_config):
    state = init_state(tiny_config.with_overrides(d_steps=2, gen_experts_after_disc_update=False))
    result = train_step(state)
    assert state.step == 1
    assert state.opt_d.states["heads.weight"].step == 2
    assert state.opt_g.states["layer0.weight"].step == 1
    assert result.u.shape == (tiny_config.batch_latent, tiny_config.n_disc)
    assert len(state.recent_v) == 1


def test_experts_are_reselected_every_step(tiny_config):
    state = init_state(tiny_config)
    results = [train_step(state) for _ in range(5)]
    assert all(r.v.shape == (tiny_config.batch_real, tiny_config.n_disc) for r in results)
    assert all(np.all(r.v.indicators.sum(axis=1) == tiny_config.k) for r in results)
    assert not all(np.array_equal(results[0].real, r.real) for r in results[1:])


def test_label_assignment(tiny_config):
    config = tiny_config.with_overrides(assignment="label")
    state = init_state(config)
    labels = MixtureStream(config.mixture(), config.seed).draw(config.batch_real).labels
    result = train_step(state)
    assert np.array_equal(result.v.indicators, assign_by_label(labels, config.n_disc).indicators)
    # fake samples still pick their experts by score
    fake_scores = state.discriminator(result.fake)[1]
    assert np.array_equal(result.u.indicators, select_topk(fake_scores.value, 1).indicators)
    assert TrainConfig.from_preset("label8").assignment == "label"
    with pytest.raises(ValueError):
        TrainConfig(assignment="label", k=2)
    with pytest.raises(ValueError):
        TrainConfig(assignment="kmeans")


def test_zero_steps_gives_initial_record(tiny_config):
    log = run_experiment(tiny_config.with_overrides(steps=0))
    assert len(log) == 1 and log.final.step == 0
    assert log.losses == []
    assert log.final.entropy == 0.0


def test_final_step_is_snapshotted(tmp_path, tiny_config):
    log = run_experiment(tiny_config.with_overrides(steps=15, snapshot_steps=(10,)), str(tmp_path))
    assert sorted(log.snapshots) == sorted(log.utilization) == [10, 15]
    assert {"snapshot_15.csv", "utilization_15.csv", "checkpoint_15.mclg"} <= set(os.listdir(tmp_path))


def test_run_experiment_outputs(tmp_path, tiny_config, caplog):
    out = str(tmp_path / "run")
    with caplog.at_level(logging.INFO, logger="mclgan"):
        log = run_experiment(tiny_config, out)
    assert [r.step for r in log.records] == [0, 10, 20]
    assert "modes covered" in caplog.text
    files = set(os.listdir(out))
    assert {"metrics.csv", "losses.csv", "config.echo", "snapshot_10.csv", "snapshot_20.csv", "utilization_10.csv", "utilization_20.csv"} <= files
    assert {"checkpoint_10.mclg", "checkpoint_20.mclg"} <= files
    assert log.checkpoint_path == os.path.join(out, "checkpoint_20.mclg")
    metrics = pd.read_csv(os.path.join(out, "metrics.csv"))
    assert list(metrics.columns) == ["step", *trainer.LOSS_COLUMNS, "coverage", "hq_ratio", "F8", "F1_8", "entropy", "active_disc"]
    assert metrics.step.tolist() == [0, 10, 20]
    assert metrics.coverage.between(0, 8).all() and metrics.F8.between(0, 1).all()
    losses = pd.read_csv(os.path.join(out, "losses.csv"))
    assert len(losses) == 20 and losses.step.iloc[0] == 1
    snap = pd.read_csv(os.path.join(out, "snapshot_20.csv"))
    assert list(snap.columns) == ["x", "y", "expert_id"] and len(snap) == tiny_config.snapshot_samples
    assert snap.expert_id.between(0, tiny_config.n_disc - 1).all()
    util = pd.read_csv(os.path.join(out, "utilization_20.csv"))
    assert list(util.columns) == ["discriminator", "count", "share"]
    assert util["count"].sum() == tiny_config.utilization_window * tiny_config.batch_real * tiny_config.k
    assert TrainConfig.load(os.path.join(out, "config.echo")) == tiny_config


def test_metrics_file_is_reproducible(tmp_path, tiny_config):
    config = tiny_config.with_overrides(steps=1000, eval_interval=250, snapshot_steps=(1000,))
    run_experiment(config, str(tmp_path / "a"))
    run_experiment(config, str(tmp_path / "b"))
    for name in ("metrics.csv", "losses.csv", "snapshot_1000.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_divergence_writes_diagnostic(tmp_path, tiny_config, monkeypatch):
    def poisoned(outputs, weights, schedule_step=0):
        terms = gan_losses.disc_loss_terms(outputs, weights, schedule_step)
        terms["expert_real"] = terms["expert_real"] * np.nan
        return terms

    monkeypatch.setattr(trainer, "disc_loss_terms", poisoned)
    with pytest.raises(TrainingDiverged) as info:
        run_experiment(tiny_config, str(tmp_path))
    assert info.value.step == 0
    assert "expert_real" in str(info.value)
    frame = pd.read_csv(tmp_path / "diagnostic_0.csv")
    assert list(frame.columns) == ["kind", "index", "column", "value"]
    assert set(frame.kind) == {"loss", "real", "latent", "fake"}
    assert (frame.kind == "real").sum() == tiny_config.batch_real * 2


def test_sweep(tmp_path, tiny_config):
    config = tiny_config.with_overrides(steps=5, eval_interval=5, snapshot_steps=())
    logs = run_sweep(config, "alpha", ["0", "0.01", "0.1"], out_dir=str(tmp_path))
    assert [log.config.alpha for log in logs] == [0.0, 0.01, 0.1]
    assert all(log.final.step == 5 for log in logs)
    for value in ("0.0", "0.01", "0.1"):
        echo = TrainConfig.load(str(tmp_path / f"alpha={value}_seed3" / "config.echo"))
        assert echo.alpha == float(value)
    summary = pd.read_csv(tmp_path / "sweep_summary.csv")
    assert len(summary) == 3 and summary.seed.tolist() == [3, 3, 3]
    with pytest.raises(ValueError):
        run_sweep(config, "learning_rate", [0.1])


def test_sweep_over_seeds(tiny_config):
    config = tiny_config.with_overrides(steps=2, eval_interval=2, snapshot_steps=())
    logs = run_sweep(config, "n_disc", [1, 2], seeds=2)
    assert [(log.config.n_disc, log.config.seed) for log in logs] == [(1, 3), (1, 4), (2, 3), (2, 4)]
    assert trainer.sweep_summary(logs, "n_disc").n_disc.tolist() == ["1", "1", "2", "2"]


def test_sweep_over_seed_values(tmp_path, tiny_config):
    config = tiny_config.with_overrides(steps=2, eval_interval=2, snapshot_steps=())
    logs = run_sweep(config, "seed", ["7", "11"], out_dir=str(tmp_path))
    assert [log.config.seed for log in logs] == [7, 11]
    assert os.path.isdir(tmp_path / "seed=7_seed7") and os.path.isdir(tmp_path / "seed=11_seed11")
    logs = run_sweep(config, "seed", [7], seeds=2)
    assert [log.config.seed for log in logs] == [7, 8]


def test_sweep_aggregate(tmp_path, tiny_config):
    config = tiny_config.with_overrides(steps=2, eval_interval=2, snapshot_steps=())
    logs = run_sweep(config, "alpha", [0.0, 0.1], seeds=3, out_dir=str(tmp_path))
    summary = trainer.sweep_summary(logs, "alpha")
    aggregate = trainer.sweep_aggregate(summary, "alpha")
    assert aggregate.alpha.tolist() == ["0.0", "0.1"] and aggregate.runs.tolist() == [3, 3]
    assert "step_mean" not in aggregate.columns and "seed_mean" not in aggregate.columns
    first = summary[summary.alpha == "0.0"]
    assert aggregate.hq_ratio_mean[0] == pytest.approx(first.hq_ratio.mean())
    assert aggregate.active_disc_std[0] == pytest.approx(first.active_disc.std(), nan_ok=True)
    written = pd.read_csv(tmp_path / "sweep_aggregate.csv")
    assert len(written) == 2 and {"coverage_mean", "coverage_std", "F8_mean", "entropy_std"} <= set(written.columns)


def test_parallel_sweep_matches_sequential(tiny_config, caplog):
    config = tiny_config.with_overrides(steps=2, eval_interval=2, snapshot_steps=())
    sequential = run_sweep(config, "k", [1, 2])
    with caplog.at_level(logging.WARNING, logger="mclgan"):
        parallel = run_sweep(config, "k", [1, 2], n_jobs=2)
    assert "experimental" in caplog.text
    assert [log.final.as_row() for log in parallel] == [log.final.as_row() for log in sequential]


def test_evaluate_checkpoint(tmp_path, tiny_config):
    log = run_experiment(tiny_config, str(tmp_path))
    result = trainer.evaluate_checkpoint(log.checkpoint_path, tiny_config, 300)
    assert set(result) == {"modes_covered", "n_modes", "hq_ratio", "F8", "F1_8"}
    assert result["n_modes"] == 8 and 0 <= result["hq_ratio"] <= 1
    assert result == trainer.evaluate_checkpoint(log.checkpoint_path, tiny_config, 300)
    disc = trainer.load_discriminator(log.checkpoint_path)
    assert disc.n_heads == tiny_config.n_disc and disc.hidden == tiny_config.d_hidden


# acceptance runs on the 8-ring task, excluded from the default test selection


def _final(config):
    return run_experiment(config.with_overrides(eval_interval=config.steps, snapshot_steps=())).final


@pytest.mark.slow
def test_all_ring_modes_covered():
    finals = [_final(TrainConfig.from_preset("standard8", seed=seed)) for seed in range(5)]
    assert sum(f.coverage.modes_covered == 8 and f.coverage.high_quality_ratio >= 0.7 for f in finals) >= 4


@pytest.mark.slow
def test_single_discriminator_baseline_misses_modes():
    finals = [_final(TrainConfig.from_preset("baseline", seed=seed)) for seed in range(5)]
    assert sum(f.coverage.modes_covered <= 7 for f in finals) >= 3


@pytest.mark.slow
def test_hinge_two_discriminators_cover_ring():
    finals = [_final(TrainConfig.from_preset("hinge2", seed=seed)) for seed in range(5)]
    assert sum(f.coverage.modes_covered == 8 for f in finals) >= 3


@pytest.mark.slow
def test_sparsity_reduces_active_discriminators():
    sparse = [_final(TrainConfig.from_preset("sparsity20", seed=seed)).active_disc for seed in range(4)]
    dense = [_final(TrainConfig.from_preset("sparsity20", seed=seed, gamma=0.0)).active_disc for seed in range(4)]
    assert all(6 <= a <= 18 for a in sparse)
    assert sum(d >= s for d, s in zip(dense, sparse)) > 2


@pytest.mark.slow
def test_balance_loss_spreads_assignments():
    balanced = [_final(TrainConfig(steps=2000, seed=seed)).entropy for seed in range(5)]
    unbalanced = [_final(TrainConfig(steps=2000, seed=seed, beta_d=0.0)).entropy for seed in range(5)]
    assert sum(e >= 0.8 for e in balanced) >= 4
    assert min(unbalanced) < 0.5
