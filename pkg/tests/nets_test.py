import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from mclgan import grad_core as gc
from mclgan.grad_core import backward, numerical_gradient
from mclgan.nets import (
    CHECKPOINT_MAGIC,
    GeneratorNet,
    MultiDiscriminator,
    collect_grads,
    discriminator_from_arrays,
    load_checkpoint,
    save_checkpoint,
)


def test_generator_shapes_and_determinism(tiny_nets):
    gen, _ = tiny_nets
    z = np.random.default_rng(0).normal(size=(7, 2))
    out = gen.forward(z)
    assert out.shape == (7, 2)
    assert np.array_equal(out.value, gen(z).value)


def test_generator_default_architecture():
    gen = GeneratorNet()
    assert gen.hidden == (128, 128, 128)
    assert gen.params["layer0.weight"].shape == (2, 128)
    assert gen.params["layer3.weight"].shape == (128, 2)
    assert np.all(gen.params["layer1.bias"] == 0)
    # same seed, same initialization
    assert np.array_equal(GeneratorNet(seed=4).params["layer2.weight"], GeneratorNet(seed=4).params["layer2.weight"])
    assert not np.array_equal(GeneratorNet(seed=4).params["layer2.weight"], GeneratorNet(seed=5).params["layer2.weight"])


def test_generator_dimension_mismatch(tiny_nets):
    gen, disc = tiny_nets
    with pytest.raises(ValueError):
        gen.forward(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        disc.forward(np.zeros((3, 1)))
    with pytest.raises(ValueError):
        GeneratorNet(d_z=0)


def test_generator_gradient_matches_finite_differences(tiny_nets):
    gen, _ = tiny_nets
    z = np.random.default_rng(1).normal(size=(6, 2))
    nodes = gen.parameter_nodes()
    backward(gen.forward(z, nodes).mean())
    analytic = nodes["layer0.weight"].grad

    def mean_output(w):
        params = dict(gen.params)
        params["layer0.weight"] = w
        frozen = {name: gc.DiffNode(p) for name, p in params.items()}
        return float(gen.forward(z, frozen).mean())

    numeric = numerical_gradient(mean_output, gen.params["layer0.weight"])
    assert np.allclose(analytic, numeric, rtol=1e-4, atol=1e-8)


def test_discriminator_scores(tiny_nets):
    _, disc = tiny_nets
    x = np.random.default_rng(2).uniform(-3, 3, size=(20, 2))
    logits, scores = disc.forward(x)
    assert logits.shape == scores.shape == (20, 4)
    assert np.all((scores.value > 0) & (scores.value < 1))
    assert np.allclose(scores.value, 1 / (1 + np.exp(-logits.value)), atol=1e-9)


def test_zero_head():
    disc = MultiDiscriminator(d_x=2, n_heads=5, hidden=(16, 16), seed=0)
    x = np.random.default_rng(3).normal(size=(10, 2))
    before, _ = disc.forward(x)
    weight, bias = disc.head_parameters(3)
    weight[:] = 0
    bias[:] = 0
    after, scores = disc.forward(x)
    assert np.all(after.value[:, 3] == 0)
    assert np.all(scores.value[:, 3] == 0.5)
    others = [0, 1, 2, 4]
    assert np.array_equal(before.value[:, others], after.value[:, others])
    with pytest.raises(ValueError):
        disc.head_parameters(5)


def test_trunk_evaluated_once_per_batch():
    disc = MultiDiscriminator(n_heads=8, hidden=(4,), seed=0)
    disc.forward(np.zeros((3, 2)))
    assert disc.trunk_calls == 1
    disc.forward(np.zeros((5, 2)))
    assert disc.trunk_calls == 2


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), head=st.integers(0, 3))
def test_head_perturbation_leaves_other_heads_unchanged(seed, head):
    rng = np.random.default_rng(seed)
    disc = MultiDiscriminator(n_heads=4, hidden=(6, 5), seed=seed % 1000)
    x = rng.normal(size=(9, 2))
    before, _ = disc.forward(x)
    weight, bias = disc.head_parameters(head)
    weight += rng.normal(size=weight.shape)
    bias += rng.normal()
    after, _ = disc.forward(x)
    others = [m for m in range(4) if m != head]
    assert np.max(np.abs(after.value[:, others] - before.value[:, others])) == 0
    assert not np.array_equal(after.value[:, head], before.value[:, head])


def test_trunk_perturbation_changes_all_heads(tiny_nets):
    _, disc = tiny_nets
    x = np.random.default_rng(4).normal(size=(10, 2))
    before, _ = disc.forward(x)
    disc.params["trunk0.bias"] += 1.0
    after, _ = disc.forward(x)
    assert all(not np.allclose(before.value[:, m], after.value[:, m]) for m in range(disc.n_heads))


def test_parameter_count_per_head():
    counts = [MultiDiscriminator(n_heads=m, hidden=(16, 12)).n_parameters for m in (1, 2, 3, 8)]
    assert counts[1] - counts[0] == 12 + 1
    assert counts[2] - counts[1] == 12 + 1
    assert counts[3] - counts[0] == 7 * (12 + 1)


def test_frozen_nodes_receive_no_gradient(tiny_nets):
    gen, disc = tiny_nets
    z = np.random.default_rng(5).normal(size=(4, 2))
    g_nodes = gen.parameter_nodes()
    frozen = disc.parameter_nodes(frozen=True)
    _, scores = disc.forward(gen.forward(z, g_nodes), frozen)
    grads = backward(scores.sum())
    assert all(node not in grads for node in frozen.values())
    g_grads = collect_grads(g_nodes, grads)
    assert set(g_grads) == set(gen.params)
    assert any(np.any(g != 0) for g in g_grads.values())
    d_grads = collect_grads(frozen, grads)
    assert all(np.all(g == 0) for g in d_grads.values())


def test_checkpoint_layout(tmp_path):
    path = tmp_path / "test.mclg"
    arrays = {"a": np.arange(6, dtype=float).reshape(2, 3), "bias": np.array([1.5, -2.0])}
    save_checkpoint(str(path), arrays)
    raw = path.read_bytes()
    assert raw[:4] == CHECKPOINT_MAGIC
    assert np.frombuffer(raw, "<u4", count=2, offset=4).tolist() == [1, 2]
    # first array: name length, name, rank, dims, data
    assert np.frombuffer(raw, "<u2", count=1, offset=12)[0] == 1
    assert raw[14:15] == b"a"
    assert raw[15] == 2
    assert np.frombuffer(raw, "<u4", count=2, offset=16).tolist() == [2, 3]
    assert np.frombuffer(raw, "<f8", count=6, offset=24).tolist() == [0, 1, 2, 3, 4, 5]
    assert len(raw) == 12 + (2 + 1 + 1 + 8 + 48) + (2 + 4 + 1 + 4 + 16)
    loaded = load_checkpoint(str(path))
    assert list(loaded) == ["a", "bias"]
    assert all(np.array_equal(loaded[n], arrays[n]) for n in arrays)


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.bin"
    path.write_bytes(b"PK\x03\x04" + bytes(20))
    with pytest.raises(ValueError):
        load_checkpoint(str(path))


def test_networks_rebuild_from_checkpoint(tmp_path, tiny_nets):
    gen, disc = tiny_nets
    path = str(tmp_path / "nets.mclg")
    save_checkpoint(path, {**gen.to_arrays("generator."), **disc.to_arrays("discriminator.")})
    arrays = load_checkpoint(path)
    gen2 = GeneratorNet.from_arrays(arrays)
    disc2 = discriminator_from_arrays(arrays)
    assert gen2.hidden == gen.hidden and disc2.hidden == disc.hidden and disc2.n_heads == disc.n_heads
    z = np.random.default_rng(6).normal(size=(5, 2))
    assert np.array_equal(gen2(z).value, gen(z).value)
    assert np.array_equal(disc2(z)[0].value, disc(z)[0].value)
    assert gen2.n_parameters == gen.n_parameters
