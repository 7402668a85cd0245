import numpy as np
import pytest
from mclgan import TrainConfig, ring_mixture, GeneratorNet, MultiDiscriminator


@pytest.fixture(scope="session")
def ring8():
    return ring_mixture(8, np.sqrt(2), 0.05)


@pytest.fixture
def tiny_config():
    """Small networks and batches, so that a few hundred steps take seconds."""
    return TrainConfig(
        n_disc=3,
        k=1,
        g_hidden=(8, 8),
        d_hidden=(8, 8),
        batch_real=8,
        batch_latent=8,
        steps=20,
        eval_interval=10,
        eval_samples=200,
        snapshot_steps=(10, 20),
        snapshot_samples=50,
        prd_bins=5,
        prd_restarts=2,
        utilization_window=10,
        seed=3,
    )


@pytest.fixture
def tiny_nets():
    gen = GeneratorNet(d_z=2, d_x=2, hidden=(5, 4), seed=1)
    disc = MultiDiscriminator(d_x=2, n_heads=4, hidden=(6, 5), seed=1)
    return gen, disc
