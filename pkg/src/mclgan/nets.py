"""Generator MLP and multi-head discriminator with a shared feature trunk.

Parameters live in plain dicts of named float64 arrays. A forward pass wraps them in
leaf nodes (see :meth:`GeneratorNet.parameter_nodes`), so gradients can be collected by name.
"""

from __future__ import annotations
import logging
import re
from typing import Literal, Optional, Union
import numpy as np
from . import grad_core as gc
from .grad_core import DiffNode
from ._utils import make_rng

logger = logging.getLogger("mclgan")

Activation = Literal["relu", "leaky_relu", "linear"]
CHECKPOINT_MAGIC = b"MCLG"
CHECKPOINT_VERSION = 1


def _activate(x: DiffNode, kind: Activation, slope: float) -> DiffNode:
    if kind == "relu":
        return gc.relu(x)
    if kind == "leaky_relu":
        return gc.leaky_relu(x, slope)
    if kind == "linear":
        return x
    raise ValueError(f"unknown activation {kind}")


def _init_dense(rng: np.random.Generator, fan_in: int, fan_out: int, gain: float) -> tuple[np.ndarray, np.ndarray]:
    # uniform Kaiming fan-in scaling, zero bias
    bound = gain * np.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out)


def _dense(x: DiffNode, weight: DiffNode, bias: DiffNode) -> DiffNode:
    return x @ weight + bias


def _as_batch(x: Union[DiffNode, np.ndarray], dim: int, label: str) -> DiffNode:
    x = gc.as_node(x)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"{label} must have shape (batch, {dim}), got {x.shape}")
    return x


class _Net:
    params: dict[str, np.ndarray]

    def parameter_nodes(self, frozen: bool = False) -> dict[str, DiffNode]:
        """Leaf nodes for one forward pass.

        :param frozen: If True the leaves are constants, so no gradient reaches this network."""
        return {name: DiffNode(p, requires_grad=not frozen, name=name) for name, p in self.params.items()}

    @property
    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def to_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        return {prefix + name: p for name, p in self.params.items()}


def collect_grads(nodes: dict[str, DiffNode], grad_map: dict[DiffNode, np.ndarray]) -> dict[str, np.ndarray]:
    """Gradients by parameter name; parameters the loss did not reach get zeros."""
    return {name: grad_map.get(node, np.zeros(node.shape)) for name, node in nodes.items()}


class GeneratorNet(_Net):
    """MLP mapping d_z dimensional latents to d_x dimensional samples.

    :param d_z: Latent dimension.
    :param d_x: Data dimension.
    :param hidden: Widths of the hidden layers.
    :param activation: Activation of the hidden layers; the output layer is linear.
    :param seed: Seed for the weight initialization."""

    def __init__(
        self,
        d_z: int = 2,
        d_x: int = 2,
        hidden: tuple[int, ...] = (128, 128, 128),
        activation: Activation = "relu",
        seed: int = 0,
        slope: float = 0.2,
    ):
        if d_z < 1 or d_x < 1:
            raise ValueError(f"invalid generator dimensions d_z={d_z}, d_x={d_x}")
        self.d_z, self.d_x = d_z, d_x
        self.hidden = tuple(hidden)
        self.activation = activation
        self.slope = slope
        rng = make_rng(seed, "init_generator")
        sizes = [d_z, *self.hidden, d_x]
        self.params = {}
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = 1.0 if i == len(sizes) - 2 else np.sqrt(2.0)
            self.params[f"layer{i}.weight"], self.params[f"layer{i}.bias"] = _init_dense(rng, fan_in, fan_out, gain)

    @property
    def n_layers(self) -> int:
        return len(self.hidden) + 1

    def forward(self, z: Union[DiffNode, np.ndarray], nodes: Optional[dict[str, DiffNode]] = None) -> DiffNode:
        """Maps a latent batch (n x d_z) to a sample batch (n x d_x).

        :param nodes: Parameter leaves from parameter_nodes(); fresh trainable leaves are made if omitted."""
        if nodes is None:
            nodes = self.parameter_nodes()
        h = _as_batch(z, self.d_z, "latent batch")
        for i in range(self.n_layers):
            h = _dense(h, nodes[f"layer{i}.weight"], nodes[f"layer{i}.bias"])
            if i < self.n_layers - 1:
                h = _activate(h, self.activation, self.slope)
        return h

    __call__ = forward

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray], prefix: str = "generator.", activation: Activation = "relu") -> GeneratorNet:
        """Rebuilds a generator from checkpoint arrays; layer sizes are read from the weight shapes."""
        layers = _layer_arrays(arrays, prefix, "layer")
        if not layers:
            raise ValueError(f"no generator layers with prefix {prefix!r} in checkpoint")
        net = cls.__new__(cls)
        weights = [layers[i][0] for i in sorted(layers)]
        net.d_z, net.d_x = weights[0].shape[0], weights[-1].shape[1]
        net.hidden = tuple(w.shape[1] for w in weights[:-1])
        net.activation = activation
        net.slope = 0.2
        net.params = {}
        for i in sorted(layers):
            net.params[f"layer{i}.weight"], net.params[f"layer{i}.bias"] = (a.copy() for a in layers[i])
        return net


class MultiDiscriminator(_Net):
    """M discriminators sharing every feature layer and branching the last (linear) layer only.

    Head m is column m of "heads.weight" and entry m of "heads.bias".

    :param d_x: Data dimension.
    :param n_heads: Number of discriminators M.
    :param hidden: Widths of the trunk layers; the last width is the feature dimension.
    :param activation: Activation of the trunk layers.
    :param slope: Negative slope of the leaky ReLU."""

    def __init__(
        self,
        d_x: int = 2,
        n_heads: int = 8,
        hidden: tuple[int, ...] = (128, 128, 128),
        activation: Activation = "leaky_relu",
        slope: float = 0.2,
        seed: int = 0,
    ):
        if n_heads < 1:
            raise ValueError(f"n_heads must be positive, got {n_heads}")
        if not hidden:
            raise ValueError("the discriminator trunk needs at least one layer")
        self.d_x = d_x
        self.n_heads = n_heads
        self.hidden = tuple(hidden)
        self.activation = activation
        self.slope = slope
        self.trunk_calls = 0
        rng = make_rng(seed, "init_discriminator")
        sizes = [d_x, *self.hidden]
        self.params = {}
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            self.params[f"trunk{i}.weight"], self.params[f"trunk{i}.bias"] = _init_dense(rng, fan_in, fan_out, np.sqrt(2.0))
        self.params["heads.weight"], self.params["heads.bias"] = _init_dense(rng, self.feature_dim, n_heads, 1.0)

    @property
    def feature_dim(self) -> int:
        return self.hidden[-1]

    def features(self, x: Union[DiffNode, np.ndarray], nodes: dict[str, DiffNode]) -> DiffNode:
        self.trunk_calls += 1
        h = _as_batch(x, self.d_x, "sample batch")
        for i in range(len(self.hidden)):
            h = _activate(_dense(h, nodes[f"trunk{i}.weight"], nodes[f"trunk{i}.bias"]), self.activation, self.slope)
        return h

    def forward(self, x: Union[DiffNode, np.ndarray], nodes: Optional[dict[str, DiffNode]] = None) -> tuple[DiffNode, DiffNode]:
        """Evaluates the trunk once and all M heads on its features.

        :return: (logits, scores), both batch x M, with scores = sigmoid(logits)."""
        if nodes is None:
            nodes = self.parameter_nodes()
        logits = _dense(self.features(x, nodes), nodes["heads.weight"], nodes["heads.bias"])
        return logits, gc.sigmoid(logits)

    __call__ = forward

    def head_parameters(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Views on the weight column and bias of head m; writing to them changes head m only."""
        if not 0 <= m < self.n_heads:
            raise ValueError(f"head index {m} out of range for {self.n_heads} heads")
        return self.params["heads.weight"][:, m], self.params["heads.bias"][m : m + 1]


def _layer_arrays(arrays: dict[str, np.ndarray], prefix: str, kind: str) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    pattern = re.compile(re.escape(prefix) + kind + r"(\d+)\.weight$")
    layers = {}
    for name, value in arrays.items():
        match = pattern.match(name)
        if match:
            i = int(match.group(1))
            layers[i] = (value, arrays[f"{prefix}{kind}{i}.bias"])
    return layers


def discriminator_from_arrays(
    arrays: dict[str, np.ndarray], prefix: str = "discriminator.", activation: Activation = "leaky_relu", slope: float = 0.2
) -> MultiDiscriminator:
    """Rebuilds a MultiDiscriminator from checkpoint arrays."""
    layers = _layer_arrays(arrays, prefix, "trunk")
    if not layers or prefix + "heads.weight" not in arrays:
        raise ValueError(f"no discriminator with prefix {prefix!r} in checkpoint")
    net = MultiDiscriminator.__new__(MultiDiscriminator)
    net.d_x = layers[0][0].shape[0]
    net.hidden = tuple(layers[i][0].shape[1] for i in sorted(layers))
    net.n_heads = arrays[prefix + "heads.weight"].shape[1]
    net.activation, net.slope, net.trunk_calls = activation, slope, 0
    net.params = {}
    for i in sorted(layers):
        net.params[f"trunk{i}.weight"], net.params[f"trunk{i}.bias"] = (a.copy() for a in layers[i])
    net.params["heads.weight"] = arrays[prefix + "heads.weight"].copy()
    net.params["heads.bias"] = arrays[prefix + "heads.bias"].copy()
    return net


# checkpoint container


def save_checkpoint(path: str, arrays: dict[str, np.ndarray]):
    """Writes named arrays in the mclgan checkpoint layout.

    Layout (little endian): magic b"MCLG", uint32 version, uint32 number of arrays, then per array:
    uint16 name length, UTF-8 name, uint8 rank, rank x uint32 dims, row-major float64 values."""
    logger.info("saving checkpoint with %s arrays to %s", len(arrays), path)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(np.array([CHECKPOINT_VERSION, len(arrays)], dtype="<u4").tobytes())
        for name, value in arrays.items():
            encoded = name.encode("utf-8")
            value = np.ascontiguousarray(value, dtype="<f8")
            fh.write(np.array([len(encoded)], dtype="<u2").tobytes())
            fh.write(encoded)
            fh.write(np.array([value.ndim], dtype="u1").tobytes())
            fh.write(np.array(value.shape, dtype="<u4").tobytes())
            fh.write(value.tobytes(order="C"))


def load_checkpoint(path: str) -> dict[str, np.ndarray]:
    """Reads a file written by save_checkpoint, keeping the array order."""
    logger.info("loading checkpoint %s", path)
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not an mclgan checkpoint")
    version, count = np.frombuffer(buf, dtype="<u4", count=2, offset=4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    pos = 12
    arrays = {}
    for _ in range(int(count)):
        (name_len,) = np.frombuffer(buf, dtype="<u2", count=1, offset=pos)
        pos += 2
        name = buf[pos : pos + int(name_len)].decode("utf-8")
        pos += int(name_len)
        rank = buf[pos]
        pos += 1
        shape = tuple(int(d) for d in np.frombuffer(buf, dtype="<u4", count=rank, offset=pos))
        pos += 4 * rank
        size = int(np.prod(shape))
        arrays[name] = np.frombuffer(buf, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
    return arrays
