"""Minimal reverse-mode automatic differentiation on dense float64 arrays.

Graphs are built eagerly: every primitive returns a new :class:`DiffNode` that
remembers its parents and a local backward rule. :func:`backward` walks the
graph from a scalar root in reverse topological order.
"""

from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union
import numpy as np
from scipy.special import expit, xlogy

logger = logging.getLogger("mclgan")

PROB_FLOOR = 1e-12
"Probabilities are clamped to [PROB_FLOOR, 1 - PROB_FLOOR] before any log."

ArrayLike = Union["DiffNode", np.ndarray, float, int, Sequence[float]]
BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class DiffNode:
    """A value in the computation graph together with its accumulated gradient.

    :param value: The array (any rank) held by this node, stored as float64.
    :param requires_grad: Leaf nodes created with requires_grad=True are parameters; gradients are accumulated in their grad attribute.
    :param name: Optional name, used for parameters."""

    clamped: int = 0
    "Number of entries moved by a numerical floor/ceiling when this node was computed."

    # numpy arrays on the left of an operator defer to the reflected DiffNode methods
    __array_ufunc__ = None

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        name: Optional[str] = None,
        parents: Sequence[DiffNode] = (),
        backward_rule: Optional[BackwardRule] = None,
    ):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.name = name
        self._parents = tuple(parents)
        self._backward_rule = backward_rule
        self.requires_grad = requires_grad or any(p.requires_grad for p in self._parents)

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        return float(self.value.reshape(-1)[0]) if self.value.size == 1 else float(self.value)

    def __float__(self):
        return self.item()

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"DiffNode{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def detach(self) -> DiffNode:
        """A constant copy of this node, cut from the graph."""
        return DiffNode(self.value.copy())

    # operator syntax maps to the module level primitives
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def sum(self, axis: Optional[int] = None) -> DiffNode:
        return sum_(self, axis)

    def mean(self, axis: Optional[int] = None) -> DiffNode:
        return mean(self, axis)


def as_node(x: ArrayLike) -> DiffNode:
    """Wraps arrays and scalars as constant nodes; nodes are passed through."""
    if isinstance(x, DiffNode):
        return x
    return DiffNode(x)


def _topological_order(root: DiffNode) -> list[DiffNode]:
    # iterative post-order DFS over the nodes that need gradients
    order: list[DiffNode] = []
    seen: set[int] = set()
    stack: list[tuple[DiffNode, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(root: DiffNode) -> dict[DiffNode, np.ndarray]:
    """Accumulates d(root)/d(node) into the grad attribute of every node reachable from root.

    Each node is visited once, in reverse topological order. Calling backward again without
    resetting the gradients adds a second copy of the derivatives.

    :param root: A scalar node (exactly one element).
    :return: Dict mapping each leaf that requires gradients to its grad array."""
    if not isinstance(root, DiffNode):
        raise ValueError("backward needs a DiffNode as root")
    if root.value.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return {}
    order = _topological_order(root)
    upstream: dict[int, np.ndarray] = {id(root): np.ones_like(root.value)}
    for node in reversed(order):
        g = upstream.pop(id(node), None)
        if g is None:
            continue
        node.grad += g
        if node._backward_rule is None:
            continue
        for parent, parent_grad in zip(node._parents, node._backward_rule(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            upstream[key] = upstream[key] + parent_grad if key in upstream else parent_grad
    return {node: node.grad for node in order if node.is_leaf}


# primitives


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sums grad over the axes that numpy broadcasting expanded to reach grad.shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _check_rank(a: DiffNode, b: DiffNode):
    if a.shape != b.shape and max(a.ndim, b.ndim) > 2:
        raise ValueError(f"broadcasting beyond rank 2 is not supported: {a.shape} vs {b.shape}")


def add(a: ArrayLike, b: ArrayLike) -> DiffNode:
    a, b = as_node(a), as_node(b)
    _check_rank(a, b)
    return DiffNode(
        a.value + b.value,
        parents=(a, b),
        backward_rule=lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: ArrayLike, b: ArrayLike) -> DiffNode:
    a, b = as_node(a), as_node(b)
    _check_rank(a, b)
    return DiffNode(
        a.value - b.value,
        parents=(a, b),
        backward_rule=lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: ArrayLike, b: ArrayLike) -> DiffNode:
    a, b = as_node(a), as_node(b)
    _check_rank(a, b)
    return DiffNode(
        a.value * b.value,
        parents=(a, b),
        backward_rule=lambda g: (
            _unbroadcast(g * b.value, a.shape),
            _unbroadcast(g * a.value, b.shape),
        ),
    )


def div(a: ArrayLike, b: ArrayLike) -> DiffNode:
    a, b = as_node(a), as_node(b)
    _check_rank(a, b)
    return DiffNode(
        a.value / b.value,
        parents=(a, b),
        backward_rule=lambda g: (
            _unbroadcast(g / b.value, a.shape),
            _unbroadcast(-g * a.value / b.value**2, b.shape),
        ),
    )


def neg(a: ArrayLike) -> DiffNode:
    a = as_node(a)
    return DiffNode(-a.value, parents=(a,), backward_rule=lambda g: (-g,))


def matmul(a: ArrayLike, b: ArrayLike) -> DiffNode:
    a, b = as_node(a), as_node(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul needs two matrices, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return DiffNode(
        a.value @ b.value,
        parents=(a, b),
        backward_rule=lambda g: (g @ b.value.T, a.value.T @ g),
    )


def exp(a: ArrayLike) -> DiffNode:
    a = as_node(a)
    out = np.exp(a.value)
    return DiffNode(out, parents=(a,), backward_rule=lambda g: (g * out,))


def log(a: ArrayLike) -> DiffNode:
    a = as_node(a)
    return DiffNode(np.log(a.value), parents=(a,), backward_rule=lambda g: (g / a.value,))


def square(a: ArrayLike) -> DiffNode:
    a = as_node(a)
    return DiffNode(a.value**2, parents=(a,), backward_rule=lambda g: (2.0 * g * a.value,))


def sigmoid(a: ArrayLike) -> DiffNode:
    a = as_node(a)
    out = expit(a.value)
    return DiffNode(out, parents=(a,), backward_rule=lambda g: (g * out * (1.0 - out),))


def relu(a: ArrayLike) -> DiffNode:
    a = as_node(a)
    active = a.value > 0
    return DiffNode(np.where(active, a.value, 0.0), parents=(a,), backward_rule=lambda g: (g * active,))


def leaky_relu(a: ArrayLike, slope: float = 0.2) -> DiffNode:
    a = as_node(a)
    factor = np.where(a.value > 0, 1.0, slope)
    return DiffNode(a.value * factor, parents=(a,), backward_rule=lambda g: (g * factor,))


def sum_(a: ArrayLike, axis: Optional[int] = None) -> DiffNode:
    a = as_node(a)

    def rule(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return DiffNode(a.value.sum(axis=axis), parents=(a,), backward_rule=rule)


def mean(a: ArrayLike, axis: Optional[int] = None) -> DiffNode:
    a = as_node(a)
    count = a.value.size if axis is None else a.shape[axis]
    return sum_(a, axis) / float(count)


def reshape(a: ArrayLike, shape: tuple) -> DiffNode:
    a = as_node(a)
    return DiffNode(a.value.reshape(shape), parents=(a,), backward_rule=lambda g: (g.reshape(a.shape),))


def clip(a: ArrayLike, low: float, high: float) -> DiffNode:
    """Clamps values into [low, high]; the gradient is zero for clamped entries."""
    a = as_node(a)
    inside = (a.value >= low) & (a.value <= high)
    node = DiffNode(np.clip(a.value, low, high), parents=(a,), backward_rule=lambda g: (g * inside,))
    node.clamped = int(inside.size - inside.sum())
    return node


def clamp_probability(a: ArrayLike) -> DiffNode:
    return clip(a, PROB_FLOOR, 1.0 - PROB_FLOOR)


def safe_log(a: ArrayLike) -> DiffNode:
    """log of a probability after clamping it into [1e-12, 1 - 1e-12]."""
    return log(clamp_probability(a))


def softmax(a: ArrayLike, tau: float = 1.0) -> DiffNode:
    """Softmax with temperature along the last axis, computed with max-subtraction."""
    a = as_node(a)
    z = a.value / tau
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def rule(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)) / tau,)

    return DiffNode(out, parents=(a,), backward_rule=rule)


def softmax_temperature(logits: ArrayLike, tau: float) -> DiffNode:
    """Temperature softmax of a logit vector (or of each row of a logit matrix).

    :param logits: Vector of length M >= 1, or a matrix of such rows.
    :param tau: Positive temperature.
    :return: Node holding the probability vector(s)."""
    if not tau > 0:
        raise ValueError(f"softmax temperature must be positive, got tau={tau}")
    logits = as_node(logits)
    if logits.value.size == 0 or logits.ndim == 0:
        raise ValueError("softmax needs a non-empty logit vector")
    return softmax(logits, tau)


def check_distribution(values: np.ndarray, label: str):
    if np.any(values < 0):
        raise ValueError(f"{label} has negative entries")
    sums = values.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError(f"{label} does not sum to 1 (sums: {sums})")


def kl_divergence(p: ArrayLike, q: ArrayLike) -> DiffNode:
    """KL(p||q) = sum p_i log(p_i / q_i), using 0 log(0/q) = 0.

    For matrices the divergences of corresponding rows are summed.
    Entries of q that are zero where p is positive are clamped to 1e-12; this is
    logged as a warning and reported in the clamped attribute of the result.

    :param p: Probability vector (or rows of them).
    :param q: Probability vector of the same shape.
    :return: Scalar node, non-negative."""
    p, q = as_node(p), as_node(q)
    if p.shape != q.shape:
        raise ValueError(f"kl_divergence needs equal shapes, got {p.shape} and {q.shape}")
    check_distribution(p.value, "p")
    check_distribution(q.value, "q")
    n_zero = int(np.sum((q.value < PROB_FLOOR) & (p.value > 0)))
    if n_zero:
        logger.warning("kl_divergence: clamped %s entries of q to %s where p > 0", n_zero, PROB_FLOOR)
    log_q = log(clip(q, PROB_FLOOR, 1.0))
    if p.requires_grad:
        entropy_term = sum_(p * log(clip(p, PROB_FLOOR, 1.0)))
    else:
        entropy_term = DiffNode(xlogy(p.value, p.value).sum())
    result = entropy_term - sum_(p * log_q)
    result.clamped = n_zero
    return result


def numerical_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function, one entry at a time."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        f_plus = f(x)
        x[idx] = orig - h
        f_minus = f(x)
        x[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2 * h)
    return grad


# optimizer


@dataclass
class AdamState:
    """Moment estimates of one parameter array."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, shape: tuple, **hyperparameters) -> AdamState:
        return cls(np.zeros(shape), np.zeros(shape), **hyperparameters)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update, applied in place to param.

    :param param: Parameter array, modified in place.
    :param grad: Gradient of the loss w.r.t. param.
    :param state: Moments and hyperparameters; its step counter is incremented.
    :return: The updated param and state."""
    if param.shape != grad.shape or state.m.shape != param.shape:
        raise ValueError(f"adam_step shape mismatch: param {param.shape}, grad {grad.shape}, state {state.m.shape}")
    state.step += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    param -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return param, state


@dataclass
class Adam:
    """Adam over a dict of named parameter arrays, one AdamState per array."""

    params: dict[str, np.ndarray]
    lr: float = 2e-4
    betas: tuple[float, float] = (0.5, 0.999)
    eps: float = 1e-8
    states: dict[str, AdamState] = field(init=False)

    def __post_init__(self):
        self.states = {
            name: AdamState.zeros(p.shape, lr=self.lr, beta1=self.betas[0], beta2=self.betas[1], eps=self.eps)
            for name, p in self.params.items()
        }

    def step(self, grads: dict[str, np.ndarray]):
        """Updates every parameter that has a gradient; parameters without one are skipped."""
        for name, param in self.params.items():
            if name in grads:
                adam_step(param, grads[name], self.states[name])
