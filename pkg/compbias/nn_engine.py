"""
Dense two-head network written directly against numpy.

Backbone: ``num_hidden`` fully connected layers of ``hidden_width`` units.
Heads: one linear projection per output coordinate, each followed by a
softmax over ``num_classes`` logits. Everything is float64.

Predictions are arrays of shape (batch, heads, classes); labels are integer
arrays of shape (batch, heads).
"""
import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from .common.errors import NonFiniteLoss, ShapeMismatch

HIDDEN_WIDTH = 128
NUM_HIDDEN = 3

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

Params = Dict[str, np.ndarray]


class LossKind(str, Enum):
    CE = "ce"
    L2 = "l2"


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"


# ---------- network ----------

class DenseNet:
    def __init__(self, params: Params, num_hidden: int, num_heads: int, activation: Activation = Activation.RELU):
        self.params = params
        self.num_hidden = num_hidden
        self.num_heads = num_heads
        self.activation = Activation(activation)

    @property
    def input_dim(self) -> int:
        return self.params["W0"].shape[0]

    def hidden_names(self, layer: int) -> Tuple[str, str]:
        return f"W{layer}", f"b{layer}"

    def head_names(self, head: int) -> Tuple[str, str]:
        return f"head{head}.W", f"head{head}.b"

    def copy(self) -> "DenseNet":
        return DenseNet({k: v.copy() for k, v in self.params.items()}, self.num_hidden, self.num_heads, self.activation)

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self.params):
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(self.params[name]).tobytes())
        return digest.hexdigest()


def init(seed: int, input_dim: int, hidden_width: int = HIDDEN_WIDTH, num_hidden: int = NUM_HIDDEN,
         num_heads: int = 2, num_classes: int = 2, activation: Activation = Activation.RELU) -> DenseNet:
    """Fan-in scaled uniform init, every weight and bias drawn from U(-sqrt(1/fan_in), sqrt(1/fan_in))."""
    if input_dim < 1:
        raise ShapeMismatch(f"input_dim must be positive, got {input_dim}")
    rng = np.random.default_rng(seed)
    params: Params = {}

    def draw(fan_in: int, fan_out: int) -> Tuple[np.ndarray, np.ndarray]:
        bound = np.sqrt(1.0 / fan_in)
        W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = rng.uniform(-bound, bound, size=fan_out)
        return W, b

    fan_in = input_dim
    for layer in range(num_hidden):
        params[f"W{layer}"], params[f"b{layer}"] = draw(fan_in, hidden_width)
        fan_in = hidden_width
    for head in range(num_heads):
        params[f"head{head}.W"], params[f"head{head}.b"] = draw(fan_in, num_classes)
    return DenseNet(params, num_hidden, num_heads, activation)


def _activate(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind is Activation.RELU:
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(kind: Activation, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if kind is Activation.RELU:
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


@dataclass
class _Cache:
    inputs: np.ndarray
    pre: List[np.ndarray] = field(default_factory=list)
    post: List[np.ndarray] = field(default_factory=list)
    logits: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    log_probs: Optional[np.ndarray] = None


def _forward(net: DenseNet, inputs: np.ndarray) -> _Cache:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ShapeMismatch(f"expected inputs of shape (batch, {net.input_dim}), got {x.shape}")
    cache = _Cache(inputs=x)
    h = x
    for layer in range(net.num_hidden):
        W, b = (net.params[n] for n in net.hidden_names(layer))
        z = h @ W + b
        h = _activate(net.activation, z)
        cache.pre.append(z)
        cache.post.append(h)

    logits = np.stack([h @ net.params[f"head{k}.W"] + net.params[f"head{k}.b"] for k in range(net.num_heads)], axis=1)
    shifted = logits - logits.max(axis=2, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=2, keepdims=True)
    cache.logits = logits
    cache.probs = exp / total
    cache.log_probs = shifted - np.log(total)
    return cache


def forward(net: DenseNet, inputs: np.ndarray) -> np.ndarray:
    """Per-head softmax probabilities, shape (batch, heads, classes)."""
    return _forward(net, inputs).probs


def _one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    return np.eye(num_classes)[labels]


def _check_labels(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != probs.shape[:2]:
        raise ShapeMismatch(f"labels of shape {labels.shape} do not match predictions {probs.shape[:2]}")
    return labels.astype(np.int64)


def _loss_value(probs: np.ndarray, log_probs: np.ndarray, labels: np.ndarray, kind: LossKind) -> float:
    if LossKind(kind) is LossKind.CE:
        picked = np.take_along_axis(log_probs, labels[..., None], axis=2)
        return float(-picked.mean())
    target = _one_hot(labels, probs.shape[2])
    return float(((probs - target) ** 2).sum(axis=2).mean())


def loss(preds: np.ndarray, labels: np.ndarray, kind: LossKind) -> float:
    """
    CE: mean over examples and heads of -ln p(true label).
    L2: mean over examples and heads of ||p - one_hot||^2.
    """
    preds = np.asarray(preds, dtype=np.float64)
    labels = _check_labels(preds, labels)
    with np.errstate(divide="ignore"):
        return _loss_value(preds, np.log(preds), labels, kind)


def _backward(net: DenseNet, cache: _Cache, labels: np.ndarray, kind: LossKind, scale: float) -> Params:
    probs = cache.probs
    batch, heads, classes = probs.shape
    target = _one_hot(labels, classes)
    norm = scale / (batch * heads)

    if LossKind(kind) is LossKind.CE:
        d_logits = (probs - target) * norm
    else:
        d_probs = 2.0 * (probs - target) * norm
        d_logits = probs * (d_probs - (d_probs * probs).sum(axis=2, keepdims=True))

    grads: Params = {}
    h = cache.post[-1] if net.num_hidden else cache.inputs
    d_h = np.zeros_like(h)
    for k in range(heads):
        W_name, b_name = net.head_names(k)
        grads[W_name] = h.T @ d_logits[:, k, :]
        grads[b_name] = d_logits[:, k, :].sum(axis=0)
        d_h += d_logits[:, k, :] @ net.params[W_name].T

    for layer in reversed(range(net.num_hidden)):
        W_name, b_name = net.hidden_names(layer)
        d_z = d_h * _activation_grad(net.activation, cache.pre[layer], cache.post[layer])
        below = cache.post[layer - 1] if layer > 0 else cache.inputs
        grads[W_name] = below.T @ d_z
        grads[b_name] = d_z.sum(axis=0)
        if layer > 0:
            d_h = d_z @ net.params[W_name].T
    return grads


def backward(net: DenseNet, inputs: np.ndarray, labels: np.ndarray, kind: LossKind, scale: float = 1.0) -> Params:
    """Exact gradients of ``scale * loss`` with respect to every parameter."""
    cache = _forward(net, inputs)
    labels = _check_labels(cache.probs, labels)
    return _backward(net, cache, labels, kind, scale)


def loss_and_gradients(net: DenseNet, inputs: np.ndarray, labels: np.ndarray, kind: LossKind) -> Tuple[float, Params]:
    cache = _forward(net, inputs)
    labels = _check_labels(cache.probs, labels)
    value = _loss_value(cache.probs, cache.log_probs, labels, kind)
    return value, _backward(net, cache, labels, kind, 1.0)


def evaluate_loss(net: DenseNet, inputs: np.ndarray, labels: np.ndarray, kind: LossKind) -> float:
    cache = _forward(net, inputs)
    return _loss_value(cache.probs, cache.log_probs, _check_labels(cache.probs, labels), kind)


def true_label_log_probs(net: DenseNet, inputs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """log p(true label) per example and head, shape (batch, heads)."""
    cache = _forward(net, inputs)
    labels = _check_labels(cache.probs, labels)
    return np.take_along_axis(cache.log_probs, labels[..., None], axis=2)[..., 0]


# ---------- optimizers ----------

@dataclass
class OptimizerState:
    kind: OptimizerKind
    learning_rate: float = 1e-3
    weight_decay: float = 5e-4
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step_count: int = 0
    first_moment: Params = field(default_factory=dict)
    second_moment: Params = field(default_factory=dict)


def make_optimizer(kind: OptimizerKind, params: Params, learning_rate: float = 1e-3,
                   weight_decay: float = 5e-4) -> OptimizerState:
    state = OptimizerState(kind=OptimizerKind(kind), learning_rate=learning_rate, weight_decay=weight_decay)
    if state.kind is OptimizerKind.ADAM:
        state.first_moment = {k: np.zeros_like(v) for k, v in params.items()}
        state.second_moment = {k: np.zeros_like(v) for k, v in params.items()}
    return state


def apply_update(params: Params, grads: Params, state: OptimizerState) -> Tuple[Params, OptimizerState]:
    """
    In-place update. Weight decay is coupled: wd*theta is added to the gradient
    before SGD or before the Adam moments.
    """
    for name, g in grads.items():
        if name not in params or params[name].shape != np.shape(g):
            raise ShapeMismatch(f"gradient {name} does not match any parameter")

    state.step_count += 1
    lr, wd = state.learning_rate, state.weight_decay
    if state.kind is OptimizerKind.SGD:
        for name, g in grads.items():
            theta = params[name]
            theta -= lr * (g + wd * theta)
        return params, state

    t = state.step_count
    for name, g in grads.items():
        theta = params[name]
        g = g + wd * theta
        m = state.first_moment.setdefault(name, np.zeros_like(theta))
        v = state.second_moment.setdefault(name, np.zeros_like(theta))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


def step(net: DenseNet, grads: Params, state: OptimizerState) -> Tuple[DenseNet, OptimizerState]:
    apply_update(net.params, grads, state)
    return net, state


def fit(net: DenseNet, inputs: np.ndarray, labels: np.ndarray, kind: LossKind,
        state: OptimizerState, epochs: int) -> List[float]:
    """Full-batch training; entry e is the loss at the parameters before update e."""
    losses: List[float] = []
    for epoch in range(epochs):
        value, grads = loss_and_gradients(net, inputs, labels, kind)
        if not np.isfinite(value):
            raise NonFiniteLoss(f"loss became non-finite at epoch {epoch}", losses)
        losses.append(value)
        step(net, grads, state)
    return losses


# ---------- verification ----------

def gradient_check(net: DenseNet, inputs: np.ndarray, labels: np.ndarray, kind: LossKind,
                   step_size: float = 1e-5, samples: int = 32, seed: int = 0) -> Dict[str, float]:
    """
    Central finite differences on up to ``samples`` coordinates per parameter.
    Returns ||analytic - numeric|| / (||analytic|| + ||numeric||) per parameter (0 when both vanish).
    """
    analytic = backward(net, inputs, labels, kind)
    rng = np.random.default_rng(seed)
    errors: Dict[str, float] = {}
    for name, theta in net.params.items():
        flat = theta.reshape(-1)
        if flat.size <= samples:
            picked = np.arange(flat.size)
        else:
            picked = np.sort(rng.choice(flat.size, size=samples, replace=False))
        numeric = np.empty(picked.size)
        for j, idx in enumerate(picked):
            original = flat[idx]
            flat[idx] = original + step_size
            up = evaluate_loss(net, inputs, labels, kind)
            flat[idx] = original - step_size
            down = evaluate_loss(net, inputs, labels, kind)
            flat[idx] = original
            numeric[j] = (up - down) / (2.0 * step_size)
        exact = analytic[name].reshape(-1)[picked]
        denom = np.linalg.norm(exact) + np.linalg.norm(numeric)
        errors[name] = 0.0 if denom == 0.0 else float(np.linalg.norm(exact - numeric) / denom)
    return errors
