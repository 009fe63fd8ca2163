"""Frame-level multi-speaker activity network and permutation-free training.

The network is a per-frame MLP with rectifier hidden layers and S sigmoid
outputs.  Training minimizes the permutation-free BCE: for every sequence the
output-slot -> reference-speaker assignment with the lowest summed BCE is
chosen, either by enumerating all S! permutations or by solving the S x S
linear assignment problem over pairwise column costs.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .assignment import linear_assignment
from .labels import FrameLabelMatrix
from .simulate import FeatureSequence, MixtureSample

logger = logging.getLogger(__name__)

BCE_EPS = 1e-7
BRUTE_FORCE_MAX_SPEAKERS = 8


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class DiarizationModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {k}: weight {w.shape} / bias {b.shape} mismatch")
            if k and self.weights[k - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {k}: input dim does not match previous layer")

    @classmethod
    def initialize(cls, layer_dims: Sequence[int], seed: int = 0) -> "DiarizationModel":
        """He-initialized weights, zero biases."""
        if len(layer_dims) < 2 or min(layer_dims) < 1:
            raise ValueError(f"bad layer dims {layer_dims}")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            weights.append(rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, layer_dims: Sequence[int]) -> "DiarizationModel":
        return cls([np.zeros((a, b)) for a, b in zip(layer_dims[:-1], layer_dims[1:])],
                   [np.zeros(b) for b in layer_dims[1:]])

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def max_speakers(self) -> int:
        return self.weights[-1].shape[1]

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "DiarizationModel":
        return DiarizationModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass(frozen=True, eq=False)
class PosteriorMatrix:
    frames: np.ndarray
    frame_period: float

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 10
    optimizer: str = "adam"
    gradient_clip: float = 5.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0 or self.gradient_clip <= 0:
            raise ValueError(f"invalid train config {self}")
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")


# --- forward -------------------------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    # |z| <= 36 keeps float64 sigmoid strictly inside (0, 1)
    return 1.0 / (1.0 + np.exp(-np.clip(z, -36.0, 36.0)))


def _forward_cache(model: DiarizationModel, x: np.ndarray):
    acts = [x]
    h = x
    n = len(model.weights)
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        h = np.maximum(z, 0.0) if k < n - 1 else z
        acts.append(h)
    return acts


def forward(model: DiarizationModel, features: FeatureSequence) -> PosteriorMatrix:
    x = features.frames
    if x.shape[1] != model.layer_dims[0]:
        raise ValueError(f"feature dim {x.shape[1]} != model input dim {model.layer_dims[0]}")
    logits = _forward_cache(model, x)[-1]
    return PosteriorMatrix(_sigmoid(logits), features.frame_period)


# --- permutation-free loss -------------------------------------------------------

def pad_labels(labels: np.ndarray, num_slots: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=float)
    if labels.shape[1] > num_slots:
        raise ValueError(f"{labels.shape[1]} reference speakers exceed {num_slots} output slots")
    if labels.shape[1] < num_slots:
        labels = np.pad(labels, ((0, 0), (0, num_slots - labels.shape[1])))
    return labels


def _as_arrays(posteriors, labels) -> tuple[np.ndarray, np.ndarray]:
    p = posteriors.frames if isinstance(posteriors, PosteriorMatrix) else np.asarray(posteriors, float)
    y = labels.frames if isinstance(labels, FrameLabelMatrix) else np.asarray(labels)
    if p.shape[0] != y.shape[0]:
        raise ValueError(f"frame count mismatch: {p.shape[0]} vs {y.shape[0]}")
    return p, pad_labels(y, p.shape[1])


def bce(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def pit_loss(posteriors, labels) -> tuple[float, tuple[int, ...]]:
    """Permutation-free BCE by exhaustive search over all S! permutations.

    ``best_perm[i]`` is the reference column assigned to output slot ``i``;
    ties resolve to the lexicographically smallest permutation.
    """
    p, y = _as_arrays(posteriors, labels)
    T, S = p.shape
    if S > BRUTE_FORCE_MAX_SPEAKERS:
        raise ValueError(f"S={S} exceeds brute-force cap {BRUTE_FORCE_MAX_SPEAKERS}; "
                         "use pit_loss_assignment")
    best, best_perm = math.inf, tuple(range(S))
    for perm in itertools.permutations(range(S)):
        total = float(bce(p, y[:, perm]).sum())
        if total < best:
            best, best_perm = total, perm
    if T == 0 or S == 0:
        return 0.0, tuple(range(S))
    return best / (S * T), best_perm


def pairwise_bce_cost(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    """C[i, j] = sum_t bce(p[t, i], y[t, j])."""
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return -(np.log(pc).T @ y + np.log1p(-pc).T @ (1.0 - y))


def pit_loss_assignment(posteriors, labels) -> tuple[float, tuple[int, ...]]:
    """Permutation-free BCE via an exact S x S linear assignment."""
    p, y = _as_arrays(posteriors, labels)
    T, S = p.shape
    if T == 0 or S == 0:
        return 0.0, tuple(range(S))
    cost = pairwise_bce_cost(p, y)
    rows, cols = linear_assignment(cost)
    return float(cost[rows, cols].sum()) / (S * T), tuple(int(c) for c in cols)


# --- gradients -------------------------------------------------------------------

def _backprop(model: DiarizationModel, acts, dlogits: np.ndarray) -> list[np.ndarray]:
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    delta = dlogits
    for k in range(len(model.weights) - 1, -1, -1):
        grads_w[k] = acts[k].T @ delta
        grads_b[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ model.weights[k].T) * (acts[k] > 0)
    return [g for pair in zip(grads_w, grads_b) for g in pair]


def _sequence_dlogits(probs: np.ndarray, y: np.ndarray):
    """Loss and d(loss)/d(logits) for one sequence with the PIT permutation fixed."""
    T, S = probs.shape
    loss, perm = pit_loss_assignment(probs, y)
    y_perm = y[:, list(perm)]
    unclamped = (probs > BCE_EPS) & (probs < 1.0 - BCE_EPS)
    return loss, (probs - y_perm) * unclamped / (S * T)


def backward(model: DiarizationModel, features: FeatureSequence, labels) -> list[np.ndarray]:
    """Gradient of the permutation-free loss of one sequence.

    Returned in ``model.parameters()`` order (W0, b0, W1, b1, ...).  The best
    permutation is held constant; clamped posteriors contribute zero.
    """
    x = features.frames
    if x.shape[1] != model.layer_dims[0]:
        raise ValueError("feature dim does not match model input")
    y = labels.frames if isinstance(labels, FrameLabelMatrix) else np.asarray(labels)
    if y.shape[0] != x.shape[0]:
        raise ValueError("feature and label frame counts differ")
    if x.shape[0] == 0:
        return [np.zeros_like(p) for p in model.parameters()]
    y = pad_labels(y, model.max_speakers)
    acts = _forward_cache(model, x)
    _, dlogits = _sequence_dlogits(_sigmoid(acts[-1]), y)
    return _backprop(model, acts, dlogits)


def batch_loss_and_gradient(model: DiarizationModel, batch: Sequence[MixtureSample]):
    """Mean per-sequence PIT loss over a batch and its gradient."""
    S = model.max_speakers
    xs = [s.features.frames for s in batch]
    ys = [pad_labels(s.labels.frames, S) for s in batch]
    bounds = np.cumsum([0] + [len(x) for x in xs])
    acts = _forward_cache(model, np.concatenate(xs, axis=0))
    probs = _sigmoid(acts[-1])
    dlogits = np.zeros_like(probs)
    losses = []
    for i, y in enumerate(ys):
        a, b = bounds[i], bounds[i + 1]
        if b == a:
            losses.append(0.0)
            continue
        loss, d = _sequence_dlogits(probs[a:b], y)
        losses.append(loss)
        dlogits[a:b] = d / len(batch)
    return float(np.mean(losses)), _backprop(model, acts, dlogits)


# --- training ----------------------------------------------------------------------

def clip_by_global_norm(grads: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads]
    return grads


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(model: DiarizationModel, dataset: Sequence[MixtureSample],
          config: TrainConfig) -> tuple[DiarizationModel, list[float]]:
    """Mini-batch Adam on the permutation-free loss.

    Works on a copy; returns the trained model and the per-epoch mean loss.
    The optimizer state starts fresh on every call.
    """
    if not dataset:
        raise ValueError("empty training set")
    model = model.copy()
    curve: list[float] = []
    if config.epochs == 0:
        return model, curve
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    opt = Adam(params, config.learning_rate, config.beta1, config.beta2)
    n = len(dataset)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses, weights = [], []
        for start in range(0, n, config.batch_size):
            batch = [dataset[i] for i in order[start:start + config.batch_size]]
            loss, grads = batch_loss_and_gradient(model, batch)
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDivergedError(
                    f"non-finite loss/gradient at epoch {epoch}, batch starting {start} "
                    f"(loss={loss}, recordings={[s.recording_id for s in batch]})"
                )
            opt.step(params, clip_by_global_norm(grads, config.gradient_clip))
            losses.append(loss)
            weights.append(len(batch))
        curve.append(float(np.average(losses, weights=weights)))
        logger.debug("epoch %d loss %.5f", epoch + 1, curve[-1])
    return model, curve


def mean_pit_loss(model: DiarizationModel, dataset: Sequence[MixtureSample]) -> float:
    return float(np.mean([pit_loss_assignment(forward(model, s.features), s.labels)[0]
                          for s in dataset]))


# --- checkpoints -------------------------------------------------------------------

def save_model(model: DiarizationModel, path: str | Path) -> None:
    lines = ["DMODEL1", " ".join(str(d) for d in model.layer_dims)]
    for w, b in zip(model.weights, model.biases):
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in w)
        lines.append(" ".join(f"{v:.17g}" for v in b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path) -> DiarizationModel:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "DMODEL1":
        raise ValueError(f"{path}: not a DMODEL1 checkpoint")
    dims = [int(v) for v in lines[1].split()]
    pos = 2
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        rows = [[float(v) for v in lines[pos + i].split()] for i in range(fan_in)]
        weights.append(np.array(rows, dtype=float).reshape(fan_in, fan_out))
        pos += fan_in
        biases.append(np.array([float(v) for v in lines[pos].split()], dtype=float).reshape(fan_out))
        pos += 1
    return DiarizationModel(weights, biases)
