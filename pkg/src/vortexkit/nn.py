"""A small NumPy multilayer perceptron with hand-written backpropagation.

Parameters live in one flat float64 buffer (per layer: ``W`` row-major
``out x in``, then ``b``); ``weights`` and ``biases`` are views into it, so the
optimizer updates a single vector and checkpoints serialize it directly.
"""
from __future__ import annotations

import json
import math
import struct
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergedError, FormatError, LengthError, ValidationError
from .metrics import Stopwatch, confusion, summary

CKPT_MAGIC = b"MLP1"


class MLPModel:
    """ReLU hidden layers, identity output layer."""

    def __init__(self, widths, params=None):
        widths = tuple(int(w) for w in widths)
        if len(widths) < 2 or min(widths) < 1:
            raise ValidationError(f"need at least input and output widths >= 1, got {widths}")
        self.widths = widths
        size = sum(o * i + o for i, o in zip(widths[:-1], widths[1:]))
        if params is None:
            params = np.zeros(size)
        params = np.array(params, dtype=np.float64)
        if params.shape != (size,):
            raise ValidationError(f"expected {size} parameters, got shape {params.shape}")
        self.params = params
        self.weights, self.biases = self._views(self.params)

    def _views(self, flat):
        ws, bs, off = [], [], 0
        for i, o in zip(self.widths[:-1], self.widths[1:]):
            ws.append(flat[off:off + o * i].reshape(o, i))
            off += o * i
            bs.append(flat[off:off + o])
            off += o
        return ws, bs

    def unflatten(self, flat):
        """Split a parameter-shaped vector into ``[(dW, db), ...]``."""
        return list(zip(*self._views(np.asarray(flat))))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def l_values(self) -> tuple[int, ...]:
        """Input width of each linear layer, used to scale initialization."""
        return self.widths[:-1]

    def copy(self) -> "MLPModel":
        return MLPModel(self.widths, self.params.copy())


def init_uniform(widths, seed: int = 0) -> MLPModel:
    """W ~ U(-sqrt(3/l), sqrt(3/l)), b ~ U(-sqrt(1/l), sqrt(1/l)); l = layer input width."""
    model = MLPModel(widths)
    rng = np.random.default_rng(seed)
    for W, b, l in zip(model.weights, model.biases, model.l_values):
        wb, bb = math.sqrt(3.0 / l), math.sqrt(1.0 / l)
        W[...] = rng.uniform(-wb, wb, size=W.shape)
        b[...] = rng.uniform(-bb, bb, size=b.shape)
    return model


def _forward_cache(model, X):
    acts = [X]
    pre = []
    h = X
    last = model.n_layers - 1
    for n, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W.T + b
        pre.append(z)
        h = z if n == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts, pre


def forward(model: MLPModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.widths[0]:
        raise ValidationError(f"input shape {X.shape} does not match model width {model.widths[0]}")
    return _forward_cache(model, X)[0][-1]


def backward(model: MLPModel, X, dlogits) -> np.ndarray:
    """Gradient of the loss w.r.t. the flat parameter vector.

    ``dlogits`` is the loss gradient w.r.t. the output; ReLU'(0) is taken as 0.
    """
    X = np.asarray(X, dtype=np.float64)
    acts, pre = _forward_cache(model, X)
    grad = np.empty_like(model.params)
    gW, gb = model._views(grad)
    delta = np.asarray(dlogits, dtype=np.float64)
    for n in range(model.n_layers - 1, -1, -1):
        gW[n][...] = delta.T @ acts[n]
        gb[n][...] = delta.sum(axis=0)
        if n:
            delta = (delta @ model.weights[n]) * (pre[n - 1] > 0)
    return grad


def _targets(targets, width):
    t = np.asarray(targets)
    if t.ndim == 2:
        return t.astype(np.float64)
    idx = t.astype(np.int64)
    if width == 1:
        return idx.astype(np.float64).reshape(-1, 1)
    Y = np.zeros((idx.size, width))
    Y[np.arange(idx.size), idx] = 1.0
    return Y


def softmax(logits) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def ce_loss(logits, targets):
    """Mean multiclass cross-entropy of softmax probabilities; returns ``(loss, dlogits)``."""
    logits = np.asarray(logits, dtype=np.float64)
    N, M = logits.shape
    Y = _targets(targets, M)
    loss = -float(np.sum(Y * _log_softmax(logits))) / N
    return loss, (softmax(logits) - Y) / N


def bce_loss(logits, targets):
    """Mean binary cross-entropy.

    One logit column: the vortex probability is its sigmoid. Two columns: it is
    the softmax weight of column 1, which makes this identical to ``ce_loss``
    with two classes.
    """
    logits = np.asarray(logits, dtype=np.float64)
    N, M = logits.shape
    if M == 2:
        return ce_loss(logits, targets)
    if M != 1:
        raise ValidationError(f"bce_loss needs 1 or 2 logit columns, got {M}")
    y = _targets(targets, 1)
    z = logits
    # log(1 + e^z) - y z, stable for either sign of z
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z)) / N
    sig = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    return loss, (sig - y) / N


LOSSES = {"bce": bce_loss, "ce": ce_loss}


def predict(model: MLPModel, X) -> np.ndarray:
    logits = forward(model, X)
    if logits.shape[1] == 1:
        return (logits[:, 0] > 0).astype(np.int64)
    return logits.argmax(axis=1)


def n_classes(model: MLPModel) -> int:
    return max(2, model.widths[-1])


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(np.zeros_like(model.params), np.zeros_like(model.params), 0, beta1, beta2, eps)


def adam_step(model: MLPModel, grads, state: AdamState, lr: float):
    """One bias-corrected Adam update, applied in place; returns ``(model, state)``."""
    g = np.asarray(grads)
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * g
    state.v *= b2
    state.v += (1.0 - b2) * (g * g)
    mhat = state.m / (1.0 - b1 ** state.t)
    vhat = state.v / (1.0 - b2 ** state.t)
    model.params -= lr * mhat / (np.sqrt(vhat) + state.eps)
    return model, state


def sgd_step(model: MLPModel, grads, lr: float):
    model.params -= lr * np.asarray(grads)
    return model


def grad_check(model: MLPModel, X, targets, loss: str = "ce", h: float = 1e-5):
    """Compare :func:`backward` with central differences over every parameter.

    Returns ``(rel_err, analytic, numeric)`` where ``rel_err`` is
    ``|g_a - g_n| / (|g_a| + |g_n|)`` in the Euclidean norm.
    """
    loss_fn = LOSSES[loss]
    X = np.asarray(X, dtype=np.float64)
    _, dl = loss_fn(forward(model, X), targets)
    analytic = backward(model, X, dl)
    numeric = np.empty_like(analytic)
    probe = model.copy()
    for n in range(probe.params.size):
        orig = probe.params[n]
        probe.params[n] = orig + h
        lp = loss_fn(forward(probe, X), targets)[0]
        probe.params[n] = orig - h
        lm = loss_fn(forward(probe, X), targets)[0]
        probe.params[n] = orig
        numeric[n] = (lp - lm) / (2 * h)
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    rel = float(np.linalg.norm(analytic - numeric) / denom) if denom > 0 else 0.0
    return rel, analytic, numeric


@dataclass
class TrainConfig:
    widths: tuple[int, ...] = (15, 64, 64, 2)
    learning_rate: float = 0.005
    epochs: int = 500
    batch_train: int = 128
    batch_test: int = 4096
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "bce"
    optimizer: str = "adam"
    shuffle: bool = True

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.batch_train < 1 or self.batch_test < 1:
            raise ValidationError("batch sizes must be >= 1")
        if self.loss not in LOSSES:
            raise ValidationError(f"loss must be one of {sorted(LOSSES)}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError("optimizer must be 'adam' or 'sgd'")

    def to_dict(self):
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d


TIMING_KEYS = ("wall_clock_seconds", "timings")


@dataclass
class TrainReport:
    config: dict
    history: list = field(default_factory=list)
    final: dict = field(default_factory=dict)
    confusion: list = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def deterministic_view(self) -> dict:
        """Report without wall-clock fields, for replay comparisons."""
        d = self.to_dict()
        for k in TIMING_KEYS:
            d.pop(k)
        return d

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def evaluate(model: MLPModel, X, y, batch: int = 4096) -> tuple[dict, list]:
    X = np.asarray(X, dtype=np.float64)
    preds = [predict(model, X[s:s + batch]) for s in range(0, len(X), batch)]
    pred = np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)
    conf = confusion(y, pred, n_classes(model))
    return summary(conf), conf.to_list()


def train(model: MLPModel, train_set, test_set, config: TrainConfig) -> TrainReport:
    """Mini-batch training; ``train_set`` / ``test_set`` expose ``X`` and ``y``.

    Records the epoch-mean training loss and test metrics after every epoch.
    Raises :class:`DivergedError` on a non-finite loss.
    """
    if tuple(model.widths) != tuple(config.widths):
        raise ValidationError(f"model widths {model.widths} differ from config {config.widths}")
    Xtr, ytr = np.asarray(train_set.X, dtype=np.float64), np.asarray(train_set.y)
    Xte, yte = np.asarray(test_set.X, dtype=np.float64), np.asarray(test_set.y)
    if Xtr.shape[1] != model.widths[0] or Xte.shape[1] != model.widths[0]:
        raise ValidationError("feature width does not match model input width")
    if len(Xtr) == 0:
        raise ValidationError("empty training set")
    loss_fn = LOSSES[config.loss]
    rng = np.random.default_rng(config.seed)
    state = AdamState.for_model(model, config.beta1, config.beta2, config.eps)
    report = TrainReport(config=config.to_dict())
    watch = Stopwatch()
    N, B = len(Xtr), config.batch_train
    start = time.perf_counter()
    with watch.section("train"):
        for epoch in range(1, config.epochs + 1):
            with watch.section("epochs"):
                order = rng.permutation(N) if config.shuffle else np.arange(N)
                total = 0.0
                for s in range(0, N, B):
                    idx = order[s:s + B]
                    xb = Xtr[idx]
                    loss, dl = loss_fn(forward(model, xb), ytr[idx])
                    total += loss * len(idx)
                    g = backward(model, xb, dl)
                    if config.optimizer == "adam":
                        adam_step(model, g, state, config.learning_rate)
                    else:
                        sgd_step(model, g, config.learning_rate)
                epoch_loss = total / N
                if not math.isfinite(epoch_loss) or not np.all(np.isfinite(model.params)):
                    raise DivergedError(epoch, epoch_loss)
            with watch.section("eval"):
                scores, _ = evaluate(model, Xte, yte, config.batch_test)
            report.history.append({"epoch": epoch, "loss": epoch_loss, **scores})
    report.final, report.confusion = evaluate(model, Xte, yte, config.batch_test)
    report.wall_clock_seconds = time.perf_counter() - start
    report.timings = watch.as_dict()
    return report


def save_checkpoint(model: MLPModel, path) -> None:
    """``MLP1`` | u32 n_widths | u32 widths... | f64 parameters (little-endian)."""
    head = CKPT_MAGIC + struct.pack(f"<I{len(model.widths)}I", len(model.widths), *model.widths)
    Path(path).write_bytes(head + model.params.astype("<f8").tobytes())


def load_checkpoint(path) -> MLPModel:
    data = Path(path).read_bytes()
    if data[:4] != CKPT_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {CKPT_MAGIC!r}")
    if len(data) < 8:
        raise LengthError(f"{path}: truncated header")
    (n,) = struct.unpack_from("<I", data, 4)
    if n < 2 or len(data) < 8 + 4 * n:
        raise LengthError(f"{path}: truncated width table")
    widths = struct.unpack_from(f"<{n}I", data, 8)
    size = sum(o * i + o for i, o in zip(widths[:-1], widths[1:]))
    off = 8 + 4 * n
    if len(data) != off + 8 * size:
        raise LengthError(f"{path}: parameter payload is {len(data) - off} bytes, expected {8 * size}")
    return MLPModel(widths, np.frombuffer(data, dtype="<f8", offset=off).copy())
