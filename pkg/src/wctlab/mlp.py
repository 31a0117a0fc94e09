"""Fully-connected network with one or several softmax output segments.

Samples are columns: a batch is a ``(n_features, batch)`` matrix and every
layer computes ``W @ A + b``. A single-task head is simply a model with one
output segment; a multi-task head splits the output into one softmax per
channel feature and sums the per-task mean cross-entropies.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, FormatError, TrainingDivergedError

log = logging.getLogger(__name__)

MODEL_MAGIC = b"WCTMLP01"


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 256
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init_seed: int = 0
    hidden_dims: tuple[int, int, int] = (512, 256, 128)
    eval_every: int = 1
    standardize: bool = True

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if len(self.hidden_dims) != 3:
            raise ConfigurationError("exactly three hidden layers are required")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 0 or self.eval_every < 1:
            raise ConfigurationError("epochs must be >= 0 and eval_every >= 1")


@dataclass
class MlpModel:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    segments: tuple[int, ...]
    head: str = "single"
    activation: str = "relu"
    input_mean: np.ndarray | None = None
    input_scale: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.layer_dims) != 5:
            raise ConfigurationError("model must have 5 layers (input, 3 hidden, output)")
        if sum(self.segments) != self.layer_dims[-1]:
            raise ConfigurationError(f"segments {self.segments} do not add up to output dim {self.layer_dims[-1]}")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.layer_dims[i + 1], self.layer_dims[i]) or b.shape != (self.layer_dims[i + 1],):
                raise ConfigurationError(f"layer {i} parameter shapes do not match layer_dims")

    @property
    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    @property
    def dtype(self):
        return self.weights[0].dtype


_ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    # (f(z), f'(z) given z and f(z))
    "relu": (lambda z: np.maximum(z, 0), lambda z, a: (z > 0).astype(z.dtype)),
    "tanh": (np.tanh, lambda z, a: 1 - a * a),
}


def init_model(
    input_dim: int,
    segments: Sequence[int],
    cfg: TrainConfig | None = None,
    *,
    head: str | None = None,
    activation: str = "relu",
    dtype=np.float32,
) -> MlpModel:
    """He-uniform weights (bound sqrt(6/fan_in)) and zero biases."""
    cfg = cfg or TrainConfig()
    segments = tuple(int(k) for k in segments)
    if not segments or min(segments) < 1:
        raise ConfigurationError("every output segment needs at least one class")
    if activation not in _ACTIVATIONS:
        raise ConfigurationError(f"unknown activation {activation!r}")
    dims = [int(input_dim), *cfg.hidden_dims, sum(segments)]
    rng = np.random.default_rng(cfg.init_seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    head = head or ("single" if len(segments) == 1 else "multi")
    return MlpModel(dims, weights, biases, segments, head, activation)


def _prepare(model: MlpModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != model.layer_dims[0]:
        raise ConfigurationError(f"input has {X.shape[0]} rows, model expects {model.layer_dims[0]}")
    X = X.astype(model.dtype, copy=False)
    if model.input_mean is not None:
        X = (X - model.input_mean[:, None]) * model.input_scale[:, None]
    return X


def forward(model: MlpModel, X: np.ndarray):
    """Raw output logits and the cached ``(pre_activations, activations)``."""
    act, _ = _ACTIVATIONS[model.activation]
    A = _prepare(model, X)
    zs, acts = [], [A]
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        Z = W @ A + b[:, None]
        zs.append(Z)
        A = Z if i == last else act(Z)
        acts.append(A)
    return A, (zs, acts)


def _segment_bounds(segments):
    offs = np.concatenate([[0], np.cumsum(segments)]).astype(int)
    return list(zip(offs[:-1], offs[1:]))


def segment_softmax(logits: np.ndarray, segments: Sequence[int]) -> np.ndarray:
    """Log-sum-exp stabilised softmax applied independently to each segment."""
    out = np.empty_like(logits)
    for a, b in _segment_bounds(segments):
        z = logits[a:b] - logits[a:b].max(axis=0, keepdims=True)
        e = np.exp(z)
        out[a:b] = e / e.sum(axis=0, keepdims=True)
    return out


def segment_losses(logits: np.ndarray, E: np.ndarray, segments: Sequence[int]) -> np.ndarray:
    """Mean cross-entropy of every segment, accumulated in float64."""
    L = np.asarray(logits, dtype=np.float64)
    E = np.asarray(E, dtype=np.float64)
    out = []
    for a, b in _segment_bounds(segments):
        z = L[a:b] - L[a:b].max(axis=0, keepdims=True)
        log_p = z - np.log(np.exp(z).sum(axis=0, keepdims=True))
        out.append(-(E[a:b] * log_p).sum(axis=0).mean())
    return np.array(out)


def loss_and_grad(model: MlpModel, X: np.ndarray, E: np.ndarray):
    """Summed per-segment cross-entropy and its gradient for every parameter.

    Gradients are returned in :attr:`MlpModel.params` order
    ``[W1, b1, W2, b2, ...]``.
    """
    scheme = getattr(getattr(E, "scheme", None), "value", None)
    if scheme is not None and scheme != model.head:
        raise ConfigurationError(f"{scheme} labels cannot train a {model.head} head")
    E = np.asarray(getattr(E, "E", E))
    if E.ndim == 1:
        E = E[:, None]
    if E.shape[0] != model.layer_dims[-1]:
        raise ConfigurationError(
            f"labels have {E.shape[0]} rows but the {model.head} head has {model.layer_dims[-1]} outputs"
        )
    logits, (zs, acts) = forward(model, X)
    n = logits.shape[1]
    loss = float(segment_losses(logits, E, model.segments).sum())
    _, dact = _ACTIVATIONS[model.activation]
    delta = (segment_softmax(logits, model.segments) - E.astype(logits.dtype)) / n
    grads = [None] * (2 * len(model.weights))
    for i in range(len(model.weights) - 1, -1, -1):
        grads[2 * i] = delta @ acts[i].T
        grads[2 * i + 1] = delta.sum(axis=1)
        if i > 0:
            delta = (model.weights[i].T @ delta) * dact(zs[i - 1], acts[i])
    return loss, grads


def predict_logits(model: MlpModel, X: np.ndarray, batch_size: int = 4096) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    parts = [forward(model, X[:, i : i + batch_size])[0] for i in range(0, X.shape[1], batch_size)]
    if not parts:
        return np.zeros((model.layer_dims[-1], 0), dtype=model.dtype)
    return np.concatenate(parts, axis=1)


def predict_from_logits(logits: np.ndarray, segments: Sequence[int]) -> np.ndarray:
    """Argmax per segment (ties go to the lowest index), shape ``(n_seg, n)``."""
    return np.stack([np.argmax(logits[a:b], axis=0) for a, b in _segment_bounds(segments)])


def predict(model: MlpModel, samples: np.ndarray) -> np.ndarray:
    """Class index per column for a single head, per-task indices for a multi head.

    Single-task models return shape ``(n,)``; multi-task models ``(n_tasks, n)``.
    """
    idx = predict_from_logits(predict_logits(model, samples), model.segments)
    return idx[0] if model.head == "single" else idx


def _evaluate(model, X, E, batch_size=4096):
    logits = predict_logits(model, X, batch_size)
    loss = float(segment_losses(logits, E, model.segments).sum())
    pred = predict_from_logits(logits, model.segments)
    true = predict_from_logits(np.asarray(E), model.segments)
    correct = pred == true
    return loss, float(correct.all(axis=0).mean()), correct.mean(axis=1).tolist()


class _Adam:
    def __init__(self, params, lr, b1, b2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            p -= (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)


class _Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def train(model: MlpModel, split, labels, cfg: TrainConfig | None = None, *, progress=None):
    """Mini-batch training; returns ``(model, history)``.

    ``split`` needs ``train``/``infer`` sample matrices and ``labels`` is the
    ``(train, infer)`` label pair. The model is updated in place. ``history``
    holds one dict per evaluated epoch with loss and accuracy on both sets.
    """
    cfg = cfg or TrainConfig()
    E_train = np.asarray(getattr(labels[0], "E", labels[0]), dtype=model.dtype)
    E_infer = np.asarray(getattr(labels[1], "E", labels[1]), dtype=model.dtype)
    for lab in labels:
        scheme = getattr(getattr(lab, "scheme", None), "value", None)
        if scheme is not None and scheme != model.head:
            raise ConfigurationError(f"dataset is labeled {scheme} but the model head is {model.head}")
    X_train, X_infer = split.train, split.infer
    if E_train.shape != (model.layer_dims[-1], X_train.shape[1]):
        raise ConfigurationError(f"training labels shape {E_train.shape} does not fit the model/data")
    if cfg.standardize and model.input_mean is None:
        from .dataset import Standardizer

        st = Standardizer.fit(X_train)
        model.input_mean, model.input_scale = st.mean, st.scale
    params = model.params
    if cfg.optimizer == "adam":
        opt = _Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    else:
        opt = _Sgd(cfg.learning_rate)
    rng = np.random.default_rng([cfg.init_seed, 7])
    n = X_train.shape[1]
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = np.sort(order[start : start + cfg.batch_size])
            loss, grads = loss_and_grad(model, X_train[:, idx], E_train[:, idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            total += loss * len(idx)
            opt.step(params, grads)
        if epoch % cfg.eval_every and epoch != cfg.epochs:
            continue
        record = {"epoch": epoch, "batch_loss": total / max(n, 1)}
        tr_loss, tr_acc, tr_task = _evaluate(model, X_train, E_train)
        if not np.isfinite(tr_loss):
            raise TrainingDivergedError(epoch, tr_loss)
        record.update(train_loss=tr_loss, train_acc=tr_acc, train_task_acc=tr_task)
        if X_infer.shape[1]:
            in_loss, in_acc, in_task = _evaluate(model, X_infer, E_infer)
            record.update(infer_loss=in_loss, infer_acc=in_acc, infer_task_acc=in_task)
        history.append(record)
        log.info(
            "epoch %d  train loss %.4f acc %.4f  infer acc %s",
            epoch, tr_loss, tr_acc, f"{record.get('infer_acc', float('nan')):.4f}",
        )
        if progress is not None:
            progress(record)
    model.info["train_config"] = asdict(cfg)
    return model, history


# --- WCTMLP01 checkpoint format ---------------------------------------------


def save_model(model: MlpModel, path) -> None:
    arrays = [("W%d" % i, W) for i, W in enumerate(model.weights)]
    arrays += [("b%d" % i, b) for i, b in enumerate(model.biases)]
    if model.input_mean is not None:
        arrays += [("input_mean", model.input_mean), ("input_scale", model.input_scale)]
    header = {
        "layer_dims": list(model.layer_dims),
        "segments": list(model.segments),
        "head": model.head,
        "activation": model.activation,
        "payload": [[name, list(a.shape)] for name, a in arrays],
        "info": model.info,
    }
    blob = json.dumps(header, sort_keys=True, default=_json_default).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (tuple, np.ndarray)):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}")
        raw = fh.read(8)
        if len(raw) != 8:
            raise FormatError("truncated header length")
        (n,) = struct.unpack("<Q", raw)
        blob = fh.read(n)
        if len(blob) != n:
            raise FormatError("truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
            payload = header["payload"]
            dims = header["layer_dims"]
        except (UnicodeDecodeError, json.JSONDecodeError, KeyError) as exc:
            raise FormatError(f"invalid checkpoint header: {exc}") from None
        arrays = {}
        for name, shape in payload:
            count = int(np.prod(shape))
            raw = fh.read(4 * count)
            if len(raw) != 4 * count:
                raise FormatError(f"payload {name!r} truncated")
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
        if fh.read(1):
            raise FormatError("trailing bytes after payload")
    n_layers = len(dims) - 1
    try:
        model = MlpModel(
            layer_dims=[int(d) for d in dims],
            weights=[arrays[f"W{i}"] for i in range(n_layers)],
            biases=[arrays[f"b{i}"] for i in range(n_layers)],
            segments=tuple(header["segments"]),
            head=header["head"],
            activation=header.get("activation", "relu"),
            input_mean=arrays.get("input_mean"),
            input_scale=arrays.get("input_scale"),
            info=header.get("info", {}),
        )
    except (KeyError, ConfigurationError) as exc:
        raise FormatError(f"inconsistent checkpoint: {exc}") from None
    return model
