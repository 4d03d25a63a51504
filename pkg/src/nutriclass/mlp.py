"""Dense ReLU network with a softmax head, trained by mini-batch Adam."""
import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError
from .numeric import Rng

logger = logging.getLogger(__name__)

DEFAULT_WIDTHS = (20, 100, 40, 20, 4)
PROB_FLOOR = 1e-12
FILE_MAGIC = "nutriclass-mlp"
FILE_VERSION = 1


def relu(x):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("relu input must be finite")
    out = np.maximum(x, 0.0)
    return float(out) if out.ndim == 0 else out


def softmax(logits):
    """Row-wise softmax, shifted by the row maximum."""
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0 or not np.all(np.isfinite(z)):
        raise DomainError("softmax needs nonempty finite logits")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class MlpArchitecture:
    widths: tuple = DEFAULT_WIDTHS

    def __post_init__(self):
        if len(self.widths) < 2 or any(int(w) < 1 for w in self.widths):
            raise DomainError("architecture needs >= 2 positive widths")

    def layer_params(self):
        w = self.widths
        return [w[i] * w[i + 1] + w[i + 1] for i in range(len(w) - 1)]

    @property
    def n_params(self):
        return sum(self.layer_params())


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    config: AdamConfig
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, params, config=AdamConfig()):
        return cls(config, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])

    def update(self, params, grads):
        cfg = self.config
        self.step += 1
        c1 = 1.0 - cfg.beta1 ** self.step
        c2 = 1.0 - cfg.beta2 ** self.step
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


@dataclass
class MlpModel:
    arch: MlpArchitecture
    weights: list  # (fan_in, fan_out) per layer
    biases: list
    means: np.ndarray = None
    scales: np.ndarray = None
    history: list = field(default_factory=list)

    @classmethod
    def zeros(cls, arch):
        w = arch.widths
        return cls(arch, [np.zeros((w[i], w[i + 1])) for i in range(len(w) - 1)],
                   [np.zeros(w[i + 1]) for i in range(len(w) - 1)])

    @property
    def params(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    @property
    def n_features(self):
        return self.arch.widths[0]

    def prepare(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DomainError(f"expected {self.n_features} inputs, got {X.shape[1]}")
        if self.means is not None:
            X = (X - self.means) / self.scales
        return X


def _forward_cache(model, X):
    acts = [X]
    h = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        h = softmax(z) if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def forward(model, batch):
    """Class probabilities for rows of ``batch`` (already standardized)."""
    X = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise DomainError(f"expected {model.n_features} inputs, got {X.shape[1]}")
    return _forward_cache(model, X)[-1]


def cross_entropy(probs, labels):
    """Mean negative log-likelihood of class codes 1..K."""
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if p.shape[0] != y.shape[0]:
        raise DomainError("probabilities and labels differ in length")
    if y.min() < 1 or y.max() > p.shape[1]:
        raise DomainError("labels out of range")
    true = p[np.arange(y.shape[0]), y - 1]
    return float(-np.mean(np.log(np.maximum(true, PROB_FLOOR))))


def backward(model, batch, labels):
    """Gradients of the mean cross-entropy, ordered like ``model.params``."""
    X = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise DomainError(f"expected {model.n_features} inputs, got {X.shape[1]}")
    y = np.asarray(labels, dtype=np.int64).reshape(-1) - 1
    acts = _forward_cache(model, X)
    n = X.shape[0]
    delta = acts[-1].copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = []
    for i in range(len(model.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append(acts[i].T @ delta)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    grads.reverse()
    return grads  # [W0, b0, W1, b1, ...]


def init_model(arch, rng):
    """He-scaled normal weights, zero biases."""
    w = arch.widths
    weights = [rng.normal((w[i], w[i + 1])) * math.sqrt(2.0 / w[i]) for i in range(len(w) - 1)]
    biases = [np.zeros(w[i + 1]) for i in range(len(w) - 1)]
    return MlpModel(arch, weights, biases)


def _xy(data):
    return np.asarray(data.matrix, dtype=np.float64), np.asarray(data.labels, dtype=np.int64)


def _evaluate(model, X, y):
    p = forward(model, X)
    return float(np.mean(np.argmax(p, axis=1) + 1 == y)), cross_entropy(p, y)


def train(train_data, val_data=None, arch=None, adam=AdamConfig(), epochs=100, batch_size=32,
          rng=None, standardize=True):
    """Mini-batch Adam; records train/validation accuracy and loss per epoch."""
    X, y = _xy(train_data)
    if X.shape[0] == 0:
        raise DomainError("empty training set")
    if y.min() < 1 or y.max() > 4:
        raise DomainError("labels must be class codes 1..4")
    arch = arch or MlpArchitecture((X.shape[1],) + DEFAULT_WIDTHS[1:])
    if arch.widths[0] != X.shape[1]:
        raise DomainError(f"input width {arch.widths[0]} != feature count {X.shape[1]}")
    rng = rng if rng is not None else Rng(0)
    model = init_model(arch, rng.fork("init"))
    if standardize:
        model.means = X.mean(axis=0)
        sd = X.std(axis=0)
        model.scales = np.where(sd > 0, sd, 1.0)
    Xs = model.prepare(X)
    Xv, yv = (None, None)
    if val_data is not None:
        Xv, yv = _xy(val_data)
        Xv = model.prepare(Xv)
    params = model.params
    opt = AdamState.zeros_like(params, adam)
    shuffle_rng = rng.fork("shuffle")
    n = Xs.shape[0]
    for epoch in range(1, epochs + 1):
        order = shuffle_rng.shuffle(n)
        try:
            with np.errstate(over="raise", invalid="raise"):
                for s in range(0, n, batch_size):
                    idx = order[s:s + batch_size]
                    opt.update(params, backward(model, Xs[idx], y[idx]))
                tr_acc, tr_loss = _evaluate(model, Xs, y)
        except (FloatingPointError, DomainError) as exc:
            raise NumericError(f"training diverged at epoch {epoch}: {exc}") from None
        if not math.isfinite(tr_loss) or not all(np.all(np.isfinite(p)) for p in params):
            raise NumericError(f"training diverged at epoch {epoch}")
        row = {"epoch": epoch, "train_acc": tr_acc, "train_loss": tr_loss}
        if Xv is not None:
            row["val_acc"], row["val_loss"] = _evaluate(model, Xv, yv)
        model.history.append(row)
        logger.debug("epoch %d: %s", epoch, row)
    return model


def predict_proba(model, X):
    return forward(model, model.prepare(X))


def predict_mlp(model, X):
    """Most probable class code; ties to the lowest code."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    out = np.argmax(predict_proba(model, np.atleast_2d(X)), axis=1) + 1
    return int(out[0]) if single else out


def write_history(model, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_acc", "val_acc", "train_loss", "val_loss"])
        for h in model.history:
            w.writerow([h["epoch"], repr(h["train_acc"]), repr(h.get("val_acc", float("nan"))),
                        repr(h["train_loss"]), repr(h.get("val_loss", float("nan")))])


def save_model(model, path):
    """Header line (JSON) followed by little-endian float64 parameters.

    Parameter order: W0, b0, W1, b1, ... then input means and scales when
    the model standardizes its inputs. Weights are row-major (fan_in, fan_out).
    """
    header = {"format": FILE_MAGIC, "version": FILE_VERSION, "widths": list(model.arch.widths),
              "standardized": model.means is not None}
    blobs = [p.astype("<f8").ravel() for p in model.params]
    if model.means is not None:
        blobs += [model.means.astype("<f8"), model.scales.astype("<f8")]
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.concatenate(blobs).astype("<f8").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        payload = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    if header.get("format") != FILE_MAGIC or header.get("version") != FILE_VERSION:
        raise DomainError(f"{path}: not a version-{FILE_VERSION} {FILE_MAGIC} file")
    model = MlpModel.zeros(MlpArchitecture(tuple(header["widths"])))
    pos = 0
    for p in model.params:
        p[...] = payload[pos:pos + p.size].reshape(p.shape)
        pos += p.size
    if header["standardized"]:
        d = model.n_features
        model.means = payload[pos:pos + d].copy()
        model.scales = payload[pos + d:pos + 2 * d].copy()
        pos += 2 * d
    if pos != payload.size:
        raise DomainError(f"{path}: parameter count mismatch")
    return model
