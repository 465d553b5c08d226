"""Classifier families and the inference surface used by explainers.

Every model maps a batch ``(B, N, T)`` to class logits ``(B, C)`` through
:meth:`logits` on :class:`Tensor` inputs.  The module-level helpers
(:func:`predict_proba`, :func:`input_gradient`, ...) work on plain arrays and
accept either a single ``(N, T)`` series or a batch.
"""
from __future__ import annotations

import numpy as np

from ..errors import EmptySelection, InvalidShape
from ..seeding import make_rng
from .autodiff import Tensor, concat, conv1d

N_CLASSES = 2
INFERENCE_CHUNK = 256


class Model:
    """Base classifier; parameters use fan-in scaled uniform init."""

    architecture = "base"

    def __init__(self, n_features: int, t_steps: int, n_classes: int = N_CLASSES, seed: int = 0):
        self.n_features = int(n_features)
        self.t_steps = int(t_steps)
        self.n_classes = int(n_classes)
        self.seed = int(seed)
        self.params: dict[str, Tensor] = {}

    @property
    def input_shape(self) -> tuple[int, int]:
        return (self.n_features, self.t_steps)

    def config(self) -> dict:
        return {}

    def _param(self, name, shape, fan_in, rng):
        bound = 1.0 / np.sqrt(fan_in)
        self.params[name] = Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self.params.values()])

    def set_flat(self, flat: np.ndarray) -> None:
        offset = 0
        for p in self.params.values():
            size = p.data.size
            p.data = np.array(flat[offset:offset + size], dtype=np.float64).reshape(p.shape)
            offset += size
        if offset != len(flat):
            raise InvalidShape(f"expected {offset} parameters, got {len(flat)}")

    def head_names(self) -> tuple[str, str]:
        return ("head.weight", "head.bias")

    def zero_head(self) -> None:
        for name in self.head_names():
            self.params[name].data[...] = 0.0

    def logits(self, x: Tensor) -> Tensor:  # pragma: no cover - abstract
        raise NotImplementedError


class TemporalConvNet(Model):
    """Residual 1D CNN: ``n_blocks`` x (conv k=7 -> ReLU with skip), GAP, linear head."""

    architecture = "TemporalConv"

    def __init__(self, n_features, t_steps, n_classes=N_CLASSES, seed=0,
                 channels: int = 32, kernel: int = 7, n_blocks: int = 3):
        super().__init__(n_features, t_steps, n_classes, seed)
        self.channels, self.kernel, self.n_blocks = channels, kernel, n_blocks
        rng = make_rng(seed, "init", self.architecture)
        c_in = n_features
        for b in range(n_blocks):
            self._param(f"block{b}.conv.weight", (channels, c_in, kernel), c_in * kernel, rng)
            self._param(f"block{b}.conv.bias", (channels,), c_in * kernel, rng)
            if c_in != channels:
                self._param(f"block{b}.skip.weight", (channels, c_in, 1), c_in, rng)
                self._param(f"block{b}.skip.bias", (channels,), c_in, rng)
            c_in = channels
        self._param("head.weight", (channels, n_classes), channels, rng)
        self._param("head.bias", (n_classes,), channels, rng)
        # a zero head keeps the first epochs' loss monotone
        self.zero_head()

    def config(self):
        return {"channels": self.channels, "kernel": self.kernel, "n_blocks": self.n_blocks}

    def logits(self, x: Tensor) -> Tensor:
        p = self.params
        h = x
        for b in range(self.n_blocks):
            out = conv1d(h, p[f"block{b}.conv.weight"], p[f"block{b}.conv.bias"], padding=self.kernel // 2)
            if f"block{b}.skip.weight" in p:
                skip = conv1d(h, p[f"block{b}.skip.weight"], p[f"block{b}.skip.bias"])
            else:
                skip = h
            h = (out + skip).relu()
        pooled = h.mean(axis=2)
        return pooled @ p["head.weight"] + p["head.bias"]


class GatedRecurrentNet(Model):
    """Single LSTM layer (hidden size 10) with a linear head on the last state."""

    architecture = "GatedRecurrent"

    def __init__(self, n_features, t_steps, n_classes=N_CLASSES, seed=0, hidden: int = 10):
        super().__init__(n_features, t_steps, n_classes, seed)
        self.hidden = hidden
        rng = make_rng(seed, "init", self.architecture)
        self._param("lstm.input_weight", (n_features, 4 * hidden), hidden, rng)
        self._param("lstm.hidden_weight", (hidden, 4 * hidden), hidden, rng)
        self._param("lstm.bias", (4 * hidden,), hidden, rng)
        self._param("head.weight", (hidden, n_classes), hidden, rng)
        self._param("head.bias", (n_classes,), hidden, rng)
        # forget-gate bias of 1; gate order in the 4H block is i, f, g, o
        self.params["lstm.bias"].data[hidden:2 * hidden] = 1.0

    def config(self):
        return {"hidden": self.hidden}

    def logits(self, x: Tensor) -> Tensor:
        p = self.params
        H = self.hidden
        batch = x.shape[0]
        # input projection for all steps at once: (B, T, 4H)
        projected = x.transpose(0, 2, 1) @ p["lstm.input_weight"] + p["lstm.bias"]
        h = Tensor(np.zeros((batch, H)))
        c = Tensor(np.zeros((batch, H)))
        for t in range(self.t_steps):
            z = projected[:, t, :] + h @ p["lstm.hidden_weight"]
            i = z[:, 0:H].sigmoid()
            f = z[:, H:2 * H].sigmoid()
            g = z[:, 2 * H:3 * H].tanh()
            o = z[:, 3 * H:4 * H].sigmoid()
            c = f * c + i * g
            h = o * c.tanh()
        return h @ p["head.weight"] + p["head.bias"]


class LinearScorer(Model):
    """Two-class scorer whose class-1 logit is ``sum(w * x) + b`` and class-0 logit is 0.

    Used as an analytically tractable model in tests and calibration runs.
    """

    architecture = "Linear"

    def __init__(self, weights: np.ndarray, bias: float = 0.0):
        weights = np.asarray(weights, dtype=np.float64)
        super().__init__(weights.shape[0], weights.shape[1], N_CLASSES, 0)
        self.params["weight"] = Tensor(weights.copy(), requires_grad=True)
        self.params["bias"] = Tensor(np.array([float(bias)]), requires_grad=True)

    def head_names(self):
        return ("weight", "bias")

    def logits(self, x: Tensor) -> Tensor:
        score = (x * self.params["weight"]).sum(axis=(1, 2)).reshape(-1, 1) + self.params["bias"]
        zeros = Tensor(np.zeros((x.shape[0], 1)))
        return concat([zeros, score], axis=1)


ARCHITECTURES = {
    TemporalConvNet.architecture: TemporalConvNet,
    GatedRecurrentNet.architecture: GatedRecurrentNet,
}
ALIASES = {"cnn": "TemporalConv", "tcn": "TemporalConv", "resnet": "TemporalConv",
           "lstm": "GatedRecurrent", "rnn": "GatedRecurrent"}


def build_model(architecture: str, n_features: int, t_steps: int, seed: int = 0, **kwargs) -> Model:
    name = ALIASES.get(architecture.lower(), architecture)
    if name not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {architecture!r}; choose from {sorted(ARCHITECTURES)}")
    return ARCHITECTURES[name](n_features, t_steps, seed=seed, **kwargs)


# ------------------------------------------------------------------ inference

def _as_batch(model: Model, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != model.input_shape:
        raise InvalidShape(f"input shape {x.shape[-2:]} does not match model input {model.input_shape}")
    return x, single


def predict_logits(model: Model, x) -> np.ndarray:
    batch, single = _as_batch(model, x)
    chunks = [model.logits(Tensor(batch[i:i + INFERENCE_CHUNK])).data
              for i in range(0, len(batch), INFERENCE_CHUNK)]
    out = np.concatenate(chunks) if chunks else np.zeros((0, model.n_classes))
    return out[0] if single else out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def predict_proba(model: Model, x) -> np.ndarray:
    """Class probability vector(s); rows sum to one."""
    return softmax(predict_logits(model, x))


def forward(model: Model, x) -> np.ndarray:
    return predict_proba(model, x)


def predict(model: Model, x) -> np.ndarray:
    return np.argmax(predict_logits(model, x), axis=-1)


def readout(model: Model, x, targets, mode: str = "probability") -> np.ndarray:
    """Per-row score of class ``targets``: its probability or its logit."""
    logits = predict_logits(model, x)
    single = logits.ndim == 1
    logits = np.atleast_2d(logits)
    values = softmax(logits) if mode == "probability" else logits
    if mode not in ("probability", "logit"):
        raise ValueError(f"unknown readout {mode!r}")
    targets = np.broadcast_to(np.asarray(targets), (len(values),))
    out = values[np.arange(len(values)), targets]
    return out[0] if single else out


def input_gradient(model: Model, x, target) -> np.ndarray:
    """Gradient of the target-class logit with respect to every input cell."""
    batch, single = _as_batch(model, x)
    targets = np.broadcast_to(np.asarray(target), (len(batch),))
    if np.any(targets < 0) or np.any(targets >= model.n_classes):
        raise ValueError(f"target class out of range for {model.n_classes} classes")
    grads = []
    for i in range(0, len(batch), INFERENCE_CHUNK):
        xt = Tensor(batch[i:i + INFERENCE_CHUNK], requires_grad=True)
        logits = model.logits(xt)
        seed = np.zeros(logits.shape)
        seed[np.arange(len(seed)), targets[i:i + INFERENCE_CHUNK]] = 1.0
        logits.backward(seed)
        grads.append(xt.grad)
    for p in model.parameters():
        p.grad = None
    out = np.concatenate(grads)
    return out[0] if single else out


def accuracy(model: Model, x, y) -> float:
    x = np.asarray(x)
    if len(x) == 0:
        raise EmptySelection("accuracy of an empty split is undefined")
    return float(np.mean(predict(model, x) == np.asarray(y)))
