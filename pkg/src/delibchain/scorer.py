"""Joint pairwise scorer: three feed-forward heads over pair features.

The link head reads the whole pair vector and scores whether the pair
belongs to one chain; the probing and causal heads read the candidate
and antecedent segments and score whether each is a valid intervention.
Training minimizes a weighted sum of the three binary cross-entropies
(link weight 1.0, intervention weights 0.01) with Adam, using a larger
learning rate for the link head than for the intervention heads.
Gradients are hand-derived and verified against central finite
differences by ``grad_check``.
"""

from __future__ import annotations

import base64
import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataValidationError, NumericError

PROB_FLOOR = 1e-12  # probabilities are clamped to [floor, 1 - floor] before log
DEFAULT_HIDDEN = 128
CHECKPOINT_VERSION = 1


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class Alphas:
    link: float = 1.0
    probing: float = 0.01
    causal: float = 0.01

    def __post_init__(self):
        if min(self.link, self.probing, self.causal) < 0:
            raise ConfigError("loss weights must be non-negative")


@dataclass
class FFNN:
    """Fully-connected net; rectifier hidden layers, raw scalar logit out."""

    sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def create(cls, sizes: tuple[int, ...], rng: np.random.Generator) -> "FFNN":
        if len(sizes) < 2:
            raise ConfigError("FFNN needs at least input and output sizes")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(sizes=tuple(sizes), weights=weights, biases=biases)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Logits of shape (n,) plus the activation cache for backward."""
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise DataValidationError(
                f"expected input of width {self.sizes[0]}, got shape {x.shape}"
            )
        cache = []
        a = x
        last = len(self.weights) - 1
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            cache.append((a, z))
            a = z if layer == last else np.maximum(z, 0.0)
        return a[:, 0], cache

    def backward(self, cache: list, dlogit: np.ndarray) -> tuple[list, list]:
        """Gradients w.r.t. weights and biases given dLoss/dlogit (n,)."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = dlogit[:, None]
        for layer in range(len(self.weights) - 1, -1, -1):
            a_in, _ = cache[layer]
            grads_w[layer] = delta.T @ a_in
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                _, z_prev = cache[layer - 1]
                delta = (delta @ self.weights[layer]) * (z_prev > 0.0)
        return grads_w, grads_b

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases


HEAD_NAMES = ("link", "probing", "causal")


@dataclass
class JointScorerModel:
    feature_dim: int
    heads: dict[str, FFNN]
    alphas: Alphas
    seed: int

    @classmethod
    def create(
        cls,
        feature_dim: int,
        hidden: tuple[int, ...] = (DEFAULT_HIDDEN,),
        alphas: Alphas = Alphas(),
        seed: int = 0,
    ) -> "JointScorerModel":
        if feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        rng = np.random.default_rng(seed)
        heads = {
            "link": FFNN.create((4 * feature_dim, *hidden, 1), rng),
            "probing": FFNN.create((feature_dim, *hidden, 1), rng),
            "causal": FFNN.create((feature_dim, *hidden, 1), rng),
        }
        return cls(feature_dim=feature_dim, heads=heads, alphas=alphas, seed=seed)

    def segments(self, features: np.ndarray) -> dict[str, np.ndarray]:
        d = self.feature_dim
        if features.ndim != 2 or features.shape[1] != 4 * d:
            raise DataValidationError(
                f"expected pair features of width {4 * d}, got shape {features.shape}"
            )
        return {
            "link": features,
            "probing": features[:, d : 2 * d],
            "causal": features[:, 2 * d : 3 * d],
        }


@dataclass(frozen=True)
class ScorerOutputs:
    """Per-pair probabilities: link l_ij, probing s_i, causal s_j."""

    link: np.ndarray
    probing: np.ndarray
    causal: np.ndarray

    def __len__(self) -> int:
        return self.link.shape[0]


@dataclass(frozen=True)
class PairLabels:
    link: np.ndarray
    probing: np.ndarray
    causal: np.ndarray

    @classmethod
    def single(cls, link: float, probing: float, causal: float) -> "PairLabels":
        return cls(
            link=np.array([link], dtype=np.float64),
            probing=np.array([probing], dtype=np.float64),
            causal=np.array([causal], dtype=np.float64),
        )


def forward(model: JointScorerModel, features: np.ndarray) -> ScorerOutputs:
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    segments = model.segments(features)
    probs = {}
    for name in HEAD_NAMES:
        logits, _ = model.heads[name].forward(segments[name])
        probs[name] = sigmoid(logits)
    return ScorerOutputs(link=probs["link"], probing=probs["probing"], causal=probs["causal"])


def _bce_sum(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum())


def joint_loss(outputs: ScorerOutputs, labels: PairLabels, alphas: Alphas) -> float:
    """Weighted sum of the three binary cross-entropies over a batch."""
    if len(outputs) == 0:
        raise DataValidationError("empty batch")
    if labels.link.shape != outputs.link.shape:
        raise DataValidationError(
            f"labels cover {labels.link.shape[0]} pairs, outputs {len(outputs)}"
        )
    return (
        alphas.probing * _bce_sum(outputs.probing, labels.probing)
        + alphas.causal * _bce_sum(outputs.causal, labels.causal)
        + alphas.link * _bce_sum(outputs.link, labels.link)
    )


@dataclass
class Gradients:
    """dLoss/dParameter, mirroring each head's weights-then-biases layout."""

    heads: dict[str, tuple[list[np.ndarray], list[np.ndarray]]]

    def flat(self) -> list[np.ndarray]:
        out = []
        for name in HEAD_NAMES:
            grads_w, grads_b = self.heads[name]
            out.extend(grads_w)
            out.extend(grads_b)
        return out


def backward(model: JointScorerModel, features: np.ndarray, labels: PairLabels) -> Gradients:
    """Analytic gradients of ``joint_loss`` for every parameter."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    segments = model.segments(features)
    targets = {"link": labels.link, "probing": labels.probing, "causal": labels.causal}
    weights = {
        "link": model.alphas.link,
        "probing": model.alphas.probing,
        "causal": model.alphas.causal,
    }
    heads = {}
    for name in HEAD_NAMES:
        logits, cache = model.heads[name].forward(segments[name])
        dlogit = weights[name] * (sigmoid(logits) - targets[name])
        heads[name] = model.heads[name].backward(cache, dlogit)
    return Gradients(heads=heads)


def model_parameters(model: JointScorerModel) -> list[np.ndarray]:
    out = []
    for name in HEAD_NAMES:
        out.extend(model.heads[name].parameters())
    return out


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 24
    lr_link: float = 1e-4
    lr_intervention: float = 1e-5
    epochs: int = 16
    bidirectional: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.lr_link <= 0 or self.lr_intervention <= 0:
            raise ConfigError("learning rates must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")


@dataclass
class TrainData:
    """Featureized training pairs.

    The reverse-direction labels swap the candidate and antecedent
    roles; they are only consulted when training bidirectionally.
    """

    features: np.ndarray
    labels: PairLabels
    reverse_labels: PairLabels | None = None

    def __len__(self) -> int:
        return self.features.shape[0]


def reverse_feature_columns(features: np.ndarray, feature_dim: int) -> np.ndarray:
    """Swap the probing and causal segments (context and product are shared)."""
    d = feature_dim
    order = np.concatenate(
        [np.arange(0, d), np.arange(2 * d, 3 * d), np.arange(d, 2 * d), np.arange(3 * d, 4 * d)]
    )
    return features[:, order]


class _Adam:
    """Adam with bias correction; one instance per head."""

    def __init__(self, params: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            m_hat = self.m[k] / (1.0 - self.beta1**self.t)
            v_hat = self.v[k] / (1.0 - self.beta2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainResult:
    model: JointScorerModel
    history: list[float]


def train(model: JointScorerModel, data: TrainData, config: TrainConfig) -> TrainResult:
    """Adam training; deterministic for a fixed seed, input model untouched."""
    if len(data) == 0:
        raise DataValidationError("no training pairs")
    if config.bidirectional and data.reverse_labels is None:
        raise ConfigError("bidirectional training needs reverse-direction labels")

    model = copy.deepcopy(model)
    rng = np.random.default_rng(config.seed)
    features = np.asarray(data.features, dtype=np.float64)
    optimizers = {
        "link": _Adam(model.heads["link"].parameters(), config.lr_link),
        "probing": _Adam(model.heads["probing"].parameters(), config.lr_intervention),
        "causal": _Adam(model.heads["causal"].parameters(), config.lr_intervention),
    }

    history: list[float] = []
    n = len(data)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch_x = features[idx]
            batch_y = PairLabels(
                link=data.labels.link[idx],
                probing=data.labels.probing[idx],
                causal=data.labels.causal[idx],
            )
            outputs = forward(model, batch_x)
            loss = joint_loss(outputs, batch_y, model.alphas)
            grads = backward(model, batch_x, batch_y)

            if config.bidirectional:
                rev_x = reverse_feature_columns(batch_x, model.feature_dim)
                rev_y = PairLabels(
                    link=data.labels.link[idx],
                    probing=data.reverse_labels.probing[idx],
                    causal=data.reverse_labels.causal[idx],
                )
                rev_outputs = forward(model, rev_x)
                rev_loss = joint_loss(rev_outputs, rev_y, model.alphas)
                rev_grads = backward(model, rev_x, rev_y)
                loss = 0.5 * (loss + rev_loss)
                for name in HEAD_NAMES:
                    gw, gb = grads.heads[name]
                    rw, rb = rev_grads.heads[name]
                    grads.heads[name] = (
                        [0.5 * (a + b) for a, b in zip(gw, rw)],
                        [0.5 * (a + b) for a, b in zip(gb, rb)],
                    )

            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}: {loss}"
                )
            epoch_loss += loss
            for name in HEAD_NAMES:
                grads_w, grads_b = grads.heads[name]
                optimizers[name].step(
                    model.heads[name].parameters(), grads_w + grads_b
                )
        history.append(epoch_loss / n)
    return TrainResult(model=model, history=history)


def forward_bidirectional(
    model: JointScorerModel,
    features_ij: np.ndarray,
    features_ji: np.ndarray,
) -> ScorerOutputs:
    """Elementwise mean of the two directional forward passes."""
    out_ij = forward(model, features_ij)
    out_ji = forward(model, features_ji)
    return ScorerOutputs(
        link=0.5 * (out_ij.link + out_ji.link),
        probing=0.5 * (out_ij.probing + out_ji.probing),
        causal=0.5 * (out_ij.causal + out_ji.causal),
    )


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------

def grad_check(
    model: JointScorerModel,
    features: np.ndarray,
    labels: PairLabels,
    step: float = 1e-5,
) -> float:
    """Max relative error of ``backward`` against central differences."""
    if not (1e-7 <= step <= 1e-3):
        raise ConfigError("finite-difference step must lie in [1e-7, 1e-3]")
    analytic = backward(model, features, labels).flat()
    params = model_parameters(model)
    worst = 0.0
    for p, g in zip(params, analytic):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for k in range(flat_p.size):
            original = flat_p[k]
            flat_p[k] = original + step
            hi = joint_loss(forward(model, features), labels, model.alphas)
            flat_p[k] = original - step
            lo = joint_loss(forward(model, features), labels, model.alphas)
            flat_p[k] = original
            numeric = (hi - lo) / (2.0 * step)
            scale = max(abs(flat_g[k]) + abs(numeric), 1e-6)
            worst = max(worst, abs(flat_g[k] - numeric) / scale)
    return worst


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _encode(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode(),
    }


def _decode(record: dict) -> np.ndarray:
    shape = tuple(record["shape"])
    arr = np.frombuffer(base64.b64decode(record["data"]), dtype="<f8").copy()
    return arr.reshape(shape)


def save_model(model: JointScorerModel, path: str | Path, extra: dict | None = None) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "feature_dim": model.feature_dim,
        "seed": model.seed,
        "alphas": {
            "link": model.alphas.link,
            "probing": model.alphas.probing,
            "causal": model.alphas.causal,
        },
        "heads": {
            name: {
                "sizes": list(head.sizes),
                "weights": [_encode(w) for w in head.weights],
                "biases": [_encode(b) for b in head.biases],
            }
            for name, head in model.heads.items()
        },
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> JointScorerModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataValidationError(f"unsupported checkpoint version {payload.get('version')!r}")
    feature_dim = int(payload["feature_dim"])
    heads = {}
    for name in HEAD_NAMES:
        record = payload["heads"][name]
        sizes = tuple(int(s) for s in record["sizes"])
        weights = [_decode(w) for w in record["weights"]]
        biases = [_decode(b) for b in record["biases"]]
        expected_in = 4 * feature_dim if name == "link" else feature_dim
        if sizes[0] != expected_in or sizes[-1] != 1:
            raise DataValidationError(
                f"checkpoint head {name!r} has sizes {sizes}, incompatible with "
                f"feature_dim {feature_dim}"
            )
        for k, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            if weights[k].shape != (fan_out, fan_in) or biases[k].shape != (fan_out,):
                raise DataValidationError(
                    f"checkpoint head {name!r}: layer {k} parameter shapes do not "
                    f"match declared sizes {sizes}"
                )
        heads[name] = FFNN(sizes=sizes, weights=weights, biases=biases)
    alphas = Alphas(**payload["alphas"])
    return JointScorerModel(
        feature_dim=feature_dim, heads=heads, alphas=alphas, seed=int(payload["seed"])
    )
