"""Phase dataset generation and a from-scratch MLP phase classifier.

The estimators follow the scikit-learn API so they compose with
``sklearn.pipeline.Pipeline`` and model-selection tools::

    pipe = make_phase_pipeline(mode="trotter:6")
    pipe.fit(points, labels)
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from .dynamics import CorrelationSeries, SectorSimulator, default_times, parse_mode, probe_state
from .models import (
    AGASSI_TERM_NAMES,
    AgassiParams,
    PhaseLabel,
    agassi_couplings,
    agassi_unit_terms,
    calibrate_cuts,
    classify_fractions,
    _spectrum,
)
from .validation import (
    N_PHASES,
    StratificationError,
    check_labels,
    check_param_points,
    check_series,
    check_unit_interval,
)

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


# -- lattice & dataset -------------------------------------------------


def generate_lattice(
    ranges: Sequence[tuple[float, float]] = ((0.0, 2.0),) * 3,
    points_per_axis: int = 21,
    epsilon: float = 1.0,
    j: int = 2,
) -> list[AgassiParams]:
    """Cartesian grid over (chi, sigma, lambda); lambda varies fastest."""
    if points_per_axis < 2:
        raise ValueError("points_per_axis must be >= 2")
    if len(ranges) != 3:
        raise ValueError("need one [lo, hi] range per axis")
    axes = []
    for lo, hi in ranges:
        if lo < 0 or hi <= lo:
            raise ValueError(f"invalid axis range [{lo}, {hi}]")
        axes.append(np.linspace(lo, hi, points_per_axis))
    return [
        AgassiParams(epsilon, float(a), float(b), float(c), j)
        for a in axes[0]
        for b in axes[1]
        for c in axes[2]
    ]


@dataclass(frozen=True)
class PhaseSample:
    params: AgassiParams
    series: CorrelationSeries
    label: PhaseLabel
    mode: str


class DatasetError(RuntimeError):
    pass


@lru_cache(maxsize=None)
def _simulator(j: int) -> SectorSimulator:
    units = agassi_unit_terms(j)
    return SectorSimulator([units[k] for k in AGASSI_TERM_NAMES], n_particles=2 * j)


def _couplings(p: AgassiParams) -> list[float]:
    c = agassi_couplings(p)
    return [c[k] for k in AGASSI_TERM_NAMES]


def _sample_chunk(args):
    points, mode, times, pair, cuts = args
    labels, rows = [], []
    for p in points:
        try:
            sim = _simulator(p.j)
            sub0 = sim.restrict(probe_state(p.n_modes))
            fr = _spectrum(p.j, p.epsilon).order_fractions(p.chi, p.sigma, p.lam)
            labels.append(int(classify_fractions(fr, cuts)))
            rows.append(sim.series(_couplings(p), sub0, times, pair, mode))
        except Exception as exc:  # report the failing point, then abort
            raise DatasetError(
                f"sample failed at chi={p.chi}, sigma={p.sigma}, lambda={p.lam}, j={p.j}: {exc}"
            ) from exc
    return labels, rows


def _chunks(seq, n):
    size = max(1, math.ceil(len(seq) / n))
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def build_dataset(
    lattice: Sequence[AgassiParams],
    mode: str = "exact",
    times=None,
    pair: tuple[int, int] = (0, 1),
    cuts: dict[str, float] | None = None,
    n_jobs: int = 1,
) -> list[PhaseSample]:
    """Label and simulate every lattice point, starting from the probe state.

    Evolution runs inside the half-filled particle-number sector, which holds
    the probe state and is conserved by the Hamiltonian. Output order follows
    ``lattice`` regardless of ``n_jobs``.
    """
    lattice = list(lattice)
    if not lattice:
        raise ValueError("lattice is empty")
    parse_mode(mode)
    times = default_times() if times is None else np.asarray(times, dtype=float)
    if cuts is None:
        p0 = lattice[0]
        cuts = calibrate_cuts(p0.j, p0.epsilon)
    if n_jobs > 1:
        jobs = [(c, mode, times, pair, cuts) for c in _chunks(lattice, 4 * n_jobs)]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(_sample_chunk, jobs))
    else:
        parts = [_sample_chunk((lattice, mode, times, pair, cuts))]
    labels = [lab for part in parts for lab in part[0]]
    rows = [row for part in parts for row in part[1]]
    samples = [
        PhaseSample(p, CorrelationSeries(tuple(pair), times, row), PhaseLabel(lab), mode)
        for p, lab, row in zip(lattice, labels, rows)
    ]
    counts = Counter(s.label.name for s in samples)
    log.info("dataset %s: %d samples, label marginals %s", mode, len(samples), dict(counts))
    return samples


def dataset_arrays(samples: Sequence[PhaseSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(points, series, labels)`` arrays for the estimator API."""
    pts = np.array([[s.params.chi, s.params.sigma, s.params.lam] for s in samples])
    X = np.array([s.series.values for s in samples])
    y = np.array([int(s.label) for s in samples], dtype=np.int64)
    return pts, X, y


class CorrelationSeriesTransformer(TransformerMixin, BaseEstimator):
    """Maps ``(chi, sigma, lambda)`` rows to C_z time series of the probe state."""

    def __init__(self, mode="exact", n_samples=64, t_max=10.0, j=2, epsilon=1.0, pair=(0, 1)):
        self.mode = mode
        self.n_samples = n_samples
        self.t_max = t_max
        self.j = j
        self.epsilon = epsilon
        self.pair = pair

    def fit(self, X=None, y=None):
        parse_mode(self.mode)
        self.times_ = default_times(self.n_samples, self.t_max)
        self.n_features_in_ = 3
        return self

    def transform(self, X):
        if not hasattr(self, "times_"):
            raise NotFittedError("call fit before transform")
        X = check_param_points(X)
        sim = _simulator(self.j)
        sub0 = sim.restrict(probe_state(4 * self.j))
        out = np.empty((X.shape[0], self.times_.size))
        for k, (chi, sigma, lam) in enumerate(X):
            p = AgassiParams(self.epsilon, chi, sigma, lam, self.j)
            out[k] = sim.series(_couplings(p), sub0, self.times_, tuple(self.pair), self.mode)
        return out


class PhaseLabeler(BaseEstimator):
    """Ground-state order-parameter labeler; ``fit`` calibrates the cuts."""

    def __init__(self, j=2, epsilon=1.0, n_line_points=201):
        self.j = j
        self.epsilon = epsilon
        self.n_line_points = n_line_points

    def fit(self, X=None, y=None):
        self.cuts_ = calibrate_cuts(self.j, self.epsilon, self.n_line_points)
        return self

    def predict(self, X):
        if not hasattr(self, "cuts_"):
            raise NotFittedError("call fit before predict")
        X = check_param_points(X)
        spec = _spectrum(self.j, self.epsilon)
        return np.array(
            [int(classify_fractions(spec.order_fractions(*row), self.cuts_)) for row in X],
            dtype=np.int64,
        )


# -- MLP ---------------------------------------------------------------


def _relu(z):
    return np.maximum(z, 0.0)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class MlpModel:
    """Dense ReLU network with a softmax head; weights are ``(fan_in, fan_out)``."""

    layer_dims: list
    weights: list = field(repr=False)
    biases: list = field(repr=False)
    activation: str = "relu"
    seed: int | None = None
    config: dict = field(default_factory=dict)

    @classmethod
    def initialize(cls, layer_dims: Sequence[int], seed: int = 0) -> "MlpModel":
        """Uniform +/- sqrt(6 / (fan_in + fan_out)) weights, zero biases."""
        if layer_dims[-1] != N_PHASES:
            raise ValueError(f"output width must be {N_PHASES}")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(list(layer_dims), weights, biases, "relu", seed)

    @property
    def n_in(self) -> int:
        return self.layer_dims[0]

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
            self.seed,
            dict(self.config),
        )

    def forward(self, X):
        """Return class probabilities and the cached activations."""
        acts = [X]
        a = X
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            a = z if k == last else _relu(z)
            acts.append(a)
        return _softmax(a), acts

    def predict_proba(self, X) -> np.ndarray:
        X = check_series(X, self.n_in)
        return self.forward(X)[0]

    def loss_and_grads(self, X, y):
        """Mean softmax cross-entropy and its gradients (weights, then biases)."""
        probs, acts = self.forward(X)
        n = X.shape[0]
        loss = -np.mean(np.log(np.clip(probs[np.arange(n), y], 1e-300, None)))
        delta = probs.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n
        gw = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        for k in range(len(self.weights) - 1, -1, -1):
            gw[k] = acts[k].T @ delta
            gb[k] = delta.sum(axis=0)
            if k:
                delta = (delta @ self.weights[k].T) * (acts[k] > 0)
        return float(loss), gw + gb

    def loss(self, X, y) -> float:
        probs, _ = self.forward(X)
        n = X.shape[0]
        return float(-np.mean(np.log(np.clip(probs[np.arange(n), y], 1e-300, None))))

    # -- serialization --------------------------------------------------
    def to_json(self) -> str:
        doc = {
            "format": "nucqml-mlp",
            "version": MODEL_FORMAT_VERSION,
            "layer_dims": self.layer_dims,
            "activation": self.activation,
            "seed": self.seed,
            "config": self.config,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        doc = json.loads(text)
        if doc.get("format") != "nucqml-mlp" or doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError("unsupported model file format")
        return cls(
            doc["layer_dims"],
            [np.array(w, dtype=np.float64) for w in doc["weights"]],
            [np.array(b, dtype=np.float64) for b in doc["biases"]],
            doc["activation"],
            doc["seed"],
            doc["config"],
        )


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _SGD:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded random split; the test part has ``floor(test_fraction * n)`` rows."""
    n_test = int(math.floor(test_fraction * n + 1e-9))
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


class MLPPhaseClassifier(ClassifierMixin, BaseEstimator):
    """Four-way phase classifier trained by mini-batch Adam on cross-entropy.

    ``fit`` holds out ``test_fraction`` of the rows, tracks held-out
    accuracy after every epoch and keeps the best-scoring weights.
    """

    def __init__(
        self,
        hidden_layer_sizes=(128, 128),
        learning_rate=1e-3,
        batch_size=32,
        epochs=200,
        test_fraction=0.1,
        optimizer="adam",
        random_state=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.test_fraction = test_fraction
        self.optimizer = optimizer
        self.random_state = random_state

    def fit(self, X, y):
        X = check_series(X)
        y = check_labels(y, X.shape[0])
        seed = int(self.random_state)
        train_idx, test_idx = split_indices(X.shape[0], self.test_fraction, seed)
        missing = set(np.unique(y)) - set(np.unique(y[train_idx]))
        if missing:
            names = sorted(PhaseLabel(m).name for m in missing)
            raise StratificationError(f"classes absent from the training split: {names}")
        dims = [X.shape[1], *self.hidden_layer_sizes, N_PHASES]
        model = MlpModel.initialize(dims, seed)
        model.config = self._config()
        params = model.params()
        if self.optimizer == "adam":
            opt = _Adam(params, self.learning_rate)
        elif self.optimizer == "sgd":
            opt = _SGD(params, self.learning_rate)
        else:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        Xtr, ytr = X[train_idx], y[train_idx]
        Xte, yte = X[test_idx], y[test_idx]
        rng = np.random.default_rng(seed + 1)
        history = []
        best_acc, best = -1.0, model.copy()
        for epoch in range(1, self.epochs + 1):
            order = rng.permutation(Xtr.shape[0])
            total = 0.0
            for start in range(0, order.size, self.batch_size):
                batch = order[start : start + self.batch_size]
                loss, grads = model.loss_and_grads(Xtr[batch], ytr[batch])
                opt.step(params, grads)
                total += loss * batch.size
            train_loss = total / max(order.size, 1)
            ref_X, ref_y = (Xte, yte) if yte.size else (Xtr, ytr)
            acc = float(np.mean(np.argmax(model.forward(ref_X)[0], axis=1) == ref_y))
            history.append((epoch, train_loss, acc))
            if acc > best_acc:
                best_acc, best = acc, model.copy()
        self.model_ = best
        self.history_ = history
        self.best_test_accuracy_ = best_acc
        self.train_indices_ = train_idx
        self.test_indices_ = test_idx
        self.classes_ = np.arange(N_PHASES)
        self.n_features_in_ = X.shape[1]
        log.info("trained MLP %s: best held-out accuracy %.4f", dims, best_acc)
        return self

    def _config(self) -> dict:
        cfg = self.get_params()
        cfg["hidden_layer_sizes"] = list(cfg["hidden_layer_sizes"])
        return cfg

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before predicting")

    def predict_proba(self, X):
        self._check_fitted()
        return self.model_.predict_proba(X)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    @classmethod
    def from_model(cls, model: MlpModel) -> "MLPPhaseClassifier":
        cfg = dict(model.config)
        if "hidden_layer_sizes" in cfg:
            cfg["hidden_layer_sizes"] = tuple(cfg["hidden_layer_sizes"])
        est = cls(**cfg)
        est.model_ = model
        est.classes_ = np.arange(N_PHASES)
        est.n_features_in_ = model.n_in
        return est


def make_phase_pipeline(mode: str = "exact", **mlp_params) -> Pipeline:
    """Parameters -> C_z series -> MLP, as one estimator."""
    return Pipeline(
        [
            ("series", CorrelationSeriesTransformer(mode=mode)),
            ("mlp", MLPPhaseClassifier(**mlp_params)),
        ]
    )


@dataclass
class TrainConfig:
    split_fraction: float = 0.10
    seed: int = 0
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 200
    hidden: tuple = (128, 128)
    optimizer: str = "adam"


def train(dataset: Sequence[PhaseSample], cfg: TrainConfig | None = None) -> MLPPhaseClassifier:
    """Fit a classifier on a generated dataset; see ``MLPPhaseClassifier``."""
    cfg = cfg or TrainConfig()
    _, X, y = dataset_arrays(dataset)
    est = MLPPhaseClassifier(
        hidden_layer_sizes=tuple(cfg.hidden),
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        epochs=cfg.epochs,
        test_fraction=cfg.split_fraction,
        optimizer=cfg.optimizer,
        random_state=cfg.seed,
    )
    return est.fit(X, y)


def predict(model: MlpModel, series) -> np.ndarray:
    """Phase probabilities for one series (or a batch of series)."""
    values = series.values if isinstance(series, CorrelationSeries) else series
    return model.predict_proba(values)


def gradient_check(model: MlpModel, x, y, step: float = 1e-5) -> float:
    """Worst per-tensor relative error between backprop and central differences.

    For each parameter tensor the error is ``|a - n| / (|a| + |n|)`` in the
    Frobenius norm (0 when both gradients vanish).
    """
    X = check_series(x, model.n_in)
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    _, grads = model.loss_and_grads(X, y)
    worst = 0.0
    for p, g in zip(model.params(), grads):
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + step
            up = model.loss(X, y)
            p[idx] = old - step
            down = model.loss(X, y)
            p[idx] = old
            num[idx] = (up - down) / (2 * step)
        denom = np.linalg.norm(g) + np.linalg.norm(num)
        if denom > 0:
            worst = max(worst, float(np.linalg.norm(g - num) / denom))
    return worst


def tagging_power(eff: float, a: float) -> float:
    """``eff * (2a - 1)^2`` for a tagger of efficiency ``eff`` and accuracy ``a``."""
    eff = check_unit_interval("eff", eff)
    a = check_unit_interval("a", a)
    return eff * (2 * a - 1) ** 2


def dominant_phase_changes(labels: Sequence[int]) -> int:
    """Number of positions where the predicted label differs from the previous one."""
    labels = list(labels)
    return sum(1 for u, v in zip(labels, labels[1:]) if u != v)
