"""Desk-scale model fitting: OLS, PCA, multinomial logistic, small MLPs.

All trainers use analytic gradients and plain full-batch gradient descent
with step halving whenever a step would increase the loss, so the recorded
loss curve is monotone nonincreasing and every run is reproducible from its
seed. Architectures are token lists like ``(("linear", 3, "bottleneck"),
("tanh",), ("linear", 16), ("tanh",))``; the output head (a final linear
layer for regression, a logits head for classification) is appended
automatically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NumericError, ShapeError, SingularSystemError, ValidationError
from .numerics import STREAM_INIT, RngStream, as_matrix, solve_spd, svd
from .pipeline import Activation, Linear, LogisticHead, Pipeline, PcaProject, Standardize

PCA_RANK_RTOL = 1e-10
STANDARDIZE_SCALE_FLOOR = 1e-8
DIVERGENCE_LOSS = 1e6


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus regression targets or integer class labels."""

    X: np.ndarray
    y: np.ndarray
    task: str  # "regression" | "classification"
    split: str = "train"

    def __post_init__(self):
        x = as_matrix(self.X, "X")
        if self.task not in ("regression", "classification"):
            raise ValidationError(f"unknown task {self.task!r}")
        if self.split not in ("train", "test"):
            raise ValidationError(f"unknown split {self.split!r}")
        y = np.asarray(self.y)
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise ShapeError("y must be 1-d with one entry per row of X")
        if self.task == "classification":
            y = y.astype(int)
            if y.min() < 0:
                raise ValidationError("class labels must be nonnegative")
        else:
            y = y.astype(float)
            if not np.all(np.isfinite(y)):
                raise ValidationError("targets contain non-finite values")
        object.__setattr__(self, "X", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        if self.task != "classification":
            raise ValidationError("n_classes is only defined for classification")
        return int(self.y.max()) + 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    step_size: float = 0.5
    batch_size: Optional[int] = None  # None = full batch
    seed: int = 0
    architecture: tuple = ()
    init_scale: float = 1.0
    grad_tol: float = 1e-4
    max_halvings: int = 40

    def __post_init__(self):
        if self.epochs < 1 or self.step_size <= 0 or self.init_scale <= 0:
            raise ValidationError("epochs, step_size and init_scale must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValidationError("batch_size must be positive")


# --- network internals ----------------------------------------------------
#
# A network is a list of ops: ("linear", param_index) or ("relu"/"tanh",).
# Params is a parallel list of (W, b). These low-level functions are shared
# with the finite-difference gradient checks in the test suite.


def network_forward(ops, params, X: np.ndarray) -> list[np.ndarray]:
    """Forward pass over a batch; returns activations per op (input first)."""
    h = X
    cache = [h]
    for op in ops:
        if op[0] == "linear":
            w, b = params[op[1]]
            h = h @ w.T + b
        elif op[0] == "relu":
            h = np.maximum(h, 0.0)
        elif op[0] == "tanh":
            h = np.tanh(h)
        else:
            raise ValidationError(f"unknown op {op[0]!r}")
        cache.append(h)
    return cache


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def network_loss(ops, params, X, y, task: str) -> float:
    out = network_forward(ops, params, X)[-1]
    if task == "regression":
        return float(np.mean((out[:, 0] - y) ** 2))
    p = _softmax(out)
    return float(-np.mean(np.log(p[np.arange(len(y)), y] + 1e-300)))


def network_loss_and_grads(ops, params, X, y, task: str):
    """Mean loss and analytic parameter gradients via backprop."""
    cache = network_forward(ops, params, X)
    out = cache[-1]
    n = X.shape[0]
    if task == "regression":
        resid = out[:, 0] - y
        loss = float(np.mean(resid**2))
        g = (2.0 * resid / n)[:, None]
    elif task == "classification":
        p = _softmax(out)
        loss = float(-np.mean(np.log(p[np.arange(n), y] + 1e-300)))
        onehot = np.eye(out.shape[1])[y]
        g = (p - onehot) / n
    else:
        raise ValidationError(f"unknown task {task!r}")
    grads: list = [None] * len(params)
    for i in range(len(ops) - 1, -1, -1):
        op = ops[i]
        h_in, h_out = cache[i], cache[i + 1]
        if op[0] == "linear":
            grads[op[1]] = (g.T @ h_in, g.sum(axis=0))
            g = g @ params[op[1]][0]
        elif op[0] == "relu":
            g = g * (h_out > 0)
        elif op[0] == "tanh":
            g = g * (1.0 - h_out**2)
    return loss, grads


def _gradient_descent(ops, params, X, y, task, config: TrainConfig):
    """Full-batch GD with step halving on increase; returns loss history."""
    lr = config.step_size
    loss = network_loss(ops, params, X, y, task)
    history = [loss]
    g = None
    if config.batch_size is not None and config.batch_size < X.shape[0]:
        g = RngStream(config.seed, STREAM_INIT).child(1).generator()
    for _ in range(config.epochs):
        if g is not None:
            order = g.permutation(X.shape[0])
            for start in range(0, X.shape[0], config.batch_size):
                idx = order[start : start + config.batch_size]
                _, grads = network_loss_and_grads(ops, params, X[idx], y[idx], task)
                params = [
                    (w - lr * gw, b - lr * gb)
                    for (w, b), (gw, gb) in zip(params, grads)
                ]
            new_loss = network_loss(ops, params, X, y, task)
            if new_loss > loss:
                lr *= 0.5
            loss = new_loss
        else:
            _, grads = network_loss_and_grads(ops, params, X, y, task)
            grad_inf = max(
                max(np.abs(gw).max(), np.abs(gb).max() if gb.size else 0.0)
                for gw, gb in grads
            )
            if grad_inf <= config.grad_tol:
                break
            for _ in range(config.max_halvings):
                candidate = [
                    (w - lr * gw, b - lr * gb)
                    for (w, b), (gw, gb) in zip(params, grads)
                ]
                new_loss = network_loss(ops, candidate, X, y, task)
                if new_loss <= loss:
                    break
                lr *= 0.5
            else:
                break  # no acceptable step at any feasible size
            params = candidate
            loss = new_loss
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS:
            raise NumericError(
                f"training diverged: loss {loss} after {len(history)} epochs "
                f"(step size {lr})"
            )
        history.append(loss)
    return params, history, lr


def parse_architecture(tokens: Sequence) -> list[tuple]:
    """Normalize architecture tokens to (kind, width|None, tap|None)."""
    plan = []
    for tok in tokens:
        if isinstance(tok, str):
            tok = (tok,)
        tok = tuple(tok)
        kind = tok[0]
        if kind == "linear":
            if len(tok) < 2:
                raise ValidationError("linear token needs a width")
            width = int(tok[1])
            tap = tok[2] if len(tok) > 2 else None
            if width < 1:
                raise ValidationError("linear width must be >= 1")
            plan.append(("linear", width, tap))
        elif kind in ("relu", "tanh"):
            tap = tok[1] if len(tok) > 1 else None
            plan.append((kind, None, tap))
        else:
            raise ValidationError(f"unknown architecture token {kind!r}")
    return plan


def _init_params(plan, in_dim, out_dim, config: TrainConfig):
    """Gaussian init scaled by init_scale / sqrt(fan_in); biases zero."""
    g = RngStream(config.seed, STREAM_INIT).generator()
    ops = []
    params = []
    dim = in_dim
    taps = []
    for kind, width, tap in plan:
        if kind == "linear":
            w = config.init_scale * g.standard_normal((width, dim)) / np.sqrt(dim)
            params.append((w, np.zeros(width)))
            ops.append(("linear", len(params) - 1))
            dim = width
        else:
            ops.append((kind,))
        if tap is not None:
            taps.append((tap, len(ops) - 1))
    w = config.init_scale * g.standard_normal((out_dim, dim)) / np.sqrt(dim)
    params.append((w, np.zeros(out_dim)))
    ops.append(("linear", len(params) - 1))
    return ops, params, taps


@dataclass
class TrainResult:
    pipeline: Pipeline
    losses: list[float] = field(default_factory=list)
    final_step: float = 0.0

    def write_log_csv(self, path) -> None:
        from . import serialize

        serialize.write_csv(
            path, ("epoch", "loss"), list(enumerate(self.losses))
        )


def fit_ols(data: Dataset) -> np.ndarray:
    """Least-squares coefficients (no intercept) via the normal equations."""
    if data.task != "regression":
        raise ValidationError("fit_ols requires regression data")
    if data.n < data.dim:
        raise ValidationError("need at least as many rows as features")
    gram = data.X.T @ data.X
    try:
        beta = solve_spd(gram, data.X.T @ data.y)
    except SingularSystemError as exc:
        raise SingularSystemError(f"X^T X is singular: {exc}") from exc
    return beta


def fit_pca(data: Dataset, k: int) -> PcaProject:
    """Top-k principal components of the centered feature matrix.

    Sign convention: the largest-magnitude entry of each component is made
    positive, so the result is independent of SVD sign ambiguity.
    """
    if k < 1 or k > data.dim:
        raise ValidationError(f"k must be in [1, {data.dim}], got {k}")
    if data.n < 2:
        raise ValidationError("PCA needs at least two rows")
    mean = data.X.mean(axis=0)
    centered = data.X - mean
    _, s, vt = svd(centered)
    rank = int(np.sum(s > PCA_RANK_RTOL * s[0])) if s[0] > 0 else 0
    if k > rank:
        raise ValidationError(
            f"k={k} exceeds the numerical rank {rank} of the centered data"
        )
    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaProject(components, mean)


def fit_standardizer(data: Dataset, scale_floor: float = STANDARDIZE_SCALE_FLOOR) -> Standardize:
    """Feature-wise standardizer fit on one split (floor guards constants)."""
    mean = data.X.mean(axis=0)
    scale = np.maximum(data.X.std(axis=0), scale_floor)
    return Standardize(mean, scale)


def apply_standardizer(standardizer: Standardize, data: Dataset) -> Dataset:
    x = (data.X - standardizer.mean) / standardizer.scale
    return Dataset(x, data.y, data.task, data.split)


def fit_logistic(data: Dataset, config: TrainConfig = TrainConfig()) -> LogisticHead:
    """Multinomial logistic regression head minimizing mean cross-entropy.

    Runs gradient descent until the gradient infinity-norm drops below
    ``config.grad_tol`` or the epoch budget is exhausted.
    """
    if data.task != "classification":
        raise ValidationError("fit_logistic requires classification data")
    n_classes = data.n_classes
    if n_classes < 2:
        raise ValidationError("data contains a single class")
    ops, params, _ = _init_params([], data.dim, n_classes, config)
    params, _, _ = _gradient_descent(ops, params, data.X, data.y, "classification", config)
    w, b = params[0]
    return LogisticHead(w, b)


def train_mlp(data: Dataset, config: TrainConfig) -> TrainResult:
    """Train a small network and package it as a pipeline with declared taps.

    Regression appends a 1-d linear output layer trained on MSE;
    classification appends a logits head trained on cross-entropy.
    """
    plan = parse_architecture(config.architecture)
    out_dim = 1 if data.task == "regression" else data.n_classes
    if data.task == "classification" and out_dim < 2:
        raise ValidationError("data contains a single class")
    ops, params, taps = _init_params(plan, data.dim, out_dim, config)
    params, history, lr = _gradient_descent(
        ops, params, data.X, data.y, data.task, config
    )
    modules = []
    for op in ops[:-1]:
        if op[0] == "linear":
            w, b = params[op[1]]
            modules.append(Linear(w, b))
        else:
            modules.append(Activation(op[0]))
    w, b = params[ops[-1][1]]
    if data.task == "regression":
        modules.append(Linear(w, b))
    else:
        modules.append(LogisticHead(w, b))
    pipeline = Pipeline(modules, taps=taps, input_dim=data.dim)
    return TrainResult(pipeline=pipeline, losses=history, final_step=lr)


def predict_batch(pipeline: Pipeline, X: np.ndarray) -> np.ndarray:
    """Convenience batched prediction (does not touch the pass counter).

    Replays the pipeline's modules on a whole matrix at once; used for risk
    evaluation where per-row forward-pass accounting is not wanted.
    """
    h = as_matrix(X, "X")
    for mod in pipeline.modules:
        if isinstance(mod, (Linear, LogisticHead)):
            h = h @ mod.weights.T
            if getattr(mod, "bias", None) is not None:
                h = h + mod.bias
        elif isinstance(mod, Standardize):
            h = (h - mod.mean) / mod.scale
        elif isinstance(mod, PcaProject):
            h = (h - mod.mean) @ mod.components.T
        elif isinstance(mod, Activation):
            h = np.maximum(h, 0.0) if mod.fn == "relu" else np.tanh(h)
        else:  # Identity
            pass
    return h


def regression_mse(pipeline: Pipeline, data: Dataset) -> float:
    pred = predict_batch(pipeline, data.X)[:, 0]
    return float(np.mean((pred - data.y) ** 2))


def classification_error(pipeline: Pipeline, data: Dataset) -> float:
    logits = predict_batch(pipeline, data.X)
    return float(np.mean(logits.argmax(axis=1) != data.y))
