"""Modular pipelines with named taps and a forward-pass counter.

A pipeline is an ordered list of modules applied to a single input vector.
Taps mark module outputs as observable: every evaluation returns the final
output together with one record per declared tap. The counter tracks how
many full forward passes the pipeline has performed, which is the unit of
the compute-cost accounting.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import serialize
from .errors import NumericError, ShapeError, ValidationError
from .numerics import as_matrix, as_vector

PCA_ORTHONORMAL_ATOL = 1e-8


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Linear:
    """Affine map ``x -> weights @ x + bias`` (bias optional)."""

    weights: np.ndarray
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        w = _freeze(as_matrix(self.weights, "weights"))
        object.__setattr__(self, "weights", w)
        if self.bias is not None:
            b = as_vector(self.bias, "bias")
            if b.shape[0] != w.shape[0]:
                raise ShapeError(f"bias length {b.shape[0]} != output dim {w.shape[0]}")
            object.__setattr__(self, "bias", _freeze(b))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        y = self.weights @ x
        if self.bias is not None:
            y = y + self.bias
        return y


@dataclass(frozen=True, eq=False)
class Standardize:
    """Feature-wise centering and scaling ``x -> (x - mean) / scale``."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        m = as_vector(self.mean, "mean")
        s = as_vector(self.scale, "scale")
        if m.shape != s.shape:
            raise ShapeError("mean and scale must have the same length")
        if not np.all(s > 0):
            raise ValidationError("scale entries must be strictly positive")
        object.__setattr__(self, "mean", _freeze(m))
        object.__setattr__(self, "scale", _freeze(s))

    @property
    def in_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def out_dim(self) -> int:
        return self.mean.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale


@dataclass(frozen=True, eq=False)
class PcaProject:
    """Projection onto principal components: ``x -> components @ (x - mean)``.

    Component rows must be orthonormal within PCA_ORTHONORMAL_ATOL.
    """

    components: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        c = as_matrix(self.components, "components")
        m = as_vector(self.mean, "mean")
        if c.shape[1] != m.shape[0]:
            raise ShapeError("components width must match mean length")
        gram = c @ c.T
        defect = float(np.abs(gram - np.eye(c.shape[0])).max())
        if defect > PCA_ORTHONORMAL_ATOL:
            raise ValidationError(
                f"component rows not orthonormal (defect {defect:.2e})"
            )
        object.__setattr__(self, "components", _freeze(c))
        object.__setattr__(self, "mean", _freeze(m))

    @property
    def in_dim(self) -> int:
        return self.components.shape[1]

    @property
    def out_dim(self) -> int:
        return self.components.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.components @ (x - self.mean)


@dataclass(frozen=True)
class Activation:
    """Elementwise nonlinearity, one of 'relu' or 'tanh'."""

    fn: str

    def __post_init__(self):
        if self.fn not in ("relu", "tanh"):
            raise ValidationError(f"unknown activation {self.fn!r}")

    in_dim = None
    out_dim = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.fn == "relu":
            return np.maximum(x, 0.0)
        return np.tanh(x)


@dataclass(frozen=True, eq=False)
class LogisticHead:
    """Multinomial classification head emitting logits ``weights @ x + bias``.

    The tap value is the logits vector, never softmax probabilities.
    """

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = _freeze(as_matrix(self.weights, "weights"))
        b = as_vector(self.bias, "bias")
        if b.shape[0] != w.shape[0]:
            raise ShapeError("bias length must equal number of classes")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", _freeze(b))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.weights @ x + self.bias


@dataclass(frozen=True)
class Identity:
    """Pass-through module, used to tap the raw input of a model."""

    in_dim = None
    out_dim = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x


ModuleSpec = Union[Linear, Standardize, PcaProject, Activation, LogisticHead, Identity]


@dataclass(frozen=True, eq=False)
class TapRecord:
    tap_id: str
    value: np.ndarray


class Pipeline:
    """Ordered module composition with named taps.

    ``evaluate`` is pure with respect to the modules; the only mutable state
    is the forward-pass counter, which is incremented under a lock so that
    concurrent evaluations of distinct inputs remain safe.
    """

    def __init__(
        self,
        modules: Sequence[ModuleSpec],
        taps: Sequence[tuple[str, int]] = (),
        input_dim: Optional[int] = None,
    ):
        if len(modules) == 0:
            raise ValidationError("pipeline needs at least one module")
        self.modules = tuple(modules)
        self.taps = tuple((str(t), int(i)) for t, i in taps)
        tap_ids = [t for t, _ in self.taps]
        if len(set(tap_ids)) != len(tap_ids):
            raise ValidationError("tap ids must be unique")
        for tap_id, idx in self.taps:
            if not 0 <= idx < len(self.modules):
                raise ValidationError(f"tap {tap_id!r} index {idx} out of bounds")
        self._input_dim = input_dim
        self._dims = self._check_chaining(input_dim)
        self._tap_index = {t: i for t, i in self.taps}
        self._count = 0
        self._lock = threading.Lock()

    def _check_chaining(self, input_dim: Optional[int]) -> list[Optional[int]]:
        dims: list[Optional[int]] = []
        dim = input_dim
        for i, mod in enumerate(self.modules):
            expected = mod.in_dim
            if expected is not None:
                if dim is not None and dim != expected:
                    raise ShapeError(
                        f"module {i} expects input dim {expected}, got {dim}"
                    )
                dim = expected
            dim = mod.out_dim if mod.out_dim is not None else dim
            dims.append(dim)
        return dims

    @property
    def input_dim(self) -> Optional[int]:
        for mod in self.modules:
            if mod.in_dim is not None:
                return mod.in_dim
        return self._input_dim

    @property
    def output_dim(self) -> Optional[int]:
        return self._dims[-1]

    @property
    def tap_ids(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.taps)

    def tap_module_index(self, tap_id: str) -> int:
        if tap_id not in self._tap_index:
            raise ValidationError(f"tap {tap_id!r} not declared on this pipeline")
        return self._tap_index[tap_id]

    def tap_dim(self, tap_id: str) -> Optional[int]:
        return self._dims[self.tap_module_index(tap_id)]

    def evaluate(self, x) -> tuple[np.ndarray, list[TapRecord]]:
        """Run the full pipeline on one input; returns (output, tap records).

        Increments the forward-pass counter by exactly one.
        """
        h = as_vector(x, "input")
        want = self.input_dim
        if want is not None and h.shape[0] != want:
            raise ShapeError(f"input dim {h.shape[0]} != pipeline input dim {want}")
        values: dict[int, np.ndarray] = {}
        tap_positions = {i for _, i in self.taps}
        for i, mod in enumerate(self.modules):
            try:
                h = mod.apply(h)
            except ValueError as exc:
                raise ShapeError(f"module {i} ({type(mod).__name__}): {exc}") from exc
            if not np.all(np.isfinite(h)):
                raise NumericError(
                    f"non-finite value in output of module {i} ({type(mod).__name__})"
                )
            if i in tap_positions:
                values[i] = h
        with self._lock:
            self._count += 1
        records = [TapRecord(t, values[i]) for t, i in self.taps]
        return h, records

    def read_counter(self) -> int:
        with self._lock:
            return self._count

    def reset_counter(self) -> None:
        with self._lock:
            self._count = 0

    # --- serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        doc = {
            "modules": [_module_to_json(m) for m in self.modules],
            "taps": [{"id": t, "module": i} for t, i in self.taps],
        }
        if self._input_dim is not None:
            doc["input_dim"] = int(self._input_dim)
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Pipeline":
        modules = [_module_from_json(m) for m in doc["modules"]]
        taps = [(t["id"], t["module"]) for t in doc.get("taps", [])]
        return cls(modules, taps, input_dim=doc.get("input_dim"))

    def save(self, path) -> None:
        serialize.dump_json(path, self.to_json_dict())

    @classmethod
    def load(cls, path) -> "Pipeline":
        return cls.from_json_dict(serialize.load_json(path))


def _module_to_json(mod: ModuleSpec) -> dict:
    if isinstance(mod, Linear):
        return {
            "kind": "linear",
            "weights": serialize.matrix_to_lists(mod.weights),
            "bias": None if mod.bias is None else serialize.vector_to_list(mod.bias),
        }
    if isinstance(mod, Standardize):
        return {
            "kind": "standardize",
            "mean": serialize.vector_to_list(mod.mean),
            "scale": serialize.vector_to_list(mod.scale),
        }
    if isinstance(mod, PcaProject):
        return {
            "kind": "pca_project",
            "components": serialize.matrix_to_lists(mod.components),
            "mean": serialize.vector_to_list(mod.mean),
        }
    if isinstance(mod, Activation):
        return {"kind": "activation", "fn": mod.fn}
    if isinstance(mod, LogisticHead):
        return {
            "kind": "logistic_head",
            "weights": serialize.matrix_to_lists(mod.weights),
            "bias": serialize.vector_to_list(mod.bias),
        }
    if isinstance(mod, Identity):
        return {"kind": "identity"}
    raise ValidationError(f"unknown module type {type(mod).__name__}")


def _module_from_json(doc: dict) -> ModuleSpec:
    kind = doc.get("kind")
    if kind == "linear":
        return Linear(np.array(doc["weights"]), None if doc.get("bias") is None else np.array(doc["bias"]))
    if kind == "standardize":
        return Standardize(np.array(doc["mean"]), np.array(doc["scale"]))
    if kind == "pca_project":
        return PcaProject(np.array(doc["components"]), np.array(doc["mean"]))
    if kind == "activation":
        return Activation(doc["fn"])
    if kind == "logistic_head":
        return LogisticHead(np.array(doc["weights"]), np.array(doc["bias"]))
    if kind == "identity":
        return Identity()
    raise ValidationError(f"unknown module kind {kind!r}")


def compose_two_module_linear(h, w) -> Pipeline:
    """Bias-free two-module linear pipeline ``x -> (H x) -> w . (H x)``.

    The bottleneck output ``H x`` is tapped under the id 'bottleneck'.
    """
    h_arr = as_matrix(h, "H")
    w_arr = as_vector(w, "w")
    if w_arr.shape[0] != h_arr.shape[0]:
        raise ShapeError(
            f"w length {w_arr.shape[0]} != H row count {h_arr.shape[0]}"
        )
    return Pipeline(
        [Linear(h_arr), Linear(w_arr[None, :])],
        taps=[("bottleneck", 0)],
    )
