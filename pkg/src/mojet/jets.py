"""Empirical jet estimation by ridge-regularized least squares.

A jet packages a tapped module's base value together with its empirical
Jacobian, fitted from the responses of the full pipeline to a batch of
input perturbations. The fit solves

    min_A || Y - Delta A^T ||_F^2 + lambda ||A||_F^2

in closed form: ``A^T = (Delta^T Delta + lambda I)^{-1} Delta^T Y``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import serialize
from .errors import MojetError, ShapeError, SingularSystemError, ValidationError
from .numerics import RngStream, as_vector, solve_spd, svd
from .pipeline import Pipeline
from .probes import ProbeBatch, ProbeDesign, check_full_column_rank, sample_probes

DEFAULT_RIDGE_ALPHA = 1e-3
# Relative tolerance at which an unregularized fit refuses a probe matrix.
ZERO_RIDGE_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class FixedRidge:
    """Use the given ridge value as-is."""

    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValidationError(f"ridge value must be >= 0, got {self.value}")


@dataclass(frozen=True)
class ScaleAwareRidge:
    """lambda = alpha * (largest eigenvalue of Delta^T Delta / J).

    Keeps the regularization small relative to the dominant probe directions
    regardless of the probe scale.
    """

    alpha: float = DEFAULT_RIDGE_ALPHA

    def __post_init__(self):
        if self.alpha < 0:
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class ZeroRidge:
    """No regularization; requires a full-column-rank probe matrix."""


RidgePolicy = Union[FixedRidge, ScaleAwareRidge, ZeroRidge]

DEFAULT_RIDGE = ScaleAwareRidge()


def resolve_ridge(policy: RidgePolicy, batch: ProbeBatch) -> float:
    """Concrete ridge value for a policy applied to a probe batch."""
    if isinstance(policy, FixedRidge):
        return float(policy.value)
    if isinstance(policy, ZeroRidge):
        return 0.0
    if isinstance(policy, ScaleAwareRidge):
        s_max = svd(batch.delta).s[0]
        return float(policy.alpha * (s_max * s_max) / batch.count)
    raise ValidationError(f"unknown ridge policy {type(policy).__name__}")


@dataclass(frozen=True, eq=False)
class Jet:
    """Local first-order model of a tap: base value plus empirical Jacobian."""

    base_point: np.ndarray
    base_value: np.ndarray
    jacobian: np.ndarray
    tap_id: str
    lambda_used: float

    def to_json_dict(self) -> dict:
        return {
            "tap": self.tap_id,
            "base_point": serialize.vector_to_list(self.base_point),
            "base_value": serialize.vector_to_list(self.base_value),
            "jacobian": serialize.matrix_to_lists(self.jacobian),
            "lambda_used": float(self.lambda_used),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Jet":
        return cls(
            base_point=np.array(doc["base_point"], dtype=float),
            base_value=np.array(doc["base_value"], dtype=float),
            jacobian=np.array(doc["jacobian"], dtype=float),
            tap_id=doc["tap"],
            lambda_used=float(doc["lambda_used"]),
        )


def estimate_jet(
    pipeline: Pipeline,
    tap: str,
    x0,
    batch: ProbeBatch,
    ridge: RidgePolicy = DEFAULT_RIDGE,
) -> Jet:
    """Fit the empirical jet of ``tap`` at base point ``x0``.

    Runs the pipeline once at the base point and once per probe (J+1 forward
    passes). With zero ridge a column-rank-deficient probe matrix is a hard
    error: enlarge the probe count or use a positive ridge.
    """
    x0 = as_vector(x0, "x0")
    pipeline.tap_module_index(tap)  # validates the tap id
    if batch.dim != x0.shape[0]:
        raise ShapeError(
            f"probe dimension {batch.dim} != base point dimension {x0.shape[0]}"
        )
    _, records = pipeline.evaluate(x0)
    z0 = _tap_value(records, tap)
    responses = np.empty((batch.count, z0.shape[0]))
    for j in range(batch.count):
        _, rec = pipeline.evaluate(x0 + batch.delta[j])
        responses[j] = _tap_value(rec, tap) - z0

    lam = resolve_ridge(ridge, batch)
    delta = batch.delta
    if lam == 0.0 and not check_full_column_rank(batch, ZERO_RIDGE_RANK_RTOL):
        raise SingularSystemError(
            "probe matrix is column-rank deficient with zero ridge; "
            "enlarge the probe count or use a positive ridge"
        )
    gram = delta.T @ delta
    if lam > 0.0:
        gram = gram + lam * np.eye(delta.shape[1])
    jac_t = solve_spd(gram, delta.T @ responses)
    return Jet(
        base_point=x0,
        base_value=z0,
        jacobian=np.ascontiguousarray(jac_t.T),
        tap_id=tap,
        lambda_used=lam,
    )


def _tap_value(records, tap: str) -> np.ndarray:
    for rec in records:
        if rec.tap_id == tap:
            return rec.value
    raise ValidationError(f"tap {tap!r} missing from evaluation records")


def estimate_jets_over_bases(
    pipeline: Pipeline,
    tap: str,
    bases: Sequence,
    design: ProbeDesign,
    rng: RngStream,
    ridge: RidgePolicy = DEFAULT_RIDGE,
    resample_per_base: bool = False,
    max_workers: Optional[int] = None,
) -> list[Jet]:
    """Estimate one jet per base point.

    By default a single probe batch drawn from ``rng.child(0)`` is shared
    across all bases; with ``resample_per_base`` the batch for base ``s``
    comes from ``rng.child(1 + s)``. Either way the result depends only on
    (seed, base order), including under parallel execution, where results
    are returned in base order regardless of completion order.
    """
    if len(bases) == 0:
        raise ValidationError("bases must be nonempty")
    base_vecs = [as_vector(b, f"base {s}") for s, b in enumerate(bases)]
    dim = base_vecs[0].shape[0]
    shared = None
    if not resample_per_base:
        shared = sample_probes(design, dim, rng.child(0))

    def one(s: int) -> Jet:
        batch = shared
        if batch is None:
            batch = sample_probes(design, dim, rng.child(1 + s))
        try:
            return estimate_jet(pipeline, tap, base_vecs[s], batch, ridge)
        except MojetError as exc:
            raise type(exc)(f"base {s}: {exc}") from exc

    if max_workers is not None and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(one, range(len(base_vecs))))
    return [one(s) for s in range(len(base_vecs))]
