"""Perturbation designs and probe-matrix assembly.

A probe design describes a family of input perturbations; sampling it for a
given input dimension produces the probe matrix whose rows are the
individual perturbation vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import serialize
from .errors import ShapeError, ValidationError
from .numerics import RngStream, as_matrix, svd

DEFAULT_PROBE_COUNT = 32
DEFAULT_PROBE_SIGMA = 1e-2
BASIS_ORTHONORMAL_ATOL = 1e-8
FULL_COLUMN_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class Isotropic:
    """Rows i.i.d. N(0, sigma^2 I_d)."""

    sigma: float = DEFAULT_PROBE_SIGMA
    count: int = DEFAULT_PROBE_COUNT

    def __post_init__(self):
        _check_sigma_count(self.sigma, self.count)


@dataclass(frozen=True, eq=False)
class SubspaceAligned:
    """Rows are random combinations of orthonormal basis rows, scaled by sigma."""

    basis: np.ndarray
    sigma: float = DEFAULT_PROBE_SIGMA
    count: int = DEFAULT_PROBE_COUNT

    def __post_init__(self):
        _check_sigma_count(self.sigma, self.count)
        b = as_matrix(self.basis, "basis")
        defect = float(np.abs(b @ b.T - np.eye(b.shape[0])).max())
        if defect > BASIS_ORTHONORMAL_ATOL:
            raise ValidationError(f"basis rows not orthonormal (defect {defect:.2e})")
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "basis", b)


@dataclass(frozen=True, eq=False)
class ExplicitBasis:
    """Rows are taken verbatim from a user-supplied matrix."""

    deltas: np.ndarray

    def __post_init__(self):
        d = as_matrix(self.deltas, "deltas")
        if np.any(np.linalg.norm(d, axis=1) == 0.0):
            raise ValidationError("explicit probe rows must be nonzero")
        d = d.copy()
        d.flags.writeable = False
        object.__setattr__(self, "deltas", d)

    @property
    def count(self) -> int:
        return self.deltas.shape[0]


ProbeDesign = Union[Isotropic, SubspaceAligned, ExplicitBasis]


def _check_sigma_count(sigma: float, count: int) -> None:
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if count < 1:
        raise ValidationError(f"probe count must be >= 1, got {count}")


@dataclass(frozen=True, eq=False)
class ProbeBatch:
    """Sampled probe matrix (count x dim) plus the design that produced it."""

    delta: np.ndarray
    design: ProbeDesign

    def __post_init__(self):
        object.__setattr__(self, "delta", as_matrix(self.delta, "delta"))

    @property
    def count(self) -> int:
        return self.delta.shape[0]

    @property
    def dim(self) -> int:
        return self.delta.shape[1]


def sample_probes(design: ProbeDesign, dim: int, rng: RngStream) -> ProbeBatch:
    """Draw the probe matrix for ``design`` in input dimension ``dim``.

    Sampling is deterministic in (design, dim, rng), and the standard-normal
    draws are made before scaling by sigma, so doubling sigma on the same
    stream exactly doubles the probe matrix.
    """
    if dim < 1:
        raise ShapeError(f"dimension must be >= 1, got {dim}")
    if isinstance(design, Isotropic):
        g = rng.generator()
        delta = design.sigma * g.standard_normal((design.count, dim))
    elif isinstance(design, SubspaceAligned):
        if design.basis.shape[1] != dim:
            raise ShapeError(
                f"basis is for dimension {design.basis.shape[1]}, requested {dim}"
            )
        g = rng.generator()
        coeff = g.standard_normal((design.count, design.basis.shape[0]))
        delta = design.sigma * (coeff @ design.basis)
    elif isinstance(design, ExplicitBasis):
        if design.deltas.shape[1] != dim:
            raise ShapeError(
                f"explicit probes have dimension {design.deltas.shape[1]}, requested {dim}"
            )
        delta = design.deltas.copy()
    else:
        raise ValidationError(f"unknown probe design {type(design).__name__}")
    return ProbeBatch(delta, design)


def check_full_column_rank(batch: ProbeBatch, tol_rel: float = FULL_COLUMN_RANK_RTOL) -> bool:
    """True iff the probe matrix has full column rank at relative tolerance."""
    if batch.count < batch.dim:
        return False
    s = svd(batch.delta).s
    if s[0] == 0.0:
        return False
    return bool(s[-1] > tol_rel * s[0])


def design_to_json_dict(design: ProbeDesign) -> dict:
    if isinstance(design, Isotropic):
        return {"kind": "isotropic", "sigma": design.sigma, "count": design.count}
    if isinstance(design, SubspaceAligned):
        return {
            "kind": "subspace_aligned",
            "sigma": design.sigma,
            "count": design.count,
            "basis": serialize.matrix_to_lists(design.basis),
        }
    if isinstance(design, ExplicitBasis):
        return {"kind": "explicit", "deltas": serialize.matrix_to_lists(design.deltas)}
    raise ValidationError(f"unknown probe design {type(design).__name__}")


def design_from_json_dict(doc: dict) -> ProbeDesign:
    kind = doc.get("kind")
    if kind == "isotropic":
        return Isotropic(sigma=doc["sigma"], count=doc["count"])
    if kind == "subspace_aligned":
        return SubspaceAligned(
            basis=np.array(doc["basis"]), sigma=doc["sigma"], count=doc["count"]
        )
    if kind == "explicit":
        return ExplicitBasis(np.array(doc["deltas"]))
    raise ValidationError(f"unknown probe design kind {kind!r}")
