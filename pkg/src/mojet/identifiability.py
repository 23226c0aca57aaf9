"""Mirage families and jet-based recovery for two-module linear pipelines.

For a bias-free factorization f(x) = w . (H x), every invertible r x r
matrix Q yields an alternative decomposition (Q H, Q^{-T} w) with exactly
the same input-output map: risk-level evaluation cannot tell the family
members apart. Jets at the bottleneck tap do: the tapped Jacobian equals
the member's own H, so observing jets pins the factorization down whenever
H has full row rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    NotLinearError,
    ShapeError,
    UnidentifiableError,
    ValidationError,
)
from .jets import Jet, ZeroRidge, estimate_jet
from .numerics import FULL_ROW_RANK_RTOL, RngStream, as_matrix, as_vector, svd
from .pipeline import compose_two_module_linear
from .probes import ProbeBatch, check_full_column_rank

COMPOSITION_RTOL = 1e-10
JACOBIAN_SPREAD_RTOL = 1e-6
AFFINE_SPAN_RTOL = 1e-8
DEFAULT_COND_MAX = 1e3
# Entrywise scale of the Gaussian offset G in Q = I + G.
DEFAULT_Q_SPREAD = 0.2
_MAX_REJECTION_RETRIES = 100


@dataclass(frozen=True, eq=False)
class LinearFactorization:
    """A bottleneck factorization (H, w) of the map x -> w . (H x)."""

    H: np.ndarray
    w: np.ndarray
    full_row_rank: bool = True

    def __post_init__(self):
        h = as_matrix(self.H, "H")
        w = as_vector(self.w, "w")
        if w.shape[0] != h.shape[0]:
            raise ShapeError("w length must equal H row count")
        if h.shape[0] > h.shape[1]:
            raise ValidationError("H must have at most as many rows as columns")
        s = svd(h).s
        frr = bool(s[0] > 0 and s[-1] > FULL_ROW_RANK_RTOL * s[0])
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "full_row_rank", frr)

    @property
    def bottleneck_dim(self) -> int:
        return self.H.shape[0]

    @property
    def input_dim(self) -> int:
        return self.H.shape[1]

    def predict(self, x) -> float:
        return float(self.w @ (self.H @ as_vector(x)))


@dataclass(frozen=True, eq=False)
class MirageMember:
    """One reparameterized decomposition (Q H, Q^{-T} w) of a factorization."""

    Q: np.ndarray
    H_Q: np.ndarray
    w_Q: np.ndarray


def make_mirage_member(f: LinearFactorization, q) -> MirageMember:
    """Build the family member for an explicit invertible Q, with checks."""
    q_arr = as_matrix(q, "Q")
    r = f.bottleneck_dim
    if q_arr.shape != (r, r):
        raise ShapeError(f"Q must be {r}x{r}, got {q_arr.shape}")
    s = svd(q_arr).s
    if s[-1] == 0.0:
        raise ValidationError("Q is singular")
    h_q = q_arr @ f.H
    w_q = np.linalg.solve(q_arr.T, f.w)
    composed = w_q @ h_q
    reference = f.w @ f.H
    scale = max(1.0, float(np.abs(reference).max()))
    if float(np.abs(composed - reference).max()) > COMPOSITION_RTOL * scale:
        raise ValidationError("member violates the composition invariant")
    return MirageMember(Q=q_arr, H_Q=h_q, w_Q=w_q)


def mirage_family(
    f: LinearFactorization,
    n: int,
    rng: RngStream,
    cond_max: float = DEFAULT_COND_MAX,
    q_spread: float = DEFAULT_Q_SPREAD,
) -> list[MirageMember]:
    """Sample n members of the invertible-reparameterization family.

    Each Q is I + G with Gaussian G (entry scale ``q_spread``), rejected
    until its condition number is at most ``cond_max`` so that downstream
    invariance checks are not swamped by ill-conditioning.
    """
    if n < 1:
        raise ValidationError(f"member count must be >= 1, got {n}")
    if cond_max < 1.0:
        raise ValidationError(f"cond_max must be >= 1, got {cond_max}")
    r = f.bottleneck_dim
    g = rng.generator()
    members = []
    for _ in range(n):
        for attempt in range(_MAX_REJECTION_RETRIES):
            q = np.eye(r) + q_spread * g.standard_normal((r, r))
            s = svd(q).s
            if s[-1] > 0 and s[0] / s[-1] <= cond_max:
                members.append(make_mirage_member(f, q))
                break
        else:
            raise ValidationError(
                f"could not sample a Q with condition <= {cond_max} "
                f"in {_MAX_REJECTION_RETRIES} tries"
            )
    return members


@dataclass(frozen=True, eq=False)
class RecoveredFactorization:
    """Recovery output: the factorization plus fit quality measures."""

    factorization: LinearFactorization
    residual: float
    jacobian_spread: float


def recover_factorization(
    jets: Sequence[Jet],
    outputs: Sequence[tuple],
) -> RecoveredFactorization:
    """Recover (H, w) from bottleneck jets and input-output pairs.

    H is the common jet Jacobian (jets must agree to JACOBIAN_SPREAD_RTOL,
    else the tap is not globally linear); w solves the least-squares system
    w . (H x_i) = f(x_i) over the provided pairs. The jets' base points must
    not lie in a proper affine subspace: the base matrix augmented with a
    constant column must have full column rank, which requires at least
    dim + 1 base points.
    """
    if len(jets) < 2:
        raise ValidationError("need at least two jets")
    if len(outputs) == 0:
        raise ValidationError("need at least one (x, f(x)) pair")
    jacs = np.stack([j.jacobian for j in jets])
    mean_jac = jacs.mean(axis=0)
    scale = float(np.linalg.norm(mean_jac))
    if scale == 0.0:
        raise UnidentifiableError("jets are identically zero")
    spread = float(
        max(np.linalg.norm(j - mean_jac) for j in jacs) / scale
    )
    if spread > JACOBIAN_SPREAD_RTOL:
        raise NotLinearError(
            f"jet Jacobians differ across bases (relative spread {spread:.2e}); "
            "the tapped module is not globally linear"
        )

    base_matrix = np.stack([j.base_point for j in jets])
    augmented = np.hstack([base_matrix, np.ones((base_matrix.shape[0], 1))])
    s_aug = svd(augmented).s
    if (
        augmented.shape[0] < augmented.shape[1]
        or s_aug[-1] <= AFFINE_SPAN_RTOL * s_aug[0]
    ):
        raise ValidationError(
            "base points lie in a proper affine subspace; recovery needs at "
            f"least {base_matrix.shape[1] + 1} affinely independent base points"
        )

    # Value consistency: a bias-free linear tap must satisfy z = H x.
    for s_idx, jet in enumerate(jets):
        predicted = mean_jac @ jet.base_point
        vscale = max(1.0, float(np.abs(predicted).max()))
        if float(np.abs(predicted - jet.base_value).max()) > JACOBIAN_SPREAD_RTOL * vscale:
            raise NotLinearError(
                f"jet {s_idx} base value is inconsistent with a bias-free "
                "linear tap"
            )

    s_h = svd(mean_jac).s
    if s_h[-1] <= FULL_ROW_RANK_RTOL * s_h[0]:
        raise UnidentifiableError(
            "recovered H is row-rank deficient; the head weights are not "
            "uniquely determined"
        )

    xs = np.stack([as_vector(x, "output x") for x, _ in outputs])
    fs = np.array([float(v) for _, v in outputs])
    design = xs @ mean_jac.T
    s_d = svd(design).s if design.shape[0] >= design.shape[1] else np.zeros(1)
    if design.shape[0] < design.shape[1] or s_d[-1] <= AFFINE_SPAN_RTOL * s_d[0]:
        raise ValidationError(
            "output pairs do not span the bottleneck; provide more pairs"
        )
    w, _, _, _ = np.linalg.lstsq(design, fs, rcond=None)
    residual = float(
        np.linalg.norm(design @ w - fs) / max(1.0, np.linalg.norm(fs))
    )
    return RecoveredFactorization(
        factorization=LinearFactorization(mean_jac, w),
        residual=residual,
        jacobian_spread=spread,
    )


def corollary_check(h, batch: ProbeBatch) -> float:
    """Relative error of the unregularized jet against the true Jacobian.

    Builds the noiseless two-module pipeline for H, estimates the bottleneck
    jet with zero ridge from the given full-column-rank probe batch, and
    returns ||A - H||_F / ||H||_F. Exactness (up to roundoff) is guaranteed
    for any full-column-rank probe matrix.
    """
    h_arr = as_matrix(h, "H")
    if not check_full_column_rank(batch):
        raise ValidationError("probe batch must have full column rank")
    if batch.dim != h_arr.shape[1]:
        raise ShapeError(
            f"probe dimension {batch.dim} != H column count {h_arr.shape[1]}"
        )
    pipe = compose_two_module_linear(h_arr, np.ones(h_arr.shape[0]))
    jet = estimate_jet(pipe, "bottleneck", np.zeros(h_arr.shape[1]), batch, ZeroRidge())
    return float(
        np.linalg.norm(jet.jacobian - h_arr) / np.linalg.norm(h_arr)
    )
