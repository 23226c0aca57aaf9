"""Rank and subspace-similarity diagnostics over collections of jets.

Two summaries are computed from each Jacobian: its numerical rank (singular
values above a relative tolerance) and, for pairs of Jacobians sharing an
input space, the mean cosine of the principal angles between their dominant
input-space row subspaces. Aggregation turns per-base results into a report
with summary statistics, a coarse mirage/separated/mixed flag per pair, and
the forward-pass cost counters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import serialize
from .errors import (
    DegenerateSpectrumError,
    ShapeError,
    UndefinedSimilarityError,
    ValidationError,
)
from .jets import Jet
from .numerics import as_matrix, svd

DEFAULT_RANK_RTOL = 1e-6
DEFAULT_RETAIN_RTOL = 1e-6
# Singular values below this relative floor never count toward a retained
# subspace, even when an explicit dimension asks for more.
RETAIN_FLOOR_RTOL = 1e-12
DEFAULT_THETA_HI = 0.95
DEFAULT_THETA_LO = 0.7


@dataclass(frozen=True, eq=False)
class RankResult:
    rank: int
    singular_values: np.ndarray
    tol_rel: float


def numerical_rank(a, tol_rel: float = DEFAULT_RANK_RTOL) -> RankResult:
    """Count of singular values above ``tol_rel`` times the largest one."""
    if not 0.0 < tol_rel < 1.0:
        raise ValidationError(f"tol_rel must be in (0, 1), got {tol_rel}")
    s = svd(a).s
    if s[0] == 0.0:
        return RankResult(0, s, tol_rel)
    rank = int(np.sum(s > tol_rel * s[0]))
    return RankResult(rank, s, tol_rel)


@dataclass(frozen=True)
class RelativeThreshold:
    """Retain singular directions with value above tol_rel * largest."""

    tol_rel: float = DEFAULT_RETAIN_RTOL

    def __post_init__(self):
        if not 0.0 < self.tol_rel < 1.0:
            raise ValidationError(f"tol_rel must be in (0, 1), got {self.tol_rel}")


@dataclass(frozen=True)
class FixedDimension:
    """Retain the leading k directions, capped at the available rank."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")


RetainRule = Union[RelativeThreshold, FixedDimension]


def row_space_basis(a, retain: RetainRule = RelativeThreshold()) -> np.ndarray:
    """Orthonormal basis (columns) for the dominant row space of ``a``.

    Columns are the leading right singular vectors retained per ``retain``.
    Raises UndefinedSimilarityError for an all-zero matrix.
    """
    arr = as_matrix(a)
    _, s, vt = svd(arr)
    if s[0] == 0.0:
        raise UndefinedSimilarityError("matrix has no nonzero singular value")
    available = int(np.sum(s > RETAIN_FLOOR_RTOL * s[0]))
    if isinstance(retain, RelativeThreshold):
        k = int(np.sum(s > retain.tol_rel * s[0]))
    elif isinstance(retain, FixedDimension):
        k = min(retain.k, available)
    else:
        raise ValidationError(f"unknown retain rule {type(retain).__name__}")
    k = max(1, min(k, available))
    return vt[:k].T


@dataclass(frozen=True, eq=False)
class JetSimResult:
    score: float
    k_a: int
    k_b: int
    cosines: np.ndarray


def jet_sim(a, b, retain: RetainRule = RelativeThreshold()) -> JetSimResult:
    """Mean cosine of principal angles between dominant row spaces of a and b.

    1 means identical retained subspaces, 0 means orthogonal ones. The
    number of principal angles is min of the two retained dimensions, and
    the score is symmetric in its arguments.
    """
    a_arr = as_matrix(a, "a")
    b_arr = as_matrix(b, "b")
    if a_arr.shape[1] != b_arr.shape[1]:
        raise ShapeError(
            f"matrices act on different input spaces: {a_arr.shape[1]} vs {b_arr.shape[1]}"
        )
    u_a = row_space_basis(a_arr, retain)
    u_b = row_space_basis(b_arr, retain)
    cosines = np.clip(svd(u_a.T @ u_b).s, 0.0, 1.0)
    return JetSimResult(
        score=float(cosines.mean()),
        k_a=u_a.shape[1],
        k_b=u_b.shape[1],
        cosines=cosines,
    )


def select_k_variance(jets: Sequence, rho: float) -> int:
    """Smallest k capturing a fraction rho of the jets' input-space variance.

    Stacks all Jacobians row-wise into A and uses the eigenvalues of
    C = A^T A / N (N = total stacked rows), which are the squared singular
    values of A divided by N.
    """
    if not 0.0 < rho < 1.0:
        raise ValidationError(f"rho must be in (0, 1), got {rho}")
    mats = [j.jacobian if isinstance(j, Jet) else as_matrix(j) for j in jets]
    if len(mats) == 0:
        raise ValidationError("jets must be nonempty")
    stacked = np.vstack(mats)
    s = svd(stacked).s
    eigs = s * s
    total = eigs.sum()
    if total == 0.0:
        raise DegenerateSpectrumError("all jets are zero; variance rule undefined")
    fractions = np.cumsum(eigs) / total
    return int(np.searchsorted(fractions, rho) + 1)


@dataclass
class CostCounters:
    """Forward-pass accounting: probe passes exclude base-point evaluations."""

    probe_passes: int = 0
    base_passes: int = 0
    wall_time: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "probe_passes": int(self.probe_passes),
            "base_passes": int(self.base_passes),
            "wall_time": float(self.wall_time),
        }


def _summary(values: np.ndarray) -> dict:
    return {
        "mean": float(np.mean(values)),
        "median": float(np.median(values)),
        "p25": float(np.percentile(values, 25)),
        "p75": float(np.percentile(values, 75)),
    }


@dataclass
class DiagnosticsReport:
    """Per-base ranks and similarities plus derived summaries and flags."""

    ranks: dict[str, list[RankResult]]
    jetsim: dict[tuple[str, str], list[JetSimResult]]
    theta_hi: float
    theta_lo: float
    cost: CostCounters = field(default_factory=CostCounters)

    def rank_summary(self) -> dict[str, dict]:
        return {
            tap: _summary(np.array([r.rank for r in results], dtype=float))
            for tap, results in self.ranks.items()
        }

    def jetsim_summary(self) -> dict[tuple[str, str], dict]:
        return {
            pair: _summary(np.array([r.score for r in results]))
            for pair, results in self.jetsim.items()
        }

    def mirage_flags(self) -> dict[tuple[str, str], str]:
        """Per-pair flag; thresholds are reported alongside the raw scores.

        'mirage-like': mean similarity >= theta_hi and equal rank multisets.
        'separated': mean similarity <= theta_lo or different median ranks.
        'mixed': anything else. The thresholds are artifact policy, not a
        property of the method; consumers can re-threshold the raw scores.
        """
        flags = {}
        for pair, results in self.jetsim.items():
            mean_sim = float(np.mean([r.score for r in results]))
            ranks_a = sorted(r.rank for r in self.ranks.get(pair[0], []))
            ranks_b = sorted(r.rank for r in self.ranks.get(pair[1], []))
            med_a = float(np.median(ranks_a)) if ranks_a else float("nan")
            med_b = float(np.median(ranks_b)) if ranks_b else float("nan")
            if mean_sim <= self.theta_lo or med_a != med_b:
                flags[pair] = "separated"
            elif mean_sim >= self.theta_hi and ranks_a == ranks_b:
                flags[pair] = "mirage-like"
            else:
                flags[pair] = "mixed"
        return flags

    def to_json_dict(self) -> dict:
        return {
            "ranks": {
                tap: [
                    {
                        "rank": r.rank,
                        "singular_values": serialize.vector_to_list(r.singular_values),
                        "tol_rel": r.tol_rel,
                    }
                    for r in results
                ]
                for tap, results in self.ranks.items()
            },
            "jetsim": {
                "|".join(pair): [
                    {
                        "score": r.score,
                        "k_a": r.k_a,
                        "k_b": r.k_b,
                        "cosines": serialize.vector_to_list(r.cosines),
                    }
                    for r in results
                ]
                for pair, results in self.jetsim.items()
            },
            "rank_summary": self.rank_summary(),
            "jetsim_summary": {
                "|".join(pair): stats for pair, stats in self.jetsim_summary().items()
            },
            "mirage_flags": {
                "|".join(pair): flag for pair, flag in self.mirage_flags().items()
            },
            "thresholds": {"theta_hi": self.theta_hi, "theta_lo": self.theta_lo},
            "cost": self.cost.to_json_dict(),
        }

    def write_ranks_csv(self, path) -> None:
        rows = []
        for tap, results in self.ranks.items():
            for base_id, r in enumerate(results):
                s1 = float(r.singular_values[0])
                s_k = float(r.singular_values[r.rank - 1]) if r.rank > 0 else 0.0
                rows.append((base_id, tap, r.rank, s1, s_k))
        serialize.write_csv(path, ("base_id", "tap", "rank", "s1", "s_k"), rows)

    def write_jetsim_csv(self, path) -> None:
        rows = []
        for pair, results in self.jetsim.items():
            name = "|".join(pair)
            for base_id, r in enumerate(results):
                rows.append((base_id, name, r.score))
        serialize.write_csv(path, ("base_id", "pair", "score"), rows)


def aggregate(
    ranks: dict[str, Sequence[RankResult]],
    jetsim: dict[tuple[str, str], Sequence[JetSimResult]],
    cost: CostCounters | None = None,
    theta_hi: float = DEFAULT_THETA_HI,
    theta_lo: float = DEFAULT_THETA_LO,
) -> DiagnosticsReport:
    """Assemble per-base results into a diagnostics report.

    Every pair being compared must reference rank entries with consistent
    base counts so the summaries remain recomputable from the raw entries.
    """
    if not ranks and not jetsim:
        raise ValidationError("nothing to aggregate")
    lengths = {tap: len(v) for tap, v in ranks.items()}
    for pair, scores in jetsim.items():
        for tap in pair:
            if tap in lengths and lengths[tap] != len(scores):
                raise ValidationError(
                    f"pair {pair} has {len(scores)} scores but tap {tap!r} "
                    f"has {lengths[tap]} rank entries"
                )
    return DiagnosticsReport(
        ranks={tap: list(v) for tap, v in ranks.items()},
        jetsim={pair: list(v) for pair, v in jetsim.items()},
        theta_hi=theta_hi,
        theta_lo=theta_lo,
        cost=cost or CostCounters(),
    )
