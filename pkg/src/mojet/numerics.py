"""Dense linear-algebra substrate and deterministic Gaussian streams.

Everything downstream builds on three primitives: thin SVD, SPD solves, and
reproducible standard-normal sampling. Random streams are keyed by a
(seed, stream) pair fed to the Philox-4x64-10 counter-based generator, so a
port only needs to replicate Philox plus numpy's ziggurat normal sampler to
match sequences exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ShapeError, SingularSystemError, ValidationError

# Default tolerances; operations that take a tolerance argument use these
# as defaults rather than hard-coding them inline.
SVD_RECONSTRUCTION_RTOL = 1e-10
SPD_SYMMETRY_RTOL = 1e-12
SPD_RESIDUAL_RTOL = 1e-10
FULL_ROW_RANK_RTOL = 1e-8

# Named stream ids. Samplers with different roles draw from different
# streams so that e.g. adding probes never perturbs data generation.
STREAM_DATA = 1
STREAM_PROBES = 2
STREAM_INIT = 3
STREAM_BASES = 4

_MASK64 = (1 << 64) - 1
# splitmix64 constants (Steele, Lea, Flood 2014), used only to derive
# child stream ids.
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _SPLITMIX_GAMMA) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RngStream:
    """A deterministic random stream identified by (seed, stream).

    The 128-bit Philox key is ``seed | (stream << 64)`` with both values
    truncated to 64 bits. Streams with distinct ids are statistically
    independent; the same pair reproduces the same sequence on every run.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = (int(self.seed) & _MASK64) | ((int(self.stream) & _MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RngStream":
        """Derive substream ``index``; distinct indices give distinct streams."""
        if index < 0:
            raise ValidationError("child index must be nonnegative")
        mixed = _splitmix64((int(self.stream) + _SPLITMIX_GAMMA * (index + 1)) & _MASK64)
        return RngStream(self.seed, mixed)


def as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {arr.shape}")
    if arr.size < 1:
        raise ShapeError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


class Svd(NamedTuple):
    """Thin SVD ``u @ diag(s) @ vt`` with ``s`` sorted nonincreasing."""

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


def svd(m) -> Svd:
    """Thin singular value decomposition of a dense real matrix.

    Deterministic for a fixed input (LAPACK divide-and-conquer via numpy).
    Reconstruction holds to SVD_RECONSTRUCTION_RTOL in relative Frobenius
    norm; see the test suite for the independent Jacobi-rotation check.
    """
    arr = as_matrix(m)
    u, s, vt = np.linalg.svd(arr, full_matrices=False)
    return Svd(u, s, vt)


def solve_spd(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive definite ``a`` (Cholesky).

    Raises SingularSystemError when the factorization fails, i.e. ``a`` is
    numerically not positive definite.
    """
    a_arr = as_matrix(a, "a")
    n, m = a_arr.shape
    if n != m:
        raise ShapeError(f"a must be square, got {a_arr.shape}")
    b_arr = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b_arr)):
        raise ValidationError("b contains non-finite entries")
    if b_arr.shape[0] != n:
        raise ShapeError(f"b has {b_arr.shape[0]} rows, expected {n}")
    scale = max(1.0, float(np.abs(a_arr).max()))
    if float(np.abs(a_arr - a_arr.T).max()) > SPD_SYMMETRY_RTOL * scale:
        raise ValidationError("a is not symmetric within tolerance")
    try:
        factor = scipy.linalg.cho_factor(a_arr, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"matrix is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b_arr, check_finite=False)


def gaussian(rng: RngStream, n: int) -> np.ndarray:
    """n i.i.d. standard normal samples, deterministic per stream."""
    if n < 1:
        raise ValidationError(f"sample count must be >= 1, got {n}")
    return rng.generator().standard_normal(int(n))
