"""Synthetic data generators and the digits CSV loader.

Generators return (train, test) dataset pairs plus a ground-truth info
object where one exists. All sampling is keyed off named streams of a
single seed, so regenerating with the same seed is bit-reproducible and
adding consumers of other streams never perturbs the data.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import serialize
from .errors import DataFileError, ValidationError
from .numerics import STREAM_DATA, RngStream
from .training import Dataset, apply_standardizer, fit_standardizer


def gen_linreg(
    seed: int,
    n_train: int = 1000,
    n_test: int = 200,
    d: int = 10,
    noise_sigma: float = 0.1,
):
    """Gaussian-design linear regression ``y = x . beta + noise``.

    Returns (train, test, beta_star); beta_star has standard normal entries.
    """
    _check_sizes(n_train, n_test, d)
    if noise_sigma < 0:
        raise ValidationError("noise_sigma must be >= 0")
    g = RngStream(seed, STREAM_DATA).generator()
    beta = g.standard_normal(d)
    n = n_train + n_test
    x = g.standard_normal((n, d))
    y = x @ beta + noise_sigma * g.standard_normal(n)
    train = Dataset(x[:n_train], y[:n_train], "regression", "train")
    test = Dataset(x[n_train:], y[n_train:], "regression", "test")
    return train, test, beta


@dataclass(frozen=True, eq=False)
class LatentRegressionInfo:
    embed: np.ndarray  # d x k, orthonormal columns
    coeff_a: np.ndarray  # unit vector, smooth saturating direction
    coeff_b: np.ndarray  # unit vector orthogonal to coeff_a, quadratic direction
    quad_coeff: float
    z_train: np.ndarray
    z_test: np.ndarray


def gen_latent_regression(
    seed: int,
    n_train: int = 1000,
    n_test: int = 400,
    d: int = 8,
    k: int = 3,
    noise_x: float = 0.1,
    noise_y: float = 0.02,
    quad_coeff: float = 0.2,
):
    """Low-rank regression: x = E z + noise, y = tanh(a.z) + c (b.z)^2 + noise.

    The embedding E has orthonormal columns; a is a uniform random unit
    vector in latent space and b a unit vector orthogonal to a, so the
    target depends on exactly two latent directions.
    """
    _check_sizes(n_train, n_test, d)
    if not 1 <= k <= d:
        raise ValidationError(f"latent dim k must be in [1, {d}]")
    g = RngStream(seed, STREAM_DATA).generator()
    embed = np.linalg.qr(g.standard_normal((d, k)))[0]
    a = g.standard_normal(k)
    a /= np.linalg.norm(a)
    b = g.standard_normal(k)
    b -= (b @ a) * a
    b /= np.linalg.norm(b)
    n = n_train + n_test
    z = g.standard_normal((n, k))
    x = z @ embed.T + noise_x * g.standard_normal((n, d))
    y = np.tanh(z @ a) + quad_coeff * (z @ b) ** 2 + noise_y * g.standard_normal(n)
    train = Dataset(x[:n_train], y[:n_train], "regression", "train")
    test = Dataset(x[n_train:], y[n_train:], "regression", "test")
    info = LatentRegressionInfo(embed, a, b, quad_coeff, z[:n_train], z[n_train:])
    return train, test, info


@dataclass(frozen=True, eq=False)
class MixtureInfo:
    embed: np.ndarray  # d x k, orthonormal columns
    class_means: np.ndarray  # C x k
    class_sep: float


def gen_mixture_classification(
    seed: int,
    n_train: int = 1500,
    n_test: int = 600,
    d: int = 20,
    k: int = 3,
    n_classes: int = 3,
    class_sep: float = 2.2,
    latent_sigma: float = 1.0,
    noise_x: float = 0.3,
):
    """Latent Gaussian mixture embedded in ambient space.

    Class c has latent mean ``class_sep * e_c`` (pairwise distance
    class_sep * sqrt(2)); latent samples get within-class spread
    ``latent_sigma`` before embedding plus ambient noise. Labels are exactly
    balanced and shuffled deterministically.
    """
    _check_sizes(n_train, n_test, d)
    if n_classes < 2 or n_classes > k:
        raise ValidationError("need 2 <= n_classes <= latent dim")
    g = RngStream(seed, STREAM_DATA).generator()
    embed = np.linalg.qr(g.standard_normal((d, k)))[0]
    means = np.zeros((n_classes, k))
    for c in range(n_classes):
        means[c, c] = class_sep

    def draw(n: int):
        labels = np.arange(n) % n_classes
        labels = labels[g.permutation(n)]
        z = means[labels] + latent_sigma * g.standard_normal((n, k))
        x = z @ embed.T + noise_x * g.standard_normal((n, d))
        return x, labels

    x_tr, y_tr = draw(n_train)
    x_te, y_te = draw(n_test)
    train = Dataset(x_tr, y_tr, "classification", "train")
    test = Dataset(x_te, y_te, "classification", "test")
    return train, test, MixtureInfo(embed, means, class_sep)


# --- digits ----------------------------------------------------------------

DIGITS_FEATURES = 64
DIGITS_CLASSES = 10


def stratified_split_indices(labels: np.ndarray, test_fraction: float, rng: RngStream):
    """Per-class split using largest-remainder quota allocation.

    The train total is floor((1 - test_fraction) * N). Each class gets the
    floor of its proportional quota; remaining train slots go to the classes
    with the largest fractional remainders (ties broken by smaller label).
    Rows within a class are assigned by a seeded permutation.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError("test_fraction must be in (0, 1)")
    labels = np.asarray(labels, dtype=int)
    classes = np.unique(labels)
    counts = np.array([(labels == c).sum() for c in classes])
    train_frac = 1.0 - test_fraction
    n_train_total = int(np.floor(train_frac * labels.shape[0]))
    quota = train_frac * counts
    base = np.floor(quota).astype(int)
    remainder = quota - base
    extra = n_train_total - base.sum()
    order = np.lexsort((classes, -remainder))
    take = base.copy()
    for pos in order[:extra]:
        take[pos] += 1
    g = rng.generator()
    train_idx, test_idx = [], []
    for c, n_tr in zip(classes, take):
        idx = np.flatnonzero(labels == c)
        idx = idx[g.permutation(idx.shape[0])]
        train_idx.extend(idx[:n_tr])
        test_idx.extend(idx[n_tr:])
    return np.array(sorted(train_idx)), np.array(sorted(test_idx))


def load_digits(
    path,
    seed: int = 0,
    test_fraction: float = 0.2,
    standardize: bool = True,
):
    """Load 8x8 digits from a CSV of 64 feature columns plus a label column.

    A non-numeric first row is treated as a header. The split is stratified
    by class with the given seed; when ``standardize`` is set the features
    are standardized with statistics fit on the train split only.
    """
    if not os.path.exists(path):
        raise DataFileError(f"digits file not found: {path}")
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if line_no == 1:
                try:
                    float(cells[0])
                except ValueError:
                    continue  # header
            if len(cells) != DIGITS_FEATURES + 1:
                raise DataFileError(
                    f"line {line_no}: expected {DIGITS_FEATURES + 1} columns, "
                    f"got {len(cells)}"
                )
            try:
                values = [float(c) for c in cells]
            except ValueError as exc:
                raise DataFileError(f"line {line_no}: non-numeric cell ({exc})") from exc
            label = values[-1]
            if label != int(label) or not 0 <= int(label) < DIGITS_CLASSES:
                raise DataFileError(
                    f"line {line_no}: label must be an integer in 0..9, got {label}"
                )
            rows.append(values)
    if not rows:
        raise DataFileError(f"no data rows in {path}")
    arr = np.array(rows)
    x, y = arr[:, :-1], arr[:, -1].astype(int)
    train_idx, test_idx = stratified_split_indices(
        y, test_fraction, RngStream(seed, STREAM_DATA)
    )
    train = Dataset(x[train_idx], y[train_idx], "classification", "train")
    test = Dataset(x[test_idx], y[test_idx], "classification", "test")
    if standardize:
        scaler = fit_standardizer(train)
        train = apply_standardizer(scaler, train)
        test = apply_standardizer(scaler, test)
    return train, test


def write_digits_csv(x: np.ndarray, y: np.ndarray, path) -> None:
    """Write a digits-format CSV (64 features + integer label, no header)."""
    rows = [list(map(float, xi)) + [int(yi)] for xi, yi in zip(x, y)]
    serialize.write_csv(
        path,
        tuple(f"p{i}" for i in range(DIGITS_FEATURES)) + ("label",),
        rows,
    )


_GLYPHS = {
    0: ("..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####..", "........"),
    1: ("...##...", "..###...", "...##...", "...##...", "...##...", "...##...", ".######.", "........"),
    2: ("..####..", ".#....#.", "......#.", ".....#..", "...##...", "..#.....", ".######.", "........"),
    3: ("..####..", ".#....#.", "......#.", "...###..", "......#.", ".#....#.", "..####..", "........"),
    4: ("....##..", "...#.#..", "..#..#..", ".#...#..", ".######.", ".....#..", ".....#..", "........"),
    5: (".######.", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####..", "........"),
    6: ("..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", "..####..", "........"),
    7: (".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "........"),
    8: ("..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", "..####..", "........"),
    9: ("..####..", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", "..####..", "........"),
}


def _glyph_array(digit: int) -> np.ndarray:
    rows = _GLYPHS[digit]
    return np.array([[1.0 if ch == "#" else 0.0 for ch in row] for row in rows])


def gen_synthetic_digits(seed: int, n_per_class: int = 125):
    """Stroke-like synthetic stand-in for the 8x8 digits data.

    Each sample is a digit glyph with a random one-pixel shift, random ink
    intensity, and additive noise, clipped to the 0..16 intensity range of
    the real data. Intended as an offline fallback, not a benchmark.
    """
    if n_per_class < 1:
        raise ValidationError("n_per_class must be >= 1")
    g = RngStream(seed, STREAM_DATA).generator()
    images = []
    labels = []
    for digit in range(DIGITS_CLASSES):
        glyph = _glyph_array(digit)
        for _ in range(n_per_class):
            dy, dx = g.integers(-1, 2, size=2)
            shifted = np.roll(np.roll(glyph, dy, axis=0), dx, axis=1)
            intensity = 10.0 + 4.0 * g.random()
            img = shifted * intensity + g.normal(0.0, 1.0, size=(8, 8))
            images.append(np.clip(img, 0.0, 16.0).ravel())
            labels.append(digit)
    x = np.array(images)
    y = np.array(labels)
    order = g.permutation(x.shape[0])
    return x[order], y[order]


def _check_sizes(n_train: int, n_test: int, d: int) -> None:
    if n_train < 1 or n_test < 1 or d < 1:
        raise ValidationError("sizes must be positive")
