import numpy as np
import pytest

from mojet import (
    ExplicitBasis,
    Isotropic,
    RngStream,
    STREAM_PROBES,
    ShapeError,
    SubspaceAligned,
    ValidationError,
    check_full_column_rank,
    sample_probes,
)
from mojet.probes import design_from_json_dict, design_to_json_dict


def _rng(i=0):
    return RngStream(42, STREAM_PROBES).child(i)


class TestSampling:
    def test_explicit_identity(self):
        batch = sample_probes(ExplicitBasis(np.eye(4)), 4, _rng())
        np.testing.assert_array_equal(batch.delta, np.eye(4))

    def test_subspace_rows_stay_in_span(self):
        basis = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        batch = sample_probes(SubspaceAligned(basis, sigma=0.1, count=50), 3, _rng())
        np.testing.assert_array_equal(batch.delta[:, 2], np.zeros(50))

    def test_isotropic_std_concentration(self):
        batch = sample_probes(Isotropic(sigma=0.01, count=10_000), 4, _rng(1))
        stds = batch.delta.std(axis=0)
        assert np.all(stds >= 0.0097) and np.all(stds <= 0.0103)

    def test_determinism(self):
        design = Isotropic(sigma=0.5, count=8)
        a = sample_probes(design, 3, _rng(2)).delta
        b = sample_probes(design, 3, _rng(2)).delta
        np.testing.assert_array_equal(a, b)

    def test_sigma_scaling_is_exact(self):
        a = sample_probes(Isotropic(sigma=0.1, count=6), 5, _rng(3)).delta
        b = sample_probes(Isotropic(sigma=0.2, count=6), 5, _rng(3)).delta
        np.testing.assert_array_equal(b, 2.0 * a)

    def test_invalid_sigma(self):
        with pytest.raises(ValidationError):
            Isotropic(sigma=0.0)
        with pytest.raises(ValidationError):
            Isotropic(sigma=0.1, count=0)

    def test_dimension_mismatch(self):
        basis = np.eye(2)
        with pytest.raises(ShapeError):
            sample_probes(SubspaceAligned(basis, 0.1), 5, _rng())
        with pytest.raises(ShapeError):
            sample_probes(ExplicitBasis(np.eye(3)), 4, _rng())

    def test_basis_must_be_orthonormal(self):
        with pytest.raises(ValidationError):
            SubspaceAligned(np.array([[1.0, 1.0]]), 0.1)

    def test_explicit_zero_row_rejected(self):
        with pytest.raises(ValidationError):
            ExplicitBasis(np.array([[1.0, 0.0], [0.0, 0.0]]))


class TestColumnRank:
    def test_identity_full_rank(self):
        assert check_full_column_rank(sample_probes(ExplicitBasis(np.eye(5)), 5, _rng()))

    def test_fewer_probes_than_dims(self):
        batch = sample_probes(Isotropic(sigma=1.0, count=3), 5, _rng(4))
        assert not check_full_column_rank(batch)

    def test_duplicated_rows_rank_one(self):
        row = np.ones((1, 3))
        batch = sample_probes(ExplicitBasis(np.repeat(row, 6, axis=0)), 3, _rng())
        assert not check_full_column_rank(batch)

    def test_subspace_never_full_rank(self):
        basis = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 2)))[0].T
        for i in range(5):
            batch = sample_probes(SubspaceAligned(basis, 0.3, count=20), 5, _rng(i))
            assert not check_full_column_rank(batch)


class TestSerialization:
    def test_round_trips(self):
        basis = np.linalg.qr(np.random.default_rng(1).standard_normal((4, 2)))[0].T
        designs = [
            Isotropic(sigma=0.25, count=12),
            SubspaceAligned(basis, sigma=0.01, count=7),
            ExplicitBasis(np.eye(3)),
        ]
        for design in designs:
            doc = design_to_json_dict(design)
            back = design_from_json_dict(doc)
            assert type(back) is type(design)
            batch_a = sample_probes(design, doc.get("basis") and 4 or 3, _rng(5))
            batch_b = sample_probes(back, doc.get("basis") and 4 or 3, _rng(5))
            np.testing.assert_array_equal(batch_a.delta, batch_b.delta)
