import numpy as np
import pytest

from mojet import (
    RngStream,
    STREAM_DATA,
    STREAM_PROBES,
    SingularSystemError,
    ValidationError,
    gaussian,
    solve_spd,
    svd,
)

from oracles import adjugate_inverse_2x2, jacobi_svd


class TestSvd:
    def test_identity(self):
        res = svd(np.eye(3))
        np.testing.assert_allclose(res.s, [1.0, 1.0, 1.0])

    def test_diagonal(self):
        res = svd(np.diag([3.0, 2.0, 0.0]))
        np.testing.assert_allclose(res.s, [3.0, 2.0, 0.0], atol=1e-14)

    def test_random_reconstruction_and_jacobi_oracle(self):
        g = np.random.default_rng(7)
        m = g.standard_normal((5, 3))
        res = svd(m)
        recon = res.u @ np.diag(res.s) @ res.vt
        assert np.linalg.norm(recon - m) <= 1e-10 * np.linalg.norm(m)
        _, s_ref, _ = jacobi_svd(m)
        np.testing.assert_allclose(res.s, s_ref, rtol=1e-10)

    @pytest.mark.parametrize("shape", [(4, 4), (6, 2), (2, 6), (10, 7)])
    def test_reconstruction_property(self, shape):
        g = np.random.default_rng(hash(shape) % 2**32)
        for _ in range(5):
            m = g.standard_normal(shape)
            res = svd(m)
            assert np.all(np.diff(res.s) <= 0)
            assert np.all(res.s >= 0)
            err = np.linalg.norm(res.u @ np.diag(res.s) @ res.vt - m)
            assert err <= 1e-10 * np.linalg.norm(m)
            u_ref, s_ref, vt_ref = jacobi_svd(m)
            err_ref = np.linalg.norm(u_ref @ np.diag(s_ref) @ vt_ref - m)
            assert err_ref <= 1e-9 * np.linalg.norm(m)
            np.testing.assert_allclose(res.s, s_ref, rtol=1e-9, atol=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValidationError):
            svd(np.array([[1.0, np.nan], [0.0, 1.0]]))


class TestSolveSpd:
    def test_identity_system(self):
        b = np.array([3.0, -1.0, 2.0])
        np.testing.assert_allclose(solve_spd(np.eye(3), b), b)

    def test_scalar_system(self):
        x = solve_spd(2.0 * np.eye(2), np.array([2.0, 4.0]))
        np.testing.assert_allclose(x, [1.0, 2.0])

    def test_random_spd_residual_and_adjugate(self):
        g = np.random.default_rng(3)
        m = g.standard_normal((4, 4))
        a = m @ m.T + 4 * np.eye(4)
        b = g.standard_normal((4, 2))
        x = solve_spd(a, b)
        assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)
        a2 = a[:2, :2]
        x2 = solve_spd(a2, b[:2])
        np.testing.assert_allclose(x2, adjugate_inverse_2x2(a2) @ b[:2], rtol=1e-10)

    def test_roundtrip_property(self):
        g = np.random.default_rng(11)
        for _ in range(10):
            m = g.standard_normal((5, 5))
            a = m @ m.T + 5 * np.eye(5)
            x = g.standard_normal(5)
            x_hat = solve_spd(a, a @ x)
            assert np.linalg.norm(x_hat - x) <= 1e-9 * np.linalg.norm(x)

    def test_not_positive_definite(self):
        with pytest.raises(SingularSystemError):
            solve_spd(np.diag([1.0, -1.0]), np.ones(2))

    def test_not_symmetric(self):
        with pytest.raises(ValidationError):
            solve_spd(np.array([[1.0, 0.5], [0.0, 1.0]]), np.ones(2))


class TestRngStream:
    def test_determinism(self):
        a = gaussian(RngStream(123, STREAM_DATA), 100)
        b = gaussian(RngStream(123, STREAM_DATA), 100)
        np.testing.assert_array_equal(a, b)

    def test_moments(self):
        x = gaussian(RngStream(2024, STREAM_DATA), 100_000)
        assert -0.02 <= x.mean() <= 0.02
        assert 0.97 <= x.var() <= 1.03

    def test_distinct_streams_differ(self):
        a = gaussian(RngStream(5, STREAM_DATA), 16)
        b = gaussian(RngStream(5, STREAM_PROBES), 16)
        assert not np.array_equal(a, b)

    def test_children_distinct_and_deterministic(self):
        root = RngStream(9, STREAM_PROBES)
        kids = [root.child(i) for i in range(20)]
        assert len({k.stream for k in kids}) == 20
        np.testing.assert_array_equal(
            gaussian(root.child(3), 8), gaussian(root.child(3), 8)
        )

    def test_bad_count(self):
        with pytest.raises(ValidationError):
            gaussian(RngStream(1), 0)
