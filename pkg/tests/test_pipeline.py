import json

import numpy as np
import pytest

from mojet import (
    Activation,
    Identity,
    Linear,
    LogisticHead,
    NumericError,
    PcaProject,
    Pipeline,
    ShapeError,
    Standardize,
    ValidationError,
    compose_two_module_linear,
)


def linear_chain_matrix(pipeline):
    """Composed weight matrix of an all-linear pipeline (test helper)."""
    mat = None
    for mod in pipeline.modules:
        w = mod.weights if isinstance(mod, (Linear, LogisticHead)) else None
        if w is None:
            raise AssertionError("pipeline is not all-linear")
        mat = w if mat is None else w @ mat
    return mat


class TestEvaluate:
    def test_identity_pipeline(self):
        p = Pipeline([Identity()], taps=[("raw", 0)])
        out, taps = p.evaluate([1.0, 2.0])
        np.testing.assert_array_equal(out, [1.0, 2.0])
        assert taps[0].tap_id == "raw"
        np.testing.assert_array_equal(taps[0].value, [1.0, 2.0])

    def test_two_linear_modules(self):
        h = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        p = Pipeline(
            [Linear(h), Linear(np.ones((1, 3)))], taps=[("mid", 0)]
        )
        out, taps = p.evaluate([1.0, 0.0])
        np.testing.assert_allclose(taps[0].value, [1.0, 3.0, 5.0])
        np.testing.assert_allclose(out, [9.0])

    def test_standardize_centering(self):
        mean = np.array([2.0, -1.0])
        p = Pipeline([Standardize(mean, np.array([3.0, 0.5]))], taps=[("z", 0)])
        _, taps = p.evaluate(mean)
        np.testing.assert_array_equal(taps[0].value, [0.0, 0.0])

    def test_dimension_mismatch(self):
        p = Pipeline([Linear(np.eye(3))])
        with pytest.raises(ShapeError):
            p.evaluate([1.0, 2.0])

    def test_nonfinite_names_module(self):
        p = Pipeline([Identity(), Linear(np.array([[1e308, 1e308]]))])
        with np.errstate(over="ignore"), pytest.raises(NumericError, match="module 1"):
            p.evaluate([1e308, 1e308])

    def test_logistic_head_emits_logits(self):
        w = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        b = np.array([0.5, -0.5, 0.0])
        p = Pipeline([LogisticHead(w, b)])
        out, _ = p.evaluate([2.0, 3.0])
        np.testing.assert_allclose(out, w @ [2.0, 3.0] + b)


class TestComposeTwoModuleLinear:
    def test_coordinate_projection(self):
        p = compose_two_module_linear(np.eye(2), [1.0, 0.0])
        out, _ = p.evaluate([3.0, 7.0])
        np.testing.assert_allclose(out, [3.0])

    def test_scalar_case(self):
        p = compose_two_module_linear(np.array([[1.0, 1.0]]), [2.0])
        out, _ = p.evaluate([3.0, 4.0])
        np.testing.assert_allclose(out, [14.0])

    def test_kernel_gives_zero_tap(self):
        h = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        p = compose_two_module_linear(h, [1.0, 1.0])
        _, taps = p.evaluate([0.0, 0.0, 5.0])
        np.testing.assert_allclose(taps[0].value, [0.0, 0.0], atol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            compose_two_module_linear(np.eye(2), [1.0, 2.0, 3.0])


class TestCounter:
    def test_fresh_pipeline_is_zero(self):
        p = Pipeline([Identity()])
        assert p.read_counter() == 0

    def test_counts_evaluations(self):
        p = Pipeline([Identity()])
        for _ in range(5):
            p.evaluate([1.0])
        assert p.read_counter() == 5
        p.reset_counter()
        assert p.read_counter() == 0


class TestInvariants:
    def test_all_linear_response_is_exact(self):
        g = np.random.default_rng(0)
        p = Pipeline([Linear(g.standard_normal((4, 3))), Linear(g.standard_normal((2, 4)))])
        mat = linear_chain_matrix(p)
        for _ in range(10):
            x = g.standard_normal(3)
            delta = g.standard_normal(3)
            lhs = p.evaluate(x + delta)[0] - p.evaluate(x)[0]
            assert np.abs(lhs - mat @ delta).max() <= 1e-12

    def test_tap_matches_truncated_pipeline(self):
        g = np.random.default_rng(1)
        mods = [
            Linear(g.standard_normal((5, 3))),
            Activation("tanh"),
            Linear(g.standard_normal((2, 5))),
        ]
        p = Pipeline(mods, taps=[("t", 1)])
        trunc = Pipeline(mods[:2])
        x = g.standard_normal(3)
        _, taps = p.evaluate(x)
        np.testing.assert_array_equal(taps[0].value, trunc.evaluate(x)[0])

    def test_relu_region_is_exactly_linear(self):
        g = np.random.default_rng(2)
        w1 = g.standard_normal((6, 4))
        w2 = g.standard_normal((2, 6))
        p = Pipeline([Linear(w1), Activation("relu"), Linear(w2)])
        x = g.standard_normal(4)
        pre = w1 @ x
        mask = (pre > 0).astype(float)
        local = w2 @ (mask[:, None] * w1)
        # small enough that no pre-activation changes sign
        margin = np.abs(pre).min()
        delta = 1e-3 * margin * g.standard_normal(4)
        assert np.all(np.sign(w1 @ (x + delta)) == np.sign(pre))
        lhs = p.evaluate(x + delta)[0] - p.evaluate(x)[0]
        np.testing.assert_allclose(lhs, local @ delta, atol=1e-14)


class TestValidation:
    def test_duplicate_tap_ids(self):
        with pytest.raises(ValidationError):
            Pipeline([Identity(), Identity()], taps=[("a", 0), ("a", 1)])

    def test_tap_out_of_bounds(self):
        with pytest.raises(ValidationError):
            Pipeline([Identity()], taps=[("a", 3)])

    def test_chaining_mismatch(self):
        with pytest.raises(ShapeError):
            Pipeline([Linear(np.eye(3)), Linear(np.ones((1, 2)))])

    def test_standardize_scale_positive(self):
        with pytest.raises(ValidationError):
            Standardize(np.zeros(2), np.array([1.0, 0.0]))

    def test_pca_rows_must_be_orthonormal(self):
        with pytest.raises(ValidationError):
            PcaProject(np.array([[1.0, 1.0]]), np.zeros(2))

    def test_activation_name(self):
        with pytest.raises(ValidationError):
            Activation("sigmoid")


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        g = np.random.default_rng(5)
        p = Pipeline(
            [
                Standardize(g.standard_normal(4), np.abs(g.standard_normal(4)) + 0.1),
                Linear(g.standard_normal((3, 4)), g.standard_normal(3)),
                Activation("relu"),
                LogisticHead(g.standard_normal((2, 3)), g.standard_normal(2)),
            ],
            taps=[("hidden", 2)],
        )
        path = tmp_path / "pipe.json"
        p.save(path)
        q = Pipeline.load(path)
        assert [type(m) for m in q.modules] == [type(m) for m in p.modules]
        np.testing.assert_array_equal(q.modules[1].weights, p.modules[1].weights)
        np.testing.assert_array_equal(q.modules[1].bias, p.modules[1].bias)
        np.testing.assert_array_equal(q.modules[3].weights, p.modules[3].weights)
        assert q.taps == p.taps
        x = g.standard_normal(4)
        np.testing.assert_array_equal(p.evaluate(x)[0], q.evaluate(x)[0])

    def test_pca_and_identity_round_trip(self, tmp_path):
        comp = np.linalg.qr(np.random.default_rng(8).standard_normal((4, 2)))[0].T
        p = Pipeline([Identity(), PcaProject(comp, np.arange(4.0))], taps=[("s", 1)])
        doc = json.dumps(p.to_json_dict())
        q = Pipeline.from_json_dict(json.loads(doc))
        np.testing.assert_array_equal(q.modules[1].components, p.modules[1].components)
