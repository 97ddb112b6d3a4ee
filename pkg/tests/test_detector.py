import numpy as np
import pytest

from cloudsentry.detector import (
    FeatureScaler,
    SvmParams,
    SvmTrainConfig,
    build_rff_map,
    decision,
    fit_feature_scaler,
    hinge,
    objective,
    rff_backward,
    rff_transform,
    sgd_step,
    train_svm,
    transform_features,
)
from cloudsentry.errors import (
    EmptyBatchError,
    InvalidLabelError,
    ShapeMismatchError,
    SingleClassDataError,
)
from cloudsentry.numkit import finite_difference_check


def objective_oracle(features, labels, params):
    """Scalar-loop objective computation."""
    total = 0.5 * sum(v * v for v in params.w)
    for z, y in zip(features, labels):
        f = sum(wi * zi for wi, zi in zip(params.w, z)) + params.b
        total += params.c * max(0.0, 1.0 - y * f)
    return total


class TestDecision:
    def test_constant(self):
        params = SvmParams(w=np.zeros(3), b=0.5)
        assert decision(np.array([9.0, -4.0, 2.0]), params) == 0.5

    def test_dot_product(self):
        params = SvmParams(w=np.array([1.0, -1.0]), b=0.0)
        assert decision(np.array([3.0, 1.0]), params) == 2.0

    def test_matches_elementwise_oracle(self, rng):
        for _ in range(100):
            dim = int(rng.integers(1, 8))
            params = SvmParams(w=rng.normal(size=dim), b=float(rng.normal()))
            z = rng.normal(size=dim)
            expected = sum(wi * zi for wi, zi in zip(params.w, z)) + params.b
            assert abs(decision(z, params) - expected) < 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            decision(np.zeros(3), SvmParams(w=np.zeros(2), b=0.0))

    def test_sign_invariant_under_positive_rescaling(self, rng):
        for _ in range(30):
            w = rng.normal(size=4)
            b = float(rng.normal())
            z = rng.normal(size=4)
            scale = float(rng.uniform(0.1, 20.0))
            original = decision(z, SvmParams(w=w, b=b))
            rescaled = decision(z, SvmParams(w=scale * w, b=scale * b))
            assert np.sign(original) == np.sign(rescaled)


class TestHinge:
    def test_values(self):
        assert hinge(1, 2.0) == 0.0
        assert hinge(1, 0.0) == 1.0
        assert hinge(-1, 0.5) == 1.5

    def test_invalid_label(self):
        with pytest.raises(InvalidLabelError):
            hinge(0, 1.0)


class TestObjective:
    def test_zero_params_single_point(self):
        params = SvmParams(w=np.zeros(2), b=0.0, c=3.0)
        value = objective(np.array([[1.0, 2.0]]), np.array([1]), params)
        assert value == 3.0

    def test_separated_batch_is_pure_regularizer(self):
        params = SvmParams(w=np.array([2.0, 0.0]), b=0.0, c=1.0)
        features = np.array([[1.0, 0.0], [-1.0, 0.0]])
        labels = np.array([1, -1])
        assert objective(features, labels, params) == 0.5 * 4.0

    def test_matches_loop_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 10))
            dim = int(rng.integers(1, 6))
            params = SvmParams(
                w=rng.normal(size=dim), b=float(rng.normal()), c=float(rng.uniform(0.1, 5))
            )
            features = rng.normal(size=(n, dim))
            labels = rng.choice([-1, 1], size=n)
            expected = objective_oracle(features, labels, params)
            assert abs(objective(features, labels, params) - expected) < 1e-12

    def test_empty_batch(self):
        with pytest.raises(EmptyBatchError):
            objective(np.zeros((0, 2)), np.zeros(0), SvmParams(w=np.zeros(2), b=0.0))


class TestSgdStep:
    def test_eq7_arithmetic(self):
        # One violating point constructed so the total w-gradient is 0.5:
        # grad_w = w + C*(-y*z) = 1 - 0.5 = 0.5 at w=1, z=0.5, y=+1.
        params = SvmParams(w=np.array([1.0]), b=0.0, c=1.0, learning_rate=0.1)
        updated = sgd_step(np.array([[0.5]]), np.array([1]), params)
        assert updated.w[0] == pytest.approx(0.95)
        assert updated.b == pytest.approx(0.1)

    def test_satisfied_batch_shrinks_w(self):
        params = SvmParams(w=np.array([2.0, 0.0]), b=0.3, c=1.0, learning_rate=0.05)
        features = np.array([[1.0, 0.0], [-1.0, 0.0]])
        labels = np.array([1, -1])
        updated = sgd_step(features, labels, params)
        assert np.allclose(updated.w, params.w * (1.0 - 0.05))
        assert updated.b == params.b

    def test_margin_tie_is_not_violating(self):
        params = SvmParams(w=np.array([1.0]), b=0.0, c=1.0, learning_rate=0.1)
        updated = sgd_step(np.array([[1.0]]), np.array([1]), params)  # y*f == 1
        assert np.allclose(updated.w, params.w * 0.9)
        assert updated.b == 0.0

    def test_convergence_on_separable_points(self):
        # Oracle: exhaustive margin check after descent on 4 separable points.
        features = np.array([[1.0, 1.0], [2.0, 1.0], [-1.0, -1.0], [-2.0, -1.0]])
        labels = np.array([1, 1, -1, -1])
        params = SvmParams(w=np.zeros(2), b=0.0, c=1.0, learning_rate=0.05)
        first = objective(features, labels, params)
        for _ in range(50):
            params = sgd_step(features, labels, params)
        final = objective(features, labels, params)
        assert final < first
        scores = features @ params.w + params.b
        assert np.all(np.sign(scores) == labels)


class TestRff:
    def test_self_inner_product_near_one(self, rng):
        rff = build_rff_map(6, 2048, gamma=0.3, rng=rng)
        z = rng.normal(size=6)
        phi = rff_transform(z, rff)
        assert abs(phi @ phi - 1.0) < 0.1

    def test_kernel_approximation(self, rng):
        gamma = 0.25
        rff = build_rff_map(4, 2048, gamma=gamma, rng=rng)
        errors = []
        for _ in range(50):
            x = rng.normal(size=4)
            y = rng.normal(size=4)
            exact = np.exp(-gamma * np.sum((x - y) ** 2))
            approx = rff_transform(x, rff) @ rff_transform(y, rff)
            errors.append(abs(exact - approx))
        assert np.mean(errors) < 0.05

    def test_deterministic_for_fixed_map(self, rng):
        rff = build_rff_map(3, 64, gamma=1.0, rng=rng)
        z = rng.normal(size=3)
        assert np.array_equal(rff_transform(z, rff), rff_transform(z, rff))

    def test_matrix_transform_matches_vector(self, rng):
        rff = build_rff_map(3, 32, gamma=0.5, rng=rng)
        batch = rng.normal(size=(5, 3))
        rows = transform_features(batch, rff)
        for i in range(5):
            assert np.allclose(rows[i], rff_transform(batch[i], rff), atol=1e-12)

    def test_backward_matches_finite_differences(self, rng):
        rff = build_rff_map(4, 16, gamma=0.7, rng=rng)
        z = rng.normal(size=4)
        upstream = rng.normal(size=16)
        grad = rff_backward(z, rff, upstream)

        def loss(zv):
            return float(rff_transform(zv, rff) @ upstream)

        assert finite_difference_check(loss, z, grad, step=1e-5).max_rel_error < 1e-4


class TestFeatureScaler:
    def test_unit_scale(self, rng):
        features = rng.normal(loc=3.0, scale=0.05, size=(200, 16))
        scaler = fit_feature_scaler(features)
        scaled = scaler.transform(features)
        norms = np.linalg.norm(scaled, axis=1)
        assert abs(np.median(norms) - 1.0) < 0.3

    def test_backward_is_inverse_scale(self, rng):
        features = rng.normal(size=(50, 4))
        scaler = fit_feature_scaler(features)
        grad = rng.normal(size=4)
        assert np.allclose(scaler.backward(grad), grad / scaler.std)


class TestTrainSvm:
    def test_two_cluster_f1(self, rng):
        center = np.array([3.0, -2.0, 1.0])
        pos = rng.normal(size=(60, 3)) * 0.5 + center
        neg = rng.normal(size=(60, 3)) * 0.5 - center
        features = np.vstack([pos, neg])
        labels = np.array([1] * 60 + [-1] * 60)
        params, rff, report = train_svm(
            features, labels, SvmTrainConfig(epochs=60), seed=0
        )
        scores = transform_features(features, rff) @ params.w + params.b
        predicted = np.where(scores >= 0, 1, -1)
        tp = int(((predicted == -1) & (labels == -1)).sum())
        fp = int(((predicted == -1) & (labels == 1)).sum())
        fn = int(((predicted == 1) & (labels == -1)).sum())
        f1 = 2 * tp / (2 * tp + fp + fn)
        assert f1 == 1.0

    def test_seed_reproducibility(self, rng):
        features = rng.normal(size=(40, 4))
        labels = np.array([1, -1] * 20)
        a = train_svm(features, labels, SvmTrainConfig(epochs=5), seed=3)
        b = train_svm(features, labels, SvmTrainConfig(epochs=5), seed=3)
        assert a[2] == b[2]
        assert np.array_equal(a[0].w, b[0].w)

    def test_zero_learning_rate_keeps_params(self, rng):
        features = rng.normal(size=(10, 3))
        labels = np.array([1, -1] * 5)
        params, _, report = train_svm(
            features, labels, SvmTrainConfig(learning_rate=0.0, epochs=4), seed=0
        )
        assert np.all(params.w == 0.0)
        assert params.b == 1.0
        assert len(set(report.objective_per_epoch)) == 1

    def test_single_class_rejected(self, rng):
        with pytest.raises(SingleClassDataError):
            train_svm(
                rng.normal(size=(10, 2)), np.ones(10, dtype=int), SvmTrainConfig(), seed=0
            )

    def test_separable_property_suite(self):
        # Any linearly separable toy set (<=10 points) reaches 100% training
        # accuracy within 500 epochs at the reference hyperparameters.
        for seed in range(10):
            rng = np.random.default_rng(seed)
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            n = int(rng.integers(4, 11))
            labels = np.array([1, -1] * (n // 2) + [1] * (n % 2))
            margin = 0.6
            points = []
            for y in labels:
                offset = rng.normal(size=3)
                offset -= (offset @ direction) * direction
                points.append(y * (margin + rng.uniform(0, 1.5)) * direction + 0.7 * offset)
            features = np.vstack(points)
            params, _, _ = train_svm(
                features, labels,
                SvmTrainConfig(c=1.0, learning_rate=0.01, epochs=500, batch_size=32),
                seed=seed,
            )
            scores = features @ params.w + params.b
            assert np.all(np.where(scores >= 0, 1, -1) == labels), f"seed {seed}"

    def test_rff_training_runs(self, rng):
        center = np.full(3, 2.0)
        features = np.vstack([
            rng.normal(size=(30, 3)) * 0.4 + center,
            rng.normal(size=(30, 3)) * 0.4 - center,
        ])
        labels = np.array([1] * 30 + [-1] * 30)
        params, rff, _ = train_svm(
            features, labels,
            SvmTrainConfig(epochs=40, use_rff=True, rff_dim=256), seed=1,
        )
        assert rff is not None
        scores = transform_features(features, rff) @ params.w + params.b
        assert (np.sign(scores) == labels).mean() == 1.0
