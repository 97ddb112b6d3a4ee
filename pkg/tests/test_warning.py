import json

import numpy as np
import pytest

from cloudsentry.errors import SingleClassDataError
from cloudsentry.warning import (
    AlertDecision,
    AlertWriter,
    LikelihoodModel,
    ScoredWindow,
    bin_index,
    calibrate,
    decide,
    format_alert,
    parse_alert,
    posterior,
)


def bayes_oracle(score, model):
    """Independent scalar Bayes computation from the same histograms."""
    edges = list(model.bin_edges)
    idx = 0
    for i in range(len(edges) - 1):
        if score > edges[i]:
            idx = i
    if score <= edges[0]:
        idx = 0
    joint_anom = model.p_score_anomalous[idx] * model.prior_anomalous
    joint_norm = model.p_score_normal[idx] * model.prior_normal
    return joint_anom / (joint_anom + joint_norm)


def scored(posteriors):
    return [
        ScoredWindow(window_id=f"w{i}", timestamp=i, score=0.0, posterior=p)
        for i, p in enumerate(posteriors)
    ]


class TestCalibrate:
    def test_balanced_priors(self, rng):
        scores = np.concatenate([rng.normal(-2, 1, 10), rng.normal(2, 1, 10)])
        labels = np.array([True] * 10 + [False] * 10)
        model = calibrate(scores, labels)
        assert model.prior_anomalous == 0.5
        assert model.prior_normal == 0.5

    def test_smoothing_fills_empty_bins(self, rng):
        scores = np.concatenate([rng.normal(-5, 0.1, 20), rng.normal(5, 0.1, 20)])
        labels = np.array([True] * 20 + [False] * 20)
        model = calibrate(scores, labels)
        assert np.all(model.p_score_anomalous > 0.0)
        assert np.all(model.p_score_normal > 0.0)

    def test_histograms_normalized(self, rng):
        scores = rng.normal(size=50)
        labels = rng.random(50) < 0.4
        labels[0], labels[1] = True, False
        model = calibrate(scores, labels)
        assert abs(model.p_score_anomalous.sum() - 1.0) < 1e-12
        assert abs(model.p_score_normal.sum() - 1.0) < 1e-12

    def test_single_class_rejected(self, rng):
        with pytest.raises(SingleClassDataError):
            calibrate(rng.normal(size=10), np.zeros(10, dtype=bool))


class TestPosterior:
    def symmetric_model(self):
        return LikelihoodModel(
            bin_edges=np.linspace(-1, 1, 5),
            p_score_anomalous=np.full(4, 0.25),
            p_score_normal=np.full(4, 0.25),
            prior_anomalous=0.5,
            prior_normal=0.5,
            pseudo_count=1.0,
        )

    def test_symmetric_gives_half(self):
        assert posterior(0.3, self.symmetric_model()) == pytest.approx(0.5)

    def test_prior_pass_through(self):
        model = LikelihoodModel(
            bin_edges=np.linspace(-1, 1, 5),
            p_score_anomalous=np.full(4, 0.25),
            p_score_normal=np.full(4, 0.25),
            prior_anomalous=0.01,
            prior_normal=0.99,
            pseudo_count=1.0,
        )
        assert posterior(0.0, model) == pytest.approx(0.01)

    def test_matches_scalar_oracle(self, rng):
        for _ in range(50):
            scores = rng.normal(size=60)
            labels = rng.random(60) < 0.3
            labels[0], labels[1] = True, False
            model = calibrate(scores, labels, bins=int(rng.integers(2, 30)))
            for score in rng.normal(size=20) * 3:
                assert abs(posterior(score, model) - bayes_oracle(score, model)) < 1e-12

    def test_out_of_range_clamps(self, rng):
        scores = np.concatenate([rng.normal(-1, 0.2, 15), rng.normal(1, 0.2, 15)])
        labels = np.array([True] * 15 + [False] * 15)
        model = calibrate(scores, labels)
        assert bin_index(-100.0, model) == 0
        assert bin_index(100.0, model) == model.bins - 1
        assert posterior(-100.0, model) == posterior(model.bin_edges[0], model)

    def test_monotone_in_likelihood_ratio(self, rng):
        scores = np.concatenate([rng.normal(-1, 0.5, 40), rng.normal(1, 0.5, 40)])
        labels = np.array([True] * 40 + [False] * 40)
        model = calibrate(scores, labels)
        ratios = model.p_score_anomalous / model.p_score_normal
        centers = 0.5 * (model.bin_edges[:-1] + model.bin_edges[1:])
        posts = np.array([posterior(c, model) for c in centers])
        order = np.argsort(ratios)
        assert np.all(np.diff(posts[order]) >= -1e-12)

    def test_complement_sums_to_one(self, rng):
        scores = rng.normal(size=40)
        labels = np.array([True, False] * 20)
        model = calibrate(scores, labels)
        flipped = LikelihoodModel(
            bin_edges=model.bin_edges,
            p_score_anomalous=model.p_score_normal,
            p_score_normal=model.p_score_anomalous,
            prior_anomalous=model.prior_normal,
            prior_normal=model.prior_anomalous,
            pseudo_count=model.pseudo_count,
        )
        for score in rng.normal(size=20):
            assert posterior(score, model) + posterior(score, flipped) == pytest.approx(
                1.0, abs=1e-12
            )


class TestDecide:
    def test_persistence_two(self):
        decisions = list(decide(scored([0.2, 0.95, 0.96]), threshold=0.9, persistence=2))
        assert [d.alert for d in decisions] == [False, False, True]

    def test_persistence_one_matches_threshold(self, rng):
        posts = rng.random(50)
        decisions = list(decide(scored(posts), threshold=0.5, persistence=1))
        assert [d.alert for d in decisions] == [p >= 0.5 for p in posts]

    def test_reset_on_dip(self):
        decisions = list(decide(scored([0.95, 0.2, 0.95]), threshold=0.9, persistence=2))
        assert not any(d.alert for d in decisions)

    def test_stays_active_until_drop(self):
        posts = [0.95, 0.95, 0.95, 0.2, 0.95]
        decisions = list(decide(scored(posts), threshold=0.9, persistence=2))
        assert [d.alert for d in decisions] == [False, True, True, False, False]

    def test_never_fires_below_persistence(self, rng):
        # Property: no alert without `persistence` consecutive super-threshold
        # posteriors, over random streams.
        for seed in range(20):
            gen = np.random.default_rng(seed)
            posts = gen.random(50)
            persistence = int(gen.integers(1, 5))
            threshold = float(gen.uniform(0.2, 0.9))
            run = 0
            for decision, p in zip(
                decide(scored(posts), threshold=threshold, persistence=persistence), posts
            ):
                run = run + 1 if p >= threshold else 0
                assert decision.alert == (run >= persistence)
                assert decision.consecutive_count == run


class TestEmit:
    def decision(self, alert=True):
        return AlertDecision(
            window_id="aws:17", timestamp=17000, score=-1.25,
            posterior=0.97, alert=alert, consecutive_count=2,
        )

    def test_round_trip(self):
        line = format_alert(self.decision())
        parsed = parse_alert(line)
        assert parsed.window_id == "aws:17"
        assert parsed.timestamp == 17000
        assert parsed.score == -1.25
        assert parsed.posterior == 0.97
        assert parsed.alert is True

    def test_non_alert_needs_verbose(self, tmp_path):
        path = tmp_path / "alerts.jsonl"
        with AlertWriter(path=path) as writer:
            assert writer.write(self.decision(alert=False)) is False
            assert writer.write(self.decision(alert=True)) is True
        assert len(path.read_text().splitlines()) == 1
        with AlertWriter(path=path, verbose=True) as writer:
            assert writer.write(self.decision(alert=False)) is True

    def test_thousand_lines_ordered(self, tmp_path):
        path = tmp_path / "alerts.jsonl"
        with AlertWriter(path=path, verbose=True) as writer:
            for i in range(1000):
                writer.write(
                    AlertDecision(
                        window_id=f"aws:{i}", timestamp=i, score=0.0,
                        posterior=0.0, alert=False, consecutive_count=0,
                    )
                )
        lines = path.read_text().splitlines()
        assert len(lines) == 1000
        assert [json.loads(line)["ts"] for line in lines] == list(range(1000))
