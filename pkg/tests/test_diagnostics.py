import json
import math

import mpmath
import numpy as np
import pytest

from silan.data import LabeledDataset, gen_moons
from silan.diagnostics import (BeamParams, beam_condition, error_decomposition, golden_section_max,
                               jacobi_singular_values, lemma2_report, lemma4_report, min_interclass_gap,
                               optimal_radius, overlap_fraction, solve_beam_condition, tn_ratio,
                               transformation_rates)
from silan.nn import MlpModel, MlpSpec, init_model


def linear_model(W, b=None):
    """Identity extractor followed by the head ``W``."""
    d, c = W.shape
    spec = MlpSpec((d, d, c), feature_depth=1)
    return MlpModel(spec, [np.eye(d), np.asarray(W, float)], [np.zeros(d), np.zeros(c) if b is None else b])


def power_iteration_min_sv(W, iters=20000):
    """Smallest singular value via power iteration on the shifted Gram ``cI - W W^T``."""
    G = W @ W.T if W.shape[0] <= W.shape[1] else W.T @ W
    c = np.trace(G)
    M = c * np.eye(len(G)) - G
    v = np.ones(len(G)) / math.sqrt(len(G))
    for _ in range(iters):
        w = M @ v
        v = w / np.linalg.norm(w)
    return math.sqrt(c - v @ M @ v)


class TestTnRatio:
    def test_zero_radius(self):
        assert tn_ratio(BeamParams(1.0, 10.0, 0.0)) == 0.0

    def test_noise_free_limit(self):
        assert tn_ratio(BeamParams(1.0, 0.0, 100.0)) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("sigma,sigma_ext,R", [(1.0, 10.0, 1.5), (0.3, 2.0, 0.1), (2.0, 0.5, 4.0)])
    def test_high_precision_oracle(self, sigma, sigma_ext, R):
        with mpmath.workdps(40):
            s, e, r = mpmath.mpf(sigma), mpmath.mpf(sigma_ext), mpmath.mpf(R)
            enclosed = 1 - mpmath.exp(-r ** 2 / (2 * s ** 2))
            ref = float(enclosed / mpmath.sqrt(enclosed + mpmath.pi * r ** 2 * e ** 2))
        assert tn_ratio(BeamParams(sigma, sigma_ext, R)) == pytest.approx(ref, rel=1e-12)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            BeamParams(0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            BeamParams(1.0, -1.0, 1.0)


class TestOptimalRadius:
    def test_golden_section_on_parabola(self):
        assert golden_section_max(lambda x: -(x - 0.7) ** 2, 0.0, 3.0) == pytest.approx(0.7, abs=1e-7)

    def test_noise_dominated(self):
        assert optimal_radius(1.0, 10.0) == pytest.approx(1.5852, rel=0.01)

    def test_scales_with_sigma(self):
        assert optimal_radius(2.0, 20.0) == pytest.approx(3.1704, rel=0.01)

    def test_no_extraneous_noise(self):
        with pytest.raises(ValueError, match="monoton"):
            optimal_radius(1.0, 0.0)


class TestBeamCondition:
    def test_root(self):
        u, ratio = solve_beam_condition()
        assert u == pytest.approx(1.25643, abs=1e-4)
        assert ratio == pytest.approx(1.5852, abs=5e-4)
        assert abs(beam_condition(u)) <= 1e-9

    def test_matches_high_precision_root(self):
        with mpmath.workdps(30):
            ref = float(mpmath.findroot(lambda u: mpmath.exp(u) - 2 * u - 1, 1.25))
        assert solve_beam_condition()[0] == pytest.approx(ref, abs=1e-9)

    def test_ratio_maximiser_agrees(self):
        # the noise-dominated ratio in u is (1 - e^-u) / sqrt(u)
        u = golden_section_max(lambda t: -math.expm1(-t) / math.sqrt(t), 1e-6, 10.0, tol=1e-10)
        assert u == pytest.approx(solve_beam_condition()[0], abs=1e-6)


class TestOverlap:
    def test_separated_groups(self):
        logits = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]])
        assert overlap_fraction(logits, [0, 0, 1, 1], 1.0) == 0.0

    def test_all_overlapping(self):
        logits = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.1, 0.1]])
        assert overlap_fraction(logits, [0, 0, 1, 1], 1.0) == 1.0

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(20, 2))
        labels = rng.integers(0, 2, size=20)
        for delta in (0.1, 0.3, 0.8):
            hits = 0
            for i in range(20):
                hits += any(labels[j] != labels[i] and np.linalg.norm(logits[i] - logits[j]) <= delta
                            for j in range(20))
            assert overlap_fraction(logits, labels, delta) == pytest.approx(hits / 20)

    def test_monotone_in_delta(self):
        rng = np.random.default_rng(1)
        logits, labels = rng.normal(size=(60, 3)), rng.integers(0, 3, size=60)
        rates = [overlap_fraction(logits, labels, d) for d in np.linspace(0.01, 3.0, 40)]
        assert all(a <= b for a, b in zip(rates, rates[1:]))

    def test_invalid_delta(self):
        with pytest.raises(ValueError):
            overlap_fraction(np.zeros((2, 2)), [0, 1], 0.0)


class TestTransformationRates:
    def test_counts(self):
        keys = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        # predictions 0, 0, 1 against labels 0, 1, 1
        assert transformation_rates([0, 1, 1], keys) == (1, 3, 2, 6)

    def test_report(self):
        model = linear_model(np.eye(2))
        ds = LabeledDataset(np.array([[1.0, 0.0], [0.0, 1.0], [0.9, 0.0]]), np.array([0, 1, 0]))
        keys = [(np.array([0, 1]), np.array([[2.0, 0.0], [2.0, 0.0]]))]
        rep = lemma2_report(model, ds, keys, 0.5)
        assert rep.pos_mislabel_rate == 0.5
        assert rep.neg_collision_rate == 0.5
        assert rep.r_delta == 0.0
        assert json.loads(rep.to_json())["delta"] == 0.5


class TestSingularValues:
    def test_identity(self):
        np.testing.assert_allclose(jacobi_singular_values(np.eye(3)), [1, 1, 1], atol=1e-14)

    def test_random_against_lapack(self):
        A = np.random.default_rng(3).normal(size=(8, 2))
        np.testing.assert_allclose(jacobi_singular_values(A), np.linalg.svd(A, compute_uv=False), rtol=1e-12)

    def test_identity_head(self):
        rep = lemma4_report(linear_model(np.eye(2)), gen_moons(20, 0.1, 0), 0.1)
        assert rep.lipschitz_L == pytest.approx(1.0, abs=1e-12)

    def test_diagonal_head(self):
        rep = lemma4_report(linear_model(np.diag([3.0, 0.5])), gen_moons(20, 0.1, 0), 0.1)
        assert rep.lipschitz_L == pytest.approx(2.0, abs=1e-12)
        assert rep.bound == pytest.approx(3.1704 * 0.1 / 2.0)

    def test_random_head_power_iteration(self):
        spec = MlpSpec((2, 8, 2), seed=4)
        model = init_model(spec)
        W = model.weights[-1]
        rep = lemma4_report(model, gen_moons(30, 0.1, 0), 0.05)
        assert rep.lipschitz_L == pytest.approx(1 / power_iteration_min_sv(W), abs=1e-8)

    def test_two_layer_head_rejected(self):
        model = init_model(MlpSpec((2, 8, 8, 2), feature_depth=1))
        with pytest.raises(ValueError, match="single linear"):
            lemma4_report(model, gen_moons(10, 0.1, 0), 0.1)

    def test_singular_head(self):
        with pytest.raises(ValueError, match="singular"):
            lemma4_report(linear_model(np.zeros((2, 2))), gen_moons(10, 0.1, 0), 0.1)


class TestGap:
    def test_single_group(self):
        assert min_interclass_gap(np.zeros((3, 2)), [1, 1, 1]) == math.inf

    def test_known_gap(self):
        logits = np.array([[0.0, 0.0], [3.0, 4.0], [10.0, 0.0]])
        assert min_interclass_gap(logits, [0, 1, 1]) == pytest.approx(5.0)


class TestErrorDecomposition:
    def test_perfect_model(self):
        ds = LabeledDataset(np.array([[2.0, 0.0], [0.0, 2.0], [3.0, 1.0]]), np.array([0, 1, 0]))
        assert error_decomposition(linear_model(np.eye(2)), ds) == (0.0, 0.0)

    def test_matches_error_rate(self):
        ds = LabeledDataset(np.array([[2.0, 0.0], [0.0, 2.0], [3.0, 1.0], [1.0, 0.0]]), np.array([0, 1, 1, 1]))
        first, second = error_decomposition(linear_model(np.eye(2)), ds)
        assert first == pytest.approx(0.5)
        assert second == 0.0
