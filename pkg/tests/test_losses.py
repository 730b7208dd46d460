import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ordinalcs.cost_matrices import OPHTHALMOLOGIST_COUNTS, ast_cost_matrix, quadratic_cost_matrix
from ordinalcs.errors import InvalidDimensionError, InvalidHyperparameterError, InvalidInputError
from ordinalcs.losses import (
    LossHyper,
    composite_batch,
    cross_entropy,
    cs_penalty,
    cs_regularized_loss,
    focal_loss,
    gaussian_smooth_label,
    loss_gradient,
    nuls_loss,
    softmax,
)

from oracles import central_difference, relative_error

M2 = quadratic_cost_matrix(5)
AST = ast_cost_matrix(OPHTHALMOLOGIST_COUNTS)


def onehot(k, c=5):
    v = np.zeros(c)
    v[k] = 1.0
    return v


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax(np.zeros(5)), 0.2, atol=1e-15)

    def test_saturation_no_overflow(self):
        p = softmax([1000.0, 0.0])
        assert np.all(np.isfinite(p))
        np.testing.assert_allclose(p, [1, 0], atol=1e-12)

    def test_log_weights(self):
        np.testing.assert_allclose(softmax(np.log([1, 2, 3])), [1 / 6, 2 / 6, 3 / 6], atol=1e-12)

    @pytest.mark.parametrize("bad", [[np.inf, 0], [np.nan, 1.0]])
    def test_nonfinite(self, bad):
        with pytest.raises(InvalidInputError):
            softmax(bad)

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.integers(2, 10), elements=st.floats(-500, 500)))
    def test_sums_to_one(self, z):
        assert abs(softmax(z).sum() - 1) < 1e-9


class TestCrossEntropy:
    def test_perfect(self):
        assert cross_entropy(onehot(2), onehot(2)).value <= 1e-6

    def test_uniform(self):
        assert cross_entropy(np.full(5, 0.2), onehot(0)).value == pytest.approx(math.log(5), abs=1e-12)

    def test_soft_target(self):
        # direct evaluation: 0.5 * (-ln 0.25 - ln 0.75)
        want = 0.5 * (-math.log(0.25) - math.log(0.75))
        assert cross_entropy([0.25, 0.75], [0.5, 0.5]).value == pytest.approx(want, abs=1e-12)
        assert want == pytest.approx(0.8370, abs=1e-4)

    def test_gradient_is_p_minus_target(self):
        p = softmax([0.3, -1.0, 2.0])
        np.testing.assert_allclose(cross_entropy(p, onehot(1, 3)).gradient, p - onehot(1, 3), atol=1e-15)

    def test_rejects_non_simplex(self):
        with pytest.raises(InvalidInputError):
            cross_entropy([0.5, 0.6], [1, 0])


class TestFocal:
    def test_gamma_zero_is_cross_entropy(self, rng):
        for _ in range(100):
            p = softmax(rng.normal(size=5) * 3)
            y = int(rng.integers(5))
            assert focal_loss(p, y, alpha=1, gamma=0).value == pytest.approx(
                cross_entropy(p, onehot(y)).value, abs=1e-12
            )

    def test_half(self):
        assert focal_loss([0.5, 0.5], 0, alpha=1, gamma=2).value == pytest.approx(0.25 * math.log(2), abs=1e-12)

    def test_confident(self):
        assert focal_loss([1.0, 0.0], 0).value == 0.0

    @pytest.mark.parametrize("alpha,gamma", [(0, 2), (-1, 2), (1, -0.5), (float("nan"), 1)])
    def test_bad_hyper(self, alpha, gamma):
        with pytest.raises(InvalidHyperparameterError):
            focal_loss([0.5, 0.5], 0, alpha=alpha, gamma=gamma)


class TestGaussianSmoothing:
    def test_degenerate_sigma(self):
        for y in range(5):
            np.testing.assert_allclose(gaussian_smooth_label(y, 1e-6, 5), onehot(y), atol=1e-9)

    @pytest.mark.parametrize("sigma", [0.3, 1.0, 3.0, 50.0])
    def test_boundary_non_increasing(self, sigma):
        g = gaussian_smooth_label(0, sigma, 5)
        assert np.all(np.diff(g) <= 0)

    def test_centre_values(self):
        # direct evaluation of exp(-d^2/2) over d = -2..2, normalized
        w = np.array([math.exp(-d * d / 2) for d in (-2, -1, 0, 1, 2)])
        want = w / w.sum()
        got = gaussian_smooth_label(2, 1.0, 5)
        np.testing.assert_allclose(got, want, atol=1e-15)
        np.testing.assert_allclose(got, [0.0545, 0.2442, 0.4026, 0.2442, 0.0545], atol=1e-4)

    def test_grid(self):
        for c in range(2, 11):
            for y in range(c):
                for sigma in (1e-3, 0.1, 0.5, 1, 2, 5, 100):
                    g = gaussian_smooth_label(y, sigma, c)
                    assert abs(g.sum() - 1) < 1e-12 and np.all(g >= 0)
                    assert np.argmax(g) == y and np.all(np.delete(g, y) < g[y])
                    d = np.abs(np.arange(c) - y)
                    order = np.argsort(d, kind="stable")
                    assert np.all(np.diff(g[order]) <= 1e-15)

    def test_bad_sigma(self):
        with pytest.raises(InvalidHyperparameterError):
            gaussian_smooth_label(0, 0.0, 5)


class TestNULS:
    def test_degenerate_is_ce(self, rng):
        p = softmax(rng.normal(size=5))
        assert nuls_loss(p, 3, sigma=1e-6).value == pytest.approx(cross_entropy(p, onehot(3)).value, abs=1e-6)

    def test_minimum_at_target(self, rng):
        t = gaussian_smooth_label(2, 1.0, 5)
        entropy = -(t * np.log(t)).sum()
        assert nuls_loss(t, 2, 1.0).value == pytest.approx(entropy, abs=1e-12)
        for _ in range(50):
            assert nuls_loss(softmax(rng.normal(size=5)), 2, 1.0).value >= entropy

    def test_uniform_prediction(self):
        assert nuls_loss(np.full(5, 0.2), 2, 1.0).value == pytest.approx(math.log(5), abs=1e-12)


class TestCSPenalty:
    def test_onehot_at_label(self):
        assert cs_penalty(onehot(3), 3, M2).value == 0

    def test_uniform(self):
        assert cs_penalty(np.full(5, 0.2), 0, M2).value == pytest.approx(6.0, abs=1e-12)

    def test_selects_entry(self):
        for y in range(5):
            for j in range(5):
                assert cs_penalty(onehot(j), y, M2).value == (y - j) ** 2

    def test_monotone_in_distance(self):
        for y in range(5):
            by_dist = {}
            for j in range(5):
                by_dist.setdefault(abs(j - y), []).append(cs_penalty(onehot(j), y, M2).value)
            vals = [max(by_dist[d]) for d in sorted(by_dist)]
            assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidDimensionError):
            cs_penalty(np.full(4, 0.25), 0, M2)


class TestComposite:
    def test_lambda_zero_is_base(self, rng):
        for base in ("ce", "fl", "nuls"):
            z = rng.normal(size=5)
            a = cs_regularized_loss(base, z, 1, 0.0, M2)
            b = cs_regularized_loss(base, z, 1, 0.0, None)
            assert a.value == b.value
            p = softmax(z)
            ref = {"ce": cross_entropy(p, onehot(1)), "fl": focal_loss(p, 1), "nuls": nuls_loss(p, 1)}[base]
            assert a.value == pytest.approx(ref.value, abs=1e-15)

    def test_saturated(self):
        z = np.zeros(5)
        z[3] = 1000
        assert cs_regularized_loss("ce", z, 3, 1.0, M2).value <= 1e-6

    def test_uniform_sum(self):
        assert cs_regularized_loss("ce", np.zeros(5), 0, 1.0, M2).value == pytest.approx(math.log(5) + 6.0, abs=1e-12)

    def test_negative_lambda(self):
        with pytest.raises(InvalidHyperparameterError):
            cs_regularized_loss("ce", np.zeros(5), 0, -0.1, M2)

    def test_unknown_base(self):
        with pytest.raises(InvalidHyperparameterError):
            cs_regularized_loss("hinge", np.zeros(5), 0, 0.0, M2)

    def test_ce_gradient_uniform(self):
        np.testing.assert_allclose(loss_gradient("ce", np.zeros(5), 2, 0.0, M2), [0.2, 0.2, -0.8, 0.2, 0.2], atol=1e-15)

    def test_ce_cs_closed_form(self, rng):
        for _ in range(20):
            z = rng.normal(size=5) * 2
            y = int(rng.integers(5))
            lam = float(rng.choice([0.1, 1, 10]))
            p = softmax(z)
            m = M2[y]
            want = (p - onehot(y)) + lam * (p * m - p * (m @ p))
            np.testing.assert_allclose(loss_gradient("ce", z, y, lam, M2), want, atol=1e-12)

    def test_gradients_match_finite_differences(self, rng):
        worst = 0.0
        count = 0
        for base in ("ce", "fl", "nuls"):
            for lam in (0.0, 0.1, 1.0, 10.0):
                for M in (M2, AST):
                    for _ in range(9):
                        z = rng.normal(size=5) * 2
                        y = int(rng.integers(5))
                        hyper = LossHyper(alpha=float(rng.uniform(0.25, 2)), gamma=float(rng.choice([0, 0.5, 1, 2, 3])),
                                          sigma=float(rng.uniform(0.3, 2)))
                        g = loss_gradient(base, z, y, lam, M, hyper)
                        num = central_difference(lambda v: cs_regularized_loss(base, v, y, lam, M, hyper).value, z)
                        worst = max(worst, relative_error(g, num))
                        assert abs(g.sum()) < 1e-8
                        count += 1
        assert count >= 200
        assert worst < 1e-4

    def test_non_negative(self, rng):
        for _ in range(200):
            z = rng.normal(size=5) * 5
            for base in ("ce", "fl", "nuls"):
                assert cs_regularized_loss(base, z, int(rng.integers(5)), float(rng.uniform(0, 10)), AST).value >= 0

    def test_batch_matches_single(self, rng):
        Z = rng.normal(size=(30, 5))
        y = rng.integers(0, 5, size=30)
        for base in ("ce", "fl", "nuls"):
            losses, grads = composite_batch(Z, y, base, 0.7, M2)
            for i in range(30):
                lv = cs_regularized_loss(base, Z[i], int(y[i]), 0.7, M2)
                assert losses[i] == pytest.approx(lv.value, abs=1e-13)
                np.testing.assert_allclose(grads[i], lv.gradient, atol=1e-13)


def permute_off_label(p, y, perm):
    others = [k for k in range(p.size) if k != y]
    q = p.copy()
    q[others] = p[[others[i] for i in perm]]
    return q


def cost_level_mass(p, y, M=M2):
    """Probability mass on each distinct cost value of row ``y``."""
    return {float(c): p[M[y] == c].sum() for c in np.unique(M[y])}


def test_permutation_sensitivity(rng):
    moved = 0
    for _ in range(300):
        z = rng.normal(size=5) * 2
        y = int(rng.integers(5))
        p = softmax(z)
        q = permute_off_label(p, y, rng.permutation(4))
        assert cross_entropy(q, onehot(y)).value == cross_entropy(p, onehot(y)).value
        before, after = cost_level_mass(p, y), cost_level_mass(q, y)
        # grades y - d and y + d share a cost, so swapping them is invisible to the penalty
        if all(abs(before[c] - after[c]) < 1e-15 for c in before):
            assert cs_penalty(q, y, M2).value == pytest.approx(cs_penalty(p, y, M2).value, abs=1e-14)
        else:
            moved += 1
            assert cs_penalty(q, y, M2).value != cs_penalty(p, y, M2).value
    assert moved > 200


@settings(max_examples=200, deadline=None)
@given(
    arrays(np.float64, 5, elements=st.floats(-20, 20)),
    st.integers(0, 4),
    st.floats(0, 20),
    st.sampled_from(["ce", "fl", "nuls"]),
)
def test_gradient_sums_to_zero(z, y, lam, base):
    g = loss_gradient(base, z, y, lam, AST)
    assert np.all(np.isfinite(g))
    assert abs(g.sum()) < 1e-8
