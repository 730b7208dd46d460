import numpy as np
import pytest

from ordinalcs.bootstrap import paired_bootstrap_test, resample_rng, stratified_resample
from ordinalcs.errors import EmptyInputError, InvalidInputError, UnstableStatisticError
from ordinalcs.metrics import METRICS


def onehot(pred, c):
    out = np.zeros((len(pred), c))
    out[np.arange(len(pred)), pred] = 1.0
    return out


def test_stratified_small():
    labels = np.array([0, 0, 1])
    for k in range(200):
        idx = stratified_resample(labels, resample_rng(3, k))
        assert sorted(labels[idx].tolist()) == [0, 0, 1]
        assert set(idx[labels[idx] == 0].tolist()) <= {0, 1}
        assert idx[labels[idx] == 1].tolist() == [2]


def test_single_class():
    idx = stratified_resample(np.full(9, 4), 0)
    assert idx.size == 9 and idx.min() >= 0 and idx.max() < 9


def test_deterministic():
    labels = np.random.default_rng(0).integers(0, 5, 300)
    assert stratified_resample(labels, 11).tobytes() == stratified_resample(labels, 11).tobytes()


def test_empty():
    with pytest.raises(EmptyInputError):
        stratified_resample([], 0)


def test_counts_preserved_1000(rng):
    labels = rng.integers(0, 5, 400)
    want = np.bincount(labels, minlength=5)
    for k in range(1000):
        got = np.bincount(labels[stratified_resample(labels, resample_rng(0, k))], minlength=5)
        assert np.array_equal(got, want)


@pytest.fixture
def balanced():
    truths = np.repeat(np.arange(5), 100)
    return truths, onehot(truths, 5), onehot(4 - truths, 5)


@pytest.mark.parametrize("metric", sorted(METRICS))
def test_identical_models(metric, rng):
    truths = rng.integers(0, 5, 200)
    probs = rng.dirichlet(np.ones(5), 200)
    r = paired_bootstrap_test(truths, probs, probs, metric, n=200, seed=1)
    assert all(d == 0 for d in r.diffs)
    assert r.p_value == 1.0 and not r.significant


def test_perfect_vs_antidiagonal(balanced):
    truths, a, b = balanced
    r = paired_bootstrap_test(truths, a, b, "quad_kappa", n=1000, seed=0)
    assert r.observed_diff == pytest.approx(2.0, abs=1e-12)
    assert r.p_value < 0.05 and r.significant
    assert r.n_resamples == len(r.diffs) == 1000
    assert r.ci95[0] <= r.ci95[1]


def test_deterministic_result(rng):
    truths = rng.integers(0, 5, 150)
    a = rng.dirichlet(np.ones(5), 150)
    b = rng.dirichlet(np.ones(5), 150)
    r1 = paired_bootstrap_test(truths, a, b, "mauc", n=300, seed=9)
    r2 = paired_bootstrap_test(truths, a, b, "mauc", n=300, seed=9)
    r3 = paired_bootstrap_test(truths, a, b, "mauc", n=300, seed=9, workers=4)
    assert r1.to_json() == r2.to_json() == r3.to_json()


def test_swap_negates(rng):
    truths = rng.integers(0, 5, 150)
    a = rng.dirichlet(np.ones(5), 150)
    b = rng.dirichlet(np.ones(5), 150)
    ab = paired_bootstrap_test(truths, a, b, "quad_kappa", n=300, seed=2)
    ba = paired_bootstrap_test(truths, b, a, "quad_kappa", n=300, seed=2)
    assert ab.observed_diff == -ba.observed_diff
    assert ab.diffs == [-d for d in ba.diffs]
    assert ab.p_value == ba.p_value


def test_misaligned():
    with pytest.raises(InvalidInputError):
        paired_bootstrap_test([0, 1], np.eye(2), np.eye(3)[:, :2], "aca")


def test_unstable(monkeypatch):
    from ordinalcs import bootstrap
    from ordinalcs.errors import UndefinedStatisticError

    calls = iter(range(10**6))

    def flaky(preds):
        # defined for the two full-data calls, then undefined 3 calls in 4
        k = next(calls)
        if k >= 2 and k % 4:
            raise UndefinedStatisticError("flaky")
        return 0.0

    monkeypatch.setitem(bootstrap.METRICS, "flaky", flaky)
    truths = np.array([0, 1, 0, 1])
    with pytest.raises(UnstableStatisticError):
        paired_bootstrap_test(truths, onehot(truths, 2), onehot(truths, 2), "flaky", n=20)


def test_undefined_resamples_dropped(monkeypatch):
    from ordinalcs import bootstrap
    from ordinalcs.errors import UndefinedStatisticError

    calls = iter(range(10**6))

    def sometimes(preds):
        if next(calls) % 10 == 5:
            raise UndefinedStatisticError("sometimes")
        return 1.0

    monkeypatch.setitem(bootstrap.METRICS, "sometimes", sometimes)
    truths = np.array([0, 1, 0, 1])
    r = paired_bootstrap_test(truths, onehot(truths, 2), onehot(truths, 2), "sometimes", n=50)
    assert r.n_undefined > 0
    assert r.n_resamples + r.n_undefined == r.n_requested == 50
    assert len(r.diffs) == r.n_resamples
