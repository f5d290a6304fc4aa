"""Estimator laws certified by subset enumeration, plus ledger exactness."""

import math
from itertools import combinations

import numpy as np
import pytest

from katyusha_h.estimator import (
    EnumerationCapError,
    IfoLedger,
    enumeration_mean_estimate,
    exact_variance,
    make_checkpoint,
    maybe_update_checkpoint,
    sample_subset,
    svrg_estimate,
    variance_bound_rhs,
)
from katyusha_h.problems import (
    SparseDataset,
    make_least_squares,
    make_rng,
    synthesize,
)


def scalar_quadratic_problem():
    ds = SparseDataset(rows=[[(1, 1.0)], [(1, 1.0)]], labels=np.array([1.0, -1.0]), d=1)
    return make_least_squares(ds)


class TestSampleSubset:
    def test_degenerate_cases(self):
        rng = make_rng(0)
        assert list(sample_subset(1, 1, rng)) == [0]
        assert sorted(sample_subset(5, 5, rng)) == [0, 1, 2, 3, 4]

    def test_domain(self):
        rng = make_rng(0)
        with pytest.raises(ValueError):
            sample_subset(3, 4, rng)
        with pytest.raises(ValueError):
            sample_subset(3, 0, rng)

    def test_distinct_indices(self):
        rng = make_rng(1)
        for _ in range(500):
            out = sample_subset(10, 4, rng)
            assert len(set(out.tolist())) == 4
            assert all(0 <= i < 10 for i in out)

    def test_uniform_over_subsets(self):
        # all C(4,2)=6 subsets; 10^6 draws within 4 sigma of 1/6 each
        rng = make_rng(7)
        draws = 1_000_000
        counts = {frozenset(c): 0 for c in combinations(range(4), 2)}
        for _ in range(draws):
            counts[frozenset(sample_subset(4, 2, rng).tolist())] += 1
        p = 1 / 6
        sigma = math.sqrt(draws * p * (1 - p))
        for subset, count in counts.items():
            assert abs(count - draws * p) <= 4 * sigma, (subset, count)


class TestSvrgEstimate:
    def test_full_batch_is_exact_full_gradient(self):
        _, prob = synthesize(6, 3, "least_squares", seed=2)
        ledger = IfoLedger()
        ckpt = make_checkpoint(np.ones(3), prob, ledger)
        x = make_rng(3).standard_normal(3)
        g = svrg_estimate(x, ckpt, np.arange(6), prob, ledger)
        assert np.array_equal(g, prob.full_grad(x))

    def test_at_checkpoint_returns_full_gradient(self):
        _, prob = synthesize(6, 3, "least_squares", seed=2)
        ledger = IfoLedger()
        w = make_rng(4).standard_normal(3)
        ckpt = make_checkpoint(w, prob, ledger)
        g = svrg_estimate(w, ckpt, np.array([1, 4]), prob, ledger)
        np.testing.assert_allclose(g, ckpt.full_grad, atol=1e-15)

    @pytest.mark.parametrize("family", ["least_squares", "logistic"])
    @pytest.mark.parametrize("b", [1, 2, 3])
    def test_unbiased_by_enumeration(self, family, b):
        _, prob = synthesize(6, 4, family, seed=5)
        ledger = IfoLedger()
        ckpt = make_checkpoint(make_rng(6).standard_normal(4), prob, ledger)
        rng = make_rng(7)
        for _ in range(20):
            x = rng.standard_normal(4)
            mean = enumeration_mean_estimate(x, ckpt, b, prob)
            target = prob.full_grad(x)
            scale = max(1.0, float(np.linalg.norm(target)))
            assert np.linalg.norm(mean - target) <= 1e-12 * scale

    def test_unbiased_at_largest_small_instance(self):
        # upper edge of the enumeration regime: n = 8, b = 3
        _, prob = synthesize(8, 3, "least_squares", seed=14)
        ledger = IfoLedger()
        ckpt = make_checkpoint(make_rng(15).standard_normal(3), prob, ledger)
        rng = make_rng(16)
        for _ in range(10):
            x = rng.standard_normal(3)
            mean = enumeration_mean_estimate(x, ckpt, 3, prob)
            target = prob.full_grad(x)
            assert np.linalg.norm(mean - target) <= 1e-12 * max(
                1.0, float(np.linalg.norm(target))
            )

    def test_ledger_charges_two_b(self):
        _, prob = synthesize(6, 3, "least_squares", seed=2)
        ledger = IfoLedger()
        ckpt = make_checkpoint(np.zeros(3), prob, ledger)
        assert ledger.checkpoint_calls == 6
        svrg_estimate(np.ones(3), ckpt, np.array([0, 2]), prob, ledger)
        assert ledger.minibatch_calls == 4

    def test_cache_halves_minibatch_cost(self):
        _, prob = synthesize(6, 3, "least_squares", seed=2)
        plain, cached = IfoLedger(), IfoLedger()
        ck_plain = make_checkpoint(np.zeros(3), prob, plain)
        ck_cached = make_checkpoint(np.zeros(3), prob, cached, cache=True)
        x = np.ones(3)
        idx = np.array([1, 3])
        g1 = svrg_estimate(x, ck_plain, idx, prob, plain)
        g2 = svrg_estimate(x, ck_cached, idx, prob, cached)
        np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-15)
        assert plain.minibatch_calls == 4 and cached.minibatch_calls == 2


class TestCheckpointUpdate:
    def test_zero_probability_never_updates(self):
        _, prob = synthesize(4, 2, "least_squares", seed=1)
        ledger = IfoLedger()
        ckpt = make_checkpoint(np.zeros(2), prob, ledger)
        base = ledger.checkpoint_calls
        rng = make_rng(9)
        for _ in range(100):
            ckpt, updated = maybe_update_checkpoint(
                ckpt, np.ones(2), 0.0, rng, prob, ledger
            )
            assert not updated
        assert ledger.checkpoint_calls == base

    def test_certain_update_costs_n(self):
        _, prob = synthesize(4, 2, "least_squares", seed=1)
        ledger = IfoLedger()
        ckpt = make_checkpoint(np.zeros(2), prob, ledger)
        base = ledger.checkpoint_calls
        new, updated = maybe_update_checkpoint(
            ckpt, np.ones(2), 1.0, make_rng(9), prob, ledger
        )
        assert updated and new.version == 1
        assert ledger.checkpoint_calls == base + prob.n
        np.testing.assert_array_equal(new.w, np.ones(2))
        np.testing.assert_allclose(new.full_grad, prob.full_grad(np.ones(2)), rtol=1e-15)

    def test_provenance_skip_costs_nothing(self):
        _, prob = synthesize(4, 2, "least_squares", seed=1)
        ledger = IfoLedger()
        ckpt = make_checkpoint(np.zeros(2), prob, ledger)
        base = ledger.checkpoint_calls
        same, updated = maybe_update_checkpoint(
            ckpt, ckpt.w, 1.0, make_rng(9), prob, ledger, candidate_version=ckpt.version
        )
        assert updated and same is ckpt
        assert ledger.checkpoint_calls == base

    def test_update_frequency(self):
        # 10^5 Bernoulli(0.25) trials within 4 sigma
        _, prob = synthesize(2, 2, "least_squares", seed=1)
        ledger = IfoLedger()
        ckpt = make_checkpoint(np.zeros(2), prob, ledger)
        rng = make_rng(123)
        trials, hits = 100_000, 0
        for _ in range(trials):
            _, updated = maybe_update_checkpoint(
                ckpt, ckpt.w, 0.25, rng, prob, ledger, candidate_version=ckpt.version
            )
            hits += updated
        sigma = math.sqrt(trials * 0.25 * 0.75)
        assert abs(hits - trials * 0.25) <= 4 * sigma

    def test_probability_domain(self):
        _, prob = synthesize(2, 2, "least_squares", seed=1)
        ledger = IfoLedger()
        ckpt = make_checkpoint(np.zeros(2), prob, ledger)
        with pytest.raises(ValueError):
            maybe_update_checkpoint(ckpt, np.ones(2), 1.5, make_rng(0), prob, ledger)


class TestVarianceBound:
    def test_zero_at_checkpoint(self):
        prob = scalar_quadratic_problem()
        x = np.array([0.7])
        assert variance_bound_rhs(x, x, prob, 1) == pytest.approx(0.0, abs=1e-15)

    def test_scalar_quadratic_value(self):
        # f(x) = (x^2+1)/2, L=1: bound = 2*(f(2) - f(0) - 0) = 4
        prob = scalar_quadratic_problem()
        assert variance_bound_rhs(np.array([0.0]), np.array([2.0]), prob, 1) == pytest.approx(4.0)

    def test_scales_inversely_with_b(self):
        prob = scalar_quadratic_problem()
        x, w = np.array([0.0]), np.array([2.0])
        assert variance_bound_rhs(x, w, prob, 1) == pytest.approx(
            2 * variance_bound_rhs(x, w, prob, 2)
        )


class TestExactVariance:
    def test_zero_cases(self):
        _, prob = synthesize(5, 3, "least_squares", seed=8)
        ledger = IfoLedger()
        w = make_rng(1).standard_normal(3)
        ckpt = make_checkpoint(w, prob, ledger)
        assert exact_variance(w, ckpt, 2, prob) == 0.0
        x = make_rng(2).standard_normal(3)
        assert exact_variance(x, ckpt, prob.n, prob) == 0.0

    @pytest.mark.parametrize("b", [1, 2, 3])
    def test_dominated_by_bound(self, b):
        _, prob = synthesize(4, 2, "least_squares", seed=3)
        ledger = IfoLedger()
        rng = make_rng(11)
        for _ in range(10):
            w = rng.standard_normal(2)
            x = rng.standard_normal(2)
            ckpt = make_checkpoint(w, prob, ledger)
            assert exact_variance(x, ckpt, b, prob) <= variance_bound_rhs(
                x, w, prob, b
            ) * (1 + 1e-12) + 1e-15

    def test_matches_direct_enumeration(self):
        _, prob = synthesize(4, 2, "least_squares", seed=3)
        ledger = IfoLedger()
        w = make_rng(4).standard_normal(2)
        x = make_rng(5).standard_normal(2)
        ckpt = make_checkpoint(w, prob, ledger)
        # independent oracle: enumerate the estimator definition literally
        full = prob.full_grad(x)
        acc = 0.0
        subsets = list(combinations(range(4), 2))
        for s in subsets:
            g = sum(
                prob.component_grad(j, x) - prob.component_grad(j, w) for j in s
            ) / 2 + ckpt.full_grad
            acc += float((g - full) @ (g - full))
        assert exact_variance(x, ckpt, 2, prob) == pytest.approx(
            acc / len(subsets), rel=1e-10, abs=1e-13
        )

    def test_refuses_above_cap(self):
        _, prob = synthesize(30, 2, "least_squares", seed=3)
        ledger = IfoLedger()
        ckpt = make_checkpoint(np.zeros(2), prob, ledger)
        with pytest.raises(EnumerationCapError):
            exact_variance(np.ones(2), ckpt, 15, prob, cap=1000)
