import numpy as np
import pytest

from latentboundary.errors import BudgetExhausted, ContractViolation, DimensionMismatch
from latentboundary.oracles import (
    CachingClassifier,
    CountingClassifier,
    DecisionFn,
    FnClassifier,
    QueryLedger,
    decide,
    decide_latent,
    reset_ledger,
)


def threshold_classifier(cut=0.5):
    """1-D classifier: label 1 iff x >= cut."""
    return FnClassifier(
        fn=lambda x: (1 if x[0] >= cut else 0, 0.9), num_classes=2, input_dim=1
    )


class TestDecide:
    def test_targeted_hit(self):
        d = DecisionFn(target_label=1)
        assert decide(d, threshold_classifier(), QueryLedger(), np.array([0.8]))

    def test_targeted_miss(self):
        d = DecisionFn(target_label=1)
        assert not decide(d, threshold_classifier(), QueryLedger(), np.array([0.2]))

    def test_charges_exactly_one(self):
        d = DecisionFn(target_label=1)
        ledger = QueryLedger()
        decide(d, threshold_classifier(), ledger, np.array([0.8]))
        assert ledger.classify_count == 1

    def test_budget_exhausted_at_boundary(self):
        d = DecisionFn(target_label=1)
        ledger = QueryLedger(budget=2)
        c = threshold_classifier()
        x = np.array([0.8])
        decide(d, c, ledger, x)
        decide(d, c, ledger, x)
        with pytest.raises(BudgetExhausted):
            decide(d, c, ledger, x)
        assert ledger.classify_count == 2  # never exceeds budget

    def test_dim_mismatch(self):
        d = DecisionFn(target_label=1)
        with pytest.raises(DimensionMismatch):
            decide(d, threshold_classifier(), QueryLedger(), np.array([0.1, 0.2]))

    def test_pure_given_fixed_oracles(self):
        d = DecisionFn(target_label=1)
        c = threshold_classifier()
        ledger = QueryLedger()
        x = np.array([0.7])
        assert decide(d, c, ledger, x) == decide(d, c, ledger, x)
        assert ledger.classify_count == 2

    def test_untargeted_mode(self):
        d = DecisionFn(mode="untargeted", source_label=0)
        c = threshold_classifier()
        assert decide(d, c, QueryLedger(), np.array([0.9]))
        assert not decide(d, c, QueryLedger(), np.array([0.1]))

    def test_decision_fn_validation(self):
        with pytest.raises(ContractViolation):
            DecisionFn(mode="sideways", target_label=1)
        with pytest.raises(ContractViolation):
            DecisionFn(mode="targeted")
        with pytest.raises(ContractViolation):
            DecisionFn(mode="untargeted")


class TestDecideLatent(object):
    def test_encoded_target_is_true(self, small_suite):
        s = small_suite
        idx = int(s.samples_of_class(2)[0])
        w = s.encoder.encode(s.sample_image(idx))
        d = DecisionFn(target_label=2)
        ledger = QueryLedger()
        assert decide_latent(d, s.classifier, s.generator, ledger, w)
        assert ledger.classify_count == 1
        assert ledger.generate_count == 1

    def test_encoded_source_is_false(self, small_suite):
        s = small_suite
        idx = int(s.samples_of_class(0)[0])
        w = s.encoder.encode(s.sample_image(idx))
        d = DecisionFn(target_label=2)
        assert not decide_latent(d, s.classifier, s.generator, QueryLedger(), w)

    def test_centroid_preimage_classifies_to_its_class(self, suite):
        d = DecisionFn(target_label=3)
        w = suite.latent_centers[3]
        assert decide_latent(d, suite.classifier, suite.generator, QueryLedger(), w)

    def test_only_classify_charges_budget(self, small_suite):
        s = small_suite
        ledger = QueryLedger(budget=1)
        d = DecisionFn(target_label=2)
        w = s.latent_centers[2]
        decide_latent(d, s.classifier, s.generator, ledger, w)
        assert ledger.generate_count == 1
        with pytest.raises(BudgetExhausted):
            decide_latent(d, s.classifier, s.generator, ledger, w)

    def test_out_of_bounds_latent_rejected(self, small_suite):
        s = small_suite
        d = DecisionFn(target_label=0)
        w = np.full(s.latent_dim, 1.5)
        ledger = QueryLedger()
        with pytest.raises(ContractViolation):
            decide_latent(d, s.classifier, s.generator, ledger, w)
        assert ledger.classify_count == 0


class TestQueryLedger:
    def test_reset(self):
        ledger = QueryLedger()
        ledger.charge_classify()
        ledger.charge_generate()
        ledger.charge_generate()
        assert (ledger.classify_count, ledger.generate_count) == (1, 2)
        reset_ledger(ledger)
        assert (ledger.classify_count, ledger.generate_count) == (0, 0)
        reset_ledger(ledger)
        assert (ledger.classify_count, ledger.generate_count) == (0, 0)

    def test_fresh_ledger_zeroed(self):
        ledger = QueryLedger()
        assert (ledger.classify_count, ledger.generate_count) == (0, 0)

    def test_remaining(self):
        ledger = QueryLedger(budget=3)
        assert ledger.remaining == 3
        ledger.charge_classify()
        assert ledger.remaining == 2
        assert QueryLedger().remaining is None

    def test_negative_budget_rejected(self):
        with pytest.raises(ContractViolation):
            QueryLedger(budget=-1)

    def test_zero_budget_blocks_first_query(self):
        with pytest.raises(BudgetExhausted):
            QueryLedger(budget=0).charge_classify()


class TestWrappers:
    def test_caching_classifier_dedups(self):
        inner = CountingClassifier(threshold_classifier())
        cached = CachingClassifier(inner)
        x = np.array([0.7])
        assert cached.classify(x) == cached.classify(x)
        assert inner.calls == 1
        cached.classify(np.array([0.1]))
        assert inner.calls == 2

    def test_counting_classifier_counts(self):
        c = CountingClassifier(threshold_classifier())
        for _ in range(5):
            c.classify(np.array([0.6]))
        assert c.calls == 5

    def test_no_hidden_queries_in_decide(self):
        counter = CountingClassifier(threshold_classifier())
        ledger = QueryLedger()
        d = DecisionFn(target_label=1)
        for i in range(7):
            decide(d, counter, ledger, np.array([i / 7]))
        assert counter.calls == ledger.classify_count == 7
