"""Unit tests for inequality reports: corrections, herald specs, and verdicts.

The smallness hypothesis 3.1 d (lam_bar log2 d)^(1/4) <= 2 fails for every
d >= 2 at desk-scale leftover weights, so the additivity-defect family is
exercised for PASS on one-dimensional constituents (where every term is
exactly zero) and for the forced INCONCLUSIVE(hypothesis) verdict on qubits.
"""

import math

import numpy as np
import pytest

from heraldlab.bounds import (
    COMPARE_TOL,
    PASS_TOL,
    BoundReport,
    HeraldBlock,
    HeraldSpec,
    blocksize_bound,
    blocksize_coefficient,
    cor42_bound,
    cor43_bound,
    cor53_bound,
    correction_term,
    herald_count_check,
    hypothesis_margin,
    post_selected_capacity,
    thm33_correction,
    thm41_bound,
    thm51_compare,
)
from heraldlab.channels import (
    dephasing_channel,
    depolarizing_channel,
    identity_channel,
    trivial_channel,
)
from heraldlab.holevo import HolevoOpts, ensemble_from_vectors
from heraldlab.qcore import basis_ket

OPTS = HolevoOpts(restarts=1, ensemble_size=4, max_iters=40)


class TestCorrectionTerms:
    def test_infinite_beyond_the_hypothesis(self):
        # at d = 2 the threshold sits at lam_bar = (2/6.2)^4
        edge = (2.0 / 6.2) ** 4
        assert math.isinf(correction_term(edge * 1.01, 2))
        assert math.isfinite(correction_term(edge * 0.99, 2))

    def test_margin_sign_matches_finiteness(self):
        for lam_bar, d in ((0.005, 2), (0.02, 2), (0.5, 4), (1e-4, 2)):
            finite = math.isfinite(correction_term(lam_bar, d))
            assert finite == (hypothesis_margin(lam_bar, d) >= 0.0)

    def test_positive_and_shrinking(self):
        small = correction_term(1e-6, 2)
        smaller = correction_term(1e-8, 2)
        assert 0 < smaller < small

    def test_validation(self):
        with pytest.raises(ValueError):
            correction_term(0.0, 2)
        with pytest.raises(ValueError):
            correction_term(1.5, 2)
        with pytest.raises(ValueError):
            correction_term(0.5, 0)

    def test_thm33_forms(self):
        proof = thm33_correction(0.01, 1.0, 2, "proof")
        statement = thm33_correction(0.01, 1.0, 2, "statement")
        assert proof > statement > 0
        assert thm33_correction(0.01, 0.0, 2) == 0.0
        with pytest.raises(ValueError):
            thm33_correction(0.01, -1.0, 2)
        with pytest.raises(ValueError):
            thm33_correction(0.01, 1.0, 2, "sharpened")


class TestHeraldSpecs:
    def test_block_properties(self):
        block = HeraldBlock((identity_channel(2),) * 3, 1)
        assert block.n == 3
        assert block.lam == pytest.approx(1 / 3)
        assert len(block.resolved_psis()) == 3
        assert block.switch().flag_sectors is not None

    def test_block_validation(self):
        with pytest.raises(ValueError):
            HeraldBlock((), 1)
        with pytest.raises(ValueError):
            HeraldBlock((identity_channel(2),), 2)
        with pytest.raises(ValueError):
            HeraldBlock((identity_channel(2),) * 2, 1, psis=(trivial_channel(2),))

    def test_spec_aggregates(self):
        spec = HeraldSpec(
            (
                HeraldBlock((identity_channel(2),) * 3, 1),
                HeraldBlock((identity_channel(2),) * 2, 1),
            )
        )
        assert spec.lam_bar == pytest.approx(1 / 2)  # min(3//1, 2//1) = 2
        assert spec.k_total == 2
        assert spec.max_out_dim() == 2
        assert len(spec.fingerprint()) == 64
        with pytest.raises(ValueError):
            HeraldSpec(())

    def test_explicit_fallbacks_use_the_switch(self):
        block = HeraldBlock(
            (identity_channel(2),) * 2, 1, psis=(dephasing_channel(1.0),) * 2
        )
        switch = block.switch()
        assert len(switch.flag_sectors) == 2


class TestErasureCapacity:
    def test_small_lam_passes_with_positive_slack(self):
        rep = cor53_bound(identity_channel(2), 0.008, OPTS)
        assert rep.verdict == "PASS"
        assert rep.passed()
        assert rep.slack >= 0.0
        assert rep.lhs == pytest.approx(0.008, abs=1e-6)
        assert rep.rhs_breakdown["hypothesis_margin"] > 0

    def test_large_lam_is_inconclusive_by_hypothesis(self):
        rep = cor53_bound(identity_channel(2), 0.3, OPTS)
        assert rep.verdict == "INCONCLUSIVE(hypothesis)"
        assert not rep.passed()
        assert rep.rhs_breakdown["hypothesis_margin"] < 0

    def test_report_plumbing(self):
        rep = cor53_bound(identity_channel(2), 0.008, OPTS)
        assert rep.bound_id == "erasure-capacity"
        assert rep.slack == pytest.approx(rep.rhs - rep.lhs)
        assert len(rep.fingerprint) == 64
        assert rep.details["restarts_used"] == 1
        with pytest.raises(ValueError):
            cor53_bound(identity_channel(2), 1.5, OPTS)

    def test_same_inputs_same_fingerprint(self):
        a = cor53_bound(identity_channel(2), 0.008, OPTS)
        b = cor53_bound(identity_channel(2), 0.008, OPTS)
        c = cor53_bound(identity_channel(2), 0.009, OPTS)
        assert a.fingerprint == b.fingerprint
        assert a.fingerprint != c.fingerprint


class TestPostSelectedCapacity:
    def test_interval_rescales_the_base_bound(self):
        base = cor53_bound(identity_channel(2), 0.008, OPTS)
        rep = post_selected_capacity(identity_channel(2), 0.008, OPTS)
        lower, upper = rep.details["interval"]
        assert lower == pytest.approx(base.lhs / 0.008)
        assert upper == pytest.approx(base.rhs / 0.008)
        assert rep.verdict == "PASS"

    def test_inconclusive_is_inherited(self):
        rep = post_selected_capacity(identity_channel(2), 0.3, OPTS)
        assert rep.verdict == "INCONCLUSIVE(hypothesis)"

    def test_zero_lam_rejected(self):
        with pytest.raises(ValueError):
            post_selected_capacity(identity_channel(2), 0.0, OPTS)


class TestErasureVsHerald:
    def test_typical_point_passes(self):
        rep = thm51_compare(identity_channel(2), 2, 0.5, OPTS)
        assert rep.verdict == "PASS"
        assert rep.rhs == pytest.approx((1 + math.sqrt(0.5)) * 1.0, abs=1e-6)
        assert rep.details["k"] == 1

    def test_full_weight_is_a_relabeling(self):
        # lam = 1: erasures always succeed, the herald keeps every slot
        rep = thm51_compare(identity_channel(2), 2, 1.0, OPTS)
        assert rep.lhs <= 1e-3

    def test_validation(self):
        with pytest.raises(ValueError):
            thm51_compare(identity_channel(2), 4, 0.5, OPTS)
        with pytest.raises(ValueError):
            thm51_compare(identity_channel(2), 2, 1.5, OPTS)


class TestBlocksize:
    def test_coefficient_closed_form(self):
        for lam in (0.0, 0.05, 0.3, 1.0):
            for n in (1, 2, 5):
                want = lam * (1 - (1 - lam) ** (n - 1))
                assert blocksize_coefficient(lam, n) == pytest.approx(want, abs=1e-15)
        assert blocksize_coefficient(0.4, 1) == 0.0
        with pytest.raises(ValueError):
            blocksize_coefficient(1.2, 2)
        with pytest.raises(ValueError):
            blocksize_coefficient(0.5, 0)

    def test_additive_functional_has_zero_correction(self):
        rep = blocksize_bound(None, 0.3, {"f1": [1.0, 1.0], "f_pot": [1.0, 1.0]})
        assert rep.rhs_breakdown["correction"] == 0.0
        assert rep.slack == pytest.approx(0.0, abs=1e-15)
        assert rep.verdict == "PASS"

    def test_superadditive_gap_scales_by_coefficient(self):
        rep = blocksize_bound(None, 0.2, {"f1": [1.0, 0.5], "f_pot": [1.5, 1.0]})
        coeff = blocksize_coefficient(0.2, 2)
        assert rep.details["coefficient"] == pytest.approx(coeff, abs=1e-15)
        assert rep.rhs_breakdown["correction"] == pytest.approx(coeff * 1.0)
        assert rep.details["correction_display"] == pytest.approx(1 * 0.2**2 * 1.0)

    def test_value_validation(self):
        with pytest.raises(ValueError):
            blocksize_bound(None, 0.2, {"f1": [1.0], "f_pot": [0.5]})
        with pytest.raises(ValueError):
            blocksize_bound(None, 0.2, {"f1": [1.0, 1.0], "f_pot": [1.0]})
        with pytest.raises(ValueError):
            blocksize_bound(None, 0.2, None)

    def test_holevo_functional_from_channels(self):
        rep = blocksize_bound([depolarizing_channel(2, 0.4)] * 2, 0.3, None, OPTS)
        assert rep.verdict == "PASS"
        assert rep.lhs == pytest.approx(rep.rhs_breakdown["weighted_single_shot"], abs=1e-4)


class TestAdditivityDefectFamily:
    def test_qubit_constituents_are_hypothesis_limited(self):
        spec = HeraldSpec((HeraldBlock((identity_channel(2),) * 2, 1),))
        rep41 = thm41_bound(identity_channel(2), spec, OPTS)
        rep42 = cor42_bound(spec, OPTS)
        rep43 = cor43_bound(identity_channel(2), spec, OPTS)
        for rep in (rep41, rep42, rep43):
            assert rep.verdict == "INCONCLUSIVE(hypothesis)"
            assert rep.rhs_breakdown["hypothesis_margin"] < 0

    def test_one_dimensional_constituents_pass_exactly(self):
        one = identity_channel(1)
        spec = HeraldSpec((HeraldBlock((one,) * 2, 1),))
        rep41 = thm41_bound(one, spec, OPTS)
        rep42 = cor42_bound(spec, OPTS)
        rep43 = cor43_bound(one, spec, OPTS)
        for rep in (rep41, rep42, rep43):
            assert rep.verdict == "PASS"
            assert rep.lhs == pytest.approx(0.0, abs=1e-9)
            assert rep.rhs == pytest.approx(0.0, abs=1e-9)

    def test_bound_ids_and_lhs_content(self):
        spec = HeraldSpec((HeraldBlock((identity_channel(2),) * 2, 1),))
        rep41 = thm41_bound(identity_channel(2), spec, OPTS)
        assert rep41.bound_id == "additivity-defect"
        # chi(id2 x switch) = 1 + chi(switch); the heralded part alone carries 1
        assert rep41.lhs == pytest.approx(2.0, abs=1e-3)
        assert rep41.rhs_breakdown["chi_bystander"] == pytest.approx(1.0)
        rep42 = cor42_bound(spec, OPTS)
        assert rep42.bound_id == "heralded-capacity"
        assert rep42.rhs_breakdown["chi_hits"] == pytest.approx(1.0)  # 2 slots x lam/2
        rep43 = cor43_bound(identity_channel(2), spec, OPTS)
        assert rep43.bound_id == "joint-capacity"


class TestHeraldCountCheck:
    def test_identity_budget_is_tight(self):
        ens = ensemble_from_vectors(
            (2, 2), np.full(4, 0.25), [basis_ket(4, i) for i in range(4)]
        )
        rep = herald_count_check(identity_channel(2), 2, 1, 2, ens, OPTS)
        assert rep.details["info_low_count"] == pytest.approx(1.0, abs=1e-9)
        assert rep.details["info_high_count"] == pytest.approx(2.0, abs=1e-9)
        assert rep.details["nondecreasing_in_count"] is True
        assert rep.verdict == "PASS"
        assert rep.slack == pytest.approx(0.0, abs=1e-9)

    def test_count_ordering_validated(self):
        ens = ensemble_from_vectors(
            (2, 2), np.full(4, 0.25), [basis_ket(4, i) for i in range(4)]
        )
        with pytest.raises(ValueError):
            herald_count_check(identity_channel(2), 2, 2, 1, ens, OPTS)


class TestReportConventions:
    def test_tolerances_are_ordered(self):
        assert PASS_TOL < COMPARE_TOL

    def test_no_failure_verdict_exists(self):
        # every non-PASS verdict must carry an INCONCLUSIVE reason
        rep = cor53_bound(identity_channel(2), 0.3, OPTS)
        assert rep.verdict.startswith("INCONCLUSIVE(")
        assert rep.verdict.endswith(")")

    def test_slack_is_always_finite_on_pass(self):
        rep = cor53_bound(identity_channel(2), 0.008, OPTS)
        assert math.isfinite(rep.slack)
