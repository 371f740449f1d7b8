"""Unit tests for squashed-entanglement upper bounds, separable approximation,
heralded averaging and the monogamy harness."""

import json

import numpy as np
import pytest

from heraldlab.channels import (
    dephasing_channel,
    erasure_channel,
    heralded_channel,
    identity_channel,
)
from heraldlab.esq import (
    EsqOpts,
    SepOpts,
    default_monogamy_suite,
    esq_upper,
    esq_upper_through_channel,
    faithfulness_consistency,
    heralded_averaging_check,
    load_state_suite,
    monogamy_harness,
    parse_state_expr,
    ppt_distance_lower,
    separable_approx,
    transfer_extension,
)
from heraldlab.qcore import (
    DensityOperator,
    GuardExceeded,
    bell_state,
    basis_ket,
    ghz_state,
    max_mixed,
    product_state,
    random_density,
    trace_distance,
    trace_norm,
    werner_state,
)

FAST = EsqOpts(restarts=0)


def _cc_state():
    """Classically correlated two-qubit state."""
    m = np.zeros((4, 4))
    m[0, 0] = m[3, 3] = 0.5
    return DensityOperator((2, 2), m)


class TestEsqUpper:
    def test_bell_state_hits_the_baseline(self):
        ub = esq_upper(bell_state(), [0], [1], FAST)
        assert ub.baseline == pytest.approx(1.0)
        assert ub.value == pytest.approx(1.0, abs=1e-6)

    def test_never_exceeds_half_mutual_information(self):
        for seed in range(6):
            rho = random_density((2, 2), rank=2, seed=seed)
            ub = esq_upper(rho, [0], [1], EsqOpts(restarts=2, max_iters=15))
            assert ub.value <= ub.baseline + 1e-9

    def test_copy_extension_kills_classical_correlations(self):
        ub = esq_upper(_cc_state(), [0], [1], FAST)
        assert ub.value <= 1e-4
        assert ub.trace["winner"] == "eigenbasis-copy"

    def test_product_state_is_zero(self):
        rho = product_state(random_density((2,), seed=1), random_density((2,), seed=2))
        ub = esq_upper(rho, [0], [1], FAST)
        assert ub.value <= 1e-9

    def test_extension_marginal_is_verified(self):
        ub = esq_upper(bell_state(), [0], [1], FAST)
        assert ub.trace["marginal_deviation"] < 1e-8
        assert ub.extension.shape.dims[:2] == (2, 2)

    def test_seed_extensions_validated(self):
        rho = _cc_state()
        wrong_dims = DensityOperator((2, 2), rho.matrix)
        with pytest.raises(ValueError):
            esq_upper(rho, [0], [1], FAST, seed_extensions=(wrong_dims,))
        wrong_marginal = DensityOperator((2, 2, 1), bell_state().matrix)
        with pytest.raises(ValueError):
            esq_upper(rho, [0], [1], FAST, seed_extensions=(wrong_marginal,))

    def test_valid_seed_extension_is_offered(self):
        rho = _cc_state()
        seed_ext = DensityOperator((2, 2, 1), rho.matrix)
        ub = esq_upper(rho, [0], [1], FAST, seed_extensions=(seed_ext,))
        assert "seed-0" in ub.trace["candidates"]

    def test_conditioning_budget_validated(self):
        with pytest.raises(ValueError):
            esq_upper(max_mixed((2, 2)), [0], [1], EsqOpts(restarts=1, ext_dim=1, kraus_rank=2))

    def test_dimension_guard(self):
        with pytest.raises(GuardExceeded):
            esq_upper(max_mixed((9, 9)), [0], [1], FAST)


class TestThroughChannel:
    def test_erasure_interpolates(self):
        for lam in (0.0, 0.5, 1.0):
            ub = esq_upper_through_channel(
                bell_state(), erasure_channel(identity_channel(2), lam), FAST
            )
            assert ub.value <= lam + 1e-6

    def test_flag_copy_seed_is_offered(self):
        ub = esq_upper_through_channel(
            bell_state(), erasure_channel(identity_channel(2), 0.5), FAST
        )
        assert "seed-0" in ub.trace["candidates"]

    def test_requires_bystander(self):
        with pytest.raises(ValueError):
            esq_upper_through_channel(bell_state(), identity_channel(4), FAST)
        with pytest.raises(ValueError):
            esq_upper_through_channel(bell_state(), identity_channel(3), FAST)


class TestHeraldedAveraging:
    def test_bell_ancilla_equality_case(self):
        zero = DensityOperator((2,), np.diag([1.0, 0.0]))
        state = product_state(bell_state(), zero)
        rep = heralded_averaging_check(
            [identity_channel(2)] * 2, 1, [("bell-ancilla", state)], FAST
        )
        assert rep.verdict == "PASS"
        assert rep.rhs == pytest.approx(0.5)  # S(B0)=1, L=2
        assert abs(rep.slack) <= 1e-3
        assert rep.details["per_state"][0]["name"] == "bell-ancilla"

    def test_unnamed_states_get_default_names(self):
        state = product_state(bell_state(), max_mixed(2))
        rep = heralded_averaging_check([identity_channel(2)] * 2, 1, [state], FAST)
        assert rep.details["per_state"][0]["name"] == "state-0"

    def test_herald_count_validated(self):
        with pytest.raises(ValueError):
            heralded_averaging_check([identity_channel(2)] * 2, 3, [], FAST)

    def test_missing_bystander_rejected(self):
        state = max_mixed((2, 2))
        with pytest.raises(ValueError):
            heralded_averaging_check([identity_channel(2)] * 2, 1, [state], FAST)


class TestSeparableApprox:
    def test_bell_distance_is_pinned(self):
        sep = separable_approx(bell_state(), [0], [1])
        # upper bound from a finite search: approaches 0.5 from above
        assert 0.5 - 1e-9 <= sep.distance <= 0.5 + 1e-3

    def test_separable_states_reach_zero(self):
        sep = separable_approx(max_mixed((2, 2)), [0], [1])
        assert sep.distance <= 1e-6

    def test_distance_reproduces_from_decomposition(self):
        rho = werner_state(0.8)
        sep = separable_approx(rho, [0], [1], SepOpts(restarts=2, max_sweeps=10))
        sigma = sep.state()
        recomputed = 0.5 * trace_norm(sigma.matrix - rho.matrix)
        assert recomputed == pytest.approx(sep.distance, abs=1e-9)
        assert np.all(sep.weights >= 0)
        assert float(sep.weights.sum()) == pytest.approx(1.0)

    def test_upper_bound_dominates_ppt_witness(self):
        for p in (0.5, 0.8, 1.0):
            rho = werner_state(p)
            sep = separable_approx(rho, [0], [1], SepOpts(restarts=2, max_sweeps=12))
            assert sep.distance >= ppt_distance_lower(rho, [0], [1]) - 1e-6

    def test_cardinality_validated_and_guarded(self):
        with pytest.raises(ValueError):
            separable_approx(bell_state(), [0], [1], SepOpts(cardinality=0))
        with pytest.raises(GuardExceeded):
            separable_approx(max_mixed((7, 7)), [0], [1])


class TestPPTWitness:
    def test_bell_value(self):
        assert ppt_distance_lower(bell_state(), [0], [1]) == pytest.approx(0.5)

    def test_separable_werner_gives_zero(self):
        assert ppt_distance_lower(werner_state(1 / 3), [0], [1]) == pytest.approx(0.0, abs=1e-9)
        assert ppt_distance_lower(werner_state(0.8), [0], [1]) > 0.1


class TestFaithfulness:
    def test_bell_passes(self):
        rep = faithfulness_consistency(bell_state(), [0], [1], FAST, SepOpts(restarts=1))
        assert rep.verdict == "PASS"
        assert rep.lhs == pytest.approx(0.5, abs=1e-3)
        assert rep.rhs == pytest.approx(3.1 * 2 * 1.0, abs=1e-4)
        assert rep.details["ppt_lower"] == pytest.approx(0.5)
        assert rep.passed()


class TestMonogamy:
    def test_default_suite_passes(self):
        reports = monogamy_harness(opts=FAST)
        assert [r.verdict for r in reports] == ["PASS"] * 3
        tight = next(r for r in reports if r.bound_id == "monogamy:bell-spectator")
        assert tight.lhs == pytest.approx(1.0)
        assert tight.rhs == pytest.approx(1.0)

    def test_analytic_arity_validated(self):
        from heraldlab.esq import MonogamyCase

        bad = MonogamyCase("bad", ghz_state(3), (0.0,))
        with pytest.raises(ValueError):
            monogamy_harness((bad,), FAST)


class TestTransferExtension:
    def test_local_processing_never_increases_the_bound(self):
        before = esq_upper(bell_state(), [0], [1], FAST)
        channel = dephasing_channel(0.3)
        moved = transfer_extension(before, channel)
        processed = DensityOperator(
            (2, 2),
            np.asarray(
                # marginal of the transferred extension is the processed state
                _marginal(moved)
            ),
        )
        after = esq_upper(
            processed, [0], [1], FAST, seed_extensions=(moved,)
        )
        assert after.value <= before.value + 1e-9

    def test_dimension_mismatch_rejected(self):
        before = esq_upper(bell_state(), [0], [1], FAST)
        with pytest.raises(ValueError):
            transfer_extension(before, identity_channel(3))


def _marginal(ext: DensityOperator) -> np.ndarray:
    from heraldlab.qcore import partial_trace

    return partial_trace(ext, [0, 1]).matrix


class TestStateExpressions:
    def test_named_constructors(self):
        assert trace_distance(parse_state_expr("bell"), bell_state()) < 1e-12
        assert parse_state_expr("ghz(3)").shape.dims == (2, 2, 2)
        assert parse_state_expr("werner(0.5)").shape.dims == (2, 2)
        assert parse_state_expr("mixed(4)").dim == 4
        assert parse_state_expr("basis(2, 1)").matrix[1, 1] == pytest.approx(1.0)
        prod = parse_state_expr("product(bell, basis(2, 0))")
        assert prod.shape.dims == (2, 2, 2)

    def test_errors(self):
        with pytest.raises(ValueError):
            parse_state_expr("unknown")
        with pytest.raises(ValueError):
            parse_state_expr("bell(")


class TestStateSuiteFile:
    def test_load_mixed_entry_kinds(self, tmp_path):
        cc = _cc_state()
        entries = [
            {"name": "bell", "state": "bell", "analytic_esq": 1.0},
            {
                "name": "cc",
                "dims": [2, 2],
                "matrix": np.stack(
                    [cc.matrix.real, cc.matrix.imag], axis=-1
                ).tolist(),
                "analytic_esq": 0.0,
                "analytic_note": "classically correlated",
            },
        ]
        path = tmp_path / "suite.json"
        path.write_text(json.dumps(entries))
        suite = load_state_suite(path)
        assert [e["name"] for e in suite] == ["bell", "cc"]
        assert trace_distance(suite[0]["rho"], bell_state()) < 1e-12
        assert suite[1]["analytic_esq"] == 0.0
        assert trace_distance(suite[1]["rho"], cc) < 1e-12
