"""Unit tests for entropies, information quantities and continuity bounds."""

import math

import numpy as np
import pytest

from heraldlab.entropy import (
    alicki_fannes_bound,
    binary_entropy,
    conditional_entropy,
    conditional_mutual_information,
    entropy_of_spectrum,
    entropy_report,
    mutual_information,
    relative_entropy_raw,
    von_neumann_entropy,
)
from heraldlab.qcore import (
    DensityOperator,
    bell_state,
    ghz_state,
    max_mixed,
    product_state,
    random_density,
)


class TestEntropy:
    def test_pure_and_maximally_mixed(self):
        assert von_neumann_entropy(bell_state()) == pytest.approx(0.0, abs=1e-12)
        assert von_neumann_entropy(max_mixed((2, 2))) == pytest.approx(2.0)

    def test_spectrum_entropy(self):
        assert entropy_of_spectrum(np.array([0.5, 0.5])) == pytest.approx(1.0)
        assert entropy_of_spectrum(np.array([1.0, 0.0])) == pytest.approx(0.0)

    def test_binary_entropy(self):
        assert binary_entropy(0.5) == pytest.approx(1.0)
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        with pytest.raises(ValueError):
            binary_entropy(1.1)


class TestInformationQuantities:
    def test_bell_state_values(self):
        rho = bell_state()
        assert conditional_entropy(rho, [0], [1]) == pytest.approx(-1.0)
        assert mutual_information(rho, [0], [1]) == pytest.approx(2.0)

    def test_product_state_has_no_correlations(self):
        rho = product_state(random_density((2,), seed=1), random_density((2,), seed=2))
        assert abs(mutual_information(rho, [0], [1])) < 1e-10

    def test_cmi_on_ghz(self):
        rho = ghz_state(3)
        # purity gives S(AC) = S(B), S(BC) = S(A), S(ABC) = 0
        assert conditional_mutual_information(rho, [0], [1], [2]) == pytest.approx(1.0)
        assert conditional_mutual_information(rho, [0], [1], []) == pytest.approx(1.0)

    def test_cmi_vanishes_on_markov_chain(self):
        m = np.zeros((8, 8))
        m[0, 0] = m[7, 7] = 0.5
        rho = DensityOperator((2, 2, 2), m)
        assert conditional_mutual_information(rho, [0], [1], [2]) == pytest.approx(
            0.0, abs=1e-10
        )

    def test_groups_must_be_disjoint(self):
        rho = random_density((2, 2), seed=3)
        with pytest.raises(ValueError):
            mutual_information(rho, [0], [0])

    def test_cmi_nonnegative_on_random_states(self):
        for seed in range(20):
            rho = random_density((2, 2, 2), rank=3, seed=seed)
            assert conditional_mutual_information(rho, [0], [1], [2]) >= -1e-9


class TestContinuityBounds:
    def test_zero_distance_gives_zero(self):
        assert alicki_fannes_bound(0.0, 2, "refined") == 0.0
        assert alicki_fannes_bound(0.0, 2, "weak") == 0.0

    def test_refined_below_weak(self):
        for delta in (1e-4, 0.01, 0.1, 0.5, 1.0):
            for dim in (2, 4, 8):
                refined = alicki_fannes_bound(delta, dim, "refined")
                weak = alicki_fannes_bound(delta, dim, "weak")
                assert refined <= weak + 1e-12

    def test_known_value(self):
        got = alicki_fannes_bound(0.1, 2, "refined")
        want = 0.2 + 1.1 * binary_entropy(0.1 / 1.1)
        assert got == pytest.approx(want)

    def test_bound_respected_on_conditional_entropy(self, rng):
        for _ in range(25):
            seeds = rng.integers(0, 2**31, size=2)
            rho = random_density((2, 2), rank=2, seed=int(seeds[0]))
            sigma = random_density((2, 2), rank=2, seed=int(seeds[1]))
            # unnormalized trace distance; the bound consumes the normalized one
            delta = 0.5 * float(
                np.abs(np.linalg.eigvalsh(rho.matrix - sigma.matrix)).sum()
            )
            gap = abs(
                conditional_entropy(rho, [0], [1]) - conditional_entropy(sigma, [0], [1])
            )
            assert gap <= alicki_fannes_bound(min(delta, 1.0), 2, "refined") + 1e-9

    def test_input_validation(self):
        with pytest.raises(ValueError):
            alicki_fannes_bound(-0.1, 2)
        with pytest.raises(ValueError):
            alicki_fannes_bound(0.1, 0)
        with pytest.raises(ValueError):
            alicki_fannes_bound(0.1, 2, "sharpest")


class TestRelativeEntropy:
    def test_zero_on_equal_states(self):
        rho = random_density((2,), seed=4)
        assert relative_entropy_raw(rho.matrix, rho.matrix) == pytest.approx(0.0, abs=1e-10)

    def test_infinite_outside_support(self):
        rho = np.diag([1.0, 0.0])
        sigma = np.diag([0.0, 1.0])
        assert math.isinf(relative_entropy_raw(rho, sigma))

    def test_classical_value(self):
        rho = np.diag([0.75, 0.25])
        sigma = np.diag([0.5, 0.5])
        want = 0.75 * math.log2(1.5) + 0.25 * math.log2(0.5)
        assert relative_entropy_raw(rho, sigma) == pytest.approx(want)


class TestEntropyReport:
    def test_report_round_trip(self):
        rep = entropy_report(bell_state(), "mutual", [0], [1])
        assert rep.value == pytest.approx(2.0)
        d = rep.to_dict()
        assert d["quantity"] == "mutual"
        assert d["subsystems"] == [[0], [1]]
        assert len(d["state_fingerprint"]) == 64

    def test_arity_and_name_validation(self):
        with pytest.raises(ValueError):
            entropy_report(bell_state(), "mutual", [0])
        with pytest.raises(ValueError):
            entropy_report(bell_state(), "negentropy")
