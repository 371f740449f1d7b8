"""Unit tests for the linear-algebra core: shapes, states, traces, fingerprints."""

import numpy as np
import pytest

from heraldlab import qcore
from heraldlab.qcore import (
    DensityOperator,
    PureState,
    SpaceShape,
    basis_ket,
    bell_state,
    content_fingerprint,
    eig_hermitian,
    ghz_state,
    max_mixed,
    partial_trace,
    permute_factors,
    product_state,
    purification,
    random_density,
    tensor,
    trace_distance,
    trace_norm,
    werner_state,
)


class TestSpaceShape:
    def test_dim_is_product_of_factors(self):
        assert SpaceShape((2, 3, 4)).dim == 24
        assert len(SpaceShape((2, 3, 4))) == 3

    def test_rejects_empty_and_nonpositive(self):
        with pytest.raises(ValueError):
            SpaceShape(())
        with pytest.raises(ValueError):
            SpaceShape((2, 0))

    def test_label_count_must_match(self):
        with pytest.raises(ValueError):
            SpaceShape((2, 2), labels=("A",))

    def test_subshape_keeps_labels(self):
        shape = SpaceShape((2, 3, 5), labels=("A", "B", "C"))
        sub = shape.subshape([0, 2])
        assert sub.dims == (2, 5)
        assert sub.labels == ("A", "C")

    def test_as_shape_coercions(self):
        assert qcore.as_shape(4).dims == (4,)
        assert qcore.as_shape([2, 3]).dims == (2, 3)
        shape = SpaceShape((2,))
        assert qcore.as_shape(shape) is shape


class TestDensityOperator:
    def test_normalizes_drift_and_freezes(self):
        rho = DensityOperator((2,), np.diag([0.5 + 5e-11, 0.5]))
        assert rho.matrix.trace().real == pytest.approx(1.0, abs=1e-14)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1.0

    def test_rejects_wrong_trace(self):
        with pytest.raises(ValueError):
            DensityOperator((2,), np.diag([2.0, 2.0]))

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            DensityOperator((2,), np.array([[0.5, 1.0], [0.0, 0.5]]))

    def test_rejects_negative_operator(self):
        with pytest.raises(ValueError):
            DensityOperator((2,), np.diag([1.5, -0.5]))

    def test_rejects_wrong_dimension(self):
        with pytest.raises(ValueError):
            DensityOperator((2, 2), np.eye(2) / 2)

    def test_eigenvalues_descending_and_clamped(self):
        rho = DensityOperator((2,), np.diag([0.25, 0.75]))
        assert np.allclose(rho.eigenvalues(), [0.75, 0.25])


class TestPureState:
    def test_normalizes_vector(self):
        psi = PureState((2,), [3.0, 4.0])
        assert np.linalg.norm(psi.vector) == pytest.approx(1.0)
        assert psi.density().matrix[0, 0] == pytest.approx(0.36)

    def test_rejects_zero_vector(self):
        with pytest.raises(ValueError):
            PureState((2,), [0.0, 0.0])


class TestStateFactories:
    def test_bell_state_marginals_are_maximally_mixed(self):
        rho = bell_state()
        assert rho.shape.dims == (2, 2)
        left = partial_trace(rho, [0])
        assert np.allclose(left.matrix, np.eye(2) / 2)

    def test_ghz_state(self):
        rho = ghz_state(3)
        assert rho.shape.dims == (2, 2, 2)
        v = np.zeros(8)
        v[0] = v[7] = 1 / np.sqrt(2)
        assert np.allclose(rho.matrix, np.outer(v, v))

    def test_werner_endpoints(self):
        singlet = (basis_ket(4, 1) - basis_ket(4, 2)) / np.sqrt(2)
        assert np.allclose(werner_state(1.0).matrix, np.outer(singlet, singlet))
        assert np.allclose(werner_state(0.0).matrix, np.eye(4) / 4)
        with pytest.raises(ValueError):
            werner_state(1.2)

    def test_product_state_concatenates_factors(self):
        rho = product_state(max_mixed(2), bell_state())
        assert rho.shape.dims == (2, 2, 2)
        assert np.allclose(rho.matrix, np.kron(np.eye(2) / 2, bell_state().matrix))

    def test_basis_ket(self):
        assert np.allclose(basis_ket(3, 1), [0, 1, 0])
        with pytest.raises(ValueError):
            basis_ket(3, 3)


class TestTraceOperations:
    def test_partial_trace_of_product_recovers_factor(self):
        a = random_density((2,), seed=5)
        b = random_density((3,), seed=6)
        ab = product_state(a, b)
        assert trace_distance(partial_trace(ab, [0]), a) < 1e-12
        assert trace_distance(partial_trace(ab, [1]), b) < 1e-12

    def test_partial_trace_requires_increasing_indices(self):
        rho = random_density((2, 2), seed=7)
        with pytest.raises(ValueError):
            partial_trace(rho, [1, 0])

    def test_permute_factors_roundtrip(self):
        rho = random_density((2, 3), seed=8)
        swapped = permute_factors(rho, [1, 0])
        assert swapped.shape.dims == (3, 2)
        back = permute_factors(swapped, [1, 0])
        assert trace_distance(back, rho) < 1e-12

    def test_permute_matches_manual_swap_on_product(self):
        a = random_density((2,), seed=9)
        b = random_density((3,), seed=10)
        swapped = permute_factors(product_state(a, b), [1, 0])
        assert trace_distance(swapped, product_state(b, a)) < 1e-12

    def test_trace_norm_and_distance(self):
        m = np.diag([1.0, -2.0])
        assert trace_norm(m) == pytest.approx(3.0)
        a = DensityOperator((2,), np.diag([1.0, 0.0]))
        b = DensityOperator((2,), np.diag([0.0, 1.0]))
        # unnormalized convention: orthogonal pure states sit at distance 2
        assert trace_distance(a, b) == pytest.approx(2.0)
        assert trace_distance(a, a) == pytest.approx(0.0, abs=1e-12)
        with pytest.raises(ValueError):
            trace_distance(a, random_density((2, 2), seed=1))

    def test_eig_hermitian_descending(self):
        w, v = eig_hermitian(np.diag([0.1, 0.9]))
        assert w[0] > w[1]
        assert np.allclose(v[:, 0], [0, 1]) or np.allclose(v[:, 0], [0, -1])


class TestPurification:
    def test_purification_reduces_to_input(self):
        rho = random_density((2, 2), rank=3, seed=11)
        psi = purification(rho)
        full = psi.density()
        n = len(rho.shape.dims)
        reduced = partial_trace(full, list(range(n)))
        assert trace_distance(reduced, rho) < 1e-10

    def test_pure_input_gets_trivial_ancilla(self):
        psi = purification(bell_state())
        assert psi.shape.dims[-1] == 1


class TestTensor:
    def test_tensor_concatenates_shapes(self):
        ab = tensor(max_mixed(2), max_mixed(3))
        assert ab.shape.dims == (2, 3)
        assert np.allclose(ab.matrix, np.eye(6) / 6)


class TestRandomDensity:
    def test_seeded_and_rank_limited(self):
        a = random_density((4,), rank=2, seed=3)
        b = random_density((4,), rank=2, seed=3)
        assert np.array_equal(a.matrix, b.matrix)
        assert (a.eigenvalues() > 1e-12).sum() == 2

    def test_different_seeds_differ(self):
        a = random_density((4,), seed=3)
        b = random_density((4,), seed=4)
        assert trace_distance(a, b) > 1e-6


class TestContentFingerprint:
    def test_stable_and_distinct(self):
        rho = random_density((2,), seed=0)
        f1 = content_fingerprint("tag", 1.5, rho.matrix)
        f2 = content_fingerprint("tag", 1.5, rho.matrix)
        f3 = content_fingerprint("tag", 1.5000001, rho.matrix)
        assert f1 == f2
        assert f1 != f3
        assert len(f1) == 64

    def test_nested_structures_flatten(self):
        f = content_fingerprint(["a", (1, 2)], None)
        assert isinstance(f, str) and len(f) == 64
        assert f == content_fingerprint("a", 1, 2, None)

    def test_unsupported_type_rejected(self):
        with pytest.raises(TypeError):
            content_fingerprint({"k": 3})
