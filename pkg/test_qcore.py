import math

import numpy as np
import pytest

from exceptions import (
    DimensionMismatchError,
    InvalidCutError,
    InvalidDimensionError,
    InvalidSubsetError,
    NonConvergenceWarning,
    NormalizationError,
    SizeCapError,
)
from qcore import (
    DensityMatrix,
    PureState,
    apply_local_unitaries,
    basis_state,
    bell_state,
    cut_representatives,
    distance_to_bp,
    distance_to_mp,
    ghz_state,
    haar_state,
    haar_unitary,
    marginal_purities,
    map_streams,
    nearest_product_overlap,
    partial_trace,
    product_state,
    pure_trace_distance,
    purity,
    rng_stream,
    schmidt,
    trace_distance,
    w_state,
)


class TestSampling:
    def test_haar_state_is_normalized(self, rng):
        for dim in (1, 2, 7, 64):
            state = haar_state(dim, rng)
            assert abs(np.linalg.norm(state.amplitudes) - 1) < 1e-12

    def test_haar_state_dim_one_is_a_phase(self, rng):
        assert abs(abs(haar_state(1, rng).amplitudes[0]) - 1) < 1e-12

    def test_haar_state_rejects_empty_dimension(self, rng):
        with pytest.raises(InvalidDimensionError):
            haar_state(0, rng)

    def test_haar_unitary_is_unitary(self, rng):
        u = haar_unitary(5, rng)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(5), atol=1e-12)
        stack = haar_unitary(3, rng, size=10)
        assert stack.shape == (10, 3, 3)
        np.testing.assert_allclose(stack @ np.swapaxes(stack.conj(), 1, 2), np.broadcast_to(np.eye(3), (10, 3, 3)),
                                   atol=1e-12)

    def test_streams_are_reproducible(self):
        a = rng_stream(7, 3).normal(size=4)
        b = rng_stream(7, 3).normal(size=4)
        c = rng_stream(7, 4).normal(size=4)
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)

    def test_map_streams_ignores_worker_count(self):
        def draw(index, stream):
            return (index, float(stream.normal()))
        assert map_streams(draw, 11, 8, threads=1) == map_streams(draw, 11, 8, threads=4)


class TestStateTypes:
    def test_unnormalized_vector_is_rejected(self):
        with pytest.raises(NormalizationError):
            PureState(np.array([1.0, 1.0]), 2, 1)

    def test_size_must_match_factors(self):
        with pytest.raises(InvalidDimensionError):
            PureState(np.array([1.0, 0, 0]), 2, 2)

    def test_amplitudes_are_read_only(self):
        state = basis_state([0, 1], 2)
        with pytest.raises(ValueError):
            state.amplitudes[0] = 1.0

    def test_from_vector_normalizes(self):
        state = PureState.from_vector([3.0, 4.0])
        np.testing.assert_allclose(state.amplitudes, [0.6, 0.8])

    def test_density_matrix_checks_trace(self):
        with pytest.raises(NormalizationError):
            DensityMatrix(np.eye(2), 2, 1)

    def test_json_round_trip(self, rng):
        state = PureState(haar_state(8, rng).amplitudes, 2, 3)
        again = PureState.from_dict(state.to_dict())
        np.testing.assert_array_equal(again.amplitudes, state.amplitudes)
        assert (again.local_dim, again.num_factors) == (2, 3)


class TestMarginals:
    def test_bell_marginal_is_maximally_mixed(self):
        np.testing.assert_allclose(partial_trace(bell_state(), [0]).matrix, np.eye(2) / 2, atol=1e-15)

    def test_product_marginal_is_pure(self, rng):
        state = product_state([haar_state(3, rng) for _ in range(3)])
        assert abs(purity(partial_trace(state, [1])) - 1) < 1e-12
        assert abs(purity(partial_trace(state, [0, 2])) - 1) < 1e-12

    def test_mixed_and_pure_paths_agree(self, rng):
        state = PureState(haar_state(27, rng).amplitudes, 3, 3)
        for keep in ([0], [2], [0, 2], [1, 2]):
            np.testing.assert_allclose(partial_trace(state, keep).matrix,
                                       partial_trace(state.density(), keep).matrix, atol=1e-12)

    def test_invalid_subsets(self):
        with pytest.raises(InvalidSubsetError):
            partial_trace(bell_state(), [])
        with pytest.raises(InvalidSubsetError):
            partial_trace(bell_state(), [2])
        with pytest.raises(InvalidSubsetError):
            partial_trace(bell_state(), [0, 0])

    def test_purity_of_maximally_mixed(self):
        assert abs(purity(DensityMatrix.maximally_mixed(2, 2)) - 0.25) < 1e-15


class TestSchmidt:
    def test_bell_coefficients(self):
        data = schmidt(bell_state(), [0])
        np.testing.assert_allclose(data.coefficients, [0.5, 0.5], atol=1e-12)
        assert data.rank() == 2

    def test_product_has_rank_one(self, rng):
        state = product_state([haar_state(2, rng) for _ in range(3)])
        assert schmidt(state, [1]).rank(1e-10) == 1

    def test_trivial_cuts_are_rejected(self):
        with pytest.raises(InvalidCutError):
            schmidt(ghz_state(3), [])
        with pytest.raises(InvalidCutError):
            schmidt(ghz_state(3), [0, 1, 2])


class TestDistances:
    def test_trace_distance_of_orthogonal_states(self):
        assert abs(trace_distance(basis_state([0], 2), basis_state([1], 2)) - 1) < 1e-12
        assert trace_distance(bell_state(), bell_state()) < 1e-12

    def test_trace_distance_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            trace_distance(basis_state([0], 2), basis_state([0], 3))

    def test_pure_formula_matches_eigenvalues(self, rng):
        a, b = haar_state(6, rng), haar_state(6, rng)
        assert abs(pure_trace_distance(a, b) - trace_distance(a, b)) < 1e-10

    def test_cut_count(self):
        assert len(list(cut_representatives(4))) == 7
        assert all(0 in cut for cut in cut_representatives(5))

    def test_bell_distance_to_bp(self):
        distance, cut = distance_to_bp(bell_state())
        assert abs(distance - math.sqrt(0.5)) < 1e-12
        assert cut == (0,)

    def test_bell_times_zero_is_bp(self):
        state = product_state([[1, 0]]).amplitudes
        state = PureState(np.kron(bell_state().amplitudes, state), 2, 3)
        distance, cut = distance_to_bp(state)
        assert distance < 1e-7
        assert cut == (2,)

    def test_distance_to_bp_caps(self):
        with pytest.raises(InvalidDimensionError):
            distance_to_bp(basis_state([0], 2))
        with pytest.raises(SizeCapError):
            distance_to_bp(PureState(np.ones(1), 1, 21))

    def test_local_unitaries_preserve_distance(self, rng):
        state = PureState(haar_state(8, rng).amplitudes, 2, 3)
        rotated = apply_local_unitaries(state, [haar_unitary(2, rng) for _ in range(3)])
        assert abs(distance_to_bp(state)[0] - distance_to_bp(rotated)[0]) < 1e-10


class TestProductOverlap:
    def test_product_state_is_at_distance_zero(self, rng):
        state = product_state([haar_state(2, rng) for _ in range(4)])
        assert distance_to_mp(state, rng=rng) < 1e-6

    def test_bell_is_exact(self):
        assert abs(distance_to_mp(bell_state()) - math.sqrt(0.5)) < 1e-12

    def test_ghz_and_w(self, rng):
        assert abs(distance_to_mp(ghz_state(3), rng=rng) - math.sqrt(0.5)) < 1e-6
        assert abs(distance_to_mp(w_state(3), rng=rng) - math.sqrt(5 / 9)) < 1e-6

    def test_iterative_agrees_with_svd_for_two_factors(self, rng):
        state = PureState(haar_state(9, rng).amplitudes, 3, 2)
        exact = nearest_product_overlap(state).overlap
        iterative = nearest_product_overlap(state, rng=rng, exact=False).overlap
        assert abs(exact - iterative) < 1e-8

    def test_factors_reproduce_the_overlap(self, rng):
        for state in (PureState(haar_state(8, rng).amplitudes, 2, 3),
                      PureState(haar_state(16, rng).amplitudes, 4, 2)):
            result = nearest_product_overlap(state, rng=rng)
            overlap = abs(np.vdot(product_state(result.factors).amplitudes, state.amplitudes)) ** 2
            assert abs(overlap - result.overlap) < 1e-10

    def test_iteration_limit_warns(self, rng):
        state = PureState(haar_state(8, rng).amplitudes, 2, 3)
        with pytest.warns(NonConvergenceWarning):
            distance_to_mp(state, restarts=1, iters=1, rng=rng)

    def test_without_rng_is_deterministic(self, rng):
        state = PureState(haar_state(27, rng).amplitudes, 3, 3)
        first = nearest_product_overlap(state, restarts=4)
        second = nearest_product_overlap(state, restarts=4)
        assert first.overlap == second.overlap
        for a, b in zip(first.factors, second.factors):
            np.testing.assert_array_equal(a, b)


def weighted_pair(eps):
    return PureState(np.array([math.sqrt(1 - eps ** 2), 0, 0, eps]), 2, 2)


class TestInvariants:
    def test_weighted_pair_coefficients(self):
        data = schmidt(weighted_pair(0.6), [0])
        np.testing.assert_allclose(data.coefficients, [0.64, 0.36], atol=1e-12)
        assert abs(purity(partial_trace(weighted_pair(0.6), [0])) - 0.5392) < 1e-12

    @pytest.mark.parametrize("d,n,cut", [(2, 3, [0]), (2, 4, [0, 2]), (3, 3, [1])])
    def test_marginal_purity_is_sum_of_squared_coefficients(self, rng, d, n, cut):
        state = PureState(haar_state(d ** n, rng).amplitudes, d, n)
        coefficients = schmidt(state, cut).coefficients
        assert abs(purity(partial_trace(state, cut)) - np.sum(coefficients ** 2)) < 1e-10

    def test_mp_distance_dominates_bp_distance(self, rng_factory):
        for index, (d, n) in enumerate([(2, 3), (2, 4), (3, 3)] * 3):
            stream = rng_factory(index)
            state = PureState(haar_state(d ** n, stream).amplitudes, d, n)
            assert distance_to_mp(state, rng=stream) >= distance_to_bp(state)[0] - 1e-9

    def test_local_unitaries_preserve_mp_distance_and_marginals(self, rng):
        state = PureState(haar_state(8, rng).amplitudes, 2, 3)
        rotated = apply_local_unitaries(state, [haar_unitary(2, rng) for _ in range(3)])
        np.testing.assert_allclose(marginal_purities(state), marginal_purities(rotated), atol=1e-10)
        assert abs(distance_to_mp(state, rng=rng) - distance_to_mp(rotated, rng=rng)) < 1e-6

    def test_max_schmidt_tail_shrinks_with_dimension(self):
        eps = 0.5
        fractions = []
        for d in (2, 3, 4):
            stream = rng_stream(21, d)
            hits = sum(schmidt(PureState(haar_state(d * d, stream).amplitudes, d, 2), [0]).largest >= 1 - eps ** 2
                       for _ in range(2000))
            fractions.append(hits / 2000)
        assert fractions[0] > fractions[1] >= fractions[2]
