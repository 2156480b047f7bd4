import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exceptions import DimensionMismatchError, PreconditionError, SizeCapError
from permgroup import (
    Permutation,
    all_permutations,
    batched_permanent,
    brute_force_permanent,
    double_coset_decompose,
    permanent,
    permutation_matrix,
    permute_tensor_factors,
    rising_factorial,
    sym_dim,
    symmetric_projector,
)


def permutations_of(degree):
    return st.permutations(list(range(degree))).map(Permutation)


@st.composite
def permutation_pairs(draw, max_degree=5):
    degree = draw(st.integers(min_value=1, max_value=max_degree))
    return draw(permutations_of(degree)), draw(permutations_of(degree))


class TestPermutation:
    def test_rejects_non_bijection(self):
        with pytest.raises(PreconditionError):
            Permutation((0, 0, 1))

    def test_composition_order(self):
        p = Permutation.from_cycles(3, [(0, 1)])
        q = Permutation.from_cycles(3, [(1, 2)])
        # (p o q)(1) = p(2) = 2
        assert (p * q)(1) == 2
        assert (q * p)(1) == 0

    def test_cycles_and_sign(self):
        p = Permutation.from_cycles(5, [(0, 2, 4)])
        assert p.cycles() == [(0, 2, 4)]
        assert p.sign() == 1
        assert Permutation.transposition(5, 1, 3).sign() == -1

    def test_mismatched_degrees(self):
        with pytest.raises(DimensionMismatchError):
            Permutation.identity(2) * Permutation.identity(3)

    @given(permutation_pairs())
    def test_inverse(self, pair):
        p, _ = pair
        assert (p * p.inverse()).is_identity()
        assert (p.inverse() * p).is_identity()

    def test_enumeration(self):
        assert len(all_permutations(4)) == 24
        with pytest.raises(SizeCapError):
            all_permutations(9)


class TestDoubleCosets:
    def test_every_element_of_s5(self):
        tau = Permutation.transposition(5, 0, 1)
        for pi in all_permutations(5):
            dec = double_coset_decompose(pi)
            assert dec.alpha.fixes(0) and dec.beta.fixes(0)
            assert dec.a in (0, 1)
            assert dec.product() == pi
            assert (dec.a == 0) == pi.fixes(0)
            if dec.a:
                assert dec.alpha * tau * dec.beta == pi

    @given(st.integers(min_value=2, max_value=8).flatmap(permutations_of))
    def test_decomposition_reassembles(self, pi):
        assert double_coset_decompose(pi).product() == pi


class TestFactorPermutations:
    def test_swap_on_two_qubits(self):
        swap = permutation_matrix(Permutation.transposition(2, 0, 1), 2)
        expected = np.eye(4)[[0, 2, 1, 3]]
        np.testing.assert_array_equal(swap.real, expected)

    def test_factor_moves_to_image_slot(self):
        e = [np.eye(3)[k] for k in range(3)]
        vector = np.kron(np.kron(e[0], e[1]), e[2])
        pi = Permutation((1, 2, 0))
        moved = permute_tensor_factors(vector, pi, 3)
        # slot 0 -> 1, 1 -> 2, 2 -> 0
        np.testing.assert_array_equal(moved, np.kron(np.kron(e[2], e[0]), e[1]))

    @settings(max_examples=40, deadline=None)
    @given(permutation_pairs(max_degree=4))
    def test_representation_property(self, pair):
        p, q = pair
        d = 2
        np.testing.assert_allclose(permutation_matrix(p, d) @ permutation_matrix(q, d),
                                   permutation_matrix(p * q, d), atol=1e-12)

    def test_permutation_matrices_are_orthogonal(self):
        for pi in all_permutations(3):
            m = permutation_matrix(pi, 3)
            np.testing.assert_allclose(m @ m.T, np.eye(27), atol=1e-12)

    def test_wrong_vector_size(self):
        with pytest.raises(DimensionMismatchError):
            permute_tensor_factors(np.ones(5), Permutation.identity(2), 2)

    @pytest.mark.parametrize("copies,d", [(1, 3), (2, 2), (2, 3), (3, 2), (3, 3), (4, 2)])
    def test_symmetric_projector_trace(self, copies, d):
        proj = symmetric_projector(copies, d)
        np.testing.assert_allclose(proj @ proj, proj, atol=1e-12)
        assert abs(np.trace(proj).real - sym_dim(copies, d)) < 1e-9

    def test_sym_dim_and_rising_factorial(self):
        assert sym_dim(2, 2) == 3
        assert sym_dim(3, 4) == 20
        for d in range(1, 6):
            for t in range(0, 5):
                assert sym_dim(t, d) == rising_factorial(d, t) // math.factorial(t)


class TestPermanents:
    def test_known_values(self):
        assert abs(permanent(np.ones((4, 4))) - 24) < 1e-9
        assert abs(permanent(np.eye(5)) - 1) < 1e-12
        assert abs(permanent([[1, 2], [3, 4]]) - 10) < 1e-12
        assert permanent(np.zeros((0, 0))) == 1

    def test_ryser_matches_brute_force(self, rng):
        for n in range(1, 8):
            m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            assert abs(permanent(m) - brute_force_permanent(m)) < 1e-9 * max(1.0, abs(brute_force_permanent(m)))

    def test_batched_matches_single(self, rng):
        stack = rng.normal(size=(600, 4, 4)) + 1j * rng.normal(size=(600, 4, 4))
        batched = batched_permanent(stack, chunk=128)
        singles = np.array([permanent(m) for m in stack[:20]])
        np.testing.assert_allclose(batched[:20], singles, rtol=1e-9, atol=1e-9)
        assert batched.shape == (600,)

    def test_caps_and_shapes(self):
        with pytest.raises(DimensionMismatchError):
            permanent(np.ones((2, 3)))
        with pytest.raises(SizeCapError):
            brute_force_permanent(np.ones((10, 10)))
        with pytest.raises(SizeCapError):
            permanent(np.ones((31, 31)))
