import math

import numpy as np
import pytest

from ensembles import (
    EnsembleKind,
    EnsembleSpec,
    FarStateCertificate,
    far_fraction_experiment,
    far_from_bp_union_bound,
    far_state,
    haar_moment_check,
    sample,
    schmidt_tail_bound,
)
from exceptions import FarStateError, InvalidCutError, InvalidDimensionError, PreconditionError
from qcore import DensityMatrix, PureState, distance_to_mp, rng_stream, schmidt


class TestEnsembleSpec:
    def test_bipartite_default_cut(self):
        spec = EnsembleSpec.bipartite_product_haar(4, 2)
        assert spec.cut == (0, 1)
        assert spec.parts == ((0, 1), (2, 3))

    def test_kind_accepts_strings(self):
        spec = EnsembleSpec('global_haar', 2, 3)
        assert spec.kind is EnsembleKind.GLOBAL_HAAR
        assert spec.dim == 9

    def test_invalid_cuts(self):
        with pytest.raises(InvalidCutError):
            EnsembleSpec.bipartite_product_haar(3, 2, cut=(0, 1, 2))
        with pytest.raises(InvalidCutError):
            EnsembleSpec.bipartite_product_haar(1, 2)
        with pytest.raises(InvalidCutError):
            EnsembleSpec(EnsembleKind.GLOBAL_HAAR, 2, 2, cut=(0,))

    def test_far_parameters(self):
        with pytest.raises(PreconditionError):
            EnsembleSpec.far_from_mp(2, 2, 0.8)
        with pytest.raises(PreconditionError):
            EnsembleSpec.far_from_mp(2, 2, 0.0)
        with pytest.raises(InvalidDimensionError):
            EnsembleSpec.far_from_mp(1, 4, 0.5)
        assert EnsembleSpec.far_from_mp(2, 2, 2 ** -0.5).eps == 2 ** -0.5

    def test_parts(self):
        assert EnsembleSpec.global_haar(3, 2).parts == ((0, 1, 2),)
        assert EnsembleSpec.multipartite_product_haar(3, 2).parts == ((0,), (1,), (2,))
        assert EnsembleSpec.maximally_mixed(3, 2).parts is None

    def test_to_dict(self):
        assert EnsembleSpec.bipartite_product_haar(3, 2, cut=[2]).to_dict() == \
            {'kind': 'bipartite_product_haar', 'n': 3, 'd': 2, 'cut': [2]}
        assert EnsembleSpec.far_from_mp(2, 2, 0.5).to_dict()['eps'] == 0.5


class TestSampling:
    def test_global(self, rng):
        state = sample(EnsembleSpec.global_haar(3, 2), rng)
        assert isinstance(state, PureState)
        assert (state.local_dim, state.num_factors) == (2, 3)

    def test_multipartite_is_product(self, rng):
        state = sample(EnsembleSpec.multipartite_product_haar(3, 3), rng)
        assert distance_to_mp(state, rng=rng) < 1e-6

    def test_bipartite_is_product_across_its_cut_only(self, rng):
        state = sample(EnsembleSpec.bipartite_product_haar(3, 2, cut=[1]), rng)
        assert schmidt(state, [1]).rank(1e-10) == 1
        assert schmidt(state, [0]).rank(1e-10) == 2

    def test_maximally_mixed(self, rng):
        rho = sample(EnsembleSpec.maximally_mixed(2, 2), rng)
        assert isinstance(rho, DensityMatrix)
        np.testing.assert_allclose(rho.matrix, np.eye(4) / 4)


class TestFarStates:
    def test_two_qubit_far_state(self, rng):
        cert = far_state(2, 2, 0.6, rng)
        np.testing.assert_allclose(np.abs(cert.state.amplitudes), [0.8, 0, 0, 0.6], atol=1e-12)
        assert abs(cert.eps_measured - 0.6) < 1e-9

    @pytest.mark.parametrize("n,d,eps", [(3, 2, 0.5), (2, 3, 0.3), (4, 2, 0.2)])
    def test_certified_distance(self, rng, n, d, eps):
        cert = far_state(n, d, eps, rng)
        assert abs(cert.eps_measured - eps) <= 1e-6
        assert abs(distance_to_mp(cert.state, rng=rng) - eps) <= 1e-5

    def test_certificate_rejects_mismatch(self, rng):
        state = far_state(2, 2, 0.5, rng).state
        with pytest.raises(FarStateError):
            FarStateCertificate(state, 0.5, 0.4)

    def test_sampled_far_state(self, rng):
        state = sample(EnsembleSpec.far_from_mp(3, 2, 0.4), rng)
        assert abs(abs(state.amplitudes[0]) - math.sqrt(1 - 0.16)) < 1e-12


class TestConcentration:
    def test_schmidt_tail_bound_orders_sides(self):
        threshold, prob = schmidt_tail_bound(4, 2, 1.0)
        assert abs(threshold - (1 / math.sqrt(2) + 1.0)) < 1e-12
        assert abs(prob - math.exp(-2)) < 1e-12
        with pytest.raises(PreconditionError):
            schmidt_tail_bound(2, 2, 0.0)

    def test_union_bound_regimes(self):
        assert far_from_bp_union_bound(2, 2, 0.5) is None
        value = far_from_bp_union_bound(10, 2, 0.1)
        assert value is not None and 0.0 <= value <= 1.0

    def test_far_fraction_report(self):
        report = far_fraction_experiment(2, 6, 0.5, 3000, rng_stream(3), batch=1000)
        assert report.samples == 3000
        assert 0.0 <= report.estimate <= 1.0
        assert report.spec == {'kind': 'global_haar', 'n': 2, 'd': 6}
        (cut,) = report.extra['cuts']
        assert cut['cut'] == [0]
        assert 1 / 6 <= cut['mean_lambda1'] <= 1

    def test_everything_is_within_distance_one(self):
        report = far_fraction_experiment(3, 2, 1.0, 500, rng_stream(3))
        assert report.estimate == 1.0
        assert len(report.extra['cuts']) == 3

    def test_far_fraction_is_reproducible(self):
        a = far_fraction_experiment(3, 2, 0.3, 1000, rng_stream(9))
        b = far_fraction_experiment(3, 2, 0.3, 1000, rng_stream(9))
        assert a.to_dict() == b.to_dict()

    def test_second_moment(self, rng):
        result = haar_moment_check(2, 20000, rng)
        assert result['frobenius'] < 0.05

    def test_far_fraction_shrinks_with_dimension(self):
        reports = {d: far_fraction_experiment(2, d, 0.5, 10000, rng_stream(42)) for d in (4, 6, 8)}
        assert reports[6].estimate <= 0.05
        for smaller, larger in ((4, 6), (6, 8)):
            a, b = reports[smaller], reports[larger]
            assert b.estimate <= a.estimate + a.confidence_radius + b.confidence_radius
