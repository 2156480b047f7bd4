"""
Randomized verification suites for the identities and inequalities behind the tester and its lower bounds.

Each suite returns {name, instances, min_slack, status, offending?} where
status is ok, violated or precondition.
"""
import itertools
import math

import numpy as np

from bounds import (
    BoundReport,
    GramMatrix,
    avg_purity_bound,
    frobenius_bound_check,
    gram,
    gram_regime_check,
    haar_likelihood_ratio,
    haar_moment_monte_carlo,
    harmonic_tight_frame,
    likelihood_chain,
    one_sided_tv_check,
    p_test,
    perm_overlap_sum,
    prod_perm_overlap_sum,
    product_likelihood_ratio,
    random_gram,
    saturation_check_product_collection,
    swap_trick_check,
)
from config import TOLERANCES, VERIFY
from ensembles import EnsembleSpec, far_state, haar_moment_check
from exceptions import FarStateError, PreconditionError, ProdTestError
from permgroup import (
    all_permutations,
    brute_force_permanent,
    double_coset_decompose,
    permanent,
    permutation_matrix,
    permute_tensor_factors,
    sym_dim,
    symmetric_projector,
)
from protocol import empirical_tv, random_basis_strategy
from qcore import (
    PureState,
    bell_state,
    ghz_state,
    haar_state,
    haar_vectors,
    map_streams,
    marginal_purities,
    product_state,
)


class SuiteResult:
    """Running tally of one suite"""

    def __init__(self, name):
        self.name = name
        self.instances = 0
        self.min_slack = None
        self.status = 'ok'
        self.offending = None
        self.notes = {}

    def add(self, report: BoundReport, **instance):
        self.instances += 1
        self.min_slack = report.slack if self.min_slack is None else min(self.min_slack, report.slack)
        if not report.satisfied and self.status == 'ok':
            self.status = 'violated'
            self.offending = {**instance, **report.to_dict()}

    def precondition(self, error: Exception, **instance):
        self.instances += 1
        if self.status == 'ok':
            self.status = 'precondition'
            self.offending = {**instance, 'error': str(error)}

    def to_dict(self):
        data = {'name': self.name, 'instances': self.instances,
                'min_slack': self.min_slack, 'status': self.status}
        if self.offending is not None:
            data['offending'] = self.offending
        if self.notes:
            data['notes'] = self.notes
        return data


def _count(key, quick):
    return max(1, VERIFY[key] // VERIFY['quick_divisor']) if quick else VERIFY[key]


def _random_vector(dim, rng):
    return haar_state(dim, rng).amplitudes


def suite_double_coset(rng, quick=False, fault=False):
    """Every element of S_5 splits as alpha (0 1)^a beta with alpha, beta fixing 0"""
    suite = SuiteResult('double_coset_s5')
    fixing = 0
    for pi in all_permutations(5):
        parts = double_coset_decompose(pi)
        exact = parts.product() == pi and parts.alpha.fixes(0) and parts.beta.fixes(0) \
            and (parts.a == 0) == pi.fixes(0)
        fixing += pi.fixes(0)
        suite.add(BoundReport.equality(0.0 if exact else 1.0, 0.0), images=list(pi.images))
    suite.add(BoundReport.equality(fixing, 24), check='elements fixing 0')
    return suite


def suite_representation(rng, quick=False, fault=False):
    """P(pi) P(sigma) = P(pi sigma) on random vectors"""
    suite = SuiteResult('permutation_representation')
    for k in range(_count('representation_pairs', quick)):
        copies, dim = int(rng.integers(2, 5)), int(rng.integers(2, 4))
        perms = all_permutations(copies)
        pi, sigma = perms[rng.integers(len(perms))], perms[rng.integers(len(perms))]
        v = _random_vector(dim ** copies, rng)
        lhs = permute_tensor_factors(permute_tensor_factors(v, sigma, dim), pi, dim)
        rhs = permute_tensor_factors(v, pi * sigma, dim)
        suite.add(BoundReport.equality(np.linalg.norm(lhs - rhs), 0.0), instance=k)
    return suite


def suite_symmetric_projector(rng, quick=False, fault=False):
    """Pi_sym P(pi) = Pi_sym, Pi_sym^2 = Pi_sym and Tr Pi_sym = dim Sym^T(C^d)"""
    suite = SuiteResult('symmetric_projector')
    for copies, dim in [(2, 2), (2, 3), (3, 2), (3, 3), (4, 2), (2, 4), (3, 4)]:
        proj = symmetric_projector(copies, dim)
        suite.add(BoundReport.equality(np.trace(proj).real, sym_dim(copies, dim)), copies=copies, dim=dim)
        suite.add(BoundReport.equality(np.linalg.norm(proj @ proj - proj), 0.0), copies=copies, dim=dim)
        for pi in all_permutations(copies):
            absorbed = np.linalg.norm(proj @ permutation_matrix(pi, dim) - proj)
            suite.add(BoundReport.equality(absorbed, 0.0), copies=copies, dim=dim, images=list(pi.images))
    return suite


def suite_swap_trick(rng, quick=False, fault=False):
    suite = SuiteResult('swap_trick')
    for k in range(_count('representation_pairs', quick) // 4 or 1):
        dim = int(rng.integers(2, 5))
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        b = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        suite.add(swap_trick_check(a, b), instance=k, dim=dim)
    return suite


def suite_ryser(rng, quick=False, fault=False):
    """Gray-code Ryser permanent against the sum over permutations"""
    suite = SuiteResult('ryser_vs_brute_force')
    for k in range(_count('ryser_matrices', quick)):
        side = int(rng.integers(1, VERIFY['ryser_max_side'] + 1))
        m = rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side))
        exact = brute_force_permanent(m)
        error = abs(permanent(m) - exact) / max(1.0, abs(exact))
        suite.add(BoundReport.compare(TOLERANCES['overlap_oracle'], error), instance=k, side=side)
    return suite


def suite_haar_moment(rng, quick=False, fault=False):
    """Mean of psi^{(x)2} over Haar states is Pi_sym / dim Sym^2"""
    suite = SuiteResult('haar_second_moment')
    samples = _count('haar_moment_samples', quick)
    # the Frobenius tolerance scales as 1/sqrt(samples)
    tolerance = 0.02 * math.sqrt(VERIFY['haar_moment_samples'] / samples)
    for dim in (4, 8):
        result = haar_moment_check(dim, samples, rng)
        suite.add(BoundReport.compare(tolerance, result['frobenius']), dim=dim, samples=samples)
    return suite


def suite_one_sided_tv(rng, quick=False, fault=False):
    """p >= (1 - delta) q pointwise implies TV(p, q) <= delta"""
    suite = SuiteResult('one_sided_tv')
    for k in range(_count('one_sided_pairs', quick)):
        size = int(rng.integers(2, 12))
        delta = float(rng.uniform(0.0, 1.0))
        q = rng.dirichlet(np.ones(size))
        p = (1.0 - delta) * q + delta * rng.dirichlet(np.ones(size))
        suite.add(one_sided_tv_check(p, q, delta), instance=k, delta=delta)
    return suite


def suite_frobenius(rng, quick=False, fault=False):
    """per(G) >= ||G||_F^2 / T on Gram matrices; a corrupted Gram matrix is a precondition failure"""
    suite = SuiteResult('permanent_frobenius')
    for k in range(_count('frobenius_grams', quick)):
        copies, dim = int(rng.integers(1, 7)), int(rng.integers(1, 5))
        try:
            if fault and k == 0:
                entries = random_gram(copies, dim, rng).entries.copy()
                np.fill_diagonal(entries, 0.9)
                g = GramMatrix(entries)
            else:
                g = random_gram(copies, dim, rng)
        except PreconditionError as e:
            suite.precondition(e, instance=k, copies=copies, dim=dim, injected=True)
            continue
        suite.add(frobenius_bound_check(g), instance=k, copies=copies, dim=dim)
    return suite


def suite_gram_regimes(rng, quick=False, fault=False):
    """per(G) >= 1 when T <= d, >= T/d when T > d; harmonic frames reach ||G||_F^2 = T^2/d"""
    suite = SuiteResult('gram_regimes')
    count = _count('regime_grams', quick)
    for k in range(count):
        dim = int(rng.integers(1, 5))
        copies = int(rng.integers(1, dim + 1))
        suite.add(gram_regime_check(random_gram(copies, dim, rng), dim), regime='T<=d', instance=k)
    for k in range(count):
        dim = int(rng.integers(1, 4))
        copies = int(rng.integers(dim + 1, 7))
        suite.add(gram_regime_check(random_gram(copies, dim, rng), dim), regime='T>d', instance=k)
    for dim, copies in [(2, 4), (2, 3), (3, 5), (3, 6)]:
        g = gram(harmonic_tight_frame(dim, copies))
        suite.add(BoundReport.equality(g.frobenius_sq(), copies ** 2 / dim), frame=[dim, copies])
    return suite


def suite_overlap_permanent(rng, quick=False, fault=False):
    """sum over S_T of <Psi|P(pi)|Psi> = per(G) >= 1, with equality on orthonormal collections"""
    suite = SuiteResult('overlap_sum_permanent')
    for k in range(_count('overlap_collections', quick)):
        copies, dim = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        vectors = haar_vectors(dim, copies, rng)
        try:
            value = perm_overlap_sum(vectors)
        except ProdTestError as e:
            suite.add(BoundReport.compare(0.0, 1.0), instance=k, error=str(e))
            continue
        suite.add(BoundReport.compare(value, 1.0), instance=k, copies=copies, dim=dim)
    for dim in (2, 3):
        for copies in range(1, dim + 1):
            basis = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))[0]
            suite.add(BoundReport.equality(perm_overlap_sum(basis.T[:copies]), 1.0), orthonormal=[copies, dim])
    return suite


def suite_product_overlap(rng, quick=False, fault=False):
    """Multi-block overlap sums are >= 1; orthonormal products reach 1/(T!)^2 after symmetrizing"""
    suite = SuiteResult('product_overlap_sum')
    for k in range(_count('bipartite_collections', quick)):
        copies = int(rng.integers(1, 4))
        states = [PureState(_random_vector(4, rng), 2, 2) for _ in range(copies)]
        suite.add(BoundReport.compare(prod_perm_overlap_sum(states, [[0], [1]]), 1.0),
                  blocks=2, instance=k, copies=copies)
    for k in range(_count('tripartite_collections', quick)):
        states = [PureState(_random_vector(8, rng), 2, 3) for _ in range(2)]
        suite.add(BoundReport.compare(prod_perm_overlap_sum(states, [[0], [1], [2]]), 1.0),
                  blocks=3, instance=k, copies=2)
    for copies, dim in [(2, 2), (3, 3), (2, 4)]:
        report = saturation_check_product_collection(copies, dim, rng)
        suite.add(BoundReport.equality(report.lhs, report.rhs), saturation=[copies, dim])
    return suite


def suite_likelihood_chain(rng, quick=False, fault=False):
    """Random state against the maximally mixed state: the ratio chain and its Monte Carlo check"""
    suite = SuiteResult('likelihood_ratio_chain')
    for dim in (2, 4, 8, 16):
        for copies in range(1, 7):
            chain = likelihood_chain(dim, copies)
            suite.add(BoundReport.compare(chain['min_slack'], 0.0), dim=dim, copies=copies)
            suite.add(haar_likelihood_ratio(haar_vectors(dim, copies, rng)), dim=dim, copies=copies)
    samples = _count('chain_samples', quick)
    mc = haar_moment_monte_carlo(haar_vectors(2, 3, rng), samples, rng)
    suite.add(BoundReport.compare(3.0, mc['z']), monte_carlo=mc)
    return suite


def suite_product_ratio(rng, quick=False, fault=False):
    """Ratio for Haar states on blocks against 1 - sum_b T(T-1)/(2 d_b); the measured slack is reported"""
    suite = SuiteResult('product_likelihood_ratio')
    for k in range(_count('bipartite_collections', quick)):
        copies = int(rng.integers(1, 4))
        local_dim = int(rng.choice([2, 3])) if copies <= 2 else 2
        states = [product_state(haar_vectors(local_dim, 2, rng)) for _ in range(copies)]
        suite.add(product_likelihood_ratio(states, [[0], [1]]), instance=k, blocks=2)
    for k in range(_count('tripartite_collections', quick)):
        states = [product_state(haar_vectors(2, 3, rng)) for _ in range(2)]
        suite.add(product_likelihood_ratio(states, [[0], [1], [2]]), instance=k, blocks=3)
    return suite


def suite_average_purity(rng, quick=False, fault=False):
    """Mean single-site purity of verified eps-far states is at most 1 - (4/n) eps^2 (1 - eps^2)"""
    suite = SuiteResult('average_marginal_purity')
    draws = _count('far_state_draws', quick)
    unverified = 0
    for n, d, eps in itertools.product((2, 3, 4), (2, 3), (0.3, 0.5, 0.6, 2 ** -0.5)):
        bound = avg_purity_bound(eps, n)
        for k in range(draws):
            try:
                cert = far_state(n, d, eps, rng)
            except FarStateError:
                unverified += 1
                continue
            mean = float(marginal_purities(cert.state).mean())
            suite.add(BoundReport.compare(bound, mean), n=n, d=d, eps=eps, draw=k)
    for eps in (0.3, 0.5, 0.6, 2 ** -0.5):
        amplitudes = np.zeros(4)
        amplitudes[0], amplitudes[3] = math.sqrt(1 - eps ** 2), eps
        mean = float(marginal_purities(PureState(amplitudes, 2, 2)).mean())
        suite.add(BoundReport.equality(mean, avg_purity_bound(eps, 2)), equality_family=eps)
    if unverified:
        suite.notes['unverified_far_states'] = unverified
    return suite


def suite_p_test(rng, quick=False, fault=False):
    """Product-test acceptance probability on named states"""
    suite = SuiteResult('p_test')
    suite.add(BoundReport.equality(p_test(bell_state()), 0.75), state='bell')
    suite.add(BoundReport.equality(p_test(ghz_state(3)), 0.625), state='ghz3')
    for k in range(_count('far_state_draws', quick)):
        n = int(rng.integers(2, 5))
        suite.add(BoundReport.equality(p_test(product_state(haar_vectors(2, n, rng))), 1.0), product=k)
        state = PureState(_random_vector(2 ** n, rng), 2, n)
        suite.add(BoundReport.compare(1.0 - 1e-6, p_test(state)), entangled=k)
    return suite


def suite_distinguishing(rng, quick=False, fault=False):
    """Random-basis rounds cannot tell a Haar state from the maximally mixed state better than T(T-1)/(2d)"""
    suite = SuiteResult('distinguishing_tv')
    for dim, rounds in [(16, 2), (8, 2), (16, 3)]:
        strategy = random_basis_strategy(dim, rounds, rng)
        report = empirical_tv(EnsembleSpec.global_haar(1, dim), EnsembleSpec.maximally_mixed(1, dim),
                              strategy, rounds, 1, rng)
        suite.add(BoundReport.compare(rounds * (rounds - 1) / (2.0 * dim), report.estimate),
                  dim=dim, rounds=rounds)
    return suite


SUITES = [
    suite_double_coset,
    suite_representation,
    suite_symmetric_projector,
    suite_swap_trick,
    suite_ryser,
    suite_haar_moment,
    suite_one_sided_tv,
    suite_frobenius,
    suite_gram_regimes,
    suite_overlap_permanent,
    suite_product_overlap,
    suite_likelihood_chain,
    suite_product_ratio,
    suite_average_purity,
    suite_p_test,
    suite_distinguishing,
]


def run_all(seed, quick=False, inject_fault=False, threads=1):
    """Run every suite on its own stream (seed, suite index); results in suite order"""
    return map_streams(lambda i, rng: SUITES[i](rng, quick, inject_fault).to_dict(), seed, len(SUITES), threads)
