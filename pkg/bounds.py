"""
Functionals and inequalities behind the single-copy lower bounds.

Every check returns a BoundReport with `satisfied` meaning lhs >= rhs - 1e-9.
Equalities are reported as lhs = -|value - target| against rhs = 0.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from config import BOOTSTRAP, SIZE_CAPS, TOLERANCES, VALIDATE_STATES
from exceptions import (
    DimensionMismatchError,
    InvalidDimensionError,
    NormalizationError,
    PreconditionError,
    ProdTestError,
    SizeCapError,
)
from permgroup import (
    Permutation,
    all_permutations,
    permanent,
    permutation_matrix,
    permute_tensor_factors,
    rising_factorial,
)
from qcore import AnyState, PureState, haar_unitary, haar_vectors, partial_trace, purity


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    satisfied: bool
    slack: float
    detail: Dict = field(default_factory=dict)

    @classmethod
    def compare(cls, lhs: float, rhs: float, **detail) -> 'BoundReport':
        lhs, rhs = float(lhs), float(rhs)
        return cls(lhs, rhs, lhs >= rhs - TOLERANCES['bound_slack'], lhs - rhs, detail)

    @classmethod
    def equality(cls, value: float, target: float, **detail) -> 'BoundReport':
        detail.update(value=float(value), target=float(target))
        return cls.compare(-abs(value - target), 0.0, **detail)

    def to_dict(self):
        return {'lhs': self.lhs, 'rhs': self.rhs, 'satisfied': self.satisfied,
                'slack': self.slack, **self.detail}


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """G[s, t] = <psi_s|psi_t> for unit vectors psi_0..psi_{T-1}"""
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex, copy=True)
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatchError(f"Gram matrix must be square, got shape {entries.shape}")
        if VALIDATE_STATES:
            if np.max(np.abs(np.diag(entries) - 1.0), initial=0.0) > TOLERANCES['norm']:
                raise PreconditionError("Gram matrix must have unit diagonal")
            if np.max(np.abs(entries - entries.conj().T), initial=0.0) > 1e-10:
                raise PreconditionError("Gram matrix must be Hermitian")
            if entries.size and np.linalg.eigvalsh(entries)[0] < TOLERANCES['psd_floor']:
                raise PreconditionError("Gram matrix must be positive semidefinite")

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def frobenius_sq(self) -> float:
        return float(np.sum(np.abs(self.entries) ** 2))


def _vectors(states) -> np.ndarray:
    rows = [np.asarray(getattr(s, 'amplitudes', s), dtype=complex).reshape(-1) for s in states]
    if not rows:
        raise InvalidDimensionError("need at least one state")
    if len({r.size for r in rows}) != 1:
        raise DimensionMismatchError("states must share one dimension")
    return np.stack(rows)


def gram(states) -> GramMatrix:
    v = _vectors(states)
    return GramMatrix(v.conj() @ v.T)


def random_gram(copies: int, dim: int, rng: np.random.Generator) -> GramMatrix:
    return gram(haar_vectors(dim, copies, rng))


# Permanent overlap sums

def overlap_sum_oracle(states) -> float:
    """sum over S_T of <Psi|P(pi)|Psi>, Psi = psi_0 (x) ... (x) psi_{T-1}, by tensor contraction"""
    v = _vectors(states)
    copies, dim = v.shape
    if dim ** copies > SIZE_CAPS['overlap_oracle_dim']:
        raise SizeCapError(f"overlap oracle is capped at total dimension {SIZE_CAPS['overlap_oracle_dim']}")
    psi = v[0]
    for row in v[1:]:
        psi = np.kron(psi, row)
    total = sum(np.vdot(psi, permute_tensor_factors(psi, p, dim)) for p in all_permutations(copies))
    return float(np.real(total))


def perm_overlap_sum(states, check: bool = True) -> float:
    """per(G), cross-checked against the explicit sum over S_T when it fits the oracle cap"""
    v = _vectors(states)
    copies, dim = v.shape
    if copies > SIZE_CAPS['permutation_degree']:
        raise SizeCapError(f"overlap sums are capped at {SIZE_CAPS['permutation_degree']} copies")
    value = float(np.real(permanent(gram(v).entries)))
    if check and dim ** copies <= SIZE_CAPS['overlap_oracle_dim']:
        oracle = overlap_sum_oracle(v)
        if abs(value - oracle) > TOLERANCES['overlap_oracle'] * max(1.0, abs(oracle)):
            raise ProdTestError(f"permanent {value!r} disagrees with the overlap sum {oracle!r}")
    return value


def frobenius_bound_check(g: GramMatrix) -> BoundReport:
    """per(G) >= ||G||_F^2 / T"""
    return BoundReport.compare(np.real(permanent(g.entries)), g.frobenius_sq() / g.size)


def gram_regime_check(g: GramMatrix, dim: int) -> BoundReport:
    """per(G) >= 1 when T <= d and per(G) >= T/d when T > d"""
    copies = g.size
    rhs = 1.0 if copies <= dim else copies / dim
    return BoundReport.compare(np.real(permanent(g.entries)), rhs, copies=copies, dim=dim)


def harmonic_tight_frame(dim: int, copies: int):
    """T >= d unit vectors (1/sqrt d)(w^{t k})_k, w = exp(2 pi i / T), frame operator (T/d) I"""
    if copies < dim:
        raise PreconditionError("a tight frame of unit vectors needs at least d of them")
    t = np.arange(copies)[:, None]
    k = np.arange(dim)[None, :]
    rows = np.exp(2j * np.pi * t * k / copies) / np.sqrt(dim)
    return [PureState(r, dim, 1) for r in rows]


def _validate_parts(parts, num_factors: int) -> Tuple[Tuple[int, ...], ...]:
    parts = tuple(tuple(int(i) for i in block) for block in parts)
    flat = sorted(i for block in parts for i in block)
    if any(not block for block in parts) or flat != list(range(num_factors)):
        raise PreconditionError(f"{parts} is not a partition of the factors 0..{num_factors - 1}")
    return parts


def prod_perm_overlap_sum(states: Sequence[PureState], parts) -> float:
    """
    Sum over (pi_1..pi_n) in S_T^n of <Psi| P_1(pi_1) (x)~ ... (x)~ P_n(pi_n) |Psi>.

    P_b(pi_b) permutes the T copies of block b only. Psi is the T-fold tensor
    product of the states; its axis t * m + f holds factor f of copy t.
    """
    states = list(states)
    if not states:
        raise InvalidDimensionError("need at least one state")
    m, d = states[0].num_factors, states[0].local_dim
    if any(s.num_factors != m or s.local_dim != d for s in states):
        raise DimensionMismatchError("states must share factor structure")
    parts = _validate_parts(parts, m)
    copies = len(states)
    if copies > SIZE_CAPS['product_oracle_copies'] or d ** (m * copies) > SIZE_CAPS['product_oracle_dim']:
        raise SizeCapError("product overlap sum exceeds the dense contraction caps")

    psi = states[0].amplitudes
    for s in states[1:]:
        psi = np.kron(psi, s.amplitudes)
    tensor = psi.reshape((d,) * (m * copies))
    perms = all_permutations(copies)
    inverses = [p.inverse() for p in perms]
    block_of = {f: b for b, block in enumerate(parts) for f in block}

    total = 0.0
    for choice in itertools.product(range(len(perms)), repeat=len(parts)):
        axes = [inverses[choice[block_of[f]]](t) * m + f for t in range(copies) for f in range(m)]
        total += np.real(np.vdot(psi, np.transpose(tensor, axes).reshape(-1)))
    return float(total)


def saturation_check_product_collection(copies: int, dim: int, rng: np.random.Generator,
                                        states: Optional[Sequence[PureState]] = None) -> BoundReport:
    """
    Tr[Pi_sym (x)~ Pi_sym  Psi] >= 1/(T!)^2 on bipartite collections.

    Without `states`, the collection u_t (x) v_t with both sides orthonormal is
    built, which attains the bound exactly.
    """
    if states is None:
        if not 1 <= copies <= dim <= 4:
            raise PreconditionError("the equality construction needs T <= d <= 4")
        u, v = haar_unitary(dim, rng), haar_unitary(dim, rng)
        states = [PureState(np.kron(u[:, t], v[:, t]), dim, 2) for t in range(copies)]
    value = prod_perm_overlap_sum(states, [[0], [1]]) / math.factorial(copies) ** 2
    return BoundReport.compare(value, 1.0 / math.factorial(copies) ** 2, copies=copies, dim=dim)


# Likelihood ratios against the maximally mixed state

def linear_ratio_bound(dim: int, copies: int) -> float:
    return 1.0 - copies * (copies - 1) / (2.0 * dim)


def haar_likelihood_ratio(measured_states) -> BoundReport:
    """
    E_v[p^v(l)] / p^mm(l) = d^T / (d (d+1) ... (d+T-1)) * per(G) for a global Haar state v.

    lhs is the ratio, rhs the linear bound 1 - T(T-1)/(2d).
    """
    v = _vectors(measured_states)
    copies, dim = v.shape
    ratio = dim ** copies / rising_factorial(dim, copies) * perm_overlap_sum(v, check=False)
    return BoundReport.compare(ratio, linear_ratio_bound(dim, copies), copies=copies, dim=dim)


def likelihood_chain(dim: int, copies: int) -> Dict:
    """Every link of d^T/rising(d,T) >= prod(1+t/d)^-1 >= exp(-T(T-1)/2d) >= 1 - T(T-1)/2d"""
    if dim < 1 or copies < 0:
        raise InvalidDimensionError("need d >= 1 and T >= 0")
    rising = dim ** copies / rising_factorial(dim, copies)
    product = float(np.prod([1.0 / (1.0 + t / dim) for t in range(copies)]))
    exponential = math.exp(-copies * (copies - 1) / (2.0 * dim))
    linear = linear_ratio_bound(dim, copies)
    links = [BoundReport.compare(rising, product),
             BoundReport.compare(product, exponential),
             BoundReport.compare(exponential, linear)]
    return {
        'dim': dim,
        'copies': copies,
        'rising': rising,
        'product': product,
        'exponential': exponential,
        'linear': linear,
        'min_slack': min(link.slack for link in links),
        'holds': all(link.satisfied for link in links),
    }


def haar_moment_monte_carlo(measured_states, samples: int, rng: np.random.Generator,
                            batch: int = 10000) -> Dict:
    """Monte Carlo E_v[prod_t d |<psi_t|v>|^2] with its standard error, next to the closed form"""
    v = _vectors(measured_states)
    copies, dim = v.shape
    values = []
    remaining = samples
    while remaining > 0:
        size = min(batch, remaining)
        draws = haar_vectors(dim, size, rng)
        values.append(np.prod(dim * np.abs(draws.conj() @ v.T) ** 2, axis=1))
        remaining -= size
    values = np.concatenate(values)
    estimate = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(samples))
    exact = haar_likelihood_ratio(v).lhs
    z = abs(estimate - exact) / stderr if stderr > 0 else 0.0
    return {
        'estimate': estimate,
        'stderr': stderr,
        'exact': exact,
        'z': z,
        'p_value': float(2 * stats.norm.sf(z)),
        'samples': samples,
    }


def product_likelihood_ratio(measured_states: Sequence[PureState], parts) -> BoundReport:
    """
    Ratio for independent Haar states on each block of `parts` against the maximally mixed state.

    prod_b d_b^T / rising(d_b, T) times the product overlap sum, against
    1 - sum_b T(T-1)/(2 d_b).
    """
    states = list(measured_states)
    m, d = states[0].num_factors, states[0].local_dim
    parts = _validate_parts(parts, m)
    copies = len(states)
    block_dims = [d ** len(block) for block in parts]
    prefactor = float(np.prod([db ** copies / rising_factorial(db, copies) for db in block_dims]))
    ratio = prefactor * prod_perm_overlap_sum(states, parts)
    bound = 1.0 - sum(copies * (copies - 1) / (2.0 * db) for db in block_dims)
    return BoundReport.compare(ratio, bound, copies=copies, block_dims=block_dims)


# Purity

def avg_purity_bound(eps: float, num_factors: int) -> float:
    """1 - (4/n) eps^2 (1 - eps^2): ceiling on the mean single-site purity of an eps-far state"""
    if not 0 < eps < 1:
        raise PreconditionError(f"eps must lie in (0, 1), got {eps}")
    if num_factors < 2:
        raise InvalidDimensionError("need at least two factors")
    return 1.0 - (4.0 / num_factors) * eps ** 2 * (1.0 - eps ** 2)


def p_test(rho: AnyState) -> float:
    """2^-n sum over all subsets S of Tr[rho_S^2], with Tr[rho_empty^2] = 1"""
    n = rho.num_factors
    if n > SIZE_CAPS['p_test_factors']:
        raise SizeCapError(f"p_test is capped at {SIZE_CAPS['p_test_factors']} factors")
    total = 1.0
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            total += purity(partial_trace(rho, subset))
    return total / 2 ** n


# Distributions

def _distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.any(p < -TOLERANCES['probability_sum']) or abs(p.sum() - 1.0) > TOLERANCES['probability_sum']:
        raise NormalizationError("not a probability distribution")
    return p


def tv_distance(p, q) -> float:
    p, q = _distribution(p), _distribution(q)
    if p.shape != q.shape:
        raise DimensionMismatchError(f"supports of size {p.size} and {q.size} differ")
    return float(min(1.0, 0.5 * np.sum(np.abs(p - q))))


def _min_ratio(p, q) -> float:
    p, q = _distribution(p), _distribution(q)
    if p.shape != q.shape:
        raise DimensionMismatchError(f"supports of size {p.size} and {q.size} differ")
    if np.any((q <= 0) & (p > 0)):
        raise PreconditionError("q vanishes where p does not")
    mask = q > 0
    return float(np.min(p[mask] / q[mask]))


def one_sided_tv_check(p, q, delta: float) -> BoundReport:
    """If p/q >= 1 - delta everywhere then TV(p, q) <= delta; lhs is delta, rhs the TV distance"""
    floor = _min_ratio(p, q)
    if floor < 1.0 - delta - TOLERANCES['bound_slack']:
        raise PreconditionError(f"min ratio {floor!r} is below 1 - delta")
    return BoundReport.compare(delta, tv_distance(p, q), min_ratio=floor)


def ratio_tv_bound(p, q) -> float:
    """Smallest delta with p >= (1 - delta) q pointwise"""
    return max(0.0, 1.0 - _min_ratio(p, q))


def le_cam_success_bound(tv: float) -> float:
    """Best success probability of telling two hypotheses apart under a uniform prior"""
    return 0.5 + 0.5 * tv


def swap_trick_check(a, b) -> BoundReport:
    """Tr[F (A (x) B)] = Tr[A B] with F the swap of two copies"""
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError("swap trick needs two square matrices of one size")
    swap = permutation_matrix(Permutation.transposition(2, 0, 1), a.shape[0])
    lhs = np.trace(swap @ np.kron(a, b))
    return BoundReport.equality(abs(lhs - np.trace(a @ b)), 0.0)


def min_copies_for_bias(dim: int, bias: float) -> int:
    """Smallest T with T(T-1)/(2d) >= bias"""
    if not 0 < bias <= 1:
        raise PreconditionError("bias must lie in (0, 1]")
    copies = 1
    while copies * (copies - 1) / (2.0 * dim) < bias:
        copies += 1
    return copies


def binomial_confidence(successes: int, trials: int, level: float = BOOTSTRAP['confidence']):
    """Wilson interval for a success rate: (low, high, radius)"""
    if trials < 1:
        raise PreconditionError("need at least one trial")
    interval = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method='wilson')
    rate = successes / trials
    return float(interval.low), float(interval.high), float(max(rate - interval.low, interval.high - rate))
