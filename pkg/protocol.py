"""
Single-copy measurement protocols, the single-copy purity estimator and the product tester.

A round measures one fresh copy. Global rounds apply one rank-1 POVM on C^D;
local rounds apply a tensor product of per-site POVMs on C^d and are never
expanded into D x D operators.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from bounds import binomial_confidence, tv_distance
from config import BOOTSTRAP, FAR_STATE, PURITY_ESTIMATOR, SIZE_CAPS, TESTER_THRESHOLDS, TOLERANCES, VALIDATE_STATES
from ensembles import EnsembleKind, EnsembleSpec, sample
from exceptions import (
    DimensionMismatchError,
    InsufficientCopiesError,
    PreconditionError,
    SizeCapError,
    StrategyScopeError,
)
from models import ExperimentReport
from permgroup import batched_permanent, rising_factorial
from qcore import AnyState, PureState, haar_unitary, map_streams, spawn_seed


@dataclass(frozen=True, eq=False)
class Rank1Povm:
    """Effects D * weights[k] * |vectors[k]><vectors[k]|"""
    weights: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float, copy=True).reshape(-1)
        vectors = np.array(self.vectors, dtype=complex, copy=True)
        weights.setflags(write=False)
        vectors.setflags(write=False)
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'vectors', vectors)
        if vectors.ndim != 2 or vectors.shape[0] != weights.size:
            raise DimensionMismatchError("need one unit vector per weight")
        if VALIDATE_STATES:
            if np.any(weights < -TOLERANCES['povm_weights']) or abs(weights.sum() - 1) > TOLERANCES['povm_weights']:
                raise PreconditionError("POVM weights must be non-negative and sum to 1")
            if np.max(np.abs(np.linalg.norm(vectors, axis=1) - 1.0)) > TOLERANCES['povm_completeness']:
                raise PreconditionError("POVM vectors must be unit vectors")
            completeness = self.dim * (vectors.T * weights) @ vectors.conj()
            if np.linalg.norm(completeness - np.eye(self.dim)) > TOLERANCES['povm_completeness']:
                raise PreconditionError("POVM effects do not sum to the identity")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    @classmethod
    def computational(cls, dim: int) -> 'Rank1Povm':
        return cls(np.full(dim, 1.0 / dim), np.eye(dim))

    @classmethod
    def from_basis(cls, unitary) -> 'Rank1Povm':
        """Measurement in the orthonormal basis given by the columns of `unitary`"""
        unitary = np.asarray(unitary)
        return cls(np.full(unitary.shape[1], 1.0 / unitary.shape[1]), unitary.T)

    @classmethod
    def random_basis(cls, dim: int, rng: np.random.Generator) -> 'Rank1Povm':
        return cls.from_basis(haar_unitary(dim, rng))

    @classmethod
    def random(cls, dim: int, outcomes: int, rng: np.random.Generator) -> 'Rank1Povm':
        """Overcomplete POVM from the first `dim` columns of a Haar `outcomes` x `outcomes` unitary"""
        if outcomes < dim:
            raise PreconditionError("a rank-1 POVM needs at least as many outcomes as the dimension")
        rows = haar_unitary(outcomes, rng)[:, :dim].conj()
        norms = np.linalg.norm(rows, axis=1)
        keep = norms > 0
        return cls(norms[keep] ** 2 / dim, rows[keep] / norms[keep, None])

    @classmethod
    def from_effects(cls, effects) -> 'Rank1Povm':
        """Rank-1 refinement of an arbitrary POVM {E_j} by eigendecomposition of every effect"""
        effects = [np.asarray(e, dtype=complex) for e in effects]
        dim = effects[0].shape[0]
        weights, vectors = [], []
        for effect in effects:
            values, vecs = np.linalg.eigh((effect + effect.conj().T) / 2)
            for value, vec in zip(values, vecs.T):
                if value > TOLERANCES['povm_weights']:
                    weights.append(value / dim)
                    vectors.append(vec)
        weights = np.array(weights)
        return cls(weights / weights.sum(), np.array(vectors))

    def effects(self) -> np.ndarray:
        return self.dim * self.weights[:, None, None] * np.einsum('ki,kj->kij', self.vectors, self.vectors.conj())


class CopyScope(str, Enum):
    GLOBAL = 'global'
    LOCAL = 'local'


Measurement = Tuple[Rank1Povm, ...]


@dataclass(frozen=True, eq=False)
class Strategy:
    """
    Per-round measurements, fixed in advance or chosen from the outcome history.

    A round measurement is a tuple of POVMs: one on C^D for global scope, one
    per site for local scope. An adaptive callback must be a pure function of
    the history.
    """
    scope: CopyScope
    measurements: Tuple[Measurement, ...] = ()
    adaptive: Optional[Callable[[tuple], Union[Rank1Povm, Sequence[Rank1Povm]]]] = None

    def __post_init__(self):
        object.__setattr__(self, 'scope', CopyScope(self.scope))
        object.__setattr__(self, 'measurements', tuple(self._normalize(m) for m in self.measurements))

    def _normalize(self, measurement) -> Measurement:
        measurement = (measurement,) if isinstance(measurement, Rank1Povm) else tuple(measurement)
        if self.scope == CopyScope.GLOBAL and len(measurement) != 1:
            raise StrategyScopeError("a global round applies exactly one POVM")
        return measurement

    @property
    def is_adaptive(self) -> bool:
        return self.adaptive is not None

    @property
    def rounds(self) -> Optional[int]:
        return None if self.is_adaptive else len(self.measurements)

    def measurement(self, round_index: int, history: tuple) -> Measurement:
        if self.is_adaptive:
            return self._normalize(self.adaptive(history))
        if round_index >= len(self.measurements):
            raise StrategyScopeError(f"strategy has only {len(self.measurements)} rounds")
        return self.measurements[round_index]


def random_basis_strategy(dim: int, rounds: int, rng: np.random.Generator) -> Strategy:
    """Global Haar bases, drawn round by round so longer strategies extend shorter ones"""
    return Strategy(CopyScope.GLOBAL, tuple((Rank1Povm.random_basis(dim, rng),) for _ in range(rounds)))


def local_random_basis_strategy(num_factors: int, local_dim: int, rounds: int,
                                rng: np.random.Generator) -> Strategy:
    return Strategy(CopyScope.LOCAL, tuple(
        tuple(Rank1Povm.random_basis(local_dim, rng) for _ in range(num_factors)) for _ in range(rounds)))


# Outcome probabilities

def _pure_components(state: AnyState):
    """(weight, amplitudes) pairs with rho = sum weight |amplitudes><amplitudes|"""
    if isinstance(state, PureState):
        return [(1.0, state.amplitudes)]
    values, vectors = np.linalg.eigh(state.matrix)
    return [(v, vectors[:, k]) for k, v in enumerate(values) if v > 1e-15]


def _check_scope(measurement: Measurement, state: Union[AnyState, EnsembleSpec]):
    if len(measurement) == 1 and measurement[0].dim == state.dim:
        return
    if len(measurement) == state.num_factors and all(p.dim == state.local_dim for p in measurement):
        return
    raise StrategyScopeError(f"measurement on dims {[p.dim for p in measurement]} does not fit a state "
                             f"with {state.num_factors} factors of dimension {state.local_dim}")


def round_probabilities(measurement: Measurement, state: AnyState) -> np.ndarray:
    """Joint outcome distribution of one round, shape (K_0, ..., K_{m-1}) over the round's POVMs"""
    _check_scope(measurement, state)
    if len(measurement) == 1:
        shape = (state.dim,)
    else:
        shape = (state.local_dim,) * state.num_factors
    probs = 0.0
    for weight, amplitudes in _pure_components(state):
        tensor = amplitudes.reshape(shape)
        for i, povm in enumerate(measurement):
            tensor = np.moveaxis(np.tensordot(povm.vectors.conj(), tensor, axes=([1], [i])), 0, i)
        probs = probs + weight * np.abs(tensor) ** 2
    scale = functools.reduce(np.multiply.outer, [p.dim * p.weights for p in measurement])
    probs = np.clip(probs * scale, 0.0, None)
    total = probs.sum()
    if abs(total - 1.0) > TOLERANCES['povm_completeness']:
        raise PreconditionError(f"outcome probabilities sum to {total!r}")
    return probs / total


def outcome_probabilities(povm: Rank1Povm, state: AnyState) -> np.ndarray:
    """p_k = D a_k <psi_k|rho|psi_k>"""
    if povm.dim != state.dim:
        raise DimensionMismatchError(f"POVM on C^{povm.dim} applied to a state on C^{state.dim}")
    return round_probabilities((povm,), state)


def sample_outcome(povm: Rank1Povm, state: AnyState, rng: np.random.Generator) -> int:
    probs = outcome_probabilities(povm, state)
    return int(rng.choice(probs.size, p=probs))


def run_protocol(strategy: Strategy, source: Union[EnsembleSpec, AnyState], rounds: int,
                 rng: np.random.Generator) -> tuple:
    """
    Outcome string of `rounds` single-copy rounds.

    An ensemble is sampled once per run and held fixed across the rounds.
    Global rounds yield an int, local rounds a tuple of per-site ints.
    """
    state = sample(source, rng) if isinstance(source, EnsembleSpec) else source
    history = ()
    for t in range(rounds):
        measurement = strategy.measurement(t, history)
        probs = round_probabilities(measurement, state)
        flat = int(rng.choice(probs.size, p=probs.reshape(-1)))
        if len(measurement) == 1:
            outcome = flat
        else:
            outcome = tuple(int(i) for i in np.unravel_index(flat, probs.shape))
        history = history + (outcome,)
    return history


def _fixed_measurements(strategy: Strategy, rounds: int) -> Tuple[Measurement, ...]:
    if strategy.is_adaptive:
        raise StrategyScopeError("exact string distributions need a non-adaptive strategy")
    if rounds > len(strategy.measurements):
        raise StrategyScopeError(f"strategy has only {len(strategy.measurements)} rounds")
    measurements = strategy.measurements[:rounds]
    count = math.prod(p.size for m in measurements for p in m)
    if count > SIZE_CAPS['exact_strings']:
        raise SizeCapError(f"{count} outcome strings exceed the exact enumeration cap")
    return measurements


def string_distribution(strategy: Strategy, state: AnyState, rounds: int) -> np.ndarray:
    """
    Exact distribution of outcome strings for a fixed state: the product of the rounds' distributions.

    Flattened row-major over (round 0 POVMs, round 1 POVMs, ...).
    """
    measurements = _fixed_measurements(strategy, rounds)
    if not measurements:
        return np.ones(1)
    per_round = [round_probabilities(m, state) for m in measurements]
    return functools.reduce(np.multiply.outer, per_round).reshape(-1)


def _closed_form_blocks(spec: EnsembleSpec, measurements) -> Optional[list]:
    """POVM-slot blocks carrying independent Haar states, or None when no closed form applies"""
    if spec.kind in (EnsembleKind.MAXIMALLY_MIXED, EnsembleKind.FAR_FROM_MP):
        return None
    width = len(measurements[0])
    if width == 1:
        return [(0,)] if spec.kind == EnsembleKind.GLOBAL_HAAR else None
    return [tuple(block) for block in spec.parts]


def closed_form_mixture(spec: EnsembleSpec, strategy: Strategy, rounds: int) -> Optional[np.ndarray]:
    """
    E_rho[p^rho(l)] for every string l, where a closed form exists.

    Maximally mixed: prod of weights. Haar on blocks: prod(D a) times, per block,
    per(G_b) / rising(d_b, T) with G_b the Gram matrix of the block's measured
    vectors (elementwise product of the site Gram matrices).
    """
    measurements = _fixed_measurements(strategy, rounds)
    if not measurements:
        return np.ones(1)
    shape = [p.size for m in measurements for p in m]
    count = math.prod(shape)
    if count > SIZE_CAPS['closed_form_strings']:
        return None
    width = len(measurements[0])
    for m in measurements:
        _check_scope(m, spec)
    idx = np.indices(shape).reshape(len(shape), -1).reshape(rounds, width, count)

    weights = np.ones(count)
    for t, m in enumerate(measurements):
        for f, povm in enumerate(m):
            weights = weights * povm.weights[idx[t, f]]
    if spec.kind == EnsembleKind.MAXIMALLY_MIXED:
        return weights
    blocks = _closed_form_blocks(spec, measurements)
    if blocks is None:
        return None

    for m in measurements:
        for povm in m:
            weights = weights * povm.dim
    probs = weights.astype(complex)
    for block in blocks:
        gram = np.ones((count, rounds, rounds), dtype=complex)
        for f in block:
            vecs = [measurements[t][f].vectors[idx[t, f]] for t in range(rounds)]  # (count, dim) each
            stacked = np.stack(vecs, axis=1)
            gram = gram * np.einsum('sti,sui->stu', stacked.conj(), stacked)
        block_dim = math.prod(measurements[0][f].dim for f in block)
        probs = probs * batched_permanent(gram) / rising_factorial(block_dim, rounds)
    return np.clip(probs.real, 0.0, None)


def mixture_distribution(spec: EnsembleSpec, strategy: Strategy, rounds: int, draws: int,
                         rng: np.random.Generator, batches: int = BOOTSTRAP['batches']):
    """
    Mixture outcome distribution and its batch means.

    Returns (distribution, batch_means); batch_means is None for closed forms.
    """
    closed = closed_form_mixture(spec, strategy, rounds)
    if closed is not None:
        return closed, None
    batches = max(1, min(batches, draws))
    means = []
    for batch in np.array_split(np.arange(draws), batches):
        acc = 0.0
        for _ in batch:
            acc = acc + string_distribution(strategy, sample(spec, rng), rounds)
        means.append(acc / len(batch))
    means = np.array(means)
    sizes = np.array([len(b) for b in np.array_split(np.arange(draws), batches)])
    return (means * sizes[:, None]).sum(axis=0) / draws, means


def _bootstrap_radius(statistic: Callable[[np.random.Generator], float], value: float,
                      rng: np.random.Generator) -> float:
    deviations = [abs(statistic(rng) - value) for _ in range(BOOTSTRAP['resamples'])]
    return float(np.quantile(deviations, BOOTSTRAP['confidence']))


def empirical_tv(spec_a: EnsembleSpec, spec_b: EnsembleSpec, strategy: Strategy, rounds: int, trials: int,
                 rng: np.random.Generator) -> ExperimentReport:
    """
    TV distance between the outcome-string mixtures of two ensembles under one strategy.

    Exact enumeration when the strategy is non-adaptive and the strings fit the
    cap, otherwise histograms of `trials` protocol runs with add-1/2 smoothing.
    """
    if trials < 1:
        raise PreconditionError("need at least one trial")
    enumerable = not strategy.is_adaptive and strategy.rounds is not None and strategy.rounds >= rounds \
        and math.prod(p.size for m in strategy.measurements[:rounds] for p in m) <= SIZE_CAPS['exact_strings']
    spec = {'a': spec_a.to_dict(), 'b': spec_b.to_dict(), 'rounds': rounds, 'scope': strategy.scope.value}

    if enumerable:
        p, means_a = mixture_distribution(spec_a, strategy, rounds, trials, rng)
        q, means_b = mixture_distribution(spec_b, strategy, rounds, trials, rng)
        tv = tv_distance(p, q)
        radius = 0.0
        if means_a is not None or means_b is not None:
            def resampled(r):
                pa = p if means_a is None else means_a[r.integers(len(means_a), size=len(means_a))].mean(axis=0)
                qb = q if means_b is None else means_b[r.integers(len(means_b), size=len(means_b))].mean(axis=0)
                return tv_distance(pa / pa.sum(), qb / qb.sum())
            radius = _bootstrap_radius(resampled, tv, rng)
        method = 'closed_form' if means_a is None and means_b is None else 'exact_average'
    else:
        runs_a = [run_protocol(strategy, spec_a, rounds, rng) for _ in range(trials)]
        runs_b = [run_protocol(strategy, spec_b, rounds, rng) for _ in range(trials)]
        support = sorted(set(runs_a) | set(runs_b))
        index = {s: k for k, s in enumerate(support)}
        codes_a = np.array([index[s] for s in runs_a])
        codes_b = np.array([index[s] for s in runs_b])

        def smoothed(codes):
            counts = np.bincount(codes, minlength=len(support)) + 0.5
            return counts / counts.sum()

        tv = tv_distance(smoothed(codes_a), smoothed(codes_b))
        radius = _bootstrap_radius(
            lambda r: tv_distance(smoothed(r.choice(codes_a, size=trials)), smoothed(r.choice(codes_b, size=trials))),
            tv, rng)
        method = 'histogram'

    return ExperimentReport(
        spec=spec,
        samples=trials,
        estimate=tv,
        confidence_radius=radius,
        extra={'method': method, 'bound': rounds * (rounds - 1) / (2.0 * spec_a.dim)},
    )


# Copies and purity estimation

class StateSource:
    """Hands out fresh copies of a fixed state and counts them"""

    def __init__(self, state: AnyState, budget: Optional[int] = None, record: bool = False):
        self.state = state
        self.budget = budget
        self.record = record
        self.copies_used = 0
        self._rounds = 0
        self._rows = []

    def take(self, count: int = 1):
        if self.budget is not None and self.copies_used + count > self.budget:
            raise InsufficientCopiesError(
                f"requested {count} copies with {self.budget - self.copies_used} of {self.budget} left")
        self.copies_used += count
        return self.state

    def measure_bases(self, unitaries: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
        """Measure `shots` copies in each global basis of the stack (M, D, D); counts (M, D)"""
        state = self.state
        if unitaries.shape[-1] != state.dim:
            raise DimensionMismatchError(f"bases on C^{unitaries.shape[-1]} for a state on C^{state.dim}")
        self.take(unitaries.shape[0] * shots)
        if isinstance(state, PureState):
            probs = np.abs(np.einsum('mis,i->ms', unitaries.conj(), state.amplitudes)) ** 2
        else:
            probs = np.einsum('mis,ij,mjs->ms', unitaries.conj(), state.matrix, unitaries).real
        counts = self._multinomial(shots, probs, rng)
        self._log(counts[:, None, :], site=None)
        return counts

    def measure_local_bases(self, unitaries: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
        """
        Measure `shots` copies in each product basis of the stack (M, n, d, d).

        Outcomes are sampled jointly over d^n strings; returns the per-site
        marginal counts (M, n, d).
        """
        rounds, n, d, _ = unitaries.shape
        state = self.state
        if n != state.num_factors or d != state.local_dim:
            raise StrategyScopeError(f"local bases for {n} sites of dimension {d} do not fit the state")
        self.take(rounds * shots)
        chunk = max(1, PURITY_ESTIMATOR['chunk_bases'])
        marginals = np.concatenate([self._local_chunk(unitaries[start:start + chunk], shots, rng)
                                    for start in range(0, rounds, chunk)])
        self._log(marginals, site=range(n))
        return marginals

    def _local_chunk(self, unitaries: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
        # Dense (rounds, d^n) arrays live only for one chunk of bases
        rounds, n, d, _ = unitaries.shape
        probs = 0.0
        for weight, amplitudes in _pure_components(self.state):
            tensor = np.broadcast_to(amplitudes.reshape((1,) + (d,) * n), (rounds,) + (d,) * n)
            for i in range(n):
                moved = np.moveaxis(tensor, i + 1, -1)
                rest = moved.shape[1:-1]
                applied = moved.reshape(rounds, -1, d) @ unitaries[:, i].conj()
                tensor = np.moveaxis(applied.reshape((rounds,) + rest + (d,)), -1, i + 1)
            probs = probs + weight * np.abs(tensor.reshape(rounds, -1)) ** 2
        joint = self._multinomial(shots, probs, rng).reshape((rounds,) + (d,) * n)
        return np.stack([joint.sum(axis=tuple(1 + j for j in range(n) if j != i)) for i in range(n)], axis=1)

    @staticmethod
    def _multinomial(shots: int, probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        probs = np.clip(probs, 0.0, None)
        return rng.multinomial(shots, probs / probs.sum(axis=1, keepdims=True))

    def _log(self, counts: np.ndarray, site):
        if not self.record:
            return
        sites = [None] if site is None else list(site)
        for m in range(counts.shape[0]):
            for k, s in enumerate(sites):
                for outcome in np.flatnonzero(counts[m, k]):
                    self._rows.append((self._rounds + m, s, int(outcome), int(counts[m, k, outcome])))
        self._rounds += counts.shape[0]

    def transcript(self) -> pd.DataFrame:
        return pd.DataFrame(self._rows, columns=['round', 'site', 'outcome', 'count'])


def purity_schedule(dim: int, eps: float, delta: float) -> Tuple[int, int]:
    """
    (shots per basis K, number of bases M).

    K = max(2, ceil(c1 sqrt(D) / eps)) and M = ceil(c2 log(1/delta) / eps^2).
    The basis count has to grow as 1/eps^2 because the between-basis spread of
    the collision rate does not shrink with more shots. One estimate therefore
    costs O(sqrt(D) log(1/delta) / eps^3) copies, and the product tester, run
    at eps_purity ~ eps^2 / n, needs about sqrt(d) n^3 log(n) / eps^6 copies
    rather than the O(n log n sqrt(d) / eps^2) of an optimal estimator.
    """
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise PreconditionError(f"eps and delta must lie in (0, 1), got {eps}, {delta}")
    shots = max(PURITY_ESTIMATOR['min_shots'], math.ceil(PURITY_ESTIMATOR['shots_constant'] * math.sqrt(dim) / eps))
    bases = math.ceil(PURITY_ESTIMATOR['bases_constant'] * math.log(1.0 / delta) / eps ** 2)
    return shots, bases


@dataclass(frozen=True)
class PurityEstimate:
    value: float
    raw_value: float
    eps_target: float
    delta_target: float
    copies_used: int
    shots: int
    bases: int

    def __post_init__(self):
        if self.copies_used != self.shots * self.bases:
            raise PreconditionError("copies used do not match the schedule")

    def to_dict(self):
        return dict(self.__dict__)


def collision_estimates(counts: np.ndarray, dim: int) -> np.ndarray:
    """(D+1) * (outcome-equal pairs / all pairs) - 1 for every basis; counts has the outcome axis last"""
    shots = counts.sum(axis=-1)
    collisions = (counts * (counts - 1)).sum(axis=-1) / (shots * (shots - 1))
    return (dim + 1) * collisions - 1.0


def median_of_means(values: np.ndarray, groups: int = PURITY_ESTIMATOR['groups']) -> float:
    groups = max(1, min(groups, len(values)))
    return float(np.median([chunk.mean() for chunk in np.array_split(values, groups)]))


def estimate_purity_single_copy(source: StateSource, dim: int, eps: float, delta: float,
                                rng: np.random.Generator) -> PurityEstimate:
    """Tr[rho^2] from single copies measured in Haar random bases"""
    shots, bases = purity_schedule(dim, eps, delta)
    unitaries = haar_unitary(dim, rng, size=bases)
    counts = source.measure_bases(unitaries, shots, rng)
    estimates = collision_estimates(counts, dim)
    return PurityEstimate(
        value=median_of_means(estimates),
        raw_value=float(estimates.mean()),
        eps_target=eps,
        delta_target=delta,
        copies_used=shots * bases,
        shots=shots,
        bases=bases,
    )


# Product tester

class Verdict(str, Enum):
    ACCEPT = 'accept'
    REJECT = 'reject'


@dataclass(frozen=True)
class TesterVerdict:
    __test__ = False

    verdict: Verdict
    per_site_estimates: Tuple[float, ...]
    eps_purity: float
    delta: float
    copies_used: int = 0

    def __post_init__(self):
        reject = min(self.per_site_estimates) <= 1.0 - 2.0 * self.eps_purity
        if reject != (self.verdict == Verdict.REJECT):
            raise PreconditionError("verdict does not follow the rejection threshold")

    @property
    def accepted(self) -> bool:
        return self.verdict == Verdict.ACCEPT

    def to_dict(self):
        return {
            'verdict': self.verdict.value,
            'per_site_estimates': list(self.per_site_estimates),
            'eps_purity': self.eps_purity,
            'delta': self.delta,
            'copies_used': self.copies_used,
        }


def tester_thresholds(num_factors: int, eps_prod: float) -> Tuple[float, float]:
    """(eps_purity, delta) for the product tester"""
    return eps_prod ** 2 * (1.0 - eps_prod ** 2) / num_factors, 1.0 / (3 * num_factors)


def mp_test(source: StateSource, num_factors: int, local_dim: int, eps_prod: float,
            rng: np.random.Generator) -> TesterVerdict:
    """
    Accept iff every single-site purity estimate exceeds 1 - 2 eps_purity.

    All sites are estimated in parallel from the same copies, with an
    independent Haar basis per site and round.
    """
    if not 0 < eps_prod <= FAR_STATE['max_eps'] + 1e-12:
        raise PreconditionError(f"eps_prod must lie in (0, 1/sqrt 2], got {eps_prod}")
    eps_purity, delta = tester_thresholds(num_factors, eps_prod)
    shots, bases = purity_schedule(local_dim, eps_purity, delta)
    unitaries = haar_unitary(local_dim, rng, size=bases * num_factors).reshape(
        bases, num_factors, local_dim, local_dim)
    before = source.copies_used
    counts = source.measure_local_bases(unitaries, shots, rng)
    estimates = tuple(median_of_means(collision_estimates(counts[:, i], local_dim)) for i in range(num_factors))
    reject = min(estimates) <= 1.0 - 2.0 * eps_purity
    return TesterVerdict(Verdict.REJECT if reject else Verdict.ACCEPT, estimates, eps_purity, delta,
                         source.copies_used - before)


def make_mp_tester(eps_prod: float) -> Callable[[AnyState, np.random.Generator], TesterVerdict]:
    def tester(state, rng):
        return mp_test(StateSource(state), state.num_factors, state.local_dim, eps_prod, rng)
    return tester


def tester_eval(tester: Callable, spec: EnsembleSpec, trials: int, rng: np.random.Generator,
                threads: int = 1) -> ExperimentReport:
    """Acceptance rate of `tester` on states drawn from `spec`"""
    if trials < 1:
        raise PreconditionError("need at least one trial")

    def trial(index, stream):
        result = tester(sample(spec, stream), stream)
        return result if isinstance(result, TesterVerdict) else bool(result)

    results = map_streams(trial, spawn_seed(rng), trials, threads)
    accepted = sum(r.accepted if isinstance(r, TesterVerdict) else r for r in results)
    low, high, radius = binomial_confidence(accepted, trials)
    return ExperimentReport(
        spec=spec.to_dict(),
        samples=trials,
        estimate=accepted / trials,
        confidence_radius=radius,
        extra={
            'accepted': accepted,
            'interval': [low, high],
            'verdicts': [r.to_dict() if isinstance(r, TesterVerdict) else {'accepted': r} for r in results],
        },
    )


def tester_bias(tester: Callable, mp_spec: EnsembleSpec, far_spec: EnsembleSpec, trials: int,
                rng: np.random.Generator, threads: int = 1) -> ExperimentReport:
    """Accept rate on the product ensemble minus accept rate on the far ensemble"""
    completeness = tester_eval(tester, mp_spec, trials, rng, threads)
    soundness = tester_eval(tester, far_spec, trials, rng, threads)
    return ExperimentReport(
        spec={'mp': mp_spec.to_dict(), 'far': far_spec.to_dict()},
        samples=trials,
        estimate=completeness.estimate - soundness.estimate,
        confidence_radius=completeness.confidence_radius + soundness.confidence_radius,
        extra={
            'accept_mp': completeness.estimate,
            'accept_mp_radius': completeness.confidence_radius,
            'accept_far': soundness.estimate,
            'accept_far_radius': soundness.confidence_radius,
            'completeness_target': TESTER_THRESHOLDS['completeness'],
            'soundness_target': TESTER_THRESHOLDS['soundness'],
            'mp_verdicts': completeness.extra['verdicts'],
            'far_verdicts': soundness.extra['verdicts'],
        },
    )
