"""
Dense linear algebra for multi-qudit pure and mixed states.

States are vectors or matrices over (C^d)^{(x)n}. Factors are numbered
0..n-1 and the amplitude of |i_0 ... i_{n-1}> sits at the row-major index of
(i_0, ..., i_{n-1}), so `amplitudes.reshape((d,) * n)` is the state tensor.
"""
from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from config import DEFAULT_SEED, MP_OPTIMIZER, SIZE_CAPS, TOLERANCES, VALIDATE_STATES
from exceptions import (
    DimensionMismatchError,
    InvalidCutError,
    InvalidDimensionError,
    InvalidSubsetError,
    NonConvergenceWarning,
    NormalizationError,
    PreconditionError,
    SizeCapError,
)

T = TypeVar('T')


def rng_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent random stream for instance `index` of a run seeded with `seed`"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def map_streams(fn: Callable[[int, np.random.Generator], T], seed: int, count: int,
                threads: int = 1) -> List[T]:
    """fn(index, rng_stream(seed, index)) for every index, ordered by index whatever the worker count"""
    if threads <= 1:
        return [fn(i, rng_stream(seed, i)) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: fn(i, rng_stream(seed, i)), range(count)))


def spawn_seed(rng: np.random.Generator) -> int:
    """A fresh master seed drawn from an existing stream"""
    return int(rng.integers(2 ** 63))


def _frozen(array, dtype=complex) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PureState:
    """A unit vector in (C^d)^{(x)n}"""
    amplitudes: np.ndarray
    local_dim: int
    num_factors: int = 1

    def __post_init__(self):
        amplitudes = _frozen(np.asarray(self.amplitudes).reshape(-1))
        object.__setattr__(self, 'amplitudes', amplitudes)
        if self.local_dim < 1 or self.num_factors < 1:
            raise InvalidDimensionError(
                f"local_dim and num_factors must be positive, got {self.local_dim}, {self.num_factors}")
        if amplitudes.size != self.local_dim ** self.num_factors:
            raise InvalidDimensionError(
                f"{amplitudes.size} amplitudes do not fit {self.num_factors} factors of dimension {self.local_dim}")
        if VALIDATE_STATES:
            norm = float(np.vdot(amplitudes, amplitudes).real)
            if abs(norm - 1.0) > TOLERANCES['norm']:
                raise NormalizationError(f"squared norm {norm!r} is not 1")

    @classmethod
    def from_vector(cls, vector, local_dim: Optional[int] = None, num_factors: int = 1) -> 'PureState':
        """Normalize an arbitrary non-zero vector into a state"""
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise NormalizationError("cannot normalize the zero vector")
        if local_dim is None:
            local_dim = vector.size
        return cls(vector / norm, local_dim, num_factors)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((self.local_dim,) * self.num_factors)

    def with_factors(self, local_dim: int, num_factors: int) -> 'PureState':
        return PureState(self.amplitudes, local_dim, num_factors)

    def density(self) -> 'DensityMatrix':
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()),
                             self.local_dim, self.num_factors)

    def to_dict(self):
        return {
            'local_dim': self.local_dim,
            'num_factors': self.num_factors,
            'amplitudes': [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_dict(cls, data) -> 'PureState':
        amplitudes = np.array([complex(re, im) for re, im in data['amplitudes']])
        return cls(amplitudes, int(data['local_dim']), int(data['num_factors']))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A Hermitian, positive semidefinite, unit-trace matrix on (C^d)^{(x)k}"""
    matrix: np.ndarray
    local_dim: int
    num_factors: int = 1

    def __post_init__(self):
        matrix = _frozen(self.matrix)
        object.__setattr__(self, 'matrix', matrix)
        side = self.local_dim ** self.num_factors
        if matrix.shape != (side, side):
            raise InvalidDimensionError(f"matrix of shape {matrix.shape} does not fit side {side}")
        if VALIDATE_STATES:
            if np.max(np.abs(matrix - matrix.conj().T)) > TOLERANCES['hermitian']:
                raise PreconditionError("density matrix is not Hermitian")
            trace = np.trace(matrix).real
            if abs(trace - 1.0) > TOLERANCES['trace']:
                raise NormalizationError(f"trace {trace!r} is not 1")
            if np.linalg.eigvalsh(matrix)[0] < TOLERANCES['psd_floor']:
                raise PreconditionError("density matrix has a negative eigenvalue")

    @classmethod
    def maximally_mixed(cls, local_dim: int, num_factors: int = 1) -> 'DensityMatrix':
        side = local_dim ** num_factors
        return cls(np.eye(side) / side, local_dim, num_factors)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class SchmidtData:
    """Squared Schmidt coefficients of a pure state across `cut`, descending"""
    coefficients: np.ndarray
    cut: Tuple[int, ...]
    side_dims: Tuple[int, int]

    def __post_init__(self):
        coefficients = _frozen(self.coefficients, dtype=float)
        object.__setattr__(self, 'coefficients', coefficients)
        if VALIDATE_STATES:
            if abs(coefficients.sum() - 1.0) > TOLERANCES['schmidt_sum']:
                raise NormalizationError("Schmidt coefficients do not sum to 1")
            floor = 1.0 / min(self.side_dims)
            if not floor - TOLERANCES['schmidt_sum'] <= coefficients[0] <= 1 + TOLERANCES['schmidt_sum']:
                raise PreconditionError(f"largest Schmidt coefficient {coefficients[0]!r} out of range")

    @property
    def largest(self) -> float:
        return float(self.coefficients[0])

    def rank(self, tol: float = 1e-12) -> int:
        return int(np.count_nonzero(self.coefficients > tol))


@dataclass(frozen=True, eq=False)
class ProductOverlap:
    """Best squared overlap with a fully product state found by the optimizer"""
    overlap: float
    factors: Tuple[np.ndarray, ...]
    converged: bool
    sweeps: int

    @property
    def distance(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.overlap))


AnyState = Union[PureState, DensityMatrix]


# Sampling

def haar_state(dim: int, rng: np.random.Generator) -> PureState:
    """Haar random unit vector in C^dim (normalized complex Gaussian)"""
    if dim < 1:
        raise InvalidDimensionError(f"dimension must be positive, got {dim}")
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureState(z / np.linalg.norm(z), dim, 1)


def haar_vectors(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """`count` Haar random unit vectors as the rows of a (count, dim) array"""
    if dim < 1:
        raise InvalidDimensionError(f"dimension must be positive, got {dim}")
    z = rng.normal(size=(count, dim)) + 1j * rng.normal(size=(count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_unitary(dim: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Haar random unitary (or a stack of `size` of them) via QR of a Ginibre matrix"""
    if dim < 1:
        raise InvalidDimensionError(f"dimension must be positive, got {dim}")
    shape = (dim, dim) if size is None else (size, dim, dim)
    z = (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    # Fix the column phases so the law is exactly Haar
    return q * (diag / np.abs(diag))[..., None, :]


# Named states

def basis_state(digits: Sequence[int], local_dim: int) -> PureState:
    n = len(digits)
    if n == 0:
        raise InvalidDimensionError("a basis state needs at least one factor")
    amplitudes = np.zeros(local_dim ** n, dtype=complex)
    amplitudes[np.ravel_multi_index(tuple(digits), (local_dim,) * n)] = 1.0
    return PureState(amplitudes, local_dim, n)


def product_state(factors: Sequence) -> PureState:
    """Tensor product of single-qudit vectors (each normalized first)"""
    vectors = [np.asarray(getattr(f, 'amplitudes', f), dtype=complex).reshape(-1) for f in factors]
    if not vectors:
        raise InvalidDimensionError("a product state needs at least one factor")
    d = vectors[0].size
    if any(v.size != d for v in vectors):
        raise DimensionMismatchError("product factors must share one local dimension")
    out = np.ones(1, dtype=complex)
    for v in vectors:
        out = np.kron(out, v / np.linalg.norm(v))
    return PureState(out, d, len(vectors))


def ghz_state(num_factors: int, local_dim: int = 2) -> PureState:
    amplitudes = np.zeros(local_dim ** num_factors, dtype=complex)
    for k in range(local_dim):
        amplitudes[np.ravel_multi_index((k,) * num_factors, (local_dim,) * num_factors)] = 1.0
    return PureState(amplitudes / np.sqrt(local_dim), local_dim, num_factors)


def bell_state() -> PureState:
    return ghz_state(2, 2)


def w_state(num_factors: int) -> PureState:
    amplitudes = np.zeros(2 ** num_factors, dtype=complex)
    for i in range(num_factors):
        amplitudes[1 << (num_factors - 1 - i)] = 1.0
    return PureState(amplitudes / np.sqrt(num_factors), 2, num_factors)


def apply_local_unitaries(state: PureState, unitaries: Sequence[np.ndarray]) -> PureState:
    """Apply U_0 (x) ... (x) U_{n-1} to a pure state"""
    if len(unitaries) != state.num_factors:
        raise DimensionMismatchError("need one unitary per factor")
    tensor = state.tensor()
    for i, u in enumerate(unitaries):
        tensor = np.moveaxis(np.tensordot(u, tensor, axes=([1], [i])), 0, i)
    return PureState(tensor.reshape(-1), state.local_dim, state.num_factors)


def as_density(state: AnyState) -> DensityMatrix:
    return state.density() if isinstance(state, PureState) else state


# Marginals and Schmidt analysis

def _validate_subset(indices: Iterable[int], num_factors: int) -> Tuple[int, ...]:
    indices = tuple(int(i) for i in indices)
    if not indices:
        raise InvalidSubsetError("subset of factors must be non-empty")
    if len(set(indices)) != len(indices):
        raise InvalidSubsetError(f"repeated factor index in {indices}")
    if any(i < 0 or i >= num_factors for i in indices):
        raise InvalidSubsetError(f"factor index out of range 0..{num_factors - 1}: {indices}")
    return tuple(sorted(indices))


def partial_trace(state: AnyState, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the factors in `keep` (returned in ascending factor order)"""
    n, d = state.num_factors, state.local_dim
    keep = _validate_subset(keep, n)
    rest = [i for i in range(n) if i not in keep]
    dk, dr = d ** len(keep), d ** len(rest)
    if isinstance(state, PureState):
        t = np.transpose(state.tensor(), list(keep) + rest).reshape(dk, dr)
        rho = t @ t.conj().T
    else:
        t = state.matrix.reshape((d,) * (2 * n))
        axes = list(keep) + rest + [n + i for i in keep] + [n + i for i in rest]
        t = np.transpose(t, axes).reshape(dk, dr, dk, dr)
        rho = np.einsum('ajbj->ab', t)
    return DensityMatrix((rho + rho.conj().T) / 2, d, len(keep))


def _validate_cut(cut: Iterable[int], num_factors: int) -> Tuple[int, ...]:
    cut = tuple(cut)
    if not cut:
        raise InvalidCutError("cut must be non-empty")
    try:
        cut = _validate_subset(cut, num_factors)
    except InvalidSubsetError as e:
        raise InvalidCutError(str(e)) from e
    if len(cut) == num_factors:
        raise InvalidCutError("cut must be a proper subset of the factors")
    return cut


def amplitude_matrix(state: PureState, cut: Sequence[int]) -> np.ndarray:
    """Amplitudes reshaped into a (d^|S|, d^|S^c|) matrix along S:S^c"""
    n, d = state.num_factors, state.local_dim
    rest = [i for i in range(n) if i not in cut]
    return np.transpose(state.tensor(), list(cut) + rest).reshape(d ** len(cut), d ** len(rest))


def schmidt(state: PureState, cut: Iterable[int]) -> SchmidtData:
    cut = _validate_cut(cut, state.num_factors)
    m = amplitude_matrix(state, cut)
    singular = np.linalg.svd(m, compute_uv=False)
    return SchmidtData(singular ** 2, cut, m.shape)


def trace_distance(a: AnyState, b: AnyState) -> float:
    a, b = as_density(a), as_density(b)
    if a.matrix.shape != b.matrix.shape:
        raise DimensionMismatchError(f"shapes {a.matrix.shape} and {b.matrix.shape} differ")
    eigenvalues = np.linalg.eigvalsh(a.matrix - b.matrix)
    return float(min(1.0, 0.5 * np.sum(np.abs(eigenvalues))))


def pure_trace_distance(a: PureState, b: PureState) -> float:
    """sqrt(1 - |<a|b>|^2), the trace distance between two pure states"""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimensions {a.dim} and {b.dim} differ")
    return math.sqrt(max(0.0, 1.0 - abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def purity(rho: AnyState) -> float:
    """Tr[rho^2]"""
    if isinstance(rho, PureState):
        return 1.0
    return float(np.sum(np.abs(rho.matrix) ** 2))


def marginal_purities(state: AnyState) -> np.ndarray:
    """Purity of every single-factor marginal"""
    return np.array([purity(partial_trace(state, [i])) for i in range(state.num_factors)])


# Distances to product sets

def cut_representatives(num_factors: int):
    """Every non-trivial cut once up to complement: the subsets containing factor 0"""
    others = range(1, num_factors)
    for size in range(0, num_factors - 1):
        for chosen in itertools.combinations(others, size):
            yield (0,) + chosen


def canonical_cut(cut: Sequence[int], num_factors: int) -> Tuple[int, ...]:
    """The smaller side of S:S^c (S itself on a tie)"""
    complement = tuple(i for i in range(num_factors) if i not in cut)
    return tuple(cut) if len(cut) <= len(complement) else complement


def _check_cut_cap(num_factors: int):
    if num_factors < 2:
        raise InvalidDimensionError("distances to product sets need at least two factors")
    if num_factors > SIZE_CAPS['cut_factors']:
        raise SizeCapError(f"cut enumeration is capped at {SIZE_CAPS['cut_factors']} factors")


def largest_schmidt_coefficients(amplitudes: np.ndarray, local_dim: int, num_factors: int):
    """
    Batched lambda_1 for every cut representative.

    `amplitudes` is (samples, d^n); returns (cuts, array of shape (samples, len(cuts))).
    """
    _check_cut_cap(num_factors)
    count = amplitudes.shape[0]
    tensors = amplitudes.reshape((count,) + (local_dim,) * num_factors)
    cuts = list(cut_representatives(num_factors))
    out = np.empty((count, len(cuts)))
    for k, cut in enumerate(cuts):
        rest = [i for i in range(num_factors) if i not in cut]
        axes = [0] + [1 + i for i in cut] + [1 + i for i in rest]
        m = np.transpose(tensors, axes).reshape(count, local_dim ** len(cut), local_dim ** len(rest))
        out[:, k] = np.linalg.svd(m, compute_uv=False)[:, 0] ** 2
    return cuts, out


def distance_to_bp(state: PureState) -> Tuple[float, Tuple[int, ...]]:
    """Trace distance to the closest state that is product across some cut, and that cut"""
    n = state.num_factors
    _check_cut_cap(n)
    best, best_cut = -1.0, None
    for cut in cut_representatives(n):
        largest = np.linalg.norm(amplitude_matrix(state, cut), 2) ** 2
        if largest > best + 1e-15:
            best, best_cut = largest, cut
    return math.sqrt(max(0.0, 1.0 - best)), canonical_cut(best_cut, n)


def _contract_except(tensor: np.ndarray, factors: Sequence[np.ndarray], skip: int) -> np.ndarray:
    out = tensor
    # Contract from the last axis down so the remaining axis numbers stay valid
    for j in reversed(range(len(factors))):
        if j != skip:
            out = np.tensordot(out, factors[j].conj(), axes=([j], [0]))
    return out


def _leading_unfolding_vectors(tensor: np.ndarray):
    d = tensor.shape[0]
    return [np.linalg.svd(np.moveaxis(tensor, i, 0).reshape(d, -1))[0][:, 0]
            for i in range(tensor.ndim)]


def nearest_product_overlap(state: PureState,
                            restarts: Optional[int] = None,
                            iters: Optional[int] = None,
                            rng: Optional[np.random.Generator] = None,
                            tol: Optional[float] = None,
                            exact: Optional[bool] = None) -> ProductOverlap:
    """
    Largest squared overlap |<phi_0 (x) ... (x) phi_{n-1}|psi>|^2 over product states.

    Alternating maximization: with every factor but one fixed, the optimal free
    factor is the normalized contraction of psi with the others. Restart 0 starts
    from the leading singular vectors of the one-site unfoldings, the others from
    Haar random factors. For n = 2 the exact SVD answer is used unless
    `exact=False`. Without `rng` the restarts draw from the default seeded stream.
    """
    n, d = state.num_factors, state.local_dim
    if n < 2:
        raise InvalidDimensionError("product overlap needs at least two factors")
    restarts = MP_OPTIMIZER['restarts'] if restarts is None else restarts
    iters = MP_OPTIMIZER['max_iters'] if iters is None else iters
    tol = MP_OPTIMIZER['tol'] if tol is None else tol
    exact = (n == 2) if exact is None else exact
    tensor = state.tensor()

    if exact:
        if n != 2:
            raise PreconditionError("the exact product overlap is only available for two factors")
        u, s, vh = np.linalg.svd(tensor)
        return ProductOverlap(float(s[0] ** 2), (u[:, 0], vh[0]), True, 0)

    rng = rng if rng is not None else rng_stream(DEFAULT_SEED)
    best = ProductOverlap(-1.0, (), False, 0)
    for r in range(max(1, restarts)):
        if r == 0:
            factors = _leading_unfolding_vectors(tensor)
        else:
            factors = list(haar_vectors(d, n, rng))
        overlap, converged, sweep = 0.0, False, 0
        for sweep in range(1, iters + 1):
            previous = overlap
            for i in range(n):
                v = _contract_except(tensor, factors, i)
                norm = np.linalg.norm(v)
                if norm > 0:
                    factors[i] = v / norm
                    overlap = float(norm ** 2)
            if sweep > 1 and overlap - previous < tol:
                converged = True
                break
        if overlap > best.overlap:
            best = ProductOverlap(overlap, tuple(factors), converged, sweep)
    return best


def distance_to_mp(state: PureState,
                   restarts: Optional[int] = None,
                   iters: Optional[int] = None,
                   rng: Optional[np.random.Generator] = None) -> float:
    """Trace distance to the closest fully product state, sqrt(1 - best overlap)"""
    result = nearest_product_overlap(state, restarts, iters, rng)
    if not result.converged:
        warnings.warn(f"product overlap did not converge in {result.sweeps} sweeps; "
                      f"returning the best value found", NonConvergenceWarning)
    return result.distance
