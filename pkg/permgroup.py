"""
Permutations of tensor factors, double cosets and matrix permanents
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from config import SIZE_CAPS
from exceptions import DimensionMismatchError, InvalidDimensionError, PreconditionError, SizeCapError


@dataclass(frozen=True)
class Permutation:
    """A bijection of {0..n-1}; images[i] is the image of i"""
    images: Tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(i) for i in self.images)
        object.__setattr__(self, 'images', images)
        if sorted(images) != list(range(len(images))):
            raise PreconditionError(f"{images} is not a permutation of 0..{len(images) - 1}")

    @classmethod
    def identity(cls, degree: int) -> 'Permutation':
        return cls(tuple(range(degree)))

    @classmethod
    def transposition(cls, degree: int, a: int, b: int) -> 'Permutation':
        images = list(range(degree))
        images[a], images[b] = images[b], images[a]
        return cls(tuple(images))

    @classmethod
    def from_cycles(cls, degree: int, cycles: Iterable[Sequence[int]]) -> 'Permutation':
        images = list(range(degree))
        for cycle in cycles:
            for k, a in enumerate(cycle):
                images[a] = cycle[(k + 1) % len(cycle)]
        return cls(tuple(images))

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i]

    def compose(self, other: 'Permutation') -> 'Permutation':
        """(self o other)(i) = self(other(i))"""
        if self.degree != other.degree:
            raise DimensionMismatchError("permutations of different degree")
        return Permutation(tuple(self.images[j] for j in other.images))

    def __mul__(self, other: 'Permutation') -> 'Permutation':
        return self.compose(other)

    def inverse(self) -> 'Permutation':
        inv = [0] * self.degree
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(tuple(inv))

    def fixes(self, i: int) -> bool:
        return self.images[i] == i

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.images))

    def cycles(self) -> List[Tuple[int, ...]]:
        """Cycle decomposition, fixed points omitted"""
        seen, out = set(), []
        for start in range(self.degree):
            if start in seen or self.fixes(start):
                continue
            cycle, i = [], start
            while i not in seen:
                seen.add(i)
                cycle.append(i)
                i = self.images[i]
            out.append(tuple(cycle))
        return out

    def sign(self) -> int:
        return -1 if sum(len(c) - 1 for c in self.cycles()) % 2 else 1


def all_permutations(degree: int):
    if degree < 0:
        raise InvalidDimensionError("degree must be non-negative")
    if degree > SIZE_CAPS['permutation_degree']:
        raise SizeCapError(f"enumerating S_{degree} is capped at degree {SIZE_CAPS['permutation_degree']}")
    return [Permutation(p) for p in itertools.permutations(range(degree))]


@dataclass(frozen=True)
class CosetDecomposition:
    """pi = alpha o tau^a o beta with alpha, beta fixing 0 and tau = (0 1)"""
    alpha: Permutation
    a: int
    beta: Permutation

    def product(self) -> Permutation:
        n = self.alpha.degree
        middle = Permutation.transposition(n, 0, 1) if self.a else Permutation.identity(n)
        return self.alpha * middle * self.beta


def double_coset_decompose(pi: Permutation) -> CosetDecomposition:
    """Split pi over the stabilizer of 0: S_n = Stab(0) u Stab(0) (0 1) Stab(0)"""
    n = pi.degree
    if n < 2:
        raise InvalidDimensionError("double coset decomposition needs degree at least 2")
    if pi.fixes(0):
        return CosetDecomposition(pi, 0, Permutation.identity(n))
    j = pi(0)
    alpha = Permutation.transposition(n, 1, j) if j != 1 else Permutation.identity(n)
    tau = Permutation.transposition(n, 0, 1)
    beta = tau * alpha.inverse() * pi
    return CosetDecomposition(alpha, 1, beta)


def permute_tensor_factors(vector: np.ndarray, pi: Permutation, local_dim: int) -> np.ndarray:
    """
    P(pi) on (C^d)^{(x)n}: the factor in slot k moves to slot pi(k).

    P(pi) |x_0 ... x_{n-1}> = |x_{pi^-1(0)} ... x_{pi^-1(n-1)}>.
    """
    n = pi.degree
    vector = np.asarray(vector)
    if vector.size != local_dim ** n:
        raise DimensionMismatchError(f"vector of size {vector.size} is not on {n} factors of dimension {local_dim}")
    tensor = vector.reshape((local_dim,) * n)
    return np.transpose(tensor, pi.inverse().images).reshape(-1)


def permutation_matrix(pi: Permutation, local_dim: int) -> np.ndarray:
    """Explicit P(pi); small sizes only"""
    side = local_dim ** pi.degree
    if side > SIZE_CAPS['explicit_operator_dim']:
        raise SizeCapError(f"explicit operators are capped at side {SIZE_CAPS['explicit_operator_dim']}")
    return np.stack([permute_tensor_factors(e, pi, local_dim) for e in np.eye(side)], axis=1)


def symmetric_projector(copies: int, local_dim: int) -> np.ndarray:
    """Projector onto Sym^T(C^d), the average of P(pi) over S_T"""
    perms = all_permutations(copies)
    return sum(permutation_matrix(p, local_dim) for p in perms) / len(perms)


def rising_factorial(x: int, k: int) -> int:
    """x (x+1) ... (x+k-1)"""
    out = 1
    for i in range(k):
        out *= x + i
    return out


def sym_dim(copies: int, local_dim: int) -> int:
    """dim Sym^T(C^d) = binom(d + T - 1, T)"""
    if copies < 0 or local_dim < 1:
        raise InvalidDimensionError("need copies >= 0 and local_dim >= 1")
    return math.comb(local_dim + copies - 1, copies)


def _square(matrix) -> np.ndarray:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(f"permanent needs a square matrix, got shape {matrix.shape}")
    return matrix


def permanent(matrix) -> complex:
    """Ryser's formula with Gray-code updates, O(2^n n)"""
    matrix = _square(matrix).astype(complex)
    n = matrix.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n > SIZE_CAPS['permanent_side']:
        raise SizeCapError(f"permanent is capped at side {SIZE_CAPS['permanent_side']}")
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    previous = 0
    for k in range(1, 2 ** n):
        gray = k ^ (k >> 1)
        changed = (gray ^ previous).bit_length() - 1
        if gray & (1 << changed):
            row_sums += matrix[:, changed]
        else:
            row_sums -= matrix[:, changed]
        previous = gray
        sign = -1 if bin(gray).count('1') % 2 else 1
        total += sign * np.prod(row_sums)
    return complex((-1) ** n * total)


def brute_force_permanent(matrix) -> complex:
    """Sum over all permutations; oracle for small sides"""
    matrix = _square(matrix)
    n = matrix.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n > SIZE_CAPS['brute_force_side']:
        raise SizeCapError(f"brute-force permanent is capped at side {SIZE_CAPS['brute_force_side']}")
    perms = np.array(list(itertools.permutations(range(n))))
    return complex(np.sum(np.prod(matrix[np.arange(n), perms], axis=1)))


def batched_permanent(matrices, chunk: int = 512) -> np.ndarray:
    """Permanents of a stack of small (N, n, n) matrices, summing over S_n in one vectorized pass"""
    matrices = np.asarray(matrices)
    if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2]:
        raise DimensionMismatchError(f"need a stack of square matrices, got shape {matrices.shape}")
    n = matrices.shape[1]
    if n > SIZE_CAPS['brute_force_side']:
        raise SizeCapError(f"batched permanent is capped at side {SIZE_CAPS['brute_force_side']}")
    if n == 0:
        return np.ones(matrices.shape[0], dtype=complex)
    perms = np.array(list(itertools.permutations(range(n))))
    rows = np.arange(n)
    out = np.empty(matrices.shape[0], dtype=complex)
    for start in range(0, matrices.shape[0], chunk):
        block = matrices[start:start + chunk]
        out[start:start + chunk] = np.prod(block[:, rows, perms], axis=-1).sum(axis=-1)
    return out


