"""
State ensembles for the distinguishing experiments and far-from-product statistics
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple, Union

import numpy as np

from bounds import binomial_confidence
from config import FAR_STATE, SIZE_CAPS
from exceptions import FarStateError, InvalidCutError, InvalidDimensionError, PreconditionError
from models import ExperimentReport
from permgroup import sym_dim
from qcore import (
    DensityMatrix,
    PureState,
    canonical_cut,
    haar_state,
    haar_vectors,
    largest_schmidt_coefficients,
    nearest_product_overlap,
    product_state,
)


class EnsembleKind(str, Enum):
    GLOBAL_HAAR = 'global_haar'
    BIPARTITE_PRODUCT_HAAR = 'bipartite_product_haar'
    MULTIPARTITE_PRODUCT_HAAR = 'multipartite_product_haar'
    MAXIMALLY_MIXED = 'maximally_mixed'
    FAR_FROM_MP = 'far_from_mp'


@dataclass(frozen=True)
class EnsembleSpec:
    """An ensemble of n-qudit states; `cut` is used by the bipartite kind, `eps` by the far kind"""
    kind: EnsembleKind
    num_factors: int
    local_dim: int
    cut: Optional[Tuple[int, ...]] = None
    eps: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', EnsembleKind(self.kind))
        if self.num_factors < 1 or self.local_dim < 1:
            raise InvalidDimensionError("ensembles need n >= 1 and d >= 1")
        if self.kind == EnsembleKind.BIPARTITE_PRODUCT_HAAR:
            if self.num_factors < 2:
                raise InvalidCutError("a bipartite ensemble needs at least two factors")
            cut = self.cut if self.cut is not None else tuple(range(self.num_factors // 2))
            cut = tuple(sorted(int(i) for i in cut))
            if not cut or len(cut) >= self.num_factors or len(set(cut)) != len(cut) \
                    or cut[0] < 0 or cut[-1] >= self.num_factors:
                raise InvalidCutError(f"cut {cut} is not a non-trivial bipartition")
            object.__setattr__(self, 'cut', cut)
        elif self.cut is not None:
            raise InvalidCutError(f"{self.kind.value} does not take a cut")
        if self.kind == EnsembleKind.FAR_FROM_MP:
            if self.eps is None or not 0 < self.eps <= FAR_STATE['max_eps'] + 1e-12:
                raise PreconditionError(f"eps must lie in (0, 1/sqrt 2], got {self.eps}")
            if self.num_factors < 2 or self.local_dim ** self.num_factors < 4:
                raise InvalidDimensionError("far states need n >= 2 and d^n >= 4")
        elif self.eps is not None:
            raise PreconditionError(f"{self.kind.value} does not take eps")

    @classmethod
    def global_haar(cls, num_factors, local_dim):
        return cls(EnsembleKind.GLOBAL_HAAR, num_factors, local_dim)

    @classmethod
    def bipartite_product_haar(cls, num_factors, local_dim, cut=None):
        return cls(EnsembleKind.BIPARTITE_PRODUCT_HAAR, num_factors, local_dim, cut=cut)

    @classmethod
    def multipartite_product_haar(cls, num_factors, local_dim):
        return cls(EnsembleKind.MULTIPARTITE_PRODUCT_HAAR, num_factors, local_dim)

    @classmethod
    def maximally_mixed(cls, num_factors, local_dim):
        return cls(EnsembleKind.MAXIMALLY_MIXED, num_factors, local_dim)

    @classmethod
    def far_from_mp(cls, num_factors, local_dim, eps):
        return cls(EnsembleKind.FAR_FROM_MP, num_factors, local_dim, eps=eps)

    @property
    def dim(self) -> int:
        return self.local_dim ** self.num_factors

    @property
    def parts(self) -> Optional[Tuple[Tuple[int, ...], ...]]:
        """Blocks carrying independent Haar states, None when the ensemble is not Haar-product"""
        n = self.num_factors
        if self.kind == EnsembleKind.GLOBAL_HAAR:
            return (tuple(range(n)),)
        if self.kind == EnsembleKind.BIPARTITE_PRODUCT_HAAR:
            return (self.cut, tuple(i for i in range(n) if i not in self.cut))
        if self.kind == EnsembleKind.MULTIPARTITE_PRODUCT_HAAR:
            return tuple((i,) for i in range(n))
        return None

    def to_dict(self):
        data = {'kind': self.kind.value, 'n': self.num_factors, 'd': self.local_dim}
        if self.cut is not None:
            data['cut'] = list(self.cut)
        if self.eps is not None:
            data['eps'] = self.eps
        return data


@dataclass(frozen=True, eq=False)
class FarStateCertificate:
    """A state whose distance to the fully product states was measured to be eps_measured"""
    state: PureState
    eps_target: float
    eps_measured: float
    redraws: int = 0

    def __post_init__(self):
        if abs(self.eps_measured - self.eps_target) > FAR_STATE['tol']:
            raise FarStateError(f"measured distance {self.eps_measured!r} is not {self.eps_target!r}")

    def to_dict(self):
        return {'eps_target': self.eps_target, 'eps_measured': self.eps_measured,
                'redraws': self.redraws, 'state': self.state.to_dict()}


def _block_product(blocks, local_dim: int, num_factors: int) -> PureState:
    """Tensor of block states, block b living on the factors parts[b]"""
    order = [f for block, _ in blocks for f in block]
    tensor = np.ones(1, dtype=complex)
    for _, vector in blocks:
        tensor = np.kron(tensor, vector)
    tensor = tensor.reshape((local_dim,) * num_factors)
    return PureState(np.transpose(tensor, np.argsort(order)).reshape(-1), local_dim, num_factors)


def sample(spec: EnsembleSpec, rng: np.random.Generator) -> Union[PureState, DensityMatrix]:
    n, d = spec.num_factors, spec.local_dim
    if spec.kind == EnsembleKind.MAXIMALLY_MIXED:
        return DensityMatrix.maximally_mixed(d, n)
    if spec.kind == EnsembleKind.FAR_FROM_MP:
        return far_state(n, d, spec.eps, rng).state
    if spec.kind == EnsembleKind.MULTIPARTITE_PRODUCT_HAAR:
        return product_state(haar_vectors(d, n, rng))
    blocks = [(block, haar_state(d ** len(block), rng).amplitudes) for block in spec.parts]
    return _block_product(blocks, d, n)


def _high_weight_mask(num_factors: int, local_dim: int) -> np.ndarray:
    """Basis strings with at least two non-zero digits"""
    digits = np.indices((local_dim,) * num_factors).reshape(num_factors, -1)
    return np.count_nonzero(digits, axis=0) >= 2


def far_state(num_factors: int, local_dim: int, eps: float, rng: np.random.Generator,
              restarts: Optional[int] = None) -> FarStateCertificate:
    """
    sqrt(1 - eps^2)|0...0> + eps|phi> with phi Haar on the strings of Hamming weight >= 2.

    The distance to the fully product states is measured with the product-overlap
    optimizer (|0...0> itself achieves overlap 1 - eps^2); phi is redrawn when a
    closer product state turns up.
    """
    EnsembleSpec.far_from_mp(num_factors, local_dim, eps)
    mask = _high_weight_mask(num_factors, local_dim)
    tail = int(mask.sum())
    measured = None
    for redraw in range(FAR_STATE['max_redraws']):
        amplitudes = np.zeros(local_dim ** num_factors, dtype=complex)
        amplitudes[mask] = eps * haar_vectors(tail, 1, rng)[0]
        amplitudes[0] = math.sqrt(1.0 - eps ** 2)
        state = PureState(amplitudes, local_dim, num_factors)
        overlap = max(1.0 - eps ** 2, nearest_product_overlap(state, restarts=restarts, rng=rng).overlap)
        measured = math.sqrt(max(0.0, 1.0 - overlap))
        if abs(measured - eps) <= FAR_STATE['tol']:
            return FarStateCertificate(state, eps, measured, redraw)
    raise FarStateError(f"no verified {eps}-far state after {FAR_STATE['max_redraws']} draws "
                        f"(last measured distance {measured!r})")


def schmidt_tail_bound(d1: int, d2: int, delta: float) -> Tuple[float, float]:
    """
    Concentration of the largest Schmidt value of a Haar state on C^d1 (x) C^d2, d1 <= d2.

    Returns (threshold, probability): the largest singular value exceeds
    1/sqrt(d1) + (1 + delta)/sqrt(d2) with probability at most exp(-d1 delta^2).
    """
    if d1 > d2:
        d1, d2 = d2, d1
    if delta <= 0:
        raise PreconditionError("delta must be positive")
    return 1.0 / math.sqrt(d1) + (1.0 + delta) / math.sqrt(d2), math.exp(-d1 * delta ** 2)


def far_from_bp_union_bound(num_factors: int, local_dim: int, eps: float) -> Optional[float]:
    """Union bound over cuts on Pr[a Haar state is eps-close to a bipartite product state]"""
    n, d = num_factors, local_dim
    if eps ** 2 >= 1.0 - d ** -0.5 - d ** (-(n - 1) / 2):
        return None
    total = 0.0
    for s in range(1, n // 2 + 1):
        gap = d ** (s / 2) + d ** ((n - s) / 2) - d ** (n / 2) * (1.0 - eps ** 2)
        total += math.comb(n, s) * math.exp(-gap ** 2)
    return min(1.0, total)


def far_fraction_experiment(num_factors: int, local_dim: int, eps: float, samples: int,
                            rng: np.random.Generator, batch: int = 2000) -> ExperimentReport:
    """Fraction of Haar states within eps of some bipartite product state"""
    if samples < 1:
        raise PreconditionError("need at least one sample")
    n, d = num_factors, local_dim
    spec = EnsembleSpec.global_haar(n, d)
    chunks, cuts = [], None
    remaining = samples
    while remaining > 0:
        size = min(batch, remaining)
        cuts, lam = largest_schmidt_coefficients(haar_vectors(d ** n, size, rng), d, n)
        chunks.append(lam)
        remaining -= size
    lam = np.concatenate(chunks)
    close = np.sqrt(np.clip(1.0 - lam.max(axis=1), 0.0, None)) <= eps
    hits = int(close.sum())
    _, _, radius = binomial_confidence(hits, samples)
    per_cut = [{
        'cut': list(canonical_cut(cut, n)),
        'mean_lambda1': float(lam[:, k].mean()),
        'std_lambda1': float(lam[:, k].std()),
        'max_lambda1': float(lam[:, k].max()),
    } for k, cut in enumerate(cuts)]
    return ExperimentReport(
        spec=spec.to_dict(),
        samples=samples,
        estimate=hits / samples,
        confidence_radius=radius,
        extra={'eps': eps, 'cuts': per_cut, 'union_bound': far_from_bp_union_bound(n, d, eps)},
    )


def haar_moment_check(dim: int, samples: int, rng: np.random.Generator, batch: int = 10000) -> Dict:
    """Frobenius distance between the mean of psi^{(x)2} over Haar states and Pi_sym / sym_dim(dim, 2)"""
    if dim ** 2 > SIZE_CAPS['explicit_operator_dim']:
        raise PreconditionError("second-moment check is for small dimensions")
    moment = np.zeros((dim ** 2, dim ** 2), dtype=complex)
    remaining = samples
    while remaining > 0:
        size = min(batch, remaining)
        v = haar_vectors(dim, size, rng)
        doubled = (v[:, :, None] * v[:, None, :]).reshape(size, dim ** 2)
        moment += doubled.T @ doubled.conj()
        remaining -= size
    moment /= samples
    identity = np.eye(dim ** 2)
    swap = np.eye(dim ** 2).reshape(dim, dim, dim, dim).transpose(1, 0, 2, 3).reshape(dim ** 2, dim ** 2)
    target = (identity + swap) / 2 / sym_dim(2, dim)
    return {'dim': dim, 'samples': samples, 'frobenius': float(np.linalg.norm(moment - target))}
