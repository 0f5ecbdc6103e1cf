"""Dense complex linear algebra for small system Hilbert spaces.

Density matrices, Hermitian observables with cached spectral decompositions,
and trace products. Everything is validated against absolute tolerances and
immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimMismatch, NonHermitian, NonUnitTrace, NotPositive

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
MAX_DIM = 64


def _as_square(m) -> np.ndarray:
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[0] > MAX_DIM:
        raise DimMismatch(f"dimension {a.shape[0]} outside supported range 1..{MAX_DIM}")
    return a


def hermiticity_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T)))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix. Use
    :func:`validate_density` to construct from raw data."""

    mat: np.ndarray

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(self.mat @ op))


def validate_density(m) -> DensityMatrix:
    """Validate a raw matrix as a density matrix; never renormalizes."""
    a = _as_square(m)
    if hermiticity_defect(a) > HERM_TOL:
        raise NonHermitian(f"asymmetry {hermiticity_defect(a):.3e} exceeds {HERM_TOL}")
    tr = complex(np.trace(a))
    if abs(tr - 1.0) > TRACE_TOL:
        raise NonUnitTrace(f"trace {tr} differs from 1 beyond {TRACE_TOL}")
    lo = float(np.min(np.linalg.eigvalsh(a)))
    if lo < -PSD_TOL:
        raise NotPositive(f"minimum eigenvalue {lo:.3e} below -{PSD_TOL}")
    return DensityMatrix(_frozen(a))


def pure_state(vec) -> DensityMatrix:
    """Density matrix |v><v| of a (normalized) state vector."""
    v = np.asarray(vec, dtype=complex).ravel()
    n = np.linalg.norm(v)
    if n == 0:
        raise NotPositive("zero vector has no associated state")
    v = v / n
    return DensityMatrix(_frozen(np.outer(v, v.conj())))


def maximally_mixed(dim: int) -> DensityMatrix:
    return DensityMatrix(_frozen(np.eye(dim, dtype=complex) / dim))


@dataclass(frozen=True)
class SystemObservable:
    """Hermitian observable with its spectral decomposition.

    ``eigenvalues`` are ascending; ``eigenvectors`` holds the matching
    orthonormal eigenvectors as columns, phase-fixed so the first
    nonvanishing component of each is real positive.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def power(self, j: int) -> np.ndarray:
        """A^j through the eigenbasis (exact for Hermitian A)."""
        if j == 0:
            return np.eye(self.dim, dtype=complex)
        if j == 1:
            return self.matrix
        v = self.eigenvectors
        return (v * self.eigenvalues**j) @ v.conj().T

    def expi(self, t: float) -> np.ndarray:
        """exp(i t A) through the eigenbasis."""
        v = self.eigenvectors
        return (v * np.exp(1j * t * self.eigenvalues)) @ v.conj().T


def _phase_fix(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size:
            ph = col[idx[0]] / abs(col[idx[0]])
            out[:, k] = col / ph
    return out


def spectral_decompose(H) -> SystemObservable:
    """Spectral decomposition of a Hermitian matrix.

    Eigenvalues sorted ascending; degenerate groups ordered by lexicographic
    comparison of the phase-fixed eigenvectors, so output is deterministic.
    """
    a = _as_square(H)
    defect = hermiticity_defect(a)
    if defect > HERM_TOL:
        raise NonHermitian(f"asymmetry {defect:.3e} exceeds {HERM_TOL}")
    w, v = np.linalg.eigh(a)
    v = _phase_fix(v)
    # stable order inside (near-)degenerate groups
    scale = max(1.0, float(np.max(np.abs(w))))
    order = np.arange(len(w))
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[start] <= 1e-12 * scale:
            stop += 1
        if stop - start > 1:
            block = v[:, start:stop]
            keys = np.round(np.vstack([block.real, block.imag]), 12)
            sub = np.lexsort(keys[::-1])
            order[start:stop] = order[start:stop][sub]
        start = stop
    return SystemObservable(_frozen(a), _frozen(w.copy()), _frozen(v[:, order]))


def trace_product(mats: Sequence[np.ndarray]) -> complex:
    """Tr(m1 m2 ... mn) for square matrices of a common dimension."""
    if not mats:
        raise DimMismatch("trace_product needs at least one matrix")
    arrays = [np.asarray(m, dtype=complex) for m in mats]
    dim = arrays[0].shape[0]
    for a in arrays:
        if a.ndim != 2 or a.shape != (dim, dim):
            raise DimMismatch(f"matrix of shape {a.shape} does not match dim {dim}")
    prod = arrays[0]
    for a in arrays[1:]:
        prod = prod @ a
    return complex(np.trace(prod))
