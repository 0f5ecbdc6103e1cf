"""Weak characteristic function and the normal / canonical weak-value families.

The generating object is Z^w(mu, nu) = Tr{rho_f exp(i mu A) rho_i exp(-i nu A)}.
Normal weak values are its Taylor coefficients,

    alpha[j, k] = Tr{A^j rho_f A^k rho_i},

optionally shifted by a phase-space offset (the one-parameter family
alpha[j, k](z) and the large-coupling-offset variant). They stay finite for
every pre/post-selection, unlike the canonical weak value A_w = alpha[1,0] /
alpha[0,0], which diverges for (nearly) orthogonal selections.

Sign convention: all expansion formulas in this package are anchored on the
trace ordering above, so that Im(alpha[1,0]) is what enters denominators like
alpha0 + 2*lam*qbar*Im(alpha1) + ...; this is validated against the exact
engine and finite differences of Z^w in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSubspace, DimMismatch, OrthogonalStates
from .hilbert import HERM_TOL, DensityMatrix, SystemObservable, trace_product

ORTH_TOL = 1e-12


def _check_dims(rho_i: DensityMatrix, rho_f: DensityMatrix, a: SystemObservable):
    if not (rho_i.dim == rho_f.dim == a.dim):
        raise DimMismatch(
            f"dimension mismatch: rho_i {rho_i.dim}, rho_f {rho_f.dim}, A {a.dim}"
        )


def weak_charfunc(
    rho_i: DensityMatrix, rho_f: DensityMatrix, a: SystemObservable, mu: float, nu: float
) -> complex:
    """Z^w(mu, nu) = Tr{rho_f e^{i mu A} rho_i e^{-i nu A}}."""
    _check_dims(rho_i, rho_f, a)
    return trace_product([rho_f.mat, a.expi(mu), rho_i.mat, a.expi(-nu)])


def normal_weak_value(
    rho_i: DensityMatrix,
    rho_f: DensityMatrix,
    a: SystemObservable,
    j: int,
    k: int,
    z: float = 0.0,
    lambda_qstar: float = 0.0,
) -> complex:
    """Shifted normal weak value
    Tr{A^j rho_f A^k e^{i(z + lq*)A} rho_i e^{i(z - lq*)A}}.

    Reduces to Tr{A^j rho_f A^k rho_i} at z = lambda_qstar = 0 and equals the
    corresponding mixed derivative of Z^w at the shifted expansion point.
    """
    _check_dims(rho_i, rho_f, a)
    if j < 0 or k < 0:
        raise ValueError("weak-value orders must be nonnegative")
    if z == 0.0 and lambda_qstar == 0.0:
        return trace_product([a.power(j), rho_f.mat, a.power(k), rho_i.mat])
    return trace_product(
        [
            a.power(j),
            rho_f.mat,
            a.power(k),
            a.expi(z + lambda_qstar),
            rho_i.mat,
            a.expi(z - lambda_qstar),
        ]
    )


@dataclass(frozen=True)
class WeakValueTable:
    """Normal weak values alpha[j, k] for 0 <= j, k <= max_order at a common
    expansion point (z, lambda_qstar)."""

    max_order: int
    alpha: np.ndarray
    z: float
    lambda_qstar: float

    def __getitem__(self, jk) -> complex:
        j, k = jk
        return complex(self.alpha[j, k])


def weak_value_table(
    rho_i: DensityMatrix,
    rho_f: DensityMatrix,
    a: SystemObservable,
    max_order: int,
    z: float = 0.0,
    lambda_qstar: float = 0.0,
) -> WeakValueTable:
    _check_dims(rho_i, rho_f, a)
    n = max_order + 1
    alpha = np.empty((n, n), dtype=complex)
    left = a.expi(z + lambda_qstar) @ rho_i.mat @ a.expi(z - lambda_qstar)
    for j in range(n):
        aj_rf = a.power(j) @ rho_f.mat
        for k in range(n):
            alpha[j, k] = np.trace(aj_rf @ a.power(k) @ left)
    alpha.setflags(write=False)
    return WeakValueTable(max_order, alpha, z, lambda_qstar)


@dataclass(frozen=True)
class CanonicalWeakValues:
    """Canonical parametrization: A_w = alpha1/alpha0 (complex), B_w =
    alpha11/alpha0 (real, B_w >= |A_w|^2 with equality for pure selections),
    C_w = alpha2/alpha0 (complex)."""

    A_w: complex
    B_w: float
    C_w: complex
    alpha0: float


def _degenerate_mixture(rho: DensityMatrix, a: SystemObservable) -> bool:
    """True when rho is supported inside a single eigenspace of A."""
    v = a.eigenvectors
    w = a.eigenvalues
    scale = max(1.0, float(np.max(np.abs(w))))
    r = v.conj().T @ rho.mat @ v
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[start] <= 1e-10 * scale:
            stop += 1
        block = r[start:stop, start:stop]
        if abs(np.trace(block) - 1.0) < 1e-10:
            outside = np.sum(np.abs(r)) - np.sum(np.abs(block))
            if outside < 1e-10:
                return True
        start = stop
    return False


def canonical_values(
    rho_i: DensityMatrix,
    rho_f: DensityMatrix,
    a: SystemObservable,
    z: float = 0.0,
    lambda_qstar: float = 0.0,
) -> CanonicalWeakValues:
    """Canonical weak values A_w, B_w, C_w at the requested expansion point.

    Refuses (nearly) orthogonal selections: there the canonical values
    diverge and the bounded interpolation formulas must be used instead. The
    degenerate-eigenspace case, where every normal weak value vanishes and
    the conditional statistics are 0/0, is reported separately.
    """
    _check_dims(rho_i, rho_f, a)
    a0 = normal_weak_value(rho_i, rho_f, a, 0, 0, z, lambda_qstar)
    if abs(a0) < ORTH_TOL:
        if _degenerate_mixture(rho_i, a) or _degenerate_mixture(rho_f, a):
            raise DegenerateSubspace(
                "pre- or post-selection is a degenerate-eigenspace mixture; "
                "conditional statistics are indeterminate"
            )
        raise OrthogonalStates(
            f"|alpha0| = {abs(a0):.3e} < {ORTH_TOL}: canonical weak values diverge"
        )
    a1 = normal_weak_value(rho_i, rho_f, a, 1, 0, z, lambda_qstar)
    a11 = normal_weak_value(rho_i, rho_f, a, 1, 1, z, lambda_qstar)
    a2 = normal_weak_value(rho_i, rho_f, a, 2, 0, z, lambda_qstar)
    if abs(a0.imag) > HERM_TOL or abs(a11.imag) > HERM_TOL * 10:
        if z == 0.0 and lambda_qstar == 0.0:
            raise DimMismatch("alpha0/alpha11 acquired imaginary parts; invalid inputs")
    return CanonicalWeakValues(
        A_w=complex(a1 / a0),
        B_w=float((a11 / a0).real),
        C_w=complex(a2 / a0),
        alpha0=float(a0.real),
    )
