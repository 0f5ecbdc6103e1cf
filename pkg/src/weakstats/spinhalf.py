"""Closed-form statistics for weak measurement of a spin-1/2 component.

Pre- and post-selections are Bloch vectors (mixed selections allowed),
the measured observable is a unit spin component, and the probe is Gaussian
unless a grid kernel is supplied. These solutions serve as an independent
oracle for the grid engine and carry the large-order moment machinery needed
for the universal even-moment scaling study.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BeyondValidity, UnsupportedFunction
from .exact import ConditionalDistribution, MeasurementSetup
from .hilbert import DensityMatrix, SystemObservable, spectral_decompose, validate_density
from .probe import (
    GaussianProbe,
    GridProbe,
    ProbeState,
    dft_pair,
    log_p_moment,
    to_grid,
)

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def rho_from_bloch(n) -> DensityMatrix:
    """Density matrix (1 + n.sigma)/2 of a Bloch vector with |n| <= 1."""
    n = np.asarray(n, dtype=float)
    mat = 0.5 * (np.eye(2, dtype=complex) + sum(ni * s for ni, s in zip(n, SIGMA)))
    return validate_density(mat)


def spin_observable(n) -> SystemObservable:
    """Unit spin component n.sigma."""
    n = np.asarray(n, dtype=float)
    return spectral_decompose(sum(ni * s for ni, s in zip(n, SIGMA)))


@dataclass(frozen=True)
class SpinSetup:
    """Spin-1/2 measurement: Bloch vectors of the selections, measured
    component, coupling strength, Gaussian probe."""

    n_i: tuple
    n_f: tuple
    n: tuple
    lam: float
    probe: GaussianProbe

    def __post_init__(self):
        ni, nf, n = (np.asarray(v, dtype=float) for v in (self.n_i, self.n_f, self.n))
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("measured component n must be a unit vector")
        if np.linalg.norm(ni) > 1 + 1e-12 or np.linalg.norm(nf) > 1 + 1e-12:
            raise ValueError("selection polarizations must satisfy |n| <= 1")
        object.__setattr__(self, "n_i", tuple(ni))
        object.__setattr__(self, "n_f", tuple(nf))
        object.__setattr__(self, "n", tuple(n))

    def to_setup(self, probe: ProbeState | None = None, n_q: int = 512, span=None) -> MeasurementSetup:
        return MeasurementSetup(
            self.lam,
            rho_from_bloch(self.n_i),
            rho_from_bloch(self.n_f),
            spin_observable(self.n),
            self.probe if probe is None else probe,
            n_q=n_q,
            span=span,
        )


def fig_geometry(theta: float, lam: float, probe: GaussianProbe) -> SpinSetup:
    """The sweep geometry used throughout: preselection along z, measured
    component along x (so n.n_i = 0), postselection coplanar at angle theta."""
    return SpinSetup(
        n_i=(0.0, 0.0, 1.0),
        n_f=(math.sin(theta), 0.0, math.cos(theta)),
        n=(1.0, 0.0, 0.0),
        lam=lam,
        probe=probe,
    )


def spin_weak_values(s: SpinSetup):
    """(alpha0, alpha1, alpha11) in closed form.

    alpha1 = n.(n_i + n_f - i n_i x n_f)/2, the sign of the imaginary part
    fixed by consistency with Tr{A rho_f rho_i} (checked against the matrix
    route to 1e-12 in the tests).
    """
    ni, nf, n = (np.asarray(v, dtype=float) for v in (s.n_i, s.n_f, s.n))
    a0 = 0.5 * (1.0 + ni @ nf)
    a1 = 0.5 * (n @ (ni + nf) - 1j * (n @ np.cross(ni, nf)))
    a11 = 0.5 * (1.0 - ni @ nf + 2.0 * (n @ ni) * (n @ nf))
    return float(a0), complex(a1), float(a11)


def _bars(s: SpinSetup, probe: ProbeState):
    """overline{cos 2 lam q} and overline{sin 2 lam q} over the initial
    position marginal."""
    if isinstance(probe, GaussianProbe):
        damp = math.exp(-2.0 * s.lam**2 * probe.delta_q**2)
        return damp * math.cos(2 * s.lam * probe.q_bar), damp * math.sin(2 * s.lam * probe.q_bar)
    diag = probe.kernel.diagonal().real
    return (
        float(np.sum(np.cos(2 * s.lam * probe.x) * diag)),
        float(np.sum(np.sin(2 * s.lam * probe.x) * diag)),
    )


def spin_normalization(s: SpinSetup, probe: ProbeState | None = None) -> float:
    """Post-selection probability N in closed form."""
    probe = s.probe if probe is None else probe
    a0, a1, a11 = spin_weak_values(s)
    cbar, sbar = _bars(s, probe)
    return 0.5 * (1 + cbar) * a0 + sbar * a1.imag + 0.5 * (1 - cbar) * a11


def _grid_p_kernel_values(g: GridProbe, p_left: np.ndarray, p_right: np.ndarray) -> np.ndarray:
    """rho0(p_left[r], p_right[r]) from a position-grid kernel by direct
    Fourier quadrature (independent of the DFT route of the exact engine)."""
    phase_l = np.exp(-1j * np.outer(p_left, g.x))
    phase_r = np.exp(1j * np.outer(p_right, g.x))
    return np.einsum("ri,ij,rj->r", phase_l, g.kernel, phase_r) * g.dx / (2.0 * math.pi)


def spin_pdf(
    s: SpinSetup, probe: ProbeState | None = None, p: np.ndarray | None = None
) -> ConditionalDistribution:
    """Exact conditional readout distribution P(p|f) in closed form.

    Works for Gaussian probes directly and for grid kernels through Fourier
    quadrature of the two interference branches.
    """
    probe = s.probe if probe is None else probe
    a0, a1, a11 = spin_weak_values(s)
    n = spin_normalization(s, probe)
    if p is None:
        if isinstance(probe, GaussianProbe):
            ref = to_grid(probe)
        else:
            ref = probe
        p = dft_pair(ref)[0]
    p = np.asarray(p, dtype=float)
    dp = float(p[1] - p[0])
    dens = np.zeros_like(p)
    if isinstance(probe, GaussianProbe):
        dpp = probe.delta_p
        norm = 1.0 / (math.sqrt(2 * math.pi) * dpp)
        damp = math.exp(-(s.lam**2) * 2 * probe.delta_q**2)
        for sg in (+1.0, -1.0):
            dens += (a0 + a11 + 2 * sg * a1.real) * norm * np.exp(
                -((p - s.lam * sg) ** 2) / (2 * dpp**2)
            )
        cross = 2 * math.cos(2 * s.lam * probe.q_bar) * (a0 - a11) + 4 * math.sin(
            2 * s.lam * probe.q_bar
        ) * a1.imag
        dens += cross * damp * norm * np.exp(-(p**2) / (2 * dpp**2))
        dens /= 4.0 * n
    else:
        total = np.zeros(p.size, dtype=complex)
        for sg in (+1.0, -1.0):
            diag = _grid_p_kernel_values(probe, p - s.lam * sg, p - s.lam * sg)
            off = _grid_p_kernel_values(probe, p + s.lam * sg, p - s.lam * sg)
            total += (a0 + a11 + 2 * sg * a1.real) * diag
            total += (a0 - a11 + 2j * sg * a1.imag) * off
        dens = total.real / (4.0 * n)
    return ConditionalDistribution(p, dens, n, kind="density", spacing=dp)


def _log_terms_even(s: SpinSetup, j: int):
    """log of the positive series terms C(j,2k) pbar^{j-2k} lam^{2k}, k>=1."""
    g = s.probe
    loglam = math.log(abs(s.lam))
    out = []
    for k in range(1, j // 2 + 1):
        logc = math.lgamma(j + 1) - math.lgamma(2 * k + 1) - math.lgamma(j - 2 * k + 1)
        out.append(logc + log_p_moment(g, j - 2 * k) + 2 * k * loglam)
    return out


def spin_exact_moment(s: SpinSetup, j: int) -> float:
    """Exact readout moment <p^j>_f; finite for every selection including
    orthogonal ones. Large orders are summed in log space (j up to ~1000)."""
    if not isinstance(s.probe, GaussianProbe):
        raise UnsupportedFunction("closed-form moments need a Gaussian probe")
    if j < 0 or j > 1000:
        raise ValueError("moment order outside 0..1000")
    if j == 0:
        return 1.0
    a0, a1, a11 = spin_weak_values(s)
    n = spin_normalization(s)
    g = s.probe
    if j % 2 == 0:
        base = math.exp(log_p_moment(g, j))
        logs = _log_terms_even(s, j)
        peak = max(logs)
        corr = math.exp(peak) * sum(math.exp(x - peak) for x in logs)
        return base + 0.5 * (a0 + a11) / n * corr
    if s.lam == 0.0:
        return 0.0
    # every surviving power of lam is odd, so the sign factors out
    loglam = math.log(abs(s.lam))
    total = 0.0
    for k in range((j - 1) // 2 + 1):
        logc = math.lgamma(j + 1) - math.lgamma(2 * k + 1) - math.lgamma(j - 2 * k + 1)
        total += math.exp(logc + log_p_moment(g, 2 * k) + (j - 2 * k) * loglam)
    return math.copysign(total, s.lam) * a1.real / n


def spin_interp_moment(s: SpinSetup, j: int) -> float:
    """First-nonvanishing-order interpolation of the exact moments, bounded
    over the whole selection range (denominator N2)."""
    if not isinstance(s.probe, GaussianProbe):
        raise UnsupportedFunction("closed-form moments need a Gaussian probe")
    a0, a1, a11 = spin_weak_values(s)
    g = s.probe
    nstar = (g.delta_p / abs(s.lam)) ** 2 if s.lam else math.inf
    if j > nstar:
        raise BeyondValidity(f"moment order {j} exceeds n* = {nstar:.1f}")
    q2 = g.q_bar**2 + g.delta_q**2
    n2 = a0 + 2 * s.lam * g.q_bar * a1.imag + s.lam**2 * q2 * (a11 - a0)
    if j == 0:
        return 1.0
    if j % 2 == 0:
        base = math.exp(log_p_moment(g, j))
        shift = s.lam**2 * math.comb(j, 2) * math.exp(log_p_moment(g, j - 2))
        return base + shift * 0.5 * (a0 + a11) / n2
    return s.lam * j * math.exp(log_p_moment(g, j - 1)) * a1.real / n2


def universal_scaling(s: SpinSetup, j: int) -> float:
    """Exact renormalized even moment (<p^j>_f - pbar^j) / (j pbar^j),
    evaluated in log space so very large orders stay accurate."""
    if j <= 0 or j % 2:
        raise ValueError("universal scaling is defined for positive even orders")
    a0, a1, a11 = spin_weak_values(s)
    n = spin_normalization(s)
    logs = _log_terms_even(s, j)
    logref = log_p_moment(s.probe, j)
    ratio = sum(math.exp(x - logref) for x in logs)
    return 0.5 * (a0 + a11) / n * ratio / j


def scaling_formula(s: SpinSetup) -> float:
    """Lowest-order universal value (alpha0 + alpha11) / (4 Delta^2 N); at
    orthogonality it tends to (coherence scale / readout spread)^2."""
    a0, a1, a11 = spin_weak_values(s)
    n = spin_normalization(s)
    delta = s.probe.delta_p / s.lam
    return (a0 + a11) / (4.0 * delta**2 * n)
