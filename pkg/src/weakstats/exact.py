"""Exact (non-perturbative) conditional statistics of the probe.

The engine works in the position representation of the probe, where the
post-selected conditional kernel is an elementwise reweighting of the initial
kernel by the weak characteristic function:

    rho(q, q'|f) = rho0(q, q') Z^w(lam q, lam q') / N,
    N = sum_q rho0(q, q) Z^w(lam q, lam q).

Momentum statistics follow by unitary DFT conjugation, and any grid
observable by its spectral decomposition. Uniform-grid sums of the smooth,
exponentially decaying integrands are spectrally accurate, which the
doubling-resolution check below quantifies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimMismatch,
    GridResolutionInsufficient,
    NonHermitian,
)
from .hilbert import DensityMatrix, SystemObservable, hermiticity_defect
from .probe import (
    GaussianProbe,
    GridProbe,
    ProbeState,
    dft_pair,
    p_representation,
    to_grid,
)

PDF_NORM_TOL = 1e-8
MAX_GRID_MOMENT = 32


@dataclass(frozen=True)
class ProbeObservable:
    """Observable measured on the probe: position, momentum, or an explicit
    Hermitian matrix on the probe grid."""

    kind: str
    matrix: np.ndarray | None = None

    @classmethod
    def position(cls) -> "ProbeObservable":
        return cls("q")

    @classmethod
    def momentum(cls) -> "ProbeObservable":
        return cls("p")

    @classmethod
    def from_matrix(cls, m) -> "ProbeObservable":
        a = np.asarray(m, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimMismatch(f"observable must be square, got {a.shape}")
        if hermiticity_defect(a) > 1e-10 * max(1.0, float(np.max(np.abs(a)))):
            raise NonHermitian("probe observable must be Hermitian")
        return cls("matrix", a)


@dataclass(frozen=True)
class MeasurementSetup:
    """Everything needed to evaluate any statistic: coupling strength,
    pre/post-selection, system observable, and the initial probe state."""

    lam: float
    rho_i: DensityMatrix
    rho_f: DensityMatrix
    observable: SystemObservable
    probe: ProbeState
    n_q: int = 512
    span: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.lam):
            raise ValueError("coupling strength must be finite")
        if not (self.rho_i.dim == self.rho_f.dim == self.observable.dim):
            raise DimMismatch("system dimensions of rho_i, rho_f, A must agree")


def grid_probe(s: MeasurementSetup) -> GridProbe:
    """The setup's probe as a position-grid kernel (Gaussians are sampled)."""
    if isinstance(s.probe, GridProbe):
        if s.probe.coord != "q":
            raise ValueError("measurement setups need the probe on a position grid")
        return s.probe
    return to_grid(s.probe, s.n_q, s.span)


@dataclass(frozen=True)
class ConditionalDistribution:
    """Distribution of a probe observable conditioned on post-selection.

    ``pdf`` holds densities for continuous supports (kind 'density', with the
    grid ``spacing``) and probability masses for spectra (kind 'mass').
    ``normalization_n`` is the post-selection probability N = P(f)/W.
    """

    support: np.ndarray
    pdf: np.ndarray
    normalization_n: float
    kind: str = "density"
    spacing: float | None = None

    def __post_init__(self):
        pdf = np.asarray(self.pdf, dtype=float)
        if float(np.min(pdf)) < -1e-12:
            raise ValueError(f"pdf has negative entries down to {np.min(pdf):.3e}")
        pdf = np.clip(pdf, 0.0, None)
        total = float(np.sum(self.masses(pdf)))
        if abs(total - 1.0) > PDF_NORM_TOL:
            raise ValueError(f"distribution total {total} is not 1 within {PDF_NORM_TOL}")
        sup = np.asarray(self.support, dtype=float).copy()
        sup.setflags(write=False)
        pdf = pdf.copy()
        pdf.setflags(write=False)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "pdf", pdf)

    def masses(self, pdf: np.ndarray | None = None) -> np.ndarray:
        p = self.pdf if pdf is None else pdf
        if self.kind == "density":
            return p * self.spacing
        return p

    def moment(self, j: int) -> float:
        return float(np.sum(self.support**j * self.masses()))

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.masses())


def _zw_pieces(s: MeasurementSetup):
    """Eigenbasis data for evaluating Z^w(lam q, lam q')."""
    a = s.observable
    v = a.eigenvectors
    rf = v.conj().T @ s.rho_f.mat @ v
    ri = v.conj().T @ s.rho_i.mat @ v
    c = rf * ri.T  # c[a, b] = <a|rho_f|b><b|rho_i|a>
    return a.eigenvalues, c


def _zw_diag(s: MeasurementSetup, q: np.ndarray) -> np.ndarray:
    w, c = _zw_pieces(s)
    e = np.exp(1j * s.lam * np.outer(q, w))
    return np.einsum("ib,ab,ia->i", e, c, e.conj())


def _zw_matrix(s: MeasurementSetup, q: np.ndarray) -> np.ndarray:
    w, c = _zw_pieces(s)
    e = np.exp(1j * s.lam * np.outer(q, w))
    return e @ c.T @ e.conj().T


def normalization(s: MeasurementSetup) -> float:
    """Post-selection probability N = sum_q rho0(q, q) Z^w(lam q, lam q)."""
    g = grid_probe(s)
    val = complex(np.sum(g.kernel.diagonal() * _zw_diag(s, g.x)))
    return float(val.real)


def conditional_probe_state(s: MeasurementSetup, rep: str = "q") -> GridProbe:
    """Post-selected probe kernel in the requested representation."""
    g = grid_probe(s)
    n = normalization(s)
    kernel = g.kernel * _zw_matrix(s, g.x) / n
    kernel = 0.5 * (kernel + kernel.conj().T)
    cond = GridProbe(g.x, kernel, coord="q", check_edges=False)
    if rep == "q":
        return cond
    if rep == "p":
        return p_representation(cond)
    raise ValueError(f"rep must be 'q' or 'p', got {rep!r}")


def joint_masses(s: MeasurementSetup, obs: ProbeObservable):
    """(support, joint masses P(o in cell, f), spacing|None). The masses sum
    to N rather than 1; stable even when the post-selection probability is
    tiny."""
    g = grid_probe(s)
    kernel = g.kernel * _zw_matrix(s, g.x)
    kernel = 0.5 * (kernel + kernel.conj().T)
    if obs.kind == "q":
        return g.x, kernel.diagonal().real, g.dx
    if obs.kind == "p":
        p, u = dft_pair(g)
        kp = u @ kernel @ u.conj().T
        return p, kp.diagonal().real, float(p[1] - p[0])
    m = obs.matrix
    if m is None or m.shape != kernel.shape:
        raise DimMismatch("matrix observable must match the probe grid")
    w, v = np.linalg.eigh(m)
    masses = np.einsum("ij,jk,ki->i", v.conj().T, kernel, v).real
    return w, masses, None


def _observable_masses(s: MeasurementSetup, obs: ProbeObservable):
    """(support, masses, spacing|None, N) of the conditional outcome law."""
    support, joint, spacing = joint_masses(s, obs)
    n = float(np.sum(joint))
    return support, joint / n, spacing, n


def conditional_pdf(s: MeasurementSetup, obs: ProbeObservable) -> ConditionalDistribution:
    """Exact conditional distribution P(o|f) of the probe observable."""
    support, masses, spacing, n = _observable_masses(s, obs)
    if spacing is None:
        return ConditionalDistribution(support, masses, n, kind="mass")
    return ConditionalDistribution(support, masses / spacing, n, kind="density", spacing=spacing)


def conditional_charfunc(s: MeasurementSetup, obs: ProbeObservable, chi) -> complex | np.ndarray:
    """Z(chi|f) = <e^{i chi o}>_f; accepts a scalar or an array of chi."""
    support, masses, _, _ = _observable_masses(s, obs)
    chi_arr = np.atleast_1d(np.asarray(chi, dtype=float))
    vals = np.exp(1j * np.outer(chi_arr, support)) @ masses
    if np.isscalar(chi) or np.asarray(chi).ndim == 0:
        return complex(vals[0])
    return vals


def joint_prob(s: MeasurementSetup, obs: ProbeObservable, o_bin) -> float:
    """Joint probability P(o in bin, f) for a half-open bin (lo, hi]."""
    lo, hi = o_bin
    support, joint, _ = joint_masses(s, obs)
    sel = (support > lo) & (support <= hi)
    return float(np.sum(joint[sel]))


def exact_moment(s: MeasurementSetup, obs: ProbeObservable, j: int) -> float:
    """<o^j>_f by spectrally accurate grid summation."""
    if j < 0 or j > MAX_GRID_MOMENT:
        raise GridResolutionInsufficient(
            f"grid moments limited to order {MAX_GRID_MOMENT}, got {j}"
        )
    support, masses, spacing, _ = _observable_masses(s, obs)
    contrib = support**j * masses
    if spacing is not None and j > 0:
        m = max(2, support.size // 50)
        outer = float(np.sum(np.abs(contrib[:m])) + np.sum(np.abs(contrib[-m:])))
        scale = float(np.sum(np.abs(contrib)))
        if scale > 0 and outer > 1e-9 * scale:
            raise GridResolutionInsufficient(
                f"order-{j} moment unresolved: edge contribution {outer:.3e} "
                f"vs total scale {scale:.3e}"
            )
    return float(np.sum(contrib))


_FD_STEP_FACTORS = {0: 1e-3, 1: 1e-3, 2: 1e-3, 3: 1e-2, 4: 2e-2}


def _central_diff_weights(offsets: np.ndarray, order: int) -> np.ndarray:
    v = np.vander(offsets, increasing=True).T
    rhs = np.zeros(offsets.size)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(v, rhs)


def readout_scale(probe: ProbeState) -> float:
    """Momentum spread used to pick finite-difference steps."""
    if isinstance(probe, GaussianProbe):
        return probe.delta_p
    from .probe import p_moment

    return math.sqrt(max(p_moment(probe, 2), 1e-12))


def charfunc_moment_fd(
    s: MeasurementSetup, obs: ProbeObservable, j: int, step: float | None = None
) -> float:
    """Moment <o^j>_f from central chi-differences of Z(chi|f) at 0.

    The default step is 1e-3/DeltaP for j <= 2; higher orders use a larger
    step because the roundoff of a j-th derivative grows like eps/h^j.
    """
    if j == 0:
        return 1.0
    if j > 4:
        raise ValueError("finite-difference moments supported for j <= 4")
    if step is None:
        step = _FD_STEP_FACTORS[j] / readout_scale(s.probe)
    half = j // 2 + 3
    offsets = np.arange(-half, half + 1, dtype=float)
    weights = _central_diff_weights(offsets, j)
    zvals = conditional_charfunc(s, obs, offsets * step)
    deriv = complex(np.dot(weights, zvals)) / step**j
    return float(((-1j) ** j * deriv).real)


def weak_regime_ratio(s: MeasurementSetup) -> float:
    """Diagnostic lam * (eigenvalue spacing) / (coherence scale); interference
    terms are appreciable when this is small."""
    w = np.unique(np.round(s.observable.eigenvalues, 12))
    if w.size < 2:
        return 0.0
    da = float(np.min(np.diff(w)))
    if isinstance(s.probe, GaussianProbe):
        dp = s.probe.coherence_scale
    else:
        from .probe import q_moment

        g = s.probe
        var = q_moment(g, 2) - q_moment(g, 1) ** 2
        dp = 1.0 / (2.0 * math.sqrt(max(var, 1e-300)))
    return abs(s.lam) * da / dp


def grid_convergence(s: MeasurementSetup) -> float:
    """Normalization change under doubling the grid resolution (adequacy
    check; should be < 1e-7 for a trustworthy grid)."""
    if isinstance(s.probe, GridProbe):
        raise ValueError("doubling check applies to parametric probes only")
    base = normalization(s)
    fine = normalization(
        MeasurementSetup(
            s.lam, s.rho_i, s.rho_f, s.observable, s.probe, n_q=2 * s.n_q, span=s.span
        )
    )
    return abs(fine - base)


def number_operator(g: GridProbe) -> np.ndarray:
    """Harmonic-oscillator-like grid observable (q^2 + p^2 - 1)/2; a
    non-quadrature Hermitian matrix useful for tests and demos."""
    p, u = dft_pair(g)
    p2 = u.conj().T @ ((p**2)[:, None] * u)
    q2 = np.diag(g.x.astype(complex) ** 2)
    m = 0.5 * (q2 + p2 - np.eye(g.n))
    return 0.5 * (m + m.conj().T)
