"""Monte Carlo simulation of the full measurement protocol.

Each shot prepares the system and probe, applies the delta kick, projectively
reads the probe observable (binned by the grid cells) and the system
post-selection outcome S, then keeps the record with probability w(S). The
(o, S) pair is drawn by inverse-CDF sampling from the exactly computed joint
table, so the only error is statistical; RNG streams are counter-based
(Philox) and split per shot chunk, making ensembles bit-reproducible and
order-independent under parallel aggregation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimMismatch
from .exact import MeasurementSetup, ProbeObservable, joint_masses
from .hilbert import DensityMatrix

CHUNK = 1 << 16


class _Rejected:
    __slots__ = ()

    def __repr__(self):  # pragma: no cover
        return "REJECTED"


REJECTED = _Rejected()


def protocol_rho_f(post_basis: np.ndarray, w: np.ndarray) -> DensityMatrix:
    """Post-selected mixed state sum_S w(S) |S><S| / W."""
    w = np.asarray(w, dtype=float)
    total = float(np.sum(w))
    if total <= 0:
        raise ConfigError("at least one acceptance probability must be positive")
    mat = sum(
        wi * np.outer(post_basis[:, i], post_basis[:, i].conj()) for i, wi in enumerate(w)
    )
    return DensityMatrix(np.asarray(mat, dtype=complex) / total)


@dataclass(frozen=True)
class ProtocolConfig:
    """Protocol description: measurement setup (its rho_f must equal the
    acceptance-weighted mixture of the post-selection basis), probe
    observable, per-outcome acceptance probabilities, shot count, seed."""

    setup: MeasurementSetup
    obs: ProbeObservable
    post_basis: np.ndarray
    w: np.ndarray
    n_shots: int
    seed: int

    def __post_init__(self):
        basis = np.asarray(self.post_basis, dtype=complex)
        w = np.asarray(self.w, dtype=float)
        d = self.setup.rho_i.dim
        if basis.shape != (d, d):
            raise DimMismatch(f"post-selection basis must be {d}x{d}")
        if np.max(np.abs(basis.conj().T @ basis - np.eye(d))) > 1e-10:
            raise ConfigError("post-selection basis must be orthonormal")
        if w.shape != (d,) or np.any(w < 0) or np.any(w > 1):
            raise ConfigError("acceptance probabilities must lie in [0, 1]")
        if self.n_shots < 1:
            raise ConfigError("n_shots must be >= 1")
        basis = basis.copy()
        basis.setflags(write=False)
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "post_basis", basis)
        object.__setattr__(self, "w", w)

    @classmethod
    def build(cls, lam, rho_i, observable, probe, post_basis, w, obs, n_shots, seed):
        """Assemble the config, deriving rho_f from the acceptance weights."""
        basis = np.asarray(post_basis, dtype=complex)
        warr = np.asarray(w, dtype=float)
        rho_f = protocol_rho_f(basis, warr)
        setup = MeasurementSetup(lam, rho_i, rho_f, observable, probe)
        return cls(setup, obs, basis, warr, int(n_shots), int(seed))


@dataclass(frozen=True)
class JointTable:
    """Exact joint law P(o in cell, S): outcomes, bin edges, and the flat
    cumulative used for inverse-CDF sampling."""

    outcomes: np.ndarray
    edges: np.ndarray | None
    masses: np.ndarray  # shape (n_S, n_o)
    spacing: float | None

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.masses.ravel())

    def sample(self, u: np.ndarray):
        """(outcome index, post-selection index) pairs for uniforms ``u``."""
        cum = self.cumulative
        flat = np.searchsorted(cum, u * cum[-1], side="right")
        flat = np.minimum(flat, self.masses.size - 1)
        return np.unravel_index(flat, self.masses.shape)[::-1]


def joint_table(cfg: ProtocolConfig) -> JointTable:
    """Exact joint (o, S) table from the grid engine, one post-selection
    branch per basis vector."""
    s = cfg.setup
    d = s.rho_i.dim
    rows = []
    support = None
    spacing = None
    for k in range(d):
        proj = DensityMatrix(
            np.outer(cfg.post_basis[:, k], cfg.post_basis[:, k].conj())
        )
        branch = MeasurementSetup(
            s.lam, s.rho_i, proj, s.observable, s.probe, n_q=s.n_q, span=s.span
        )
        sup, masses, sp = joint_masses(branch, cfg.obs)
        rows.append(np.clip(masses, 0.0, None))
        support = sup
        spacing = sp
    masses = np.vstack(rows)
    total = float(masses.sum())
    if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-8):
        raise ValueError(f"joint table total {total} differs from 1")
    edges = None
    if spacing is not None:
        edges = np.concatenate([support - spacing / 2, [support[-1] + spacing / 2]])
    return JointTable(support, edges, masses, spacing)


def _rng_for_chunk(seed: int, chunk_index: int) -> np.random.Generator:
    bit = np.random.Philox(key=np.uint64(seed), counter=[0, 0, 0, np.uint64(chunk_index)])
    return np.random.Generator(bit)


def sample_run(cfg: ProtocolConfig, rng: np.random.Generator, table: JointTable | None = None):
    """A single protocol shot: the probe record o, or REJECTED."""
    if table is None:
        table = joint_table(cfg)
    o_idx, s_idx = table.sample(rng.random(1))
    if rng.random() <= cfg.w[s_idx[0]]:
        return float(table.outcomes[o_idx[0]])
    return REJECTED


@dataclass(frozen=True)
class EnsembleResult:
    """Aggregated shots: histogram over outcome bins (accepted shots only),
    acceptance bookkeeping, and moment estimates with standard errors."""

    outcomes: np.ndarray
    edges: np.ndarray | None
    counts: np.ndarray
    accepted: int
    total: int
    moment_estimates: tuple

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.total

    @property
    def acceptance_se(self) -> float:
        r = self.acceptance_rate
        return math.sqrt(max(r * (1 - r), 0.0) / self.total)

    def densities(self):
        """(density, standard error) per bin, for continuous outcomes."""
        if self.edges is None:
            raise ValueError("densities need binned continuous outcomes")
        width = np.diff(self.edges)
        frac = self.counts / max(self.accepted, 1)
        se = np.sqrt(np.clip(frac * (1 - frac), 0.0, None) / max(self.accepted, 1))
        return frac / width, se / width


def ensemble(cfg: ProtocolConfig, moment_orders=(1, 2, 3, 4)) -> EnsembleResult:
    """Run the full protocol; deterministic for a given seed regardless of
    chunking (streams are split per shot chunk)."""
    table = joint_table(cfg)
    n_bins = table.outcomes.size
    counts = np.zeros(n_bins, dtype=np.int64)
    accepted = 0
    sums = {j: 0.0 for j in moment_orders}
    sq_sums = {j: 0.0 for j in moment_orders}
    n_chunks = (cfg.n_shots + CHUNK - 1) // CHUNK
    for c in range(n_chunks):
        size = min(CHUNK, cfg.n_shots - c * CHUNK)
        rng = _rng_for_chunk(cfg.seed, c)
        u_outcome = rng.random(size)
        u_accept = rng.random(size)
        o_idx, s_idx = table.sample(u_outcome)
        keep = u_accept <= cfg.w[s_idx]
        kept_idx = o_idx[keep]
        accepted += int(keep.sum())
        if kept_idx.size:
            counts += np.bincount(kept_idx, minlength=n_bins)
            o_kept = table.outcomes[kept_idx]
            for j in moment_orders:
                vals = o_kept**j
                sums[j] += float(vals.sum())
                sq_sums[j] += float((vals**2).sum())
    moments = []
    for j in moment_orders:
        if accepted:
            mean = sums[j] / accepted
            var = max(sq_sums[j] / accepted - mean**2, 0.0)
            se = math.sqrt(var / accepted)
        else:
            mean, se = math.nan, math.nan
        moments.append((j, mean, se))
    return EnsembleResult(
        table.outcomes, table.edges, counts, accepted, cfg.n_shots, tuple(moments)
    )
