"""Second-order expansions and interpolation formulas.

Every statistic here is a ratio of two polynomials in the coupling strength,
both expanded to second order, so the results stay bounded through the
nearly-orthogonal pre/post-selection regime where the canonical weak value
diverges. Three variants are exposed:

* ``full2``   - numerator and denominator keep all second-order weak values
                (alpha11 and alpha2);
* ``interp``  - alpha2 dropped (it is subleading against alpha11 exactly
                where second order matters), denominator N2';
* ``ab``      - rescaled by alpha0 so only the canonical pair (A_w, B_w)
                enters, denominator N2''; refuses orthogonal selections, and
                falls back to retaining C_w when the q.o.q average vanishes.

When the coupling-times-offset lam*q* is large, weak values are evaluated at
the shifted expansion point and probe weights are centered on q*; for a
Gaussian probe q* is the mean position.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BeyondValidity, OrthogonalStates, UnsupportedFunction, ZeroQVariance
from .exact import MeasurementSetup, ProbeObservable, grid_probe
from .hilbert import DensityMatrix
from .probe import (
    GaussianProbe,
    GridProbe,
    ProbeState,
    _gauss_moment,
    ordered_average,
    p_moment,
    q_moment,
    q_star,
    quasi_average,
)
from .weakvalues import ORTH_TOL, normal_weak_value, weak_value_table

LARGE_QSTAR_THRESHOLD = 0.2
N_SERIES_MAX = 12


class ExpansionVariant(str, Enum):
    FULL2 = "full2"
    INTERP = "interp"
    AB = "ab"


def _variant(v) -> ExpansionVariant:
    return ExpansionVariant(v)


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    order_used: int
    validity_n_star: float


# ---------------------------------------------------------------------------
# expansion context: shifted weak values and centered probe weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Context:
    setup: MeasurementSetup
    rho_i_eff: DensityMatrix
    center: float
    large: bool

    def alphas(self, z: float = 0.0):
        s = self.setup
        a = s.observable
        a0 = normal_weak_value(self.rho_i_eff, s.rho_f, a, 0, 0, z)
        a1 = normal_weak_value(self.rho_i_eff, s.rho_f, a, 1, 0, z)
        a11 = normal_weak_value(self.rho_i_eff, s.rho_f, a, 1, 1, z)
        a2 = normal_weak_value(self.rho_i_eff, s.rho_f, a, 2, 0, z)
        return a0, a1, a11, a2

    def q_mean(self) -> float:
        return q_moment(self.setup.probe, 1) - self.center

    def q_second(self) -> float:
        c = self.center
        if c == 0.0:
            return q_moment(self.setup.probe, 2)
        return q_moment(self.setup.probe, 2) - 2 * c * q_moment(self.setup.probe, 1) + c**2


def _context(s: MeasurementSetup, qstar_threshold: float = LARGE_QSTAR_THRESHOLD) -> _Context:
    qs = q_star(s.probe)
    large = abs(s.lam) * abs(qs) * s.observable.spectral_radius > qstar_threshold
    if large:
        u = s.observable.expi(s.lam * qs)
        rho_i_eff = DensityMatrix(u @ s.rho_i.mat @ u.conj().T)
        return _Context(s, rho_i_eff, qs, True)
    return _Context(s, s.rho_i, 0.0, False)


def _denominator(ctx: _Context, variant: ExpansionVariant) -> float:
    lam = ctx.setup.lam
    a0, a1, a11, a2 = ctx.alphas()
    qb, q2 = ctx.q_mean(), ctx.q_second()
    if variant is ExpansionVariant.FULL2:
        return float(a0.real + 2 * lam * qb * a1.imag + lam**2 * q2 * (a11.real - a2.real))
    n2p = float(a0.real + 2 * lam * qb * a1.imag + lam**2 * q2 * a11.real)
    if variant is ExpansionVariant.INTERP:
        return n2p
    if abs(a0) < ORTH_TOL:
        raise OrthogonalStates(
            "N2'' undefined for orthogonal selections; use full2 or interp"
        )
    return n2p / a0.real


def denominators(s: MeasurementSetup):
    """(N2, N2', N2''). N2'' requires non-orthogonal selections."""
    ctx = _context(s)
    n2 = _denominator(ctx, ExpansionVariant.FULL2)
    n2p = _denominator(ctx, ExpansionVariant.INTERP)
    n2pp = _denominator(ctx, ExpansionVariant.AB)
    return n2, n2p, n2pp


# ---------------------------------------------------------------------------
# probe-weight averages Tr{(q-c)^l E (q-c)^m rho0}
# ---------------------------------------------------------------------------


def _ordered_centered(probe: ProbeState, l: int, etag, m: int, c: float) -> complex:
    if c == 0.0:
        return ordered_average(probe, l, etag, m)
    total = 0.0 + 0.0j
    for r in range(l + 1):
        for t in range(m + 1):
            total += (
                math.comb(l, r)
                * math.comb(m, t)
                * (-c) ** (l - r + m - t)
                * ordered_average(probe, r, etag, t)
            )
    return total


def _quasi_centered(probe: ProbeState, f, j: int, c: float) -> complex:
    if c == 0.0:
        return quasi_average(probe, f, j)
    total = 0.0 + 0.0j
    for k in range(j + 1):
        total += math.comb(j, k) * (-c) ** (j - k) * quasi_average(probe, f, k)
    return total


def _op_average_gaussian(g: GaussianProbe, l: int, otag: str, m: int, c: float) -> complex:
    """Closed forms for Tr{(q-c)^l o (q-c)^m rho0}, o in {q, p}."""
    mom = lambda n: _gauss_moment(g.q_bar - c, g.delta_q**2, n) if n >= 0 else 0.0
    if otag == "op_q":
        return complex(mom(l + m + 1) + c * mom(l + m))
    # op_p: (q-c)^l p (q-c)^m = (q-c)^{l+m} p - i m (q-c)^{l+m-1};
    # Tr{(q-c)^n p rho0} = (i n / 2) E[(q-c)^{n-1}] for the zero-mean-p Gaussian
    n = l + m
    return complex(0.5j * (l - m) * mom(n - 1))


def _op_average(probe: ProbeState, l: int, otag, m: int, c: float) -> complex:
    if isinstance(probe, GaussianProbe) and isinstance(otag, str):
        return _op_average_gaussian(probe, l, otag, m, c)
    if isinstance(otag, str):
        etag = {"op_q": None, "op_p": ("p_pow", 1)}[otag]
        if etag is None:
            # q operator on the grid: fold into the weight powers
            val = _ordered_centered(probe, l + m + 1, ("one",), 0, c)
            return val + c * _ordered_centered(probe, l + m, ("one",), 0, c)
        return _ordered_centered(probe, l, etag, m, c)
    return _ordered_centered(probe, l, otag, m, c)


def _obs_tags(s: MeasurementSetup, obs: ProbeObservable, chi: float | None):
    """(wave tag, operator tag, probe to use for averages)."""
    probe = s.probe
    if obs.kind == "q":
        return ("exp_q", chi), "op_q", probe
    if obs.kind == "p":
        return ("exp_p", chi), "op_p", probe
    if isinstance(probe, GaussianProbe):
        probe = grid_probe(s)
    wave = None
    if chi is not None:
        w, v = np.linalg.eigh(obs.matrix)
        wave = ("matrix", (v * np.exp(1j * chi * w)) @ v.conj().T)
    return wave, ("matrix", obs.matrix), probe


# ---------------------------------------------------------------------------
# characteristic functions
# ---------------------------------------------------------------------------


def _charfunc_second_order(ctx: _Context, etag, probe, variant: ExpansionVariant) -> complex:
    lam = ctx.setup.lam
    c = ctx.center
    a0, a1, a11, a2 = ctx.alphas()
    t00 = _ordered_centered(probe, 0, etag, 0, c)
    t10 = _ordered_centered(probe, 1, etag, 0, c)
    t01 = _ordered_centered(probe, 0, etag, 1, c)
    t11 = _ordered_centered(probe, 1, etag, 1, c)
    first = lam * (-1j * (t10 - t01) * a1.real + (t10 + t01) * a1.imag)
    if variant is ExpansionVariant.FULL2:
        t20 = _ordered_centered(probe, 2, etag, 0, c)
        t02 = _ordered_centered(probe, 0, etag, 2, c)
        second = 0.5 * lam**2 * (
            2 * t11 * a11.real - (t20 + t02) * a2.real - 1j * (t20 - t02) * a2.imag
        )
        num = t00 * a0.real + first + second
        return num / _denominator(ctx, variant)
    num = t00 * a0.real + first + lam**2 * t11 * a11.real
    den = _denominator(ctx, ExpansionVariant.INTERP)
    if variant is ExpansionVariant.AB and abs(a0) < ORTH_TOL:
        raise OrthogonalStates("AB-only form undefined for orthogonal selections")
    return num / den


def charfunc_q(s: MeasurementSetup, chi: float, variant="full2") -> complex:
    """Second-order conditional characteristic function of the coupling
    variable q; exactly 1 at chi = 0 for every variant."""
    v = _variant(variant)
    ctx = _context(s)
    return _charfunc_second_order(ctx, ("exp_q", chi), s.probe, v)


def charfunc_p(s: MeasurementSetup, chi: float, form: str = "resummed") -> complex:
    """Conditional characteristic function of the readout p.

    ``resummed`` evaluates weak values along the shifted family alpha(lam
    chi/2); Fourier transformed it captures the readout shifts p -> p - lam a.
    ``strict2`` is the consistent second-order truncation and is moment
    generating only up to the validity order.
    """
    ctx = _context(s)
    if form == "strict2":
        return _charfunc_second_order(ctx, ("exp_p", chi), s.probe, ExpansionVariant.FULL2)
    if form != "resummed":
        raise ValueError(f"form must be 'resummed' or 'strict2', got {form!r}")
    lam = ctx.setup.lam
    c = ctx.center
    a0z, a1z, a11z, a2z = ctx.alphas(z=lam * chi / 2.0)
    f = ("exp_p", chi)
    w0 = _quasi_centered(s.probe, f, 0, c)
    w1 = _quasi_centered(s.probe, f, 1, c)
    w2 = _quasi_centered(s.probe, f, 2, c)
    num = w0 * a0z + 2 * lam * w1 * a1z.imag + lam**2 * w2 * (a11z - a2z.real)
    return num / _denominator(ctx, ExpansionVariant.FULL2)


def charfunc_obs(s: MeasurementSetup, obs: ProbeObservable, chi: float) -> complex:
    """Second-order characteristic function for any probe observable.

    Reduces identically to ``charfunc_q(..., 'full2')`` for the position
    observable and to ``charfunc_p(..., 'strict2')`` for the momentum one.
    """
    ctx = _context(s)
    wave, _, probe = _obs_tags(s, obs, chi)
    return _charfunc_second_order(ctx, wave, probe, ExpansionVariant.FULL2)


# ---------------------------------------------------------------------------
# expectation values and moments
# ---------------------------------------------------------------------------


def expectation_obs(s: MeasurementSetup, obs: ProbeObservable, variant="full2") -> float:
    """Second-order expectation of a probe observable after post-selection."""
    v = _variant(variant)
    ctx = _context(s)
    lam = ctx.setup.lam
    c = ctx.center
    _, otag, probe = _obs_tags(s, obs, None)
    a0, a1, a11, a2 = ctx.alphas()
    t00 = _op_average(probe, 0, otag, 0, c)
    t10 = _op_average(probe, 1, otag, 0, c)
    t01 = _op_average(probe, 0, otag, 1, c)
    t11 = _op_average(probe, 1, otag, 1, c)
    t20 = _op_average(probe, 2, otag, 0, c)
    t02 = _op_average(probe, 0, otag, 2, c)
    first = lam * (-1j * (t10 - t01) * a1.real + (t10 + t01) * a1.imag)
    c_terms = -0.5 * lam**2 * ((t20 + t02) * a2.real + 1j * (t20 - t02) * a2.imag)
    if v is ExpansionVariant.FULL2:
        num = t00 * a0.real + first + lam**2 * t11 * a11.real + c_terms
        return float((num / _denominator(ctx, v)).real)
    if v is ExpansionVariant.INTERP:
        num = t00 * a0.real + first + lam**2 * t11 * a11.real
        return float((num / _denominator(ctx, v)).real)
    if abs(a0) < ORTH_TOL:
        raise OrthogonalStates("AB-only form undefined for orthogonal selections")
    scale = max(abs(t00), abs(t11), abs(t20), abs(t02), 1.0)
    num = t00 * a0.real + first + lam**2 * t11 * a11.real
    if abs(t11) <= 1e-12 * scale:
        # first nonvanishing second-order weight is the alpha2 one: keep C_w
        num = num + c_terms
    return float((num / (a0.real * _denominator(ctx, ExpansionVariant.AB))).real)


def validity_order(s: MeasurementSetup) -> float:
    """Moment order n* ~ (DeltaP / lam)^2 up to which strict second-order
    moment formulas are trustworthy (Gaussian probe, unit spectral radius
    after rescaling)."""
    if not isinstance(s.probe, GaussianProbe):
        raise UnsupportedFunction("n* has a closed form only for Gaussian probes")
    lam_eff = abs(s.lam) * s.observable.spectral_radius
    if lam_eff == 0.0:
        return math.inf
    return (s.probe.delta_p / lam_eff) ** 2


def moment_p_gaussian(s: MeasurementSetup, j: int, variant="full2") -> MomentEstimate:
    """Second-order readout moment <p^j>_f for a Gaussian probe."""
    if not isinstance(s.probe, GaussianProbe):
        raise UnsupportedFunction("moment_p_gaussian needs a Gaussian probe")
    v = _variant(variant)
    nstar = validity_order(s)
    if j > nstar:
        raise BeyondValidity(f"moment order {j} exceeds n* = {nstar:.1f}")
    ctx = _context(s)
    lam = s.lam
    a0, a1, a11, a2 = ctx.alphas()
    qb = ctx.q_mean()
    den = _denominator(ctx, v)
    if v is ExpansionVariant.AB:
        if abs(a0) < ORTH_TOL:
            raise OrthogonalStates("AB-only moments undefined for orthogonal selections")
        a1, a11, a2 = a1 / a0, a11 / a0, a2 / a0
        a0 = 1.0 + 0.0j
    if j % 2 == 0:
        coef = {
            ExpansionVariant.FULL2: a11.real + a2.real,
            ExpansionVariant.INTERP: a11.real,
            ExpansionVariant.AB: a11.real,
        }[v]
        value = p_moment(s.probe, j) + (
            0.5 * lam**2 * math.comb(j, 2) * p_moment(s.probe, j - 2) * coef / den
            if j >= 2
            else 0.0
        )
    else:
        lead = j * p_moment(s.probe, j - 1) * a1.real
        extra = lam * j * qb * p_moment(s.probe, j - 1) * a2.imag if v is ExpansionVariant.FULL2 else 0.0
        value = lam * (lead + extra) / den
    return MomentEstimate(float(value), 2, float(nstar))


def moment_p_general(s: MeasurementSetup, j: int) -> MomentEstimate:
    """Second-order readout moment for any probe state, built from
    quasi-averages; reduces exactly to the Gaussian formulas when the Wigner
    function factorizes."""
    ctx = _context(s)
    lam = s.lam
    c = ctx.center
    probe = s.probe
    a0, a1, a11, a2 = ctx.alphas()
    pj = p_moment(probe, j)
    pjm1 = p_moment(probe, j - 1) if j >= 1 else 0.0
    pjm2 = p_moment(probe, j - 2) if j >= 2 else 0.0
    qpj = _quasi_centered(probe, ("p_pow", j), 1, c)
    q2pj = _quasi_centered(probe, ("p_pow", j), 2, c)
    qpjm1 = _quasi_centered(probe, ("p_pow", j - 1), 1, c) if j >= 1 else 0.0
    num = (
        pj * a0.real
        + lam * (j * pjm1 * a1.real + 2 * qpj.real * a1.imag)
        + lam**2
        * (
            q2pj.real * (a11.real - a2.real)
            + 0.25 * j * (j - 1) * pjm2 * (a11.real + a2.real)
            + j * qpjm1.real * a2.imag
        )
    )
    den = _denominator(ctx, ExpansionVariant.FULL2)
    if isinstance(probe, GaussianProbe):
        nstar = validity_order(s)
    else:
        var = max(p_moment(probe, 2) - p_moment(probe, 1) ** 2, 0.0)
        lam_eff = abs(lam) * s.observable.spectral_radius
        nstar = var / lam_eff**2 if lam_eff else math.inf
    if j > nstar:
        raise BeyondValidity(f"moment order {j} exceeds n* = {nstar:.1f}")
    return MomentEstimate(float(num / den), 2, float(nstar))


def validity_ratios(probe: ProbeState, j: int, k: int):
    """The three term-size ratios governing where the second-order moment
    expansion stops being trustworthy for a general probe: order-k versus
    order-2 terms weighted by 1, q, and q^2."""
    if k < 2 or k > j:
        raise ValueError("need 2 <= k <= j")
    base = math.comb(j, 2)
    out = []
    for weight in (None, 1, 2):
        if weight is None:
            hi = p_moment(probe, j - k)
            lo = p_moment(probe, j - 2)
        else:
            hi = _quasi_centered(probe, ("p_pow", j - k), weight, 0.0).real
            lo = _quasi_centered(probe, ("p_pow", j - 2), weight, 0.0).real
        out.append(math.comb(j, k) * hi / (base * lo) if lo else math.inf)
    return tuple(out)


def n_series(s: MeasurementSetup, n_max: int):
    """Partial sums of the series expansion of the post-selection probability
    N in powers of the coupling; converges to the exact N in the weak regime."""
    if n_max > N_SERIES_MAX:
        raise BeyondValidity(f"series orders above {N_SERIES_MAX} are not supported")
    table = weak_value_table(s.rho_i, s.rho_f, s.observable, n_max)
    sums = []
    total = 0.0
    for n in range(n_max + 1):
        inner = sum(
            (-1) ** jj * math.comb(n, jj) * table[jj, n - jj] for jj in range(n + 1)
        )
        term = (1j**n) * s.lam**n * q_moment(s.probe, n) / math.factorial(n) * inner
        if abs(term.imag) > 1e-9 * max(1.0, abs(term.real)):
            raise ValueError(f"series term {n} unexpectedly complex: {term}")
        total += term.real
        sums.append(total)
    return sums


def orthogonal_limit(probe: ProbeState, obs: ProbeObservable, chi: float) -> complex:
    """Universal orthogonal-selection characteristic function
    <q e^{i chi o} q>_0 / <q^2>_0; independent of the system and its
    observable."""
    q2 = q_moment(probe, 2)
    if q2 <= 1e-14:
        raise ZeroQVariance("probe has no coupling-variable variance")
    if obs.kind == "q":
        etag = ("exp_q", chi)
    elif obs.kind == "p":
        etag = ("exp_p", chi)
    else:
        if isinstance(probe, GaussianProbe):
            raise UnsupportedFunction("matrix observables need a grid probe")
        w, v = np.linalg.eigh(obs.matrix)
        etag = ("matrix", (v * np.exp(1j * chi * w)) @ v.conj().T)
    return complex(ordered_average(probe, 1, etag, 1) / q2)
