import math

import numpy as np
import pytest

from weakstats.errors import InvalidProbe, SpanTooSmall, UnsupportedFunction
from weakstats.probe import (
    GaussianProbe,
    GridProbe,
    initial_charfunc,
    log_p_moment,
    mixture_to_grid,
    p_moment,
    p_representation,
    q_moment,
    q_representation,
    quasi_average,
    to_grid,
)

PROBE = GaussianProbe(q_bar=0.0, delta_q=1.0, delta_p=0.5)


def normal_pdf(x, mean, sigma):
    return np.exp(-((x - mean) ** 2) / (2 * sigma**2)) / (math.sqrt(2 * math.pi) * sigma)


class TestGaussianProbe:
    def test_coherence_scale(self):
        assert PROBE.coherence_scale == pytest.approx(0.5)

    def test_heisenberg_violation_rejected(self):
        with pytest.raises(InvalidProbe):
            GaussianProbe(0.0, 1.0, 0.4)  # delta_q * delta_p < 1/2

    def test_nonpositive_spread_rejected(self):
        with pytest.raises(InvalidProbe):
            GaussianProbe(0.0, -1.0, 0.5)


class TestToGrid:
    def test_diagonal_is_position_marginal(self):
        g = to_grid(GaussianProbe(0.0, 1.0, 0.5), n_q=256, span=16.0)
        expected = normal_pdf(g.x, 0.0, 1.0)
        assert np.max(np.abs(g.marginal() - expected)) < 1e-10
        assert abs(np.sum(g.kernel.diagonal().real) - 1.0) < 1e-8

    def test_offdiagonal_profile(self):
        # Fourier transform of the Gaussian p-marginal: the kernel factorizes
        # as N(mid; qbar, dQ^2) * exp(-dP^2 (q - q')^2 / 2)
        p = GaussianProbe(0.0, 1.0, 0.5)
        g = to_grid(p, n_q=256, span=16.0)
        i, j = 100, 140
        expected = normal_pdf((g.x[i] + g.x[j]) / 2, 0.0, 1.0) * math.exp(
            -0.5 * 0.5**2 * (g.x[i] - g.x[j]) ** 2
        )
        assert g.kernel[i, j].real * (1 / g.dx) == pytest.approx(expected, rel=1e-12)

    def test_translated_probe_peaks_at_mean(self):
        g = to_grid(GaussianProbe(3.0, 1.0, 0.5), n_q=256, span=16.0)
        assert g.x[np.argmax(g.marginal())] == pytest.approx(3.0, abs=g.dx)

    def test_small_span_rejected(self):
        with pytest.raises(SpanTooSmall):
            to_grid(PROBE, n_q=256, span=6.0)

    def test_bad_n_q_rejected(self):
        with pytest.raises(ValueError):
            to_grid(PROBE, n_q=100)


class TestPRepresentation:
    def test_momentum_marginal(self):
        g = p_representation(to_grid(PROBE))
        expected = normal_pdf(g.x, 0.0, 0.5)
        sel = np.abs(g.x) < 4.0
        assert np.max(np.abs(g.marginal()[sel] - expected[sel])) < 1e-10

    def test_squeezed_probe_broad_in_p(self):
        dq = 0.25
        g = p_representation(to_grid(GaussianProbe(0.0, dq, 4.0)))
        var = float(np.sum(g.x**2 * g.kernel.diagonal().real))
        assert var >= 1.0 / (4.0 * dq**2) - 1e-9

    def test_round_trip_identity(self, rng):
        # random PSD mixture of smooth localized modes, so both
        # representations decay at the grid edges
        n = 128
        x = (np.arange(n) - n // 2) * (24.0 / n)
        modes = np.array([x**k * np.exp(-(x**2) / 4.0) * np.exp(0.2j * k * x) for k in range(4)])
        modes /= np.linalg.norm(modes, axis=1, keepdims=True)
        w = rng.uniform(0.1, 1.0, size=4)
        w /= w.sum()
        m = sum(wk * np.outer(mk, mk.conj()) for wk, mk in zip(w, modes))
        g = GridProbe(x, m)
        back = q_representation(p_representation(g), g.x)
        assert np.max(np.abs(back.kernel - g.kernel)) < 1e-10


class TestQuasiAverage:
    def test_mean_of_q(self):
        assert quasi_average(GaussianProbe(2.0, 1.0, 0.5), None, 1) == pytest.approx(2.0)

    def test_odd_p_moment_vanishes(self):
        assert quasi_average(PROBE, ("p_pow", 1), 0) == pytest.approx(0.0, abs=1e-15)

    def test_grid_oracle_for_wave_weighted(self):
        # the grid quadrature is the independent oracle for the factorized form
        chi = 0.7
        for qb in (0.0, 1.3):
            p = GaussianProbe(qb, 1.0, 0.75)
            g = to_grid(p, n_q=512)
            analytic = quasi_average(p, ("exp_p", chi), 2)
            numeric = quasi_average(g, ("exp_p", chi), 2)
            assert abs(analytic - numeric) < 1e-6

    def test_matrix_function_needs_grid(self):
        with pytest.raises(UnsupportedFunction):
            quasi_average(PROBE, np.eye(4), 1)

    def test_weight_power_capped(self):
        with pytest.raises(UnsupportedFunction):
            quasi_average(PROBE, None, 9)


class TestInitialCharfunc:
    def test_normalization_point(self):
        assert initial_charfunc(PROBE, "q", 0.0, 0) == pytest.approx(1.0)
        assert initial_charfunc(PROBE, "p", 0.0, 0) == pytest.approx(1.0)

    def test_gaussian_momentum_wave(self):
        chi = 1.3
        val = initial_charfunc(PROBE, "p", chi, 0)
        assert val == pytest.approx(math.exp(-0.5 * chi**2 * PROBE.delta_p**2), rel=1e-12)

    def test_weighted_position_wave_against_quadrature(self):
        chi = 0.3
        p = GaussianProbe(0.4, 1.0, 0.6)
        analytic = initial_charfunc(p, "q", chi, 1)
        x = np.linspace(-12, 12.8, 4096)
        numeric = np.trapezoid(x * np.exp(1j * chi * x) * normal_pdf(x, 0.4, 1.0), x)
        assert abs(analytic - numeric) < 1e-6

    def test_modulus_bounded(self, rng):
        for _ in range(20):
            chi = rng.uniform(-5, 5)
            which = "q" if rng.random() < 0.5 else "p"
            assert abs(initial_charfunc(PROBE, which, chi, 0)) <= 1.0 + 1e-12


class TestMoments:
    def test_even_moment_recursion(self):
        for j in (2, 4, 6, 8):
            lhs = p_moment(PROBE, j)
            rhs = (j - 1) * PROBE.delta_p**2 * p_moment(PROBE, j - 2)
            assert lhs == pytest.approx(rhs, rel=1e-12)
        assert p_moment(PROBE, 3) == 0.0

    def test_log_moment_large_order(self):
        # (j-1)!! stays exact in log space; check against the recursion
        logm = log_p_moment(PROBE, 400)
        step = logm - log_p_moment(PROBE, 398)
        assert step == pytest.approx(math.log(399 * PROBE.delta_p**2), rel=1e-12)

    def test_gaussian_grid_agreement(self):
        p = GaussianProbe(0.7, 1.2, 0.6)
        g = to_grid(p, n_q=512)
        for n in range(5):
            assert q_moment(p, n) == pytest.approx(q_moment(g, n), abs=1e-8)
        # high p powers amplify DFT rounding noise in the far tails, so the
        # contract tolerance is 1e-6
        for j in range(0, 7, 2):
            assert p_moment(p, j) == pytest.approx(p_moment(g, j), abs=1e-6)


class TestMixture:
    def test_mixture_marginal(self):
        comps = [GaussianProbe(-1.0, 0.8, 0.8), GaussianProbe(1.5, 1.0, 0.6)]
        g = mixture_to_grid([0.3, 0.7], comps)
        expected = 0.3 * normal_pdf(g.x, -1.0, 0.8) + 0.7 * normal_pdf(g.x, 1.5, 1.0)
        assert np.max(np.abs(g.marginal() - expected)) < 1e-10

    def test_weights_validated(self):
        with pytest.raises(InvalidProbe):
            mixture_to_grid([0.5, 0.6], [PROBE, PROBE])
