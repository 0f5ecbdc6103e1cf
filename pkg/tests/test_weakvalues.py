import math

import numpy as np
import pytest

from weakstats.errors import DegenerateSubspace, DimMismatch, OrthogonalStates
from weakstats.hilbert import pure_state, spectral_decompose, validate_density
from weakstats.weakvalues import (
    canonical_values,
    normal_weak_value,
    weak_charfunc,
    weak_value_table,
)

from conftest import random_density, random_observable, random_pure

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0 + 0j, -1.0])
UP = pure_state([1.0, 0.0])


def coplanar_spin(theta):
    """Preselection along z, postselection at angle theta, measuring sigma_x."""
    rho_i = validate_density(0.5 * (np.eye(2) + SZ))
    nf = np.array([math.sin(theta), 0.0, math.cos(theta)])
    rho_f = validate_density(0.5 * (np.eye(2) + nf[0] * SX + nf[2] * SZ))
    return rho_i, rho_f, spectral_decompose(SX)


def pure_pair(theta, dim=3, seed=5):
    """Pure pre/post pair with overlap angle theta in a generic direction."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v /= np.linalg.norm(v)
    w = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    w -= (v.conj() @ w) * v
    w /= np.linalg.norm(w)
    f = math.cos(theta / 2) * v + math.sin(theta / 2) * w
    return pure_state(v), pure_state(f)


class TestWeakCharfunc:
    def test_eigenstate_phase(self):
        obs = spectral_decompose(SZ)
        for mu, nu in ((0.3, 0.1), (1.0, -2.0)):
            val = weak_charfunc(UP, UP, obs, mu, nu)
            assert val == pytest.approx(np.exp(1j * (mu - nu)), abs=1e-12)

    def test_origin_is_overlap(self):
        rho_i, rho_f, obs = coplanar_spin(math.pi / 2)
        assert weak_charfunc(rho_i, rho_f, obs, 0.0, 0.0) == pytest.approx(0.5)

    def test_conjugation_symmetry(self, rng):
        for _ in range(10):
            rho_i = random_density(rng, 3)
            rho_f = random_density(rng, 3)
            obs = random_observable(rng, 3)
            mu, nu = rng.uniform(-2, 2, size=2)
            z1 = weak_charfunc(rho_i, rho_f, obs, mu, nu)
            z2 = weak_charfunc(rho_i, rho_f, obs, nu, mu)
            assert abs(z1 - np.conj(z2)) < 1e-12

    def test_equal_arguments_real(self, rng):
        rho_i = random_density(rng, 4)
        rho_f = random_density(rng, 4)
        obs = random_observable(rng, 4)
        assert abs(weak_charfunc(rho_i, rho_f, obs, 0.7, 0.7).imag) < 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            weak_charfunc(UP, UP, spectral_decompose(np.eye(3)), 0.0, 0.0)


class TestNormalWeakValue:
    def test_reduces_to_overlap(self):
        rho_i, rho_f, obs = coplanar_spin(0.4)
        a00 = normal_weak_value(rho_i, rho_f, obs, 0, 0)
        assert a00 == pytest.approx(np.trace(rho_f.mat @ rho_i.mat).real)

    def test_coplanar_right_angle(self):
        # n.n_i = 0, n_i x n_f along y, n along x: alpha1 = sin(theta)/2
        rho_i, rho_f, obs = coplanar_spin(math.pi / 2)
        val = normal_weak_value(rho_i, rho_f, obs, 1, 0)
        assert val == pytest.approx(0.5, abs=1e-12)

    def test_orthogonal_alpha11(self):
        rho_i, rho_f, obs = coplanar_spin(math.pi)
        assert normal_weak_value(rho_i, rho_f, obs, 1, 1) == pytest.approx(1.0, abs=1e-12)
        assert normal_weak_value(rho_i, rho_f, obs, 0, 0) == pytest.approx(0.0, abs=1e-12)

    def test_derivative_consistency(self, rng):
        # alpha_{j,k} = i^j (-i)^k d^k/dmu d^j/dnu Z^w at the expansion point
        rho_i = random_density(rng, 3)
        rho_f = random_density(rng, 3)
        obs = random_observable(rng, 3)
        h = 1e-4
        for (j, k), z, lq in (
            ((1, 0), 0.0, 0.0),
            ((0, 1), 0.0, 0.0),
            ((1, 1), 0.0, 0.0),
            ((2, 0), 0.0, 0.0),
            ((1, 0), 0.3, 0.2),
        ):
            mu0, nu0 = z + lq, -z + lq
            grid = np.zeros((3, 3), dtype=complex)
            for a in (-1, 0, 1):
                for b in (-1, 0, 1):
                    grid[a + 1, b + 1] = weak_charfunc(
                        rho_i, rho_f, obs, mu0 + a * h, nu0 + b * h
                    )
            d = grid
            if (j, k) == (1, 0):
                fd = (d[1, 2] - d[1, 0]) / (2 * h)  # d/dnu
                fd = 1j * fd
            elif (j, k) == (0, 1):
                fd = (d[2, 1] - d[0, 1]) / (2 * h)  # d/dmu
                fd = -1j * fd
            elif (j, k) == (1, 1):
                fd = (d[2, 2] - d[2, 0] - d[0, 2] + d[0, 0]) / (4 * h**2)
                fd = 1j * (-1j) * fd
            else:  # (2, 0)
                fd = (d[1, 2] - 2 * d[1, 1] + d[1, 0]) / h**2
                fd = 1j * 1j * fd
            exact = normal_weak_value(rho_i, rho_f, obs, j, k, z, lq)
            assert abs(fd - exact) < 1e-6 * max(1.0, abs(exact))

    def test_hermitian_symmetry(self, rng):
        for _ in range(20):
            rho_i = random_density(rng, 3)
            rho_f = random_density(rng, 3)
            obs = random_observable(rng, 3)
            t = weak_value_table(rho_i, rho_f, obs, 2)
            for j in range(3):
                for k in range(3):
                    assert abs(t[k, j] - np.conj(t[j, k])) < 1e-12
                assert abs(t[j, j].imag) < 1e-12

    def test_nopps_limit_generic_observable(self):
        # non-idempotent spectrum: alpha0 and alpha_{j,0} vanish while
        # alpha11 stays finite
        obs = spectral_decompose(np.diag([0.3, 1.1, -0.8]))
        vals = []
        for eps in (1e-2, 1e-3, 1e-4):
            rho_i, rho_f = pure_pair(math.pi - eps)
            a0 = abs(normal_weak_value(rho_i, rho_f, obs, 0, 0))
            a1 = abs(normal_weak_value(rho_i, rho_f, obs, 1, 0))
            a11 = normal_weak_value(rho_i, rho_f, obs, 1, 1).real
            vals.append((a0, a1, a11))
        (a0a, a1a, a11a), (a0b, a1b, _), (a0c, a1c, a11c) = vals
        assert a0a > a0b > a0c
        assert a1a > a1b > a1c
        assert a0c < 1e-7 and a1c < 1e-3
        # alpha11 tends to a finite limit instead
        assert a11c > 1e-3
        assert a11c == pytest.approx(a11a, rel=0.05)

    def test_projector_exception(self):
        # projection observable with selections inside the projected
        # subspace: alpha0 / alpha_{0,1} -> 1 all the way to orthogonality
        obs = spectral_decompose(np.diag([1.0, 1.0, 0.0]))
        for theta in (2.0, 3.0, math.pi - 1e-4):
            rng = np.random.default_rng(11)
            v = np.zeros(3, dtype=complex)
            v[:2] = rng.normal(size=2) + 1j * rng.normal(size=2)
            v /= np.linalg.norm(v)
            w = np.array([-np.conj(v[1]), np.conj(v[0]), 0.0])
            f = math.cos(theta / 2) * v + math.sin(theta / 2) * w
            rho_i, rho_f = pure_state(v), pure_state(f)
            a0 = normal_weak_value(rho_i, rho_f, obs, 0, 0)
            a01 = normal_weak_value(rho_i, rho_f, obs, 0, 1)
            assert a01 == pytest.approx(a0, abs=1e-13)


class TestCanonicalValues:
    def test_eigenstate_reproduction(self):
        obs = spectral_decompose(SZ)
        cv = canonical_values(UP, UP, obs)
        assert cv.A_w == pytest.approx(1.0)
        assert cv.B_w == pytest.approx(1.0)
        assert cv.C_w == pytest.approx(1.0)

    def test_right_angle_amplification(self):
        rho_i, rho_f, obs = coplanar_spin(math.pi / 2)
        cv = canonical_values(rho_i, rho_f, obs)
        assert cv.A_w == pytest.approx(math.tan(math.pi / 4), abs=1e-12)

    def test_pure_equality(self, rng):
        # B_w = |A_w|^2 for pure selections; resample near-orthogonal draws
        # where the floating-point identity loses digits
        count = 0
        while count < 200:
            rho_i = random_pure(rng, 3)
            rho_f = random_pure(rng, 3)
            if np.trace(rho_f.mat @ rho_i.mat).real < 0.05:
                continue
            obs = random_observable(rng, 3)
            cv = canonical_values(rho_i, rho_f, obs)
            assert abs(cv.B_w - abs(cv.A_w) ** 2) < 1e-10
            count += 1

    def test_mixed_inequality(self, rng):
        for _ in range(200):
            rho_i = random_density(rng, 3)
            rho_f = random_density(rng, 3)
            obs = random_observable(rng, 3)
            cv = canonical_values(rho_i, rho_f, obs)
            assert cv.B_w >= abs(cv.A_w) ** 2 - 1e-10

    def test_orthogonal_refused(self):
        rho_i, rho_f, obs = coplanar_spin(math.pi)
        with pytest.raises(OrthogonalStates):
            canonical_values(rho_i, rho_f, obs)

    def test_degenerate_subspace_reported(self):
        # selections inside the degenerate eigenspace of a projector: the
        # 0/0 case is flagged distinctly
        obs = spectral_decompose(np.diag([1.0, 1.0, 0.0]))
        rho_i = pure_state([1.0, 0.0, 0.0])
        rho_f = pure_state([0.0, 1.0, 0.0])
        with pytest.raises(DegenerateSubspace):
            canonical_values(rho_i, rho_f, obs)
