import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghconj import kernels
from ghconj.localize import (CutoffProfile, certified_cutoff, cutoff_bounds, globalize, radial_retraction,
                             retraction_derivative_bound)
from ghconj.shadowing import alpha_hat, default_alpha, require_hypotheses, rho
from ghconj.systems import HyperbolicLinearMap, HypothesisError, MapSystem, Perturbation

from conftest import SWAP

DELTA = 0.1
QUAD = [[0.5, 0.0], [0.0, 0.5]]


def local_map(coeffs=QUAD):
    return MapSystem(HyperbolicLinearMap([[2.0]], [[0.5]]), Perturbation.quadratic(coeffs))


@pytest.fixture(scope="module")
def glob():
    return globalize(local_map(), 0.1, DELTA)


class TestProfile:
    def test_pieces(self):
        p = CutoffProfile(DELTA)
        assert p.plateau == pytest.approx(0.075)
        assert p.value(0.03) == 0.03 and p.slope(0.03) == 1.0
        assert p.value(0.2) == pytest.approx(0.075) and p.slope(0.2) == 0.0

    def test_c1_joins(self):
        p = CutoffProfile(DELTA)
        for r in (0.05, 0.1):
            assert p.value(r - 1e-12) == pytest.approx(p.value(r + 1e-12), abs=1e-10)
            assert p.slope(r - 1e-9) == pytest.approx(p.slope(r + 1e-9), abs=1e-6)

    def test_slope_matches_fd(self):
        p = CutoffProfile(DELTA)
        for r in np.linspace(0.051, 0.099, 17):
            fd = (p.value(r + 1e-7) - p.value(r - 1e-7)) / 2e-7
            assert p.slope(r) == pytest.approx(fd, abs=1e-6)

    def test_invalid(self):
        with pytest.raises(ValueError):
            CutoffProfile(DELTA, 0.12)
        with pytest.raises(ValueError):
            CutoffProfile(DELTA, 0.09)  # slope exceeds 1
        with pytest.raises(ValueError):
            CutoffProfile(0.0)

    @given(st.floats(0, 1.0))
    def test_bounded_by_identity_and_plateau(self, r):
        p = CutoffProfile(DELTA)
        assert p.value(r) <= min(r, p.plateau) + 1e-15


class TestRetraction:
    def test_identity_inside(self):
        z = np.array([0.02, -0.03])
        np.testing.assert_array_equal(radial_retraction(CutoffProfile(DELTA), z), z)

    @given(st.floats(-1, 1), st.floats(-1, 1))
    def test_range(self, x, y):
        p = CutoffProfile(DELTA)
        assert np.linalg.norm(radial_retraction(p, np.array([x, y]))) <= p.plateau + 1e-15

    def test_jacobian_fd(self):
        rng = np.random.default_rng(5)
        p = CutoffProfile(DELTA)
        for _ in range(10):
            z = rng.uniform(-0.12, 0.12, 2)
            jac = kernels.retract_jacobian(z, p.delta, p.plateau)
            fd = np.column_stack([(radial_retraction(p, z + e) - radial_retraction(p, z - e)) / 2e-7
                                  for e in 1e-7 * np.eye(2)])
            np.testing.assert_allclose(jac, fd, atol=1e-6)

    def test_derivative_bound(self):
        assert retraction_derivative_bound(CutoffProfile(DELTA)) == pytest.approx(1.0, abs=1e-12)

    def test_batch(self):
        p = CutoffProfile(DELTA)
        pts = np.array([[0.0, 0.0], [0.2, 0.0], [0.06, 0.06]])
        np.testing.assert_allclose(radial_retraction(p, pts)[1], [0.075, 0.0], atol=1e-16)


class TestGlobalize:
    def test_bounds(self, glob):
        gsys, sysg = glob
        assert gsys.m_hat == pytest.approx(0.01)
        assert gsys.eps_hat <= 0.1 + 1e-12
        assert sysg.M == gsys.m_hat and sysg.eps == gsys.eps_hat
        assert alpha_hat(sysg) == pytest.approx(0.04)
        assert gsys.guarantee_radius == 0.05

    def test_agrees_on_guarantee_ball(self, glob):
        gsys, sysg = glob
        rng = np.random.default_rng(0)
        d = rng.standard_normal((500, 2))
        pts = d / np.linalg.norm(d, axis=1, keepdims=True) * 0.05 * rng.uniform(size=(500, 1))
        np.testing.assert_array_equal(sysg(pts), gsys.original(pts))

    def test_global_bounds_hold(self, glob):
        _, sysg = glob
        pts = np.random.default_rng(1).uniform(-2, 2, (2000, 2))
        assert np.abs(sysg.pert(pts)).max() <= sysg.M
        assert np.linalg.norm(sysg.pert.jacobian(pts), ord=2, axis=(1, 2)).max() <= sysg.eps * (1 + 1e-12)

    def test_hypotheses(self, glob):
        _, sysg = glob
        require_hypotheses(sysg, default_alpha(sysg))

    def test_eps_too_small(self):
        with pytest.raises(HypothesisError, match="eps"):
            globalize(local_map(), 0.05, DELTA)

    def test_nonvanishing_derivative(self):
        sys = MapSystem(HyperbolicLinearMap([[2.0]], [[0.5]]), Perturbation.sine(0.05, SWAP))
        with pytest.raises(HypothesisError, match="Dh"):
            globalize(sys, 0.1, DELTA)

    def test_zero_passthrough(self):
        sys = MapSystem(HyperbolicLinearMap([[2.0]], [[0.5]]), Perturbation.zero(2))
        gsys, out = globalize(sys, 0.1, DELTA)
        assert out is sys and gsys.m_hat == 0.0

    def test_conjugates_original_near_origin(self, glob):
        gsys, sysg = glob
        orig = gsys.original
        rng = np.random.default_rng(3)
        for _ in range(10):
            d = rng.standard_normal(2)
            z = d / np.linalg.norm(d) * 0.025 * rng.uniform() ** 0.5
            r = rho(sysg, z).value
            assert np.linalg.norm(r) <= gsys.guarantee_radius
            assert np.abs(rho(sysg, sysg.A @ z).value - orig(r)).max() <= 1e-6


def test_certified_cutoff_roundtrip():
    base = Perturbation.quadratic(QUAD)
    m_an, eps_an = cutoff_bounds(base, CutoffProfile(DELTA))
    assert m_an == pytest.approx(0.5 * 0.075**2)
    p = certified_cutoff(base, DELTA, None, 0.01, 0.1)
    assert p.m_bound == 0.01
    with pytest.raises(HypothesisError):
        certified_cutoff(base, DELTA, None, m_an / 2, 0.1)
