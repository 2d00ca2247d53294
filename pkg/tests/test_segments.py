import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghconj.cones import QuadraticForm
from ghconj.numerics import matrix_exp
from ghconj.segments import (IsolatingSegment, TimeMap, alpha_hat_ode, check_segment, exit_time,
                             flow_conjugacy_defect, flow_cone_monitor, gronwall_bound, rho_flow)
from ghconj.systems import HyperbolicLinearField, OdeSystem, Perturbation, Splitting

from conftest import e2_ode

SPLIT = Splitting(1, 1)


def zero_ode():
    return OdeSystem(HyperbolicLinearField([[1.0]], [[-1.0]]), Perturbation.zero(2))


def dense_exit_time(ode2, ode1, z, a, alpha, dt=1e-4, horizon=5.0):
    """Joint fine-step RK4 with linear interpolation of the face function."""
    def rk4(f, w):
        k1 = f(w)
        k2 = f(w + 0.5 * dt * k1)
        k3 = f(w + 0.5 * dt * k2)
        k4 = f(w + dt * k3)
        return w + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def level(w, b):
        d = w - b
        return max(d[0] ** 2, d[1] ** 2) - alpha**2

    t, prev = 0.0, level(z, a)
    while t < horizon:
        z, a = rk4(ode2.field, z), rk4(ode1.field, a)
        cur = level(z, a)
        if cur > 0:
            return t + dt * (-prev) / (cur - prev)
        t, prev = t + dt, cur
    return math.inf


class TestGronwall:
    def test_time_zero(self, e2):
        assert gronwall_bound(e2, np.array([0.3, -0.7]), 0.0) == pytest.approx(0.7)

    def test_linear_growth(self):
        assert gronwall_bound(zero_ode(), np.array([1.0, 0.0]), 1.0) == pytest.approx(math.e)

    def test_e2_formula_and_trajectory(self, e2):
        z = np.array([1.0, 1.0])
        r = 1.05
        ref = math.exp(2 * r) + 0.05 / r * (math.exp(2 * r) - 1)
        assert gronwall_bound(e2, z, 2.0) == pytest.approx(ref)
        assert SPLIT.norm(e2.flow(z, 2.0)) <= ref

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
    def test_trajectories_respect_bound(self, x, y, t):
        ode = e2_ode()
        z = np.array([x, y])
        assert SPLIT.norm(ode.flow(z, t)) <= gronwall_bound(ode, z, t) * (1 + 1e-12) + 1e-12


def test_alpha_hat_ode():
    assert alpha_hat_ode(1.0, 1.0, 0.05) == pytest.approx(0.1)
    assert alpha_hat_ode(1.0, 1.0, 0.0) == 0.0
    assert alpha_hat_ode(2.0, 0.5, 1.0) == pytest.approx(4.0)


class TestSegment:
    def test_linear_slacks(self):
        seg = IsolatingSegment(zero_ode(), np.array([0.3, 0.2]), 0.2, 5.0)
        rep = check_segment(seg, 0.0, 300, 2, seed=1)
        assert rep.exit_min_slack >= 0.04 * (1 - 1e-12)
        assert rep.entry_max_slack <= -0.04 * (1 - 1e-12)
        assert rep.samples == 600

    def test_e2_sampled_beats_analytic(self):
        seg = IsolatingSegment(e2_ode(1.0), np.array([0.3, 0.2]), 0.15, 5.0)
        rep = check_segment(seg, 0.0, 1000, seed=2)
        assert rep.passed
        assert rep.exit_analytic == pytest.approx(0.15 * 0.05)
        assert rep.exit_min_slack >= rep.exit_analytic
        assert rep.entry_max_slack <= rep.entry_analytic

    def test_below_threshold(self):
        seg = IsolatingSegment(e2_ode(0.0), np.array([0.3, 0.5]), 0.04, 5.0)
        rep = check_segment(seg, 1.0, 1000, seed=3)
        assert rep.exit_analytic < 0 and rep.entry_analytic > 0
        assert not rep.passed

    def test_anchor_matches_flow(self, e2):
        seg = IsolatingSegment(e2, np.array([0.3, 0.2]), 0.15, 2.0)
        for t in (-1.234, 0.0, 0.5, 1.999):
            np.testing.assert_allclose(seg.anchor(t), e2.flow(np.array([0.3, 0.2]), t), atol=1e-12)

    def test_faces_partition_boundary(self, e2):
        seg = IsolatingSegment(e2, np.array([0.3, 0.2]), 0.15, 2.0)
        rng = np.random.default_rng(0)
        for _ in range(100):
            t = rng.uniform(-2, 2)
            d = rng.uniform(-1, 1, 2)
            d *= 0.15 / np.abs(d).max()
            lm, lp = seg.face_values(t, seg.anchor(t) + d)
            assert max(lm, lp) == pytest.approx(0.0, abs=1e-15)


class TestExitTime:
    def test_center_never_exits(self, e2):
        seg = IsolatingSegment(e2, np.array([0.3, 0.2]), 0.15, 3.0)
        assert exit_time(seg, 1.0, 0.0, seg.anchor(0.0)) == math.inf

    def test_exit_face_is_immediate(self, e2):
        seg = IsolatingSegment(e2, np.array([0.3, 0.2]), 0.15, 3.0)
        assert exit_time(seg, 1.0, 0.0, seg.anchor(0.0) + np.array([0.15, 0.0])) == 0.0

    def test_linear_closed_form(self):
        seg = IsolatingSegment(zero_ode(), np.array([0.3, 0.2]), 0.15, 3.0)
        tau = exit_time(seg, 0.0, 0.0, np.array([0.3 + 0.135, 0.2]))
        assert tau == pytest.approx(math.log(1 / 0.9), abs=1e-8)

    def test_e2_against_dense_oracle(self, e2):
        seg = IsolatingSegment(e2, np.array([0.3, 0.2]), 0.15, 5.0)
        z = seg.anchor(0.0) + np.array([0.135, 0.0])
        tau = exit_time(seg, 0.0, 0.0, z)
        ref = dense_exit_time(e2.with_lambda(0.0), e2, z, seg.anchor(0.0), 0.15)
        assert tau == pytest.approx(ref, abs=1e-6)

    def test_continuity(self, e2):
        seg = IsolatingSegment(e2, np.array([0.3, 0.2]), 0.15, 5.0)
        z = seg.anchor(0.0) + np.array([0.1, 0.05])
        t1 = exit_time(seg, 0.0, 0.0, z)
        t2 = exit_time(seg, 0.0, 0.0, z + 1e-8)
        assert math.isfinite(t1) and abs(t1 - t2) <= 1e-5

    def test_outside_rejected(self, e2):
        seg = IsolatingSegment(e2, np.array([0.3, 0.2]), 0.15, 3.0)
        with pytest.raises(ValueError):
            exit_time(seg, 0.0, 0.0, seg.anchor(0.0) + np.array([0.3, 0.0]))


class TestFlowConjugacy:
    def test_identity_without_perturbation(self):
        z = np.array([0.4, -0.3])
        np.testing.assert_allclose(rho_flow(zero_ode(), z).value, z, atol=1e-13)

    def test_equilibrium(self, e2):
        np.testing.assert_allclose(rho_flow(e2, np.zeros(2), 0.15).value, 0.0, atol=1e-14)

    def test_defect_e2(self, e2):
        z = np.array([0.5, 0.5])
        cp = rho_flow(e2, z, 0.15, 8.0, 0.5)
        for t in (0.5, 1.0, 2.0):
            assert flow_conjugacy_defect(e2, z, t, rho_z=cp.value, alpha=0.15) <= 1e-5

    def test_continuous_containment(self, e2):
        z = np.array([-0.7, 0.9])
        cp = rho_flow(e2, z, 0.15, 4.0, 0.5)
        pts = cp.orbit.points
        worst = 0.0
        for j in range(len(pts) - 1):
            for s in np.linspace(0, 0.5, 21)[1:-1]:
                t = (j - 8) * 0.5 + s
                worst = max(worst, SPLIT.norm(e2.flow(pts[j], s) - matrix_exp(e2.A, t) @ z))
        assert worst <= 0.15 + 1e-6

    def test_grid_must_divide_horizon(self, e2):
        with pytest.raises(ValueError):
            rho_flow(e2, np.zeros(2), 0.15, T=1.3, delta=0.5)

    def test_time_map_theta(self, e2):
        assert TimeMap(e2, 0.5).theta() == pytest.approx(math.exp(0.5 * 0.9))


class TestFlowCone:
    def test_linear(self):
        z1, z2 = np.array([0.3, 0.1]), np.array([-0.2, 0.4])
        d0 = z1 - z2
        assert flow_cone_monitor(zero_ode(), z1, z2, 0.5, 2.0) >= (2 - 0.5) * (d0 @ d0) * math.exp(-2 * 2) * 0.99

    def test_rejects_equal(self, e2):
        with pytest.raises(ValueError):
            flow_cone_monitor(e2, np.ones(2), np.ones(2), 0.5, 1.0)

    def test_e2_positive(self, e2):
        rng = np.random.default_rng(7)
        for _ in range(10):
            z1, z2 = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
            assert flow_cone_monitor(e2, z1, z2, 0.5, 3.0) > 0

    def test_q_growth(self, e2):
        q = QuadraticForm(SPLIT)
        rng = np.random.default_rng(8)
        eta = 0.5
        for _ in range(10):
            z1 = rng.uniform(-1, 1, 2)
            z2 = z1 + np.array([0.3, rng.uniform(-0.2, 0.2)])
            q0 = q(z1 - z2)
            assert q0 >= 0
            for t in np.linspace(0, 2, 9):
                assert q(e2.flow(z1, t) - e2.flow(z2, t)) >= math.exp(eta * t) * q0 * (1 - 1e-12)
