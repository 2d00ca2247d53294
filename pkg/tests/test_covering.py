import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghconj.covering import HSet, alpha_hat_map, anchor_orbit, build_chain, check_covering
from ghconj.systems import HypothesisError, Splitting

from conftest import e1_cos_map, e1_map

SPLIT = Splitting(1, 1)


def test_alpha_hat():
    assert alpha_hat_map(2.0, 0.5, 0.05) == pytest.approx(0.2)
    assert alpha_hat_map(2.0, 0.5, 0.0) == 0.0
    assert alpha_hat_map(3.0, 0.5, 1.0) == pytest.approx(4.0)
    with pytest.raises(HypothesisError):
        alpha_hat_map(1.0, 0.5, 1.0)


def test_hset_faces():
    n = HSet(np.zeros(2), 0.5, SPLIT)
    assert n.contains(np.array([0.5, -0.5]))
    assert not n.contains(np.array([0.51, 0.0]))
    assert n.on_exit_set(np.array([-0.5, 0.1])) and not n.on_entry_set(np.array([-0.5, 0.1]))
    assert n.on_entry_set(np.array([0.1, 0.5]))
    with pytest.raises(ValueError):
        HSet(np.zeros(2), 0.0, SPLIT)


class TestCheck:
    def test_linear_margins(self):
        g = e1_map(0.0)
        z = np.array([0.7, -1.1])
        a = 0.3
        ana = check_covering(g, z, g(z), a, "analytic", lam_target=0.0)
        smp = check_covering(g, z, g(z), a, "sampled", 1000, seed=1)
        assert ana.passed and smp.passed
        assert ana.exit_margin == pytest.approx(a) and ana.entry_margin == pytest.approx(0.5 * a)
        assert smp.exit_margin == pytest.approx(a, abs=1e-12)
        assert smp.entry_margin == pytest.approx(0.5 * a, abs=1e-12)

    def test_e1_mixed_lambdas(self):
        z = np.random.default_rng(2).uniform(-3, 3, 2)
        rep = check_covering(e1_map(1.0), z, e1_map(0.0)(z), 0.25, "sampled", 1000, seed=2)
        assert rep.passed and rep.exit_margin > 0 and rep.entry_margin > 0

    def test_small_alpha_fails_analytically(self):
        rep = check_covering(e1_map(), np.zeros(2), np.zeros(2), 0.1, "analytic")
        assert not rep.passed
        assert rep.entry_margin == pytest.approx(0.05 - 0.1)

    def test_failing_sample_has_witness(self):
        g = e1_map(1.0)
        z = np.zeros(2)
        rep = check_covering(g, z, g(z) + np.array([0.0, 0.3]), 0.25, "sampled", 500)
        assert not rep.passed and rep.witnesses

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            check_covering(e1_map(), np.zeros(2), np.zeros(2), 0.0)
        with pytest.raises(ValueError):
            check_covering(e1_map(), np.zeros(2), np.zeros(2), 0.3, mode="other")

    @given(st.floats(0.05, 2.0), st.sampled_from([0.0, 0.5, 1.0]), st.sampled_from([0.0, 0.5, 1.0]),
           st.integers(0, 1000))
    def test_analytic_pass_implies_sampled_pass(self, alpha, l1, l2, seed):
        z = np.random.default_rng(seed).uniform(-3, 3, 2)
        src = e1_map(l1)
        tgt = e1_map(l2)(z)
        if check_covering(src, z, tgt, alpha, "analytic", lam_target=l2).passed:
            assert check_covering(src, z, tgt, alpha, "sampled", 300, seed=seed).passed

    @given(st.floats(0.01, 5.0))
    def test_linear_margins_scale_with_alpha(self, alpha):
        g = e1_map(0.0)
        rep = check_covering(g, np.zeros(2), np.zeros(2), alpha, "sampled", 200, seed=0)
        assert rep.exit_margin == pytest.approx(alpha, rel=1e-12)
        assert rep.entry_margin == pytest.approx(0.5 * alpha, rel=1e-12)


class TestChain:
    def test_linear_anchor(self):
        base = np.array([0.3, -0.2])
        chain = build_chain(e1_map(0.0), e1_map(), base, 5, 0.25)
        a = np.diag([2.0, 0.5])
        for k, c in zip(range(-5, 6), chain.centers):
            np.testing.assert_allclose(c, np.linalg.matrix_power(a, k) @ base, rtol=1e-15)

    def test_fixed_point_anchor(self):
        chain = build_chain(e1_map(), e1_map(), np.zeros(2), 4, 0.25)
        np.testing.assert_array_equal(chain.centers, 0.0)
        assert chain.radius == 0.25

    def test_cosine_anchor_orbit(self):
        g = e1_cos_map()
        c = anchor_orbit(g, np.zeros(2), 20)
        for k in range(40):
            nxt = g(c[k])
            assert np.abs(nxt - c[k + 1]).max() <= 1e-10 * max(1.0, np.abs(nxt).max())

    def test_alpha_below_threshold_rejected(self):
        with pytest.raises(HypothesisError):
            build_chain(e1_map(), e1_map(), np.zeros(2), 3, 0.15)

    @pytest.mark.parametrize("l1,l2", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_links_cover_for_all_lambda_pairs(self, l1, l2):
        base = np.array([0.4, 0.9])
        chain = build_chain(e1_map(l2), e1_map(l1), base, 6, 0.25)
        src = e1_map(l1)
        cs = chain.centers
        for k in range(len(cs) - 1):
            assert check_covering(src, cs[k], cs[k + 1], 0.25, "sampled", 200, seed=k).passed
