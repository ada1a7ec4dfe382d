import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from satmimo.precoding import (
    DegenerateChannelError,
    PowerBudget,
    ZeroForcingInfeasible,
    cascaded_precoder,
    feed_powers,
    joint_precoder,
    minimize_max_feed_power,
    scale_factors,
    selector_matrices,
    with_downlink_power,
    zf_base,
)

from .conftest import crandn


def socp_reference(h_ul, b0, p_perp):
    """Epigraph SOCP solved with a conic solver (independent oracle)."""
    z, k = b0.shape
    w = cp.Variable((z, k), complex=True)
    t = cp.Variable()
    m = h_ul @ (b0 + p_perp @ w)
    cons = [cp.sum_squares(m[i, :]) <= t for i in range(z)]
    cp.Problem(cp.Minimize(t), cons).solve(solver=cp.CLARABEL)
    return float(t.value)


def _instance(rng, z, k):
    return crandn(rng, k, z), crandn(rng, z, z)


def _check_invariants(sol, h_dl, h_ul, budget, selectors):
    g = h_dl @ h_ul @ sol.b_matrix
    d = np.abs(np.diag(g))
    off = np.abs(g - np.diag(np.diag(g)))
    assert off.max() <= 1e-9 * d.min()
    assert d.max() / d.min() - 1 <= 1e-9
    ant = selectors.antenna_powers(sol.b_matrix)
    assert ant.max() <= budget.p_ul_w * (1 + 1e-9)
    assert ant.max() == pytest.approx(budget.p_ul_w, rel=1e-9)
    assert sol.beam_power.max() <= budget.p_dl_w * (1 + 1e-9)
    assert sol.beam_power.max() == pytest.approx(budget.p_dl_w, rel=1e-9)


class TestZfBase:
    def test_identity(self):
        b0, p = zf_base(np.eye(4), np.eye(4))
        assert_allclose(b0, np.eye(4), atol=1e-15)
        assert_allclose(p, 0, atol=1e-15)

    def test_unitary_uplink(self, rng):
        q, _ = np.linalg.qr(crandn(rng, 4, 4))
        b0, p = zf_base(q.conj().T, q)
        assert_allclose(q.conj().T @ q @ b0, np.eye(4), atol=1e-12)

    def test_fourteen_of_sixteen(self, rng):
        h_dl, h_ul = _instance(rng, 16, 14)
        b0, p = zf_base(h_dl, h_ul)
        assert_allclose(h_dl @ h_ul @ b0, np.eye(14), atol=1e-9)
        assert_allclose(p @ p, p, atol=1e-10)
        assert_allclose(h_dl @ h_ul @ p, 0, atol=1e-10)
        assert round(np.trace(p).real) == 2

    def test_duplicate_users_infeasible(self, rng):
        h_dl = crandn(rng, 3, 4)
        h_dl[2] = h_dl[0]
        with pytest.raises(ZeroForcingInfeasible):
            zf_base(h_dl, np.eye(4))

    def test_too_many_users(self, rng):
        with pytest.raises(ZeroForcingInfeasible):
            zf_base(crandn(rng, 5, 4), np.eye(4))

    def test_singular_uplink(self):
        with pytest.raises(ZeroForcingInfeasible):
            zf_base(np.eye(2), np.ones((2, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            zf_base(np.eye(2), np.eye(3))


class TestFeedPowerProgram:
    def test_no_freedom(self, rng):
        h_dl, h_ul = _instance(rng, 4, 4)
        b0, p = zf_base(h_dl, h_ul)
        sol = minimize_max_feed_power(h_ul, b0, p)
        assert_allclose(sol.w_matrix, 0)
        assert sol.t == pytest.approx(feed_powers(h_ul, b0).max())

    def test_scalar_calculus_oracle(self):
        # rows 2 + x and 0.5 + x: the max is minimized where both equal 0.75^2
        b0 = np.array([[2.0], [0.5]], dtype=complex)
        v = np.array([1.0, 1.0]) / np.sqrt(2)
        sol = minimize_max_feed_power(np.eye(2), b0, np.outer(v, v))
        assert sol.t == pytest.approx(0.5625, rel=1e-6)
        assert_allclose(sol.feed_power, [0.5625, 0.5625], rtol=1e-6)

    @pytest.mark.parametrize("z,k", [(4, 3), (6, 4), (8, 5)])
    def test_matches_conic_reference(self, z, k):
        rng = np.random.default_rng(100 * z + k)
        h_dl, h_ul = _instance(rng, z, k)
        b0, p = zf_base(h_dl, h_ul)
        sol = minimize_max_feed_power(h_ul, b0, p)
        ref = socp_reference(h_ul, b0, p)
        assert sol.t == pytest.approx(ref, rel=1e-6)
        assert sol.t < sol.baseline_t

    def test_midpoint_convexity(self, rng):
        h_dl, h_ul = _instance(rng, 5, 3)
        b0, p = zf_base(h_dl, h_ul)
        w1 = minimize_max_feed_power(h_ul, b0, p).w_matrix
        w2 = crandn(rng, 5, 3)
        f = lambda w: feed_powers(h_ul, b0 + p @ w).max()
        assert f(0.5 * (w1 + w2)) <= 0.5 * (f(w1) + f(w2)) + 1e-12
        assert f(w1) <= f(np.zeros_like(w1))

    @settings(max_examples=15, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2**31 - 1))
    def test_never_worse_than_zero(self, z, seed):
        rng = np.random.default_rng(seed)
        k = max(1, z - int(rng.integers(1, z)))
        h_dl, h_ul = _instance(rng, z, k)
        b0, p = zf_base(h_dl, h_ul)
        sol = minimize_max_feed_power(h_ul, b0, p)
        assert sol.t <= sol.baseline_t * (1 + 1e-12)


class TestScaleFactors:
    def test_identity_sixteen(self):
        mu, a = scale_factors(np.eye(16), np.eye(16), PowerBudget(8.0, 1.0))
        assert mu == pytest.approx(1.0)
        assert a == pytest.approx(1.0)

    def test_homogeneity(self, rng):
        b = crandn(rng, 4, 4)
        h = crandn(rng, 4, 4)
        bud = PowerBudget(3.0, 2.0)
        mu1, a1 = scale_factors(b, h, bud)
        mu2, a2 = scale_factors(2.5 * b, h, bud)
        assert mu2 == pytest.approx(mu1 / 2.5)
        assert a2 == pytest.approx(a1)

    def test_dl_power_sqrt(self, rng):
        b, h = crandn(rng, 4, 4), crandn(rng, 4, 4)
        _, a1 = scale_factors(b, h, PowerBudget(1.0, 1.0))
        _, a2 = scale_factors(b, h, PowerBudget(1.0, 2.0))
        assert a2 == pytest.approx(np.sqrt(2) * a1)

    def test_zero_precoder(self):
        with pytest.raises(DegenerateChannelError):
            scale_factors(np.zeros((2, 2)), np.eye(2), PowerBudget(1.0, 1.0))

    def test_selectors_sum_to_identity(self):
        s = selector_matrices(16)
        assert_allclose(sum(s.matrices), np.eye(16))
        assert_allclose(np.diag(s.matrices[0])[:4], [1, 0, 1, 0])

    def test_negative_budget(self):
        with pytest.raises(ValueError):
            PowerBudget(-1.0, 1.0)


class TestPrecoders:
    def test_identity_cascade(self):
        bud = PowerBudget(8.0, 4.0)
        sol = joint_precoder(np.eye(16), np.eye(16), bud)
        assert_allclose(sol.b_matrix, sol.mu * np.eye(16), atol=1e-12)
        assert sol.mu == pytest.approx(1.0)

    @pytest.mark.parametrize("k", [16, 13])
    def test_invariants_random(self, k):
        rng = np.random.default_rng(k)
        h_dl, h_ul = _instance(rng, 16, k)
        bud = PowerBudget(2.0, 5.0, sigma_ul_sq=0.01, sigma_dl_sq=0.01)
        sel = selector_matrices(16)
        for fn in (joint_precoder, cascaded_precoder):
            _check_invariants(fn(h_dl, h_ul, bud, sel), h_dl, h_ul, bud, sel)

    @pytest.mark.parametrize("seed", range(4))
    def test_joint_equals_cascaded(self, seed):
        rng = np.random.default_rng(seed)
        k = [16, 15, 12, 8][seed]
        h_dl, h_ul = _instance(rng, 16, k)
        bud = PowerBudget(1.0, 1.0, sigma_ul_sq=1e-3)
        j = joint_precoder(h_dl, h_ul, bud)
        c = cascaded_precoder(h_dl, h_ul, bud)
        assert c.user_gain == pytest.approx(j.user_gain, rel=1e-6)

    def test_identity_uplink_cascaded_is_downlink_only(self, rng):
        h_dl = crandn(rng, 3, 4)
        bud = PowerBudget(1.0, 1.0)
        j = joint_precoder(h_dl, np.eye(4), bud)
        c = cascaded_precoder(h_dl, np.eye(4), bud)
        assert_allclose(c.b_matrix, j.b_matrix, atol=1e-6 * np.abs(j.b_matrix).max())

    def test_diagonal_uplink_binding_antenna(self, rng):
        h_ul = np.diag([1.0, 0.3, 2.0, 0.7]).astype(complex)
        h_dl = crandn(rng, 4, 4)
        bud = PowerBudget(1.5, 1.0)
        c = cascaded_precoder(h_dl, h_ul, bud)
        assert c.antenna_power.max() == pytest.approx(1.5, rel=1e-12)

    def test_duplicate_rows_infeasible(self, rng):
        h_dl = crandn(rng, 2, 4)
        with pytest.raises(ZeroForcingInfeasible):
            joint_precoder(np.vstack([h_dl, h_dl[:1]]), crandn(rng, 4, 4), PowerBudget(1, 1))

    def test_noise_correction_keeps_beam_limit(self, rng):
        h_dl, h_ul = _instance(rng, 4, 4)
        bud = PowerBudget(1.0, 1.0, sigma_ul_sq=10.0)
        sol = joint_precoder(h_dl, h_ul, bud)
        assert sol.beam_power.max() == pytest.approx(1.0, rel=1e-12)

    def test_with_downlink_power(self, rng):
        h_dl, h_ul = _instance(rng, 4, 4)
        bud = PowerBudget(1.0, 1.0)
        sol = joint_precoder(h_dl, h_ul, bud)
        s4 = with_downlink_power(sol, 4.0, bud)
        assert s4.a_sl == pytest.approx(2 * sol.a_sl)
        assert s4.beam_power.max() == pytest.approx(4.0)
