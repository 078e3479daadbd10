import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcnsim.analysis import (
    max_accept_state,
    max_acceptance_walk,
    potential_audit,
    potential_phi,
    series_array,
    series_bounds,
    series_point,
    series_u,
)
from pcnsim.core import ConfigError, PolicyKind, threshold_f, validate_config
from pcnsim.errors import TraceMismatch
from pcnsim.generators import Sequence, gen_greedy_adversary, gen_uniform
from pcnsim.harness import flip_decision, run_policy, trace_from_mask
from pcnsim.oracle import offline_dp, random_feasible_mask

# Independent mpmath evaluations (30 significant digits), frozen.
U2 = 3.92701439474164490992795352227
U1000 = 1004.74632645596574199826945975
LOWER_1 = 1.34657359027997265470861606073
LOWER_100 = 102.307560258420629725442099133
SHAT_100 = 66.837715781827779695461430196
SHAT_10 = 6.37784311300536789122967498645
E_E = 15.1542622414792641897604302726
SHAT_E_E = 9.57932071671838356579345434989
PHI_0_0 = 9.21034037197618273607196581874
PHI_0_100 = 4.60517018598809136803598290937
PHI_M10_100 = 21.8961086336922176300519217678


class TestSeries:
    def test_initial_terms(self):
        assert series_u(0) == 1.0
        assert series_u(1) == pytest.approx(math.e, rel=1e-15)
        assert series_u(2) == pytest.approx(U2, rel=1e-14)

    def test_u1000(self):
        assert series_u(1000) == pytest.approx(U1000, rel=1e-12)

    def test_bounds_values(self):
        assert series_bounds(0) == (0.0, 3.0)
        lo, hi = series_bounds(1)
        assert lo == pytest.approx(LOWER_1, rel=1e-15) and hi == pytest.approx(LOWER_1 + 3, rel=1e-15)
        lo, hi = series_bounds(100)
        assert lo == pytest.approx(LOWER_100, rel=1e-15)

    def test_vectorized_bounds(self):
        n = np.arange(5)
        lo, hi = series_bounds(n)
        assert np.allclose(hi - lo, 3)

    def test_increment_at_least_one(self):
        u = series_array(10 ** 5)
        assert np.all(np.diff(u) >= 1.0)

    def test_read_only(self):
        with pytest.raises(ValueError):
            series_array(10)[0] = 2.0

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            series_array(-1)

    def test_point(self):
        p = series_point(50)
        assert p.lower <= p.u_n <= p.upper


class TestMaxAcceptState:
    @pytest.mark.parametrize("B, expected", [(100, SHAT_100), (10, SHAT_10), (E_E, SHAT_E_E)])
    def test_values(self, B, expected):
        cfg = validate_config(B=B, m=1)
        s = max_accept_state(cfg)
        assert s == pytest.approx(expected, rel=1e-13)
        assert threshold_f(s, cfg) == pytest.approx(1.0, rel=1e-12)

    def test_e_e_closed_form(self):
        cfg = validate_config(B=E_E, m=1)
        assert max_accept_state(cfg) == pytest.approx(E_E * (1 - 1 / math.e), rel=1e-13)

    @pytest.mark.parametrize("B", [4.1, 5, 10, 100, 1e4, 1e6])
    def test_headroom(self, B):
        # s + f(s) <= B on [0, s_hat], which keeps guarantee-mode EXP feasible.
        cfg = validate_config(B=B, m=1)
        s = np.linspace(0, max_accept_state(cfg), 2001)
        assert np.all(s + cfg.b * np.exp(-s / cfg.b) <= B + 1e-9)


def test_headroom_threshold():
    # B ln ln B / ln B = 1 at B = 4.0992587..., so just above the 4.01 floor
    # the threshold rule alone would overshoot and the feasibility check fires.
    cfg = validate_config(B=4.01, m=4.01 / math.log(4.01))
    s_hat = max_accept_state(cfg)
    assert s_hat + 1 > cfg.B
    t = run_policy("exp", Sequence(np.array([2.06, 1.0, 1.0003])), cfg)
    assert t.accepted.tolist() == [True, True, False]
    assert t.reasons[-1] == 4  # infeasible


class TestAcceptanceWalk:
    @pytest.mark.parametrize("B", [10, 100, 1000])
    @pytest.mark.parametrize("sign", [1, -1])
    def test_state_bounded_by_log_series(self, B, sign):
        cfg = validate_config(B=B, m=B / math.log(B))
        walk = max_acceptance_walk(cfg, sign)
        u = series_array(len(walk))
        i = np.arange(len(walk))
        assert np.all(np.abs(walk) <= cfg.b * np.log(u[i]) + 1e-9)
        assert np.abs(walk[-1]) <= max_accept_state(cfg) + 1

    def test_walk_mirrors(self):
        cfg = validate_config(B=100, m=21)
        assert np.allclose(max_acceptance_walk(cfg, 1), -max_acceptance_walk(cfg, -1))


class TestPhi:
    cfg = validate_config(B=100, m=21)

    def test_values(self):
        assert potential_phi(0, 0, self.cfg) == pytest.approx(PHI_0_0, rel=1e-14)
        assert potential_phi(0, 100, self.cfg) == pytest.approx(PHI_0_100, rel=1e-14)
        assert potential_phi(-10, 100, self.cfg) == pytest.approx(PHI_M10_100, rel=1e-14)

    def test_vectorized(self):
        out = potential_phi(np.array([0.0, -10.0]), np.array([0.0, 100.0]), self.cfg)
        assert out == pytest.approx([PHI_0_0, PHI_M10_100], rel=1e-14)

    @given(st.floats(-100, 100), st.floats(-100, 100))
    def test_nonnegative(self, a, r):
        assert potential_phi(a, r, self.cfg) >= 0


def _int_cfg(B):
    return validate_config(B=B, m=math.floor(B / math.log(B)))


class TestAudit:
    def test_empty(self):
        cfg = _int_cfg(100)
        seq = Sequence(np.zeros(0))
        rep = potential_audit(run_policy("exp", seq, cfg), trace_from_mask(seq, np.zeros(0, bool), cfg), cfg)
        assert rep.passed and len(rep) == 0 and rep.first_violation is None

    def test_all_reject_reference(self):
        cfg = validate_config(B=100, m=21)
        seq = gen_uniform(cfg, 100, seed=5)
        ref = trace_from_mask(seq, np.zeros(100, bool), cfg)
        assert potential_audit(run_policy("exp", seq, cfg), ref, cfg).passed

    def test_against_dp(self):
        cfg = _int_cfg(100)
        seq = gen_uniform(cfg, 1000, seed=11, integer=True)
        alg = run_policy("exp", seq, cfg)
        opt = offline_dp(seq, cfg)
        rep = potential_audit(alg, opt.to_trace(seq, cfg), cfg)
        assert rep.passed
        assert rep.summed_check(4 * 100)
        assert rep.ref_gain.sum() == opt.accepted_count

    def test_records_match_arrays(self):
        cfg = _int_cfg(100)
        seq = gen_uniform(cfg, 50, seed=2, integer=True)
        rep = potential_audit(run_policy("exp", seq, cfg), offline_dp(seq, cfg).to_trace(seq, cfg), cfg)
        recs = list(rep.records())
        assert [r.step for r in recs] == list(range(1, 51))
        assert recs[-1].phi_after == rep.phi_after[-1]
        lines = rep.to_csv().splitlines()
        assert lines[0].split(",")[0] == "step" and len(lines) == 51

    def test_greedy_adversary(self):
        cfg = validate_config(B=1024, m=16)
        seq = gen_greedy_adversary(cfg, 4)
        alg = run_policy("exp", seq, cfg)
        ref = offline_dp(seq, cfg).to_trace(seq, cfg)
        assert potential_audit(alg, ref, cfg).passed
        grd = run_policy("greedy", seq, cfg)
        assert potential_audit(alg, grd, cfg).passed

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 31), st.sampled_from([5, 10, 37, 100]))
    def test_random_feasible_references(self, seed, B):
        cfg = _int_cfg(B)
        seq = gen_uniform(cfg, 300, seed=seed, integer=True)
        alg = run_policy("exp", seq, cfg)
        for k in range(3):
            ref = random_feasible_mask(seq, cfg, seed + k).to_trace(seq, cfg)
            assert potential_audit(alg, ref, cfg).passed

    def test_detects_flipped_decision(self):
        cfg = _int_cfg(100)
        seq = gen_uniform(cfg, 200, seed=3, integer=True)
        alg = run_policy("exp", seq, cfg)
        ref = offline_dp(seq, cfg).to_trace(seq, cfg)
        both = np.flatnonzero(alg.accepted & ref.accepted)
        bad = flip_decision(alg, seq, cfg, int(both[0]))
        rep = potential_audit(bad, ref, cfg)
        assert not rep.passed
        assert rep.first_violation == both[0] + 1

    def test_requires_guarantee_mode(self):
        cfg = validate_config(B=10, m=14)
        seq = Sequence(np.array([1.0]))
        t = run_policy("greedy", seq, cfg)
        with pytest.raises(ConfigError):
            potential_audit(t, t, cfg)

    def test_mismatched_traces(self):
        cfg = _int_cfg(100)
        a = run_policy("exp", Sequence(np.array([1.0, 2.0])), cfg)
        b = run_policy("exp", Sequence(np.array([1.0, 3.0])), cfg)
        with pytest.raises(TraceMismatch):
            potential_audit(a, b, cfg)

    def test_infeasible_reference(self):
        cfg = _int_cfg(10)
        seq = Sequence(np.full(5, 3.0))
        ref = trace_from_mask(seq, np.ones(5, bool), cfg)
        with pytest.raises(ValueError):
            potential_audit(run_policy(PolicyKind.EXP, seq, cfg), ref, cfg)
