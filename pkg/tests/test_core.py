import pytest
from hypothesis import given, strategies as st

from pcnsim.core import (
    Decision,
    PolicyKind,
    Reason,
    apply,
    check_item,
    exp_decide,
    greedy_decide,
    threshold_f,
    validate_config,
)
from pcnsim.errors import ConfigError, PostconditionViolation

# b = B / ln B, evaluated with mpmath at 30 digits
B100_b = 21.7147240951625913825564459458
B10_b = 4.34294481903251827651128918917


class TestValidateConfig:
    def test_derived_b_and_guarantee(self):
        cfg = validate_config({"B": 100, "m": 20, "s0": 0})
        assert cfg.b == pytest.approx(B100_b, rel=1e-12)
        assert cfg.guarantee_mode

    def test_capacity_floor(self):
        with pytest.raises(ConfigError, match="4.01"):
            validate_config({"B": 4.0, "m": 1, "s0": 0})
        validate_config(B=4.01, m=1)

    def test_unrestricted_items(self):
        cfg = validate_config(B=10, m=14, s0=0)
        assert cfg.b == pytest.approx(B10_b, rel=1e-12)
        assert not cfg.guarantee_mode

    @pytest.mark.parametrize("raw", [
        {"B": 10, "m": 0.5},
        {"B": 10, "m": 20.5},
        {"B": 10, "m": 2, "s0": 10.5},
        {"B": 10, "m": 2, "s0": -11},
        {"B": float("nan"), "m": 2},
        {"m": 2},
    ])
    def test_rejects(self, raw):
        with pytest.raises(ConfigError):
            validate_config(raw)

    def test_b_below_capacity(self):
        for B in (4.01, 10, 1e3, 1e9):
            cfg = validate_config(B=B, m=1)
            assert 0 < cfg.b < cfg.B


class TestThreshold:
    def test_values(self):
        cfg = validate_config(B=100, m=20)
        assert threshold_f(0, cfg) == pytest.approx(B100_b, rel=1e-12)
        # 50/b = ln(100)/2, so the exponential factor is exactly 0.1
        assert threshold_f(50, cfg) == pytest.approx(B100_b / 10, rel=1e-12)
        assert threshold_f(-50, cfg) == threshold_f(50, cfg)

    @given(st.floats(0, 100), st.floats(0, 100))
    def test_strictly_decreasing_in_abs(self, x, y):
        cfg = validate_config(B=100, m=20)
        if x + 1e-6 < y:
            assert threshold_f(x, cfg) > threshold_f(y, cfg)
        assert threshold_f(x, cfg) > 0


class TestExp:
    cfg = validate_config(B=100, m=20)

    def test_accept_below_threshold(self):
        d = exp_decide(0, 5, self.cfg)
        assert d == Decision(True, Reason.BELOW_THRESHOLD)

    def test_opposite_sign(self):
        assert exp_decide(50, -3, self.cfg) == Decision(True, Reason.OPPOSITE_SIGN)

    def test_threshold_reject(self):
        assert exp_decide(50, 15, self.cfg) == Decision(False, Reason.THRESHOLD_REJECT)

    def test_zero_state_uses_threshold_for_both_signs(self):
        assert exp_decide(0, -20, self.cfg).reason is Reason.BELOW_THRESHOLD
        big = validate_config(B=100, m=40)
        assert not exp_decide(0, -22, big).accepted
        assert not exp_decide(0, 22, big).accepted

    def test_infeasible_override_outside_guarantee(self):
        cfg = validate_config(B=10, m=20)
        d = exp_decide(5, -18, cfg)  # opposite sign, lands at -13
        assert d == Decision(False, Reason.INFEASIBLE)

    @given(st.floats(-100, 100), st.floats(1, 21.7))
    def test_opposite_sign_always_accepted_in_guarantee(self, s, x):
        cfg = validate_config(B=100, m=B100_b)
        if s > 0:
            assert exp_decide(s, -x, cfg).accepted
        elif s < 0:
            assert exp_decide(s, x, cfg).accepted

    @given(st.floats(-100, 100), st.floats(-21.7, 21.7).filter(lambda v: abs(v) >= 1))
    def test_pure(self, s, x):
        assert exp_decide(s, x, self.cfg) == exp_decide(s, x, self.cfg)
        assert greedy_decide(s, x, self.cfg) == greedy_decide(s, x, self.cfg)


class TestGreedy:
    cfg = validate_config(B=10, m=14)

    def test_fits_exactly(self):
        assert greedy_decide(-4, 14, self.cfg).accepted

    def test_overflow(self):
        assert greedy_decide(10, 1, self.cfg) == Decision(False, Reason.INFEASIBLE)

    def test_room_to_spare(self):
        assert greedy_decide(0, -1, self.cfg) == Decision(True, Reason.FITS)


class TestApply:
    cfg = validate_config(B=10, m=14)

    def test_accept(self):
        assert apply(3, -2, Decision(True, Reason.FITS), self.cfg) == 1

    def test_reject_is_identity(self):
        assert apply(1, -5, Decision(False, Reason.INFEASIBLE), self.cfg) == 1

    def test_accept_to_boundary(self):
        assert apply(-4, 14, Decision(True, Reason.FITS), self.cfg) == 10

    def test_violation(self):
        with pytest.raises(PostconditionViolation):
            apply(5, 6, Decision(True, Reason.FITS), self.cfg)


def test_decision_consistency():
    with pytest.raises(ValueError):
        Decision(True, Reason.INFEASIBLE)
    with pytest.raises(ValueError):
        Decision(False, Reason.OPPOSITE_SIGN)
    for r in Reason:
        assert Decision.from_code(int(r)).reason is r


def test_check_item():
    cfg = validate_config(B=10, m=3)
    assert check_item(-3, cfg) == -3
    for bad in (0.5, 3.5, -4):
        with pytest.raises(ValueError):
            check_item(bad, cfg)


def test_policy_kind():
    assert PolicyKind("exp") is PolicyKind.EXP
    assert PolicyKind.GREEDY.code != PolicyKind.EXP.code
