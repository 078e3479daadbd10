"""Channel state machine and the two online admission policies.

A channel is a knapsack whose signed state ``s`` must stay within
``[-B, B]``. Items are signed amounts with ``1 <= |amount| <= m``. States and
items are plain floats here; :class:`KnapsackState` exists for callers that
want a typed wrapper but every function also accepts a bare number.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Union

from . import kernels
from .errors import ConfigError, PostconditionViolation

MIN_CAPACITY = 4.01
TOL = kernels.TOL


class PolicyKind(str, enum.Enum):
    EXP = "exp"
    GREEDY = "greedy"

    @property
    def code(self) -> int:
        return kernels.POLICY_EXP if self is PolicyKind.EXP else kernels.POLICY_GREEDY


class Reason(enum.IntEnum):
    OPPOSITE_SIGN = kernels.OPPOSITE_SIGN
    BELOW_THRESHOLD = kernels.BELOW_THRESHOLD
    FITS = kernels.FITS
    THRESHOLD_REJECT = kernels.THRESHOLD_REJECT
    INFEASIBLE = kernels.INFEASIBLE

    @property
    def accepts(self) -> bool:
        return self < Reason.THRESHOLD_REJECT


@dataclass(frozen=True)
class Decision:
    accepted: bool
    reason: Reason

    def __post_init__(self):
        if self.accepted != self.reason.accepts:
            raise ValueError(f"reason {self.reason.name} inconsistent with accepted={self.accepted}")

    @classmethod
    def from_code(cls, code: int) -> "Decision":
        reason = Reason(int(code))
        return cls(reason.accepts, reason)


@dataclass(frozen=True)
class ChannelConfig:
    """Capacity ``B``, largest item size ``m`` and initial state ``s0``.

    Build instances with :func:`validate_config`; the constructor itself does
    not check anything.
    """

    capacity_B: float
    max_item_m: float
    initial_state_s0: float = 0.0

    @property
    def b(self) -> float:
        return self.capacity_B / math.log(self.capacity_B)

    @property
    def guarantee_mode(self) -> bool:
        return self.max_item_m <= self.b

    @property
    def B(self) -> float:
        return self.capacity_B

    @property
    def m(self) -> float:
        return self.max_item_m

    @property
    def s0(self) -> float:
        return self.initial_state_s0


@dataclass(frozen=True)
class KnapsackState:
    s: float

    def __float__(self):
        return float(self.s)


State = Union[float, int, KnapsackState]


def validate_config(raw: Mapping[str, float] | None = None, **kwargs) -> ChannelConfig:
    """Check ``{B, m, s0}`` and return a :class:`ChannelConfig`.

    Accepts a mapping with keys ``B``, ``m`` and optionally ``s0``, or the
    same names as keyword arguments.
    """
    params = dict(raw or {})
    params.update(kwargs)
    try:
        B = float(params["B"])
        m = float(params["m"])
    except KeyError as exc:
        raise ConfigError(f"missing config field {exc.args[0]!r}") from None
    s0 = float(params.get("s0", 0.0))
    for name, value in (("B", B), ("m", m), ("s0", s0)):
        if not math.isfinite(value):
            raise ConfigError(f"{name} must be finite, got {value}")
    if B < MIN_CAPACITY:
        raise ConfigError(f"capacity B={B} is below the minimum of {MIN_CAPACITY}")
    if m < 1 or m > 2 * B:
        raise ConfigError(f"max item size m={m} must lie in [1, 2B] = [1, {2 * B}]")
    if abs(s0) > B:
        raise ConfigError(f"initial state s0={s0} outside [-B, B]")
    return ChannelConfig(B, m, s0)


def check_item(amount: float, cfg: ChannelConfig) -> float:
    a = abs(amount)
    if not (1 - TOL <= a <= cfg.max_item_m + TOL):
        raise ValueError(f"item {amount} outside [1, m={cfg.max_item_m}] in absolute value")
    return float(amount)


def threshold_f(s: State, cfg: ChannelConfig) -> float:
    """Acceptance threshold ``b * exp(-|s| / b)``."""
    b = cfg.b
    return b * math.exp(-abs(float(s)) / b)


def exp_decide(state: State, item: float, cfg: ChannelConfig) -> Decision:
    s = float(state)
    x = float(item)
    if s * x < 0:
        reason = Reason.OPPOSITE_SIGN
    elif abs(x) <= threshold_f(s, cfg):
        reason = Reason.BELOW_THRESHOLD
    else:
        return Decision(False, Reason.THRESHOLD_REJECT)
    # Only reachable outside guarantee mode.
    if abs(s + x) > cfg.capacity_B + TOL:
        return Decision(False, Reason.INFEASIBLE)
    return Decision(True, reason)


def greedy_decide(state: State, item: float, cfg: ChannelConfig) -> Decision:
    s = float(state)
    if abs(s + float(item)) <= cfg.capacity_B + TOL:
        return Decision(True, Reason.FITS)
    return Decision(False, Reason.INFEASIBLE)


def decide(policy: PolicyKind | str, state: State, item: float, cfg: ChannelConfig) -> Decision:
    policy = PolicyKind(policy)
    if policy is PolicyKind.EXP:
        return exp_decide(state, item, cfg)
    return greedy_decide(state, item, cfg)


def apply(state: State, item: float, decision: Decision, cfg: ChannelConfig | None = None) -> float:
    """Return the state after ``decision`` on ``item``.

    With ``cfg`` given, an accepted item that leaves ``[-B, B]`` raises
    :class:`PostconditionViolation`.
    """
    s = float(state)
    if not decision.accepted:
        return s
    new = s + float(item)
    if cfg is not None and abs(new) > cfg.capacity_B + TOL:
        raise PostconditionViolation(
            f"accepting {item} at state {s} gives {new}, outside [-{cfg.capacity_B}, {cfg.capacity_B}]"
        )
    return new
