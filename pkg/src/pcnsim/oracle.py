"""Offline reference algorithms.

``offline_dp`` is exact on integer instances. ``brute_force_opt`` enumerates
every mask and exists to cross-check it. The two constructive strategies
(complement of greedy, per-phase OFF) are the offline players used in the
lower-bound arguments.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .core import ChannelConfig, TOL
from .errors import InfeasibleComplement, MissingAnnotations, NonIntegerInput, TooLong
from .generators import Sequence
from .kernels import K, POLICY_GREEDY, THRESHOLD_REJECT

BRUTE_FORCE_LIMIT = 22


@dataclass
class OracleResult:
    accepted_count: int
    decision_mask: np.ndarray
    state_trace: np.ndarray

    def to_csv(self, seq: Sequence) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "amount", "accepted", "state_after"])
        for i in range(len(seq)):
            w.writerow([i, f"{seq.amounts[i]:.9g}", int(self.decision_mask[i]), f"{self.state_trace[i]:.9g}"])
        return buf.getvalue()

    def to_trace(self, seq: Sequence, cfg: ChannelConfig, policy: str = "reference"):
        from .harness import trace_from_mask

        return trace_from_mask(seq, self.decision_mask, cfg, policy=policy)


def replay_mask(amounts: np.ndarray, mask: np.ndarray, s0: float) -> np.ndarray:
    return s0 + np.cumsum(np.where(mask, amounts, 0.0))


def _result(amounts, mask, s0) -> OracleResult:
    mask = np.asarray(mask, dtype=bool)
    return OracleResult(int(mask.sum()), mask, replay_mask(amounts, mask, s0))


def _integer_instance(seq: Sequence, cfg: ChannelConfig) -> tuple[np.ndarray, int, int]:
    B, s0 = cfg.capacity_B, cfg.initial_state_s0
    if B != int(B) or s0 != int(s0):
        raise NonIntegerInput(f"DP needs integer B and s0, got B={B}, s0={s0}")
    if not seq.is_integer():
        raise NonIntegerInput("DP needs integer item amounts")
    return seq.amounts.astype(np.int64), int(B), int(s0)


def offline_opt_count(seq: Sequence, cfg: ChannelConfig) -> int:
    """Optimum accepted count only; O(B) memory."""
    amounts, B, s0 = _integer_instance(seq, cfg)
    if amounts.shape[0] == 0:
        return 0
    return int(K.dp_count(amounts, B, s0))


def offline_dp(seq: Sequence, cfg: ChannelConfig) -> OracleResult:
    """Maximum-cardinality feasible mask by DP over the integer states ``[-B, B]``.

    Ties prefer rejecting an item, and among final states with the optimal
    count the lowest state is chosen.
    """
    amounts, B, s0 = _integer_instance(seq, cfg)
    n = amounts.shape[0]
    if n == 0:
        return OracleResult(0, np.zeros(0, dtype=bool), np.zeros(0))
    val, take = K.dp_choices(amounts, B, s0)
    k = int(np.argmax(val))
    mask = np.zeros(n, dtype=bool)
    for i in range(n - 1, -1, -1):
        if take[i, k]:
            mask[i] = True
            k -= amounts[i]
    assert k == s0 + B, "DP backtrack did not return to the initial state"
    res = _result(seq.amounts, mask, cfg.initial_state_s0)
    assert res.accepted_count == int(val.max())
    return res


def brute_force_opt(seq: Sequence, cfg: ChannelConfig) -> OracleResult:
    """Exhaustive search over all ``2**n`` masks (``n <= 22``)."""
    n = len(seq)
    if n > BRUTE_FORCE_LIMIT:
        raise TooLong(f"brute force limited to {BRUTE_FORCE_LIMIT} items, got {n}")
    masks = np.arange(1 << n, dtype=np.int64)
    state = np.full(masks.shape[0], float(cfg.initial_state_s0))
    feasible = np.ones(masks.shape[0], dtype=bool)
    for i in range(n):
        bit = ((masks >> i) & 1).astype(bool)
        state = state + np.where(bit, seq.amounts[i], 0.0)
        feasible &= np.abs(state) <= cfg.capacity_B + TOL
    counts = np.zeros(masks.shape[0], dtype=np.int64)
    for i in range(n):
        counts += (masks >> i) & 1
    counts[~feasible] = -1
    best = int(masks[np.argmax(counts)])
    mask = np.array([(best >> i) & 1 for i in range(n)], dtype=bool)
    return _result(seq.amounts, mask, cfg.initial_state_s0)


def _check_feasible(res: OracleResult, cfg: ChannelConfig) -> bool:
    return bool(np.all(np.abs(res.state_trace) <= cfg.capacity_B + TOL))


def complementary_of_greedy(seq: Sequence, cfg: ChannelConfig) -> OracleResult:
    """Flip every greedy decision; the result must itself stay feasible."""
    if len(seq) == 0:
        return OracleResult(0, np.zeros(0, dtype=bool), np.zeros(0))
    reasons, _ = K.run_policy(seq.amounts, cfg.capacity_B, cfg.b, float(cfg.initial_state_s0), POLICY_GREEDY)
    res = _result(seq.amounts, reasons >= THRESHOLD_REJECT, cfg.initial_state_s0)
    if not _check_feasible(res, cfg):
        bad = int(np.argmax(np.abs(res.state_trace) > cfg.capacity_B + TOL))
        raise InfeasibleComplement(f"complement of greedy leaves [-B, B] at item {bad}")
    return res


def phase_off_strategy(seq: Sequence, cfg: ChannelConfig) -> OracleResult:
    """Per phase, greedily accept only the items of the phase's last level."""
    if seq.level is None or seq.phase_z is None:
        raise MissingAnnotations("phase strategy needs level and phase_z annotations")
    if len(seq) == 0:
        return OracleResult(0, np.zeros(0, dtype=bool), np.zeros(0))
    eligible = seq.level == seq.phase_z
    accepted, states = K.greedy_filtered(seq.amounts, eligible, cfg.capacity_B, float(cfg.initial_state_s0))
    return OracleResult(int(accepted.sum()), accepted, states)


def random_feasible_mask(seq: Sequence, cfg: ChannelConfig, seed: int, accept_prob: float = 0.5) -> OracleResult:
    """A random feasible decision mask: accept with ``accept_prob`` when the item fits."""
    u = np.random.default_rng(seed).random(len(seq))
    mask = K.random_feasible(seq.amounts, cfg.capacity_B, float(cfg.initial_state_s0), accept_prob, u)
    return _result(seq.amounts, mask, cfg.initial_state_s0)
