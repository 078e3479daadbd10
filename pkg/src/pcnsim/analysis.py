"""Executable versions of the competitive-analysis quantities for EXP.

* ``U_0 = 1, U_{n+1} = U_n * exp(1/U_n)`` and its two-sided bound.
* ``s_hat``, the largest state at which EXP still accepts a unit item.
* The potential ``phi = d / f(s_alg)`` where ``d = 2B - s_ref`` if
  ``s_alg >= 0`` else ``2B + s_ref``, and an auditor checking
  ``16 ln B * alg_gain >= ref_gain + delta_phi`` step by step.
"""

from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import kernels
from .core import ChannelConfig, ConfigError, exp_decide, threshold_f
from .errors import TraceMismatch

SLACK = 1e-9
MAX_SERIES_N = 10 ** 7

_series_lock = threading.Lock()
_series_cache = np.array([1.0])


def series_array(n: int) -> np.ndarray:
    """``U_0 .. U_n`` as a read-only array (memoized, grows on demand)."""
    global _series_cache
    if n < 0 or n > MAX_SERIES_N:
        raise ValueError(f"n must be in [0, {MAX_SERIES_N}]")
    cache = _series_cache
    if cache.shape[0] <= n:
        with _series_lock:
            if _series_cache.shape[0] <= n:
                # Small requests still fill a reasonable prefix to amortize calls.
                arr = kernels.K.series(max(n, 1024))
                arr.setflags(write=False)
                _series_cache = arr
            cache = _series_cache
    return cache[: n + 1]


def series_u(n: int) -> float:
    return float(series_array(n)[n])


def series_bounds(n):
    """``(n + ln(n+1)/2, n + ln(n+1)/2 + 3)``; vectorizes over arrays."""
    lower = n + 0.5 * np.log1p(n)
    if np.ndim(lower) == 0:
        lower = float(lower)
    return lower, lower + 3


@dataclass(frozen=True)
class SeriesPoint:
    n: int
    u_n: float
    lower: float
    upper: float


def series_point(n: int) -> SeriesPoint:
    lo, hi = series_bounds(n)
    return SeriesPoint(n, series_u(n), lo, hi)


def max_accept_state(cfg: ChannelConfig) -> float:
    """``s_hat = B (1 - ln ln B / ln B)``, where ``f(s_hat) = 1``."""
    B = cfg.capacity_B
    return B * (1 - math.log(math.log(B)) / math.log(B))


def max_acceptance_walk(cfg: ChannelConfig, sign: int = 1, limit: int = 10 ** 6) -> np.ndarray:
    """States of EXP fed the largest acceptable item ``min(m, f(s))`` from 0.

    Stops once that size drops below 1. Returns ``s_0 = 0, s_1, ..., s_p``.
    """
    s = 0.0
    states = [s]
    for _ in range(limit):
        size = min(cfg.max_item_m, threshold_f(s, cfg))
        if size < 1:
            break
        x = sign * size
        if not exp_decide(s, x, cfg).accepted:
            break
        s += x
        states.append(s)
    return np.array(states)


def _d(alg_s, ref_s, B):
    return np.where(np.asarray(alg_s) >= 0, 2 * B - ref_s, 2 * B + ref_s)


def potential_phi(alg_s, ref_s, cfg: ChannelConfig):
    B, b = cfg.capacity_B, cfg.b
    phi = _d(alg_s, ref_s, B) / (b * np.exp(-np.abs(alg_s) / b))
    return float(phi) if np.ndim(phi) == 0 else phi


@dataclass(frozen=True)
class PotentialRecord:
    step: int
    alg_state_before: float
    alg_state_after: float
    ref_state_before: float
    ref_state_after: float
    phi_before: float
    phi_after: float
    alg_gain: int
    ref_gain: int


@dataclass
class AuditReport:
    alg_before: np.ndarray
    alg_after: np.ndarray
    ref_before: np.ndarray
    ref_after: np.ndarray
    phi_before: np.ndarray
    phi_after: np.ndarray
    alg_gain: np.ndarray
    ref_gain: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    passed_steps: np.ndarray
    factor: float

    def __len__(self):
        return self.lhs.shape[0]

    @property
    def passed(self) -> bool:
        return bool(self.passed_steps.all())

    @property
    def first_violation(self) -> int | None:
        bad = np.flatnonzero(~self.passed_steps)
        return int(bad[0]) + 1 if bad.size else None

    def record(self, i: int) -> PotentialRecord:
        """Record for 1-based step ``i``."""
        k = i - 1
        return PotentialRecord(i, float(self.alg_before[k]), float(self.alg_after[k]),
                               float(self.ref_before[k]), float(self.ref_after[k]),
                               float(self.phi_before[k]), float(self.phi_after[k]),
                               int(self.alg_gain[k]), int(self.ref_gain[k]))

    def records(self) -> Iterator[PotentialRecord]:
        for i in range(1, len(self) + 1):
            yield self.record(i)

    def summed_check(self, beta: float) -> bool:
        """``factor * ALG + beta >= REF`` over the whole sequence."""
        return self.factor * self.alg_gain.sum() + beta + SLACK >= self.ref_gain.sum()

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "alg_gain", "ref_gain", "phi_before", "phi_after", "lhs", "rhs", "pass"])
        for k in range(len(self)):
            w.writerow([k + 1, int(self.alg_gain[k]), int(self.ref_gain[k]),
                        f"{self.phi_before[k]:.9g}", f"{self.phi_after[k]:.9g}",
                        f"{self.lhs[k]:.9g}", f"{self.rhs[k]:.9g}", int(self.passed_steps[k])])
        return buf.getvalue()


def potential_audit(alg_trace, ref_trace, cfg: ChannelConfig) -> AuditReport:
    """Check the per-step potential inequality of EXP against a reference trace.

    ``ref_trace`` may be any feasible trace over the same items, not only an
    optimal one.
    """
    if not cfg.guarantee_mode:
        raise ConfigError("potential audit requires m <= B / ln B")
    if len(alg_trace) != len(ref_trace) or not np.array_equal(alg_trace.amounts, ref_trace.amounts):
        raise TraceMismatch("traces cover different item sequences")
    B = cfg.capacity_B
    if np.any(np.abs(ref_trace.states) > B + kernels.TOL):
        raise ValueError("reference trace leaves [-B, B]")
    a_before, a_after = alg_trace.states_before, alg_trace.states
    r_before, r_after = ref_trace.states_before, ref_trace.states
    phi_b = np.asarray(potential_phi(a_before, r_before, cfg), dtype=np.float64)
    phi_a = np.asarray(potential_phi(a_after, r_after, cfg), dtype=np.float64)
    factor = 16 * math.log(B)
    ag = alg_trace.accepted.astype(np.int64)
    rg = ref_trace.accepted.astype(np.int64)
    lhs = factor * ag
    rhs = rg + phi_a - phi_b
    return AuditReport(a_before, a_after, r_before, r_after, phi_b, phi_a, ag, rg,
                       lhs, rhs, lhs >= rhs - SLACK, factor)
