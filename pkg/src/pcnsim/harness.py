"""Running policies, competitive reports, and the lower-bound Monte Carlo."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence as Seq

import numpy as np

from . import kernels
from .core import ChannelConfig, Decision, PolicyKind, Reason, TOL, apply, decide, validate_config
from .errors import PostconditionViolation
from .generators import PiNConfig, Sequence, derive_seed, gen_pi_n, pi_params
from .oracle import offline_opt_count, phase_off_strategy

# Constants of the additive competitive bound  c*ALG + beta >= OPT.
RATIO_FACTOR = 16.0  # multiplied by ln B


@dataclass
class RunTrace:
    policy: str
    amounts: np.ndarray
    accepted: np.ndarray
    states: np.ndarray
    reasons: np.ndarray
    s0: float = 0.0

    def __len__(self):
        return self.amounts.shape[0]

    @property
    def cumulative_gain(self) -> np.ndarray:
        return np.cumsum(self.accepted, dtype=np.int64)

    @property
    def final_gain(self) -> int:
        return int(self.accepted.sum())

    @property
    def states_before(self) -> np.ndarray:
        return np.concatenate([[self.s0], self.states[:-1]]) if len(self) else np.zeros(0)

    def steps(self) -> Iterator[tuple[float, Decision, float, int]]:
        gains = self.cumulative_gain
        for i in range(len(self)):
            yield float(self.amounts[i]), Decision.from_code(self.reasons[i]), float(self.states[i]), int(gains[i])

    def replay(self, cfg: ChannelConfig) -> np.ndarray:
        """Re-apply the recorded decisions one by one; returns the state trace."""
        s = self.s0
        out = np.empty(len(self))
        for i, (item, dec, _, _) in enumerate(self.steps()):
            s = apply(s, item, dec, cfg)
            out[i] = s
        return out


def run_policy(policy: PolicyKind | str, seq: Sequence, cfg: ChannelConfig) -> RunTrace:
    policy = PolicyKind(policy)
    amounts = seq.amounts
    if len(amounts) == 0:
        empty = np.zeros(0)
        return RunTrace(policy.value, amounts, empty.astype(bool), empty, empty.astype(np.int8), cfg.s0)
    reasons, states = kernels.K.run_policy(amounts, cfg.capacity_B, cfg.b, float(cfg.s0), policy.code)
    if np.any(np.abs(states) > cfg.capacity_B + TOL):
        i = int(np.argmax(np.abs(states) > cfg.capacity_B + TOL))
        raise PostconditionViolation(f"{policy.value} left [-B, B] at step {i}")
    return RunTrace(policy.value, amounts, reasons < kernels.THRESHOLD_REJECT, states, reasons, cfg.s0)


def run_policy_stepwise(policy: PolicyKind | str, seq: Sequence, cfg: ChannelConfig) -> RunTrace:
    """Scalar reference path through core.decide/apply; slow, used for cross-checks."""
    n = len(seq)
    accepted = np.zeros(n, dtype=bool)
    states = np.empty(n)
    reasons = np.empty(n, dtype=np.int8)
    s = cfg.s0
    for i, x in enumerate(seq.amounts):
        d = decide(policy, s, x, cfg)
        s = apply(s, x, d, cfg)
        accepted[i], states[i], reasons[i] = d.accepted, s, int(d.reason)
    return RunTrace(PolicyKind(policy).value, seq.amounts, accepted, states, reasons, cfg.s0)


def trace_from_mask(seq: Sequence, mask: np.ndarray, cfg: ChannelConfig, policy: str = "reference") -> RunTrace:
    mask = np.asarray(mask, dtype=bool)
    states = cfg.s0 + np.cumsum(np.where(mask, seq.amounts, 0.0))
    reasons = np.where(mask, int(Reason.FITS), int(Reason.INFEASIBLE)).astype(np.int8)
    return RunTrace(policy, seq.amounts, mask, states, reasons, cfg.s0)


@dataclass
class CompetitiveReport:
    policy: str
    alg_gain: int
    opt_gain: int
    strict_ratio: float
    ratio_infinite: bool
    additive_bound_check: bool

    def row(self) -> dict:
        return {
            "policy": self.policy,
            "alg_gain": self.alg_gain,
            "opt_gain": self.opt_gain,
            "strict_ratio": "inf" if self.ratio_infinite else f"{self.strict_ratio:.9g}",
            "additive_bound_ok": int(self.additive_bound_check),
        }


def additive_bound_holds(alg: int, opt: int, B: float) -> bool:
    return RATIO_FACTOR * math.log(B) * alg + 4 * B + 1e-9 >= opt


def competitive_report(seq: Sequence, cfg: ChannelConfig, policy: PolicyKind | str) -> CompetitiveReport:
    trace = run_policy(policy, seq, cfg)
    opt = offline_opt_count(seq, cfg)
    alg = trace.final_gain
    ratio = opt / alg if alg else math.inf
    return CompetitiveReport(trace.policy, alg, opt, ratio, alg == 0,
                             additive_bound_holds(alg, opt, cfg.capacity_B))


@dataclass
class PolicyLB:
    policy: str
    mean_phase_gain: float
    se: float
    det_bound_ok: bool
    det_bound_corrected_ok: bool
    empirical_ratio: float
    ratio_se: float
    ratio_ok: bool


@dataclass
class LBReport:
    B: float
    m: float
    q: int
    batch_count: int
    num_phases: int
    trials: int
    det_bound: float
    det_bound_corrected: float
    off_mean_phase_gain: float
    off_se: float
    off_lower_bound_ok: bool
    policies: list[PolicyLB] = field(default_factory=list)
    # per-trial totals, kept for tests
    off_totals: np.ndarray | None = None
    off_required: np.ndarray | None = None
    policy_totals: dict = field(default_factory=dict)

    def policy(self, name: str) -> PolicyLB:
        return next(p for p in self.policies if p.policy == name)


def _trial(args):
    B, m, n, seed, policies = args
    seq = gen_pi_n(PiNConfig(B, m, n, seed))
    cfg = validate_config(B=B, m=m, s0=0.0)
    zs = seq.meta["z"]
    off = phase_off_strategy(seq, cfg).accepted_count
    gains = [run_policy(p, seq, cfg).final_gain for p in policies]
    return off, int(np.sum(2 ** zs)), gains


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.shape[0] < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.shape[0]))


def _ratio_se(num: np.ndarray, den: np.ndarray) -> float:
    """Delta-method standard error of mean(num) / mean(den)."""
    k = num.shape[0]
    mu_n, mu_d = num.mean(), den.mean()
    if k < 2 or mu_d == 0:
        return math.inf if mu_d == 0 else 0.0
    r = mu_n / mu_d
    cov = np.cov(num, den, ddof=1)
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (mu_d ** 2 * k)
    return float(math.sqrt(max(var, 0.0)))


def monte_carlo_lb(pcfg: PiNConfig, trials: int,
                   policies: Seq[PolicyKind | str] = (PolicyKind.EXP, PolicyKind.GREEDY),
                   jobs: int = 1) -> LBReport:
    """Sample ``trials`` inputs from the hard distribution and score each policy.

    Trial ``k`` uses ``derive_seed(pcfg.seed, k)``; results do not depend on
    ``jobs``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    q, batch = pi_params(pcfg.B, pcfg.m)
    names = [PolicyKind(p).value for p in policies]
    args = [(pcfg.B, pcfg.m, pcfg.n, derive_seed(pcfg.seed, k), names) for k in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial, args, chunksize=max(1, trials // (4 * jobs))))
    else:
        results = [_trial(a) for a in args]

    num_phases = 2 * pcfg.n
    off = np.array([r[0] for r in results], dtype=np.float64)
    sum_2z = np.array([r[1] for r in results], dtype=np.float64)
    required = pcfg.B * 2.0 ** (-q - 1) * sum_2z
    det_bound = pcfg.B * 2.0 ** (-q + 1)
    det_bound_corrected = pcfg.B * 2.0 ** (-q + 2)
    per_phase = max(num_phases, 1)
    off_mean, off_se = _mean_se(off / per_phase)

    report = LBReport(
        B=pcfg.B, m=pcfg.m, q=q, batch_count=batch, num_phases=num_phases, trials=trials,
        det_bound=det_bound, det_bound_corrected=det_bound_corrected,
        off_mean_phase_gain=off_mean, off_se=off_se,
        off_lower_bound_ok=bool(np.all(off >= required - 1e-9)),
        off_totals=off, off_required=required,
    )
    for j, name in enumerate(names):
        totals = np.array([r[2][j] for r in results], dtype=np.float64)
        report.policy_totals[name] = totals
        mean, se = _mean_se(totals / per_phase)
        ratio = off.mean() / totals.mean() if totals.mean() > 0 else math.inf
        rse = _ratio_se(off, totals)
        report.policies.append(PolicyLB(
            policy=name,
            mean_phase_gain=mean,
            se=se,
            det_bound_ok=mean <= det_bound + 3 * se,
            det_bound_corrected_ok=mean <= det_bound_corrected + 3 * se,
            empirical_ratio=ratio,
            ratio_se=rse,
            ratio_ok=ratio >= q / 4 - 3 * rse,
        ))
    return report


def flip_decision(trace: RunTrace, seq: Sequence, cfg: ChannelConfig, step: int) -> RunTrace:
    """EXP trace with decision ``step`` (0-based) inverted, EXP resuming afterwards.

    Used to check that the potential auditor notices a wrong decision.
    """
    accepted = trace.accepted.copy()
    states = trace.states.copy()
    reasons = trace.reasons.copy()
    s = float(trace.states_before[step])
    x = float(seq.amounts[step])
    accepted[step] = not accepted[step]
    reasons[step] = int(Reason.FITS if accepted[step] else Reason.THRESHOLD_REJECT)
    s = s + x if accepted[step] else s
    states[step] = s
    for i in range(step + 1, len(seq)):
        d = decide(trace.policy, s, seq.amounts[i], cfg)
        s = apply(s, seq.amounts[i], d)
        accepted[i], states[i], reasons[i] = d.accepted, s, int(d.reason)
    return RunTrace(trace.policy, trace.amounts, accepted, states, reasons, trace.s0)
