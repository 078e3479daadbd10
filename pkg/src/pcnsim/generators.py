"""Input sequences: uniform traffic and the two adversarial constructions.

Randomness is numpy's PCG64 seeded through ``SeedSequence``. Sub-streams are
derived by :func:`derive_seed`, which hashes ``(master, *keys)`` through
``SeedSequence`` entropy mixing; the same rule is used for per-phase draws in
:func:`gen_pi_n` and per-trial seeds in the Monte Carlo harness.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ChannelConfig
from .errors import ConfigError, DivisibilityError, ModelError, RangeError


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for ``(master, *keys)``."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class Sequence:
    """Ordered item amounts plus optional per-item phase tags.

    Tag arrays are aligned with ``amounts``. ``phase_index`` is 1-based,
    ``level`` is the batch exponent ``j`` (item size ``2**(q - j)``).
    """

    amounts: np.ndarray
    phase_index: Optional[np.ndarray] = None
    phase_sign: Optional[np.ndarray] = None
    phase_z: Optional[np.ndarray] = None
    level: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.amounts = np.asarray(self.amounts, dtype=np.float64)

    def __len__(self):
        return self.amounts.shape[0]

    @property
    def annotated(self) -> bool:
        return self.phase_index is not None

    def is_integer(self) -> bool:
        a = self.amounts
        return bool(np.all(np.isfinite(a)) and np.all(a == np.round(a)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["index", "amount"]
        if self.phase_index is not None:
            header.append("phase_index")
        if self.phase_z is not None:
            header.append("phase_z")
        w.writerow(header)
        for i, a in enumerate(self.amounts):
            row = [i, f"{a:.9g}"]
            if self.phase_index is not None:
                row.append(int(self.phase_index[i]))
            if self.phase_z is not None:
                row.append(int(self.phase_z[i]))
            w.writerow(row)
        return buf.getvalue()


def concat(parts: list[Sequence]) -> Sequence:
    if not parts:
        return Sequence(np.empty(0))

    def cat(name):
        arrays = [getattr(p, name) for p in parts]
        if any(a is None for a in arrays):
            return None
        return np.concatenate(arrays)

    return Sequence(
        np.concatenate([p.amounts for p in parts]),
        phase_index=cat("phase_index"),
        phase_sign=cat("phase_sign"),
        phase_z=cat("phase_z"),
        level=cat("level"),
    )


def gen_uniform(cfg: ChannelConfig, count: int, range_mode: str = "guarantee",
                sign_mode: str = "signed", seed: int = 0, integer: bool = False) -> Sequence:
    """I.i.d. uniform amounts on ``[1, B]`` (full) or ``[1, B/ln B]`` (guarantee).

    The upper end is additionally capped at ``m`` so every item is valid for
    ``cfg``. ``integer=True`` draws integers uniformly from ``1..floor(hi)``.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if range_mode == "full":
        hi = cfg.capacity_B
    elif range_mode == "guarantee":
        hi = cfg.b
    else:
        raise ValueError(f"unknown range_mode {range_mode!r}")
    hi = min(hi, cfg.max_item_m)
    rng = np.random.default_rng(seed)
    if integer:
        top = max(1, math.floor(hi + 1e-12))
        amounts = rng.integers(1, top, size=count, endpoint=True).astype(np.float64)
    else:
        amounts = rng.uniform(1.0, hi, size=count)
    if sign_mode == "signed":
        signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        amounts = amounts * signs
    elif sign_mode != "positive":
        raise ValueError(f"unknown sign_mode {sign_mode!r}")
    return Sequence(amounts, meta={"range_mode": range_mode, "sign_mode": sign_mode, "seed": seed})


def gen_greedy_adversary(cfg: ChannelConfig, num_phases: int) -> Sequence:
    """Phases of big items then unit items that make greedy m times worse.

    Phase 1 issues ``B/m`` items of ``+m`` then ``B`` items of ``+1``; later
    phases issue ``2B/m`` of ``+-m`` then ``2B`` of ``+-1``, negative on even
    phases.
    """
    B, m = cfg.capacity_B, cfg.max_item_m
    if B != int(B) or m != int(m):
        raise DivisibilityError("greedy adversary needs integer B and m")
    B, m = int(B), int(m)
    if B % m:
        raise DivisibilityError(f"m={m} does not divide B={B}")
    if cfg.initial_state_s0 != 0:
        raise ConfigError("greedy adversary assumes s0 = 0")
    parts = []
    for phase in range(1, num_phases + 1):
        sign = 1.0 if phase % 2 else -1.0
        width = B if phase == 1 else 2 * B
        amounts = np.concatenate([np.full(width // m, sign * m), np.full(width, sign)])
        parts.append(Sequence(amounts, phase_index=np.full(amounts.shape[0], phase, dtype=np.int64)))
    return concat(parts)


def pi_params(B: float, m: float) -> tuple[int, int]:
    """``(q, batch_count)`` with ``q = floor(log2(m/2))`` and ``batch = ceil(2B / 2**q)``."""
    if m < 4:
        raise ModelError(f"lower-bound construction needs m >= 4, got m={m}")
    if m > 2 * B:
        raise ModelError(f"m={m} exceeds 2B={2 * B}")
    q = int(math.floor(math.log2(m / 2)))
    # guard against log2 rounding either way
    while 2 ** (q + 1) <= m / 2:
        q += 1
    while 2 ** q > m / 2:
        q -= 1
    batch = int(math.ceil(2 * B / 2 ** q))
    return q, batch


def z_probabilities(q: int) -> np.ndarray:
    """``P(z = i) = 2**-i / (1 - 2**-q)`` for ``i = 1..q``."""
    i = np.arange(1, q + 1)
    return 2.0 ** -i / (1 - 2.0 ** -q)


def draw_z(q: int, u: float) -> int:
    """Inverse-CDF draw of a phase duration from a uniform ``u`` in [0, 1)."""
    cdf = np.cumsum(z_probabilities(q))
    return int(min(np.searchsorted(cdf, u, side="right"), q - 1)) + 1


def gen_phase(q: int, batch_count: int, z: int, sign: int = 1, phase_index: int = 1) -> Sequence:
    """Levels ``j = 1..z``: ``2**j * batch_count`` items of size ``sign * 2**(q-j)``."""
    if not 1 <= z <= q:
        raise RangeError(f"phase duration z={z} outside [1, q={q}]")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    levels = np.concatenate([np.full((2 ** j) * batch_count, j, dtype=np.int64) for j in range(1, z + 1)])
    amounts = sign * (2.0 ** (q - levels))
    n = amounts.shape[0]
    return Sequence(
        amounts,
        phase_index=np.full(n, phase_index, dtype=np.int64),
        phase_sign=np.full(n, sign, dtype=np.int64),
        phase_z=np.full(n, z, dtype=np.int64),
        level=levels,
    )


@dataclass(frozen=True)
class PiNConfig:
    B: float
    m: float
    n: int
    seed: int = 0


def gen_pi_n(pcfg: PiNConfig) -> Sequence:
    """One draw from the hard distribution: ``2n`` phases alternating ``+, -``.

    Phase ``t`` draws its duration from its own stream, seeded with
    ``derive_seed(seed, t)``.
    """
    q, batch = pi_params(pcfg.B, pcfg.m)
    parts = []
    zs = []
    for t in range(1, 2 * pcfg.n + 1):
        u = np.random.default_rng(derive_seed(pcfg.seed, t)).random()
        z = draw_z(q, u)
        zs.append(z)
        parts.append(gen_phase(q, batch, z, 1 if t % 2 else -1, phase_index=t))
    seq = concat(parts)
    seq.meta.update(q=q, batch_count=batch, z=np.array(zs, dtype=np.int64), seed=pcfg.seed)
    return seq
