"""Hot inner loops, compiled with numba when available.

Every kernel is written once inside ``_build`` and instantiated twice: with
``numba.njit`` and with the identity decorator. The identity build is the
pure-numpy fallback; kernels that vectorize well (the offline DP) get a
dedicated numpy implementation instead of the scalar loop.

The active backend is chosen at import time from ``PCNSIM_BACKEND``
(``numba`` or ``numpy``). When the variable is unset, numba is used if it
imports. ``backend(name)`` returns either namespace explicitly, which is what
the parity tests and the benchmark use.
"""

import math
import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

# Reason codes; order matches core.Reason.
OPPOSITE_SIGN = 0
BELOW_THRESHOLD = 1
FITS = 2
THRESHOLD_REJECT = 3
INFEASIBLE = 4

POLICY_EXP = 0
POLICY_GREEDY = 1

# Absolute slack on the |s| <= B boundary test.
TOL = 1e-9

# Unreachable marker for the DP; adding item counts never lifts it above zero.
_UNREACHABLE = -(1 << 40)

# Outcomes of one network transfer.
OUT_ACCEPTED = 0
OUT_REJECTED = 1
OUT_UNROUTABLE = 2


def _identity(fn):
    return fn


def _build(jit):
    @jit
    def decide(s, x, B, b, policy):
        if policy == POLICY_EXP:
            if s * x < 0.0:
                code = OPPOSITE_SIGN
            elif abs(x) <= b * math.exp(-abs(s) / b):
                code = BELOW_THRESHOLD
            else:
                return THRESHOLD_REJECT
            if abs(s + x) > B + TOL:
                return INFEASIBLE
            return code
        if abs(s + x) <= B + TOL:
            return FITS
        return INFEASIBLE

    @jit
    def run_policy(amounts, B, b, s0, policy):
        n = amounts.shape[0]
        reasons = np.empty(n, dtype=np.int8)
        states = np.empty(n, dtype=np.float64)
        s = s0
        for i in range(n):
            code = decide(s, amounts[i], B, b, policy)
            reasons[i] = code
            if code < THRESHOLD_REJECT:
                s = s + amounts[i]
            states[i] = s
        return reasons, states

    @jit
    def greedy_filtered(amounts, eligible, B, s0):
        n = amounts.shape[0]
        accepted = np.zeros(n, dtype=np.bool_)
        states = np.empty(n, dtype=np.float64)
        s = s0
        for i in range(n):
            if eligible[i] and abs(s + amounts[i]) <= B + TOL:
                accepted[i] = True
                s = s + amounts[i]
            states[i] = s
        return accepted, states

    @jit
    def random_feasible(amounts, B, s0, accept_prob, uniforms):
        n = amounts.shape[0]
        accepted = np.zeros(n, dtype=np.bool_)
        s = s0
        for i in range(n):
            if uniforms[i] < accept_prob and abs(s + amounts[i]) <= B + TOL:
                accepted[i] = True
                s = s + amounts[i]
        return accepted

    @jit
    def dp_count(amounts, B, s0):
        width = 2 * B + 1
        val = np.full(width, _UNREACHABLE, dtype=np.int64)
        nxt = np.empty(width, dtype=np.int64)
        val[s0 + B] = 0
        for i in range(amounts.shape[0]):
            a = amounts[i]
            for k in range(width):
                best = val[k]
                j = k - a
                if 0 <= j < width:
                    cand = val[j] + 1
                    if cand > best:
                        best = cand
                nxt[k] = best
            val, nxt = nxt, val
        return val.max()

    @jit
    def dp_choices(amounts, B, s0):
        n = amounts.shape[0]
        width = 2 * B + 1
        val = np.full(width, _UNREACHABLE, dtype=np.int64)
        nxt = np.empty(width, dtype=np.int64)
        take = np.zeros((n, width), dtype=np.bool_)
        val[s0 + B] = 0
        for i in range(n):
            a = amounts[i]
            for k in range(width):
                best = val[k]
                j = k - a
                if 0 <= j < width:
                    cand = val[j] + 1
                    if cand > best:
                        best = cand
                        take[i, k] = True
                nxt[k] = best
            val, nxt = nxt, val
        return val, take

    @jit
    def series(n):
        u = np.empty(n + 1, dtype=np.float64)
        u[0] = 1.0
        for i in range(n):
            # U * expm1(1/U) is the increment; adding it avoids cancellation.
            u[i + 1] = u[i] + u[i] * math.expm1(1.0 / u[i])
        return u

    @jit
    def bfs_route(indptr, nbr, eid, hmin, hlim, src, dst, amount, path_nodes, path_edges):
        """Hop-count shortest path, lexicographically smallest node sequence.

        Returns the number of edges written to path_edges, or -1 if none.
        """
        n = indptr.shape[0] - 1
        dist = np.full(n, -1, dtype=np.int64)
        queue = np.empty(n, dtype=np.int64)
        dist[dst] = 0
        queue[0] = dst
        head = 0
        tail = 1
        found = src == dst
        while head < tail and not found:
            u = queue[head]
            head += 1
            for j in range(indptr[u], indptr[u + 1]):
                e = eid[j]
                if amount < hmin[e] or amount > hlim[e]:
                    continue
                v = nbr[j]
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    if v == src:
                        found = True
                        break
                    queue[tail] = v
                    tail += 1
        if not found:
            return -1
        cur = src
        k = 0
        path_nodes[0] = src
        while cur != dst:
            want = dist[cur] - 1
            for j in range(indptr[cur], indptr[cur + 1]):
                e = eid[j]
                if amount < hmin[e] or amount > hlim[e]:
                    continue
                v = nbr[j]
                if dist[v] == want:
                    path_edges[k] = e
                    k += 1
                    path_nodes[k] = v
                    cur = v
                    break
        return k

    @jit
    def request_cap(indptr, eid, node_a, hmax, Be, balances, src, dst):
        """Sender-side and receiver-side knowledge of the largest sendable amount."""
        sender = 0.0
        for j in range(indptr[src], indptr[src + 1]):
            e = eid[j]
            direction = 1.0 if node_a[e] == src else -1.0
            room = Be[e] - direction * balances[e]
            if hmax[e] < room:
                room = hmax[e]
            if room > sender:
                sender = room
        receiver = 0.0
        for j in range(indptr[dst], indptr[dst + 1]):
            e = eid[j]
            lim = hmax[e] if hmax[e] < Be[e] else Be[e]
            if lim > receiver:
                receiver = lim
        return min(sender, receiver)

    @jit
    def transfer(path_nodes, path_edges, length, node_a, Be, be, balances, amount, policy):
        """Atomic multi-hop admission; returns the 1-based rejecting hop or 0."""
        for k in range(length):
            e = path_edges[k]
            x = amount if node_a[e] == path_nodes[k] else -amount
            code = decide(float(balances[e]), float(x), Be[e], be[e], policy)
            if code >= THRESHOLD_REJECT:
                return k + 1
        for k in range(length):
            e = path_edges[k]
            if node_a[e] == path_nodes[k]:
                balances[e] += amount
            else:
                balances[e] -= amount
        return 0

    @jit
    def simulate(indptr, nbr, eid, node_a, hmin, hmax, hlim, Be, be, balances,
                 uniforms, policy, guarantee, resample_limit):
        n_nodes = indptr.shape[0] - 1
        count = uniforms.shape[0]
        outcome = np.empty(count, dtype=np.int8)
        amounts = np.zeros(count, dtype=np.int64)
        lengths = np.zeros(count, dtype=np.int64)
        hops = np.zeros(count, dtype=np.int64)
        exhausted = np.zeros(count, dtype=np.bool_)
        path_nodes = np.empty(n_nodes, dtype=np.int64)
        path_edges = np.empty(n_nodes, dtype=np.int64)
        for r in range(count):
            src = min(int(uniforms[r, 0] * n_nodes), n_nodes - 1)
            dst = min(int(uniforms[r, 1] * (n_nodes - 1)), n_nodes - 2)
            if dst >= src:
                dst += 1
            outcome[r] = OUT_UNROUTABLE
            cap = math.floor(request_cap(indptr, eid, node_a, hmax, Be, balances, src, dst))
            if cap < 1:
                exhausted[r] = True
                continue
            hi = cap
            if guarantee and cap > 1:
                hi = min(cap, math.ceil(cap / math.log(cap)))
            length = -1
            amount = 0
            for t in range(resample_limit + 1):
                amount = min(1 + int(uniforms[r, 2 + t] * hi), hi)
                length = bfs_route(indptr, nbr, eid, hmin, hlim, src, dst, amount,
                                   path_nodes, path_edges)
                if length >= 0:
                    break
            if length < 0:
                exhausted[r] = True
                continue
            amounts[r] = amount
            lengths[r] = length
            hop = transfer(path_nodes, path_edges, length, node_a, Be, be, balances,
                           amount, policy)
            hops[r] = hop
            outcome[r] = OUT_ACCEPTED if hop == 0 else OUT_REJECTED
        return outcome, amounts, lengths, hops, exhausted

    return SimpleNamespace(
        decide=decide,
        run_policy=run_policy,
        greedy_filtered=greedy_filtered,
        random_feasible=random_feasible,
        dp_count=dp_count,
        dp_choices=dp_choices,
        series=series,
        bfs_route=bfs_route,
        request_cap=request_cap,
        transfer=transfer,
        simulate=simulate,
    )


def _np_dp_step(val, a):
    shifted = np.full_like(val, _UNREACHABLE)
    if a >= 0:
        shifted[a:] = val[: val.shape[0] - a] + 1
    else:
        shifted[:a] = val[-a:] + 1
    better = shifted > val
    return np.where(better, shifted, val), better


def _np_dp_count(amounts, B, s0):
    val = np.full(2 * B + 1, _UNREACHABLE, dtype=np.int64)
    val[s0 + B] = 0
    for a in amounts:
        val, _ = _np_dp_step(val, int(a))
    return val.max()


def _np_dp_choices(amounts, B, s0):
    val = np.full(2 * B + 1, _UNREACHABLE, dtype=np.int64)
    val[s0 + B] = 0
    take = np.zeros((amounts.shape[0], 2 * B + 1), dtype=np.bool_)
    for i, a in enumerate(amounts):
        val, take[i] = _np_dp_step(val, int(a))
    return val, take


_BACKENDS = {}


def backend(name):
    """Return the kernel namespace for ``"numba"`` or ``"numpy"``."""
    if name not in _BACKENDS:
        if name == "numba":
            if numba is None:
                raise RuntimeError("numba backend requested but numba is not installed")
            _BACKENDS[name] = _build(numba.njit(cache=True))
        elif name == "numpy":
            ns = _build(_identity)
            ns.dp_count = _np_dp_count
            ns.dp_choices = _np_dp_choices
            _BACKENDS[name] = ns
        else:
            raise ValueError(f"unknown backend {name!r}")
    return _BACKENDS[name]


def available_backends():
    return ["numba", "numpy"] if numba is not None else ["numpy"]


BACKEND = os.environ.get("PCNSIM_BACKEND", "numba" if numba is not None else "numpy")
K = backend(BACKEND)
