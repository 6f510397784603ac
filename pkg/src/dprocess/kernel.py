"""Compiled fast path for full runs.

Implements exactly the algorithm of ``process.py`` (same splitmix64 stream,
same draw order, same enumeration fallback) on flat numpy arrays, so records
are bit-identical between backends.  Equivalence is enforced by tests.

If numba is not importable the module degrades gracefully: ``AVAILABLE`` is
False and ``process.run`` falls back to the reference implementation.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .process import (
    MAX_REJECT,
    SMALL_ENUM,
    ProcessParams,
    TrajectoryRecord,
)

try:
    from numba import njit

    AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    AVAILABLE = False

    def njit(*args, **kwargs):
        def deco(f):
            return f
        return deco(args[0]) if args and callable(args[0]) else deco


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S63 = np.uint64(63)
_U0 = np.uint64(0)


@njit(cache=True, inline="always")
def _next_u64(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    z = z ^ (z >> _S31)
    return state, z


@njit(cache=True, inline="always")
def _randbelow(state, bound):
    threshold = (_U0 - bound) % bound
    while True:
        state, v = _next_u64(state)
        if v >= threshold:
            return state, v % bound


def rng_draws(seed: int, count: int, bound: int):
    """Debug surface: raw stream and bounded draws for cross-checking."""
    return _rng_draws(np.uint64(seed), count, np.int64(bound))


@njit(cache=True)
def _rng_draws(seed, count, bound):
    state = np.uint64(seed)
    raw = np.empty(count, np.uint64)
    below = np.empty(count, np.uint64)
    for k in range(count):
        state, z = _next_u64(state)
        raw[k] = z
    for k in range(count):
        state, z = _randbelow(state, np.uint64(bound))
        below[k] = z
    return raw, below


@njit(cache=True)
def _enum_pick(state, unsat, m, deg, nbrs):
    pu = np.empty(m * (m - 1) // 2, np.int32)
    pv = np.empty(m * (m - 1) // 2, np.int32)
    cnt = 0
    for a in range(m):
        ua = unsat[a]
        da = deg[ua]
        for b in range(a + 1, m):
            vb = unsat[b]
            adj = False
            for k in range(da):
                if nbrs[ua, k] == vb:
                    adj = True
                    break
            if not adj:
                pu[cnt] = ua
                pv[cnt] = vb
                cnt += 1
    if cnt == 0:
        return state, -1, -1
    state, idx = _randbelow(state, np.uint64(cnt))
    j = np.int64(idx)
    return state, int(pu[j]), int(pv[j])


@njit(cache=True)
def _run_kernel(n, d, seed, schedule, tail_start, tail_k, T_out, cp_S, bits):
    deg = np.zeros(n, np.int32)
    nbrs = np.full((n, d), -1, np.int32)
    unsat = np.empty(n, np.int32)
    pos = np.empty(n, np.int32)
    for v in range(n):
        unsat[v] = v
        pos[v] = v
    S = np.full(d, n, np.int64)

    state = np.uint64(seed)
    max_edges = (d * n) // 2
    i = 0
    sched_ptr = 0
    n_cp = 0
    n_bits = 0
    tail_L = np.int64(-1)
    stuck = False

    while sched_ptr < schedule.shape[0] and schedule[sched_ptr] == 0:
        for j in range(d):
            cp_S[n_cp, j] = S[j]
        n_cp += 1
        sched_ptr += 1

    while i < max_edges:
        if tail_start >= 0 and i >= tail_start and tail_L < 0:
            tail_L = S[tail_k]
        m = int(S[d - 1])
        u = -1
        v = -1
        if m <= SMALL_ENUM:
            state, u, v = _enum_pick(state, unsat, m, deg, nbrs)
        else:
            attempts = 0
            while attempts < MAX_REJECT:
                state, a64 = _randbelow(state, np.uint64(m))
                state, b64 = _randbelow(state, np.uint64(m))
                a = np.int64(a64)
                b = np.int64(b64)
                if a != b:
                    uu = unsat[a]
                    vv = unsat[b]
                    adj = False
                    for k in range(deg[uu]):
                        if nbrs[uu, k] == vv:
                            adj = True
                            break
                    if not adj:
                        u = int(uu)
                        v = int(vv)
                        break
                attempts += 1
            if u < 0:
                state, u, v = _enum_pick(state, unsat, m, deg, nbrs)
        if u < 0:
            stuck = True
            break
        state, z = _next_u64(state)
        if z >> _S63:
            u, v = v, u
        du_before = deg[u]
        dv_before = deg[v]

        nbrs[u, du_before] = v
        nbrs[v, dv_before] = u
        for t in range(2):
            w = u if t == 0 else v
            c = deg[w]
            S[c] -= 1
            deg[w] = c + 1
            if c == d - 1:
                p = pos[w]
                last = unsat[S[d - 1]]
                unsat[p] = last
                pos[last] = p
                pos[w] = -1
        i += 1

        if tail_start >= 0 and i - 1 >= tail_start:
            bits[n_bits] = 1 if du_before == tail_k else 0
            bits[n_bits + 1] = 1 if dv_before == tail_k else 0
            n_bits += 2
        for el in range(d - 1):
            if T_out[el] < 0 and S[el] == 0:
                T_out[el] = i
        while sched_ptr < schedule.shape[0] and schedule[sched_ptr] == i:
            for j in range(d):
                cp_S[n_cp, j] = S[j]
            n_cp += 1
            sched_ptr += 1

    if tail_start >= 0 and tail_L < 0 and i >= tail_start:
        tail_L = S[tail_k]
    return i, stuck, n_cp, n_bits, tail_L


def run_compiled(
    params: ProcessParams,
    checkpoint_schedule=(),
    tail_start: int = -1,
    tail_degree: int = 0,
) -> tuple[TrajectoryRecord, list[int], int]:
    n, d = params.n, params.d
    schedule = sorted(set(int(x) for x in checkpoint_schedule))
    if schedule and (schedule[0] < 0 or schedule[-1] > params.max_edges):
        raise ParameterError("checkpoint indices must lie in [0, floor(d*n/2)]")
    sched = np.asarray(schedule, np.int64)
    T_out = np.full(max(0, d - 1), -1, np.int64)
    cp_S = np.zeros((len(schedule), d), np.int64)
    if tail_start >= 0:
        if tail_start > params.max_edges:
            raise ParameterError("tail window starts beyond the last step")
        bits = np.zeros(2 * (params.max_edges - tail_start), np.uint8)
    else:
        bits = np.zeros(0, np.uint8)

    final_edges, stuck, n_cp, n_bits, tail_L = _run_kernel(
        n, d, np.uint64(params.seed), sched, tail_start, tail_degree, T_out, cp_S, bits
    )
    record = TrajectoryRecord(
        params=params,
        T=[None if t < 0 else int(t) for t in T_out],
        checkpoints=[(schedule[k], tuple(int(x) for x in cp_S[k])) for k in range(n_cp)],
        final_edges=int(final_edges),
        stuck=bool(stuck),
    )
    return record, [int(b) for b in bits[:n_bits]], int(tail_L)
