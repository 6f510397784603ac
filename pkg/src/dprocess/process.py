"""Core simulator for the degree-constrained random edge process.

One run starts from the empty graph on ``n`` vertices and repeatedly adds an
edge chosen uniformly at random among all pairs of non-adjacent vertices of
degree at most ``d-1``, until ``floor(d*n/2)`` edges are present or no valid
pair remains (the run then freezes, "stuck").

Sampling strategy: two distinct uniform draws from the unsaturated-vertex
index with rejection of already-adjacent pairs.  This is exactly uniform on
valid pairs and costs O(1) expected time away from the end of the run.  When
the unsaturated set is small (<= SMALL_ENUM) or after MAX_REJECT consecutive
rejections, valid pairs are enumerated explicitly, which guarantees
termination and exact stuck detection.

The accepted pair is put into uniformly random order with one extra draw;
downstream diagnostics rely on that ordering.

All counter updates are exact.  `S[j]` counts vertices of degree at most j
(j = 0..d-1); a vertex moving from degree c to c+1 leaves exactly the class
`S[c]`, so `sum(S) == d*n - 2*i` holds after every step.

A faster compiled kernel (see ``kernel.py``) implements the identical
algorithm with the identical draw sequence; ``run()`` dispatches there by
default and is bit-for-bit reproducible either way.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ParameterError, ProcessStuckError
from .rng import SplitMix64

SMALL_ENUM = 64     # enumerate valid pairs when |unsat| <= this
MAX_REJECT = 256    # rejection attempts before falling back to enumeration

TRAJECTORY_SCHEMA = "dprocess-trajectory/1"


@dataclass(frozen=True)
class ProcessParams:
    n: int
    d: int
    seed: int

    def __post_init__(self):
        if not (isinstance(self.n, int) and isinstance(self.d, int)):
            raise ParameterError("n and d must be integers")
        if self.n < 2:
            raise ParameterError(f"n must be >= 2, got {self.n}")
        if self.d < 1:
            raise ParameterError(f"d must be >= 1, got {self.d}")
        if self.d >= self.n:
            raise ParameterError(f"need d < n, got d={self.d}, n={self.n}")
        if not (0 <= self.seed < (1 << 64)):
            raise ParameterError("seed must fit in an unsigned 64-bit integer")

    @property
    def max_edges(self) -> int:
        return (self.d * self.n) // 2


@dataclass(frozen=True)
class EdgeAdded:
    """A successful step; (u, v) is the pair in its random emission order."""
    u: int
    v: int
    deg_u_before: int
    deg_v_before: int


@dataclass(frozen=True)
class Stuck:
    """No valid pair existed; the process is frozen from here on."""


StepEvent = EdgeAdded | Stuck


@dataclass
class TrajectoryRecord:
    params: ProcessParams
    T: list[int | None]                       # hitting step of S[l] == 0, l = 0..d-2
    checkpoints: list[tuple[int, tuple[int, ...]]]
    final_edges: int
    stuck: bool

    def to_json_dict(self) -> dict:
        return {
            "schema": TRAJECTORY_SCHEMA,
            "n": self.params.n,
            "d": self.params.d,
            "seed": self.params.seed,
            "T": list(self.T),
            "checkpoints": [[i, list(s)] for i, s in self.checkpoints],
            "final_edges": self.final_edges,
            "stuck": self.stuck,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TrajectoryRecord":
        if obj.get("schema") != TRAJECTORY_SCHEMA:
            raise ParameterError(f"unknown trajectory schema: {obj.get('schema')!r}")
        return cls(
            params=ProcessParams(obj["n"], obj["d"], obj["seed"]),
            T=[None if t is None else int(t) for t in obj["T"]],
            checkpoints=[(int(i), tuple(int(x) for x in s)) for i, s in obj["checkpoints"]],
            final_edges=int(obj["final_edges"]),
            stuck=bool(obj["stuck"]),
        )


class ProcessState:
    """Mutable state of one run.  Single-threaded during use."""

    __slots__ = ("params", "i", "deg", "nbrs", "unsat", "pos", "S", "stuck", "rng")

    def __init__(self, params: ProcessParams):
        n, d = params.n, params.d
        self.params = params
        self.i = 0
        self.deg = [0] * n
        self.nbrs = [[-1] * d for _ in range(n)]
        self.unsat = list(range(n))
        self.pos = list(range(n))
        self.S = [n] * d
        self.stuck = False
        self.rng = SplitMix64(params.seed)

    # -- queries ---------------------------------------------------------

    def adjacent(self, u: int, v: int) -> bool:
        du = self.deg[u]
        row = self.nbrs[u]
        for k in range(du):
            if row[k] == v:
                return True
        return False

    def valid_pairs(self) -> list[tuple[int, int]]:
        """All currently addable pairs, sorted by vertex id (diagnostic)."""
        un = sorted(self.unsat)
        out = []
        for a in range(len(un)):
            for b in range(a + 1, len(un)):
                if not self.adjacent(un[a], un[b]):
                    out.append((un[a], un[b]))
        return out

    def clone(self, reseed: int | None = None) -> "ProcessState":
        """Deep copy; optionally restart the RNG stream from ``reseed``."""
        c = object.__new__(ProcessState)
        c.params = self.params
        c.i = self.i
        c.deg = self.deg[:]
        c.nbrs = [row[:] for row in self.nbrs]
        c.unsat = self.unsat[:]
        c.pos = self.pos[:]
        c.S = self.S[:]
        c.stuck = self.stuck
        c.rng = SplitMix64(reseed) if reseed is not None else SplitMix64(0)
        if reseed is None:
            c.rng.state = self.rng.state
        return c

    # -- mutation --------------------------------------------------------

    def add_edge(self, u: int, v: int) -> None:
        """Deterministic edge insertion for tests and diagnostics."""
        if u == v:
            raise ParameterError("loop edge")
        if self.deg[u] >= self.params.d or self.deg[v] >= self.params.d:
            raise ParameterError("endpoint already saturated")
        if self.adjacent(u, v):
            raise ParameterError("edge already present")
        self._apply_edge(u, v)

    def _apply_edge(self, u: int, v: int) -> None:
        d = self.params.d
        self.nbrs[u][self.deg[u]] = v
        self.nbrs[v][self.deg[v]] = u
        for w in (u, v):
            c = self.deg[w]
            self.S[c] -= 1
            self.deg[w] = c + 1
            if c == d - 1:
                # swap-remove from the unsaturated index
                p = self.pos[w]
                last = self.unsat[-1]
                self.unsat[p] = last
                self.pos[last] = p
                self.unsat.pop()
                self.pos[w] = -1
        self.i += 1
        assert self.S[d - 1] == len(self.unsat)
        assert sum(self.S) == d * self.params.n - 2 * self.i

    def _enumerate_pick(self) -> tuple[int, int] | None:
        """Pick uniformly among valid pairs by explicit enumeration.

        Pair order follows the internal unsaturated index so the compiled
        kernel can reproduce the draw exactly.  Consumes one bounded-uniform
        draw, or none when no pair exists.
        """
        un = self.unsat
        m = len(un)
        pairs = []
        for a in range(m):
            ua = un[a]
            for b in range(a + 1, m):
                if not self.adjacent(ua, un[b]):
                    pairs.append((ua, un[b]))
        if not pairs:
            return None
        return pairs[self.rng.randbelow(len(pairs))]

    def step(self) -> StepEvent:
        """Add one uniformly random valid edge, or freeze if none exists."""
        if self.stuck:
            raise ProcessStuckError("process is stuck; no further steps")
        d = self.params.d
        m = self.S[d - 1]
        pair: tuple[int, int] | None = None
        if m <= SMALL_ENUM:
            pair = self._enumerate_pick()
        else:
            attempts = 0
            while attempts < MAX_REJECT:
                a = self.rng.randbelow(m)
                b = self.rng.randbelow(m)
                if a != b:
                    u, v = self.unsat[a], self.unsat[b]
                    if not self.adjacent(u, v):
                        pair = (u, v)
                        break
                attempts += 1
            if pair is None:
                pair = self._enumerate_pick()
        if pair is None:
            self.stuck = True
            return Stuck()
        u, v = pair
        if self.rng.next_bit():
            u, v = v, u
        ev = EdgeAdded(u, v, self.deg[u], self.deg[v])
        self._apply_edge(u, v)
        return ev


def new_process(params: ProcessParams) -> ProcessState:
    """Empty-graph initial state: i=0, all degrees 0, S[j]=n for all j."""
    return ProcessState(params)


def run_python(
    params: ProcessParams,
    checkpoint_schedule: list[int] | tuple[int, ...] = (),
    tail_start: int = -1,
    tail_degree: int = 0,
) -> tuple[TrajectoryRecord, list[int], int]:
    """Reference implementation of a full run.

    Returns ``(record, tail_bits, tail_L)``.  When ``tail_start >= 0``, every
    step with index >= tail_start appends two bits (one per picked vertex in
    emission order; 1 iff the vertex had degree exactly ``tail_degree`` just
    before the pick) and ``tail_L`` is ``S[tail_degree]`` when the window
    opened.
    """
    schedule = sorted(set(int(x) for x in checkpoint_schedule))
    if schedule and (schedule[0] < 0 or schedule[-1] > params.max_edges):
        raise ParameterError("checkpoint indices must lie in [0, floor(d*n/2)]")
    state = new_process(params)
    d = params.d
    T: list[int | None] = [None] * max(0, d - 1)
    checkpoints: list[tuple[int, tuple[int, ...]]] = []
    sched_ptr = 0
    bits: list[int] = []
    tail_L = -1

    while sched_ptr < len(schedule) and schedule[sched_ptr] == 0:
        checkpoints.append((0, tuple(state.S)))
        sched_ptr += 1

    max_edges = params.max_edges
    while state.i < max_edges:
        if tail_start >= 0 and state.i >= tail_start and tail_L < 0:
            tail_L = state.S[tail_degree]
        ev = state.step()
        if isinstance(ev, Stuck):
            break
        if tail_start >= 0 and state.i - 1 >= tail_start:
            bits.append(1 if ev.deg_u_before == tail_degree else 0)
            bits.append(1 if ev.deg_v_before == tail_degree else 0)
        for el in range(d - 1):
            if T[el] is None and state.S[el] == 0:
                T[el] = state.i
        while sched_ptr < len(schedule) and schedule[sched_ptr] == state.i:
            checkpoints.append((state.i, tuple(state.S)))
            sched_ptr += 1
    if tail_start >= 0 and tail_L < 0 and state.i >= tail_start:
        tail_L = state.S[tail_degree]

    record = TrajectoryRecord(
        params=params,
        T=T,
        checkpoints=checkpoints,
        final_edges=state.i,
        stuck=state.stuck,
    )
    return record, bits, tail_L


def run(
    params: ProcessParams,
    checkpoint_schedule: list[int] | tuple[int, ...] = (),
    backend: str = "auto",
) -> TrajectoryRecord:
    """Run one trajectory to saturation or freeze.

    Deterministic function of ``(params.seed, checkpoint_schedule)``; the
    compiled and pure-Python backends produce identical records.
    """
    record, _, _ = run_full(params, checkpoint_schedule, backend=backend)
    return record


def run_full(
    params: ProcessParams,
    checkpoint_schedule: list[int] | tuple[int, ...] = (),
    tail_start: int = -1,
    tail_degree: int = 0,
    backend: str = "auto",
) -> tuple[TrajectoryRecord, list[int], int]:
    """Like ``run`` but also returns tail bits (see ``run_python``)."""
    if backend not in ("auto", "python", "compiled"):
        raise ParameterError(f"unknown backend {backend!r}")
    if tail_start >= 0 and not (0 <= tail_degree <= params.d - 1):
        raise ParameterError("tail_degree must be in [0, d-1]")
    if backend == "python":
        return run_python(params, checkpoint_schedule, tail_start, tail_degree)
    from . import kernel
    if kernel.AVAILABLE:
        return kernel.run_compiled(params, checkpoint_schedule, tail_start, tail_degree)
    if backend == "compiled":
        raise ParameterError("compiled kernel unavailable (numba not importable)")
    return run_python(params, checkpoint_schedule, tail_start, tail_degree)


@dataclass
class EdgeClassCounts:
    """Edge counts by (sorted) endpoint-degree class, both endpoints <= d-1."""
    d: int
    Z: list[list[int]] = field(default_factory=list)
    Z_total: int = 0


def edge_class_counts(state: ProcessState) -> EdgeClassCounts:
    """Recompute the per-degree-class edge counts by scanning all edges."""
    d = state.params.d
    Z = [[0] * d for _ in range(d)]
    total = 0
    for u in range(state.params.n):
        du = state.deg[u]
        for k in range(du):
            v = state.nbrs[u][k]
            if v <= u:
                continue
            dv = state.deg[v]
            if du <= d - 1 and dv <= d - 1:
                j1, j2 = min(du, dv), max(du, dv)
                Z[j1][j2] += 1
                total += 1
    return EdgeClassCounts(d=d, Z=Z, Z_total=total)
