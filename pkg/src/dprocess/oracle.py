"""Exact distributions for tiny instances by exhaustive enumeration.

Forward dynamic programming over labeled graph states: each level holds a
map {edge set -> exact probability}; transitions spread mass uniformly over
the valid pairs of the state.  Because every vertex-class count S[l] is a
function of the state and is monotone along any trajectory, first-hit times
can be accumulated per transition without tracking paths.

This is the independent ground truth the Monte Carlo runner is checked
against, so it shares no code with the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import GuardError, ParameterError

#: hard instance caps; the state space explodes beyond this
MAX_N = 8
MAX_EDGES = 8

NEVER = "never"


@dataclass(frozen=True)
class EnumerationTable:
    n: int
    d: int
    max_edges: int
    # per l in 0..d-2: {hitting step -> prob}, plus optional NEVER key
    t_dist: tuple[dict, ...]
    final_edges_dist: dict
    p_stuck: Fraction

    def to_json_dict(self) -> dict:
        return {
            "schema": "dprocess-oracle/1",
            "n": self.n,
            "d": self.d,
            "max_edges": self.max_edges,
            "T": [
                {str(k): [v.numerator, v.denominator] for k, v in dist.items()}
                for dist in self.t_dist
            ],
            "final_edges": {
                str(k): [v.numerator, v.denominator]
                for k, v in self.final_edges_dist.items()
            },
            "p_stuck": [self.p_stuck.numerator, self.p_stuck.denominator],
        }


def _degrees(n: int, edges: frozenset) -> list[int]:
    deg = [0] * n
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    return deg


def _s_counts(n: int, d: int, deg: list[int]) -> list[int]:
    s = [0] * d
    for x in deg:
        if x <= d - 1:
            s[x] += 1
    # prefix-accumulate: s[j] = #vertices of degree <= j
    for j in range(1, d):
        s[j] += s[j - 1]
    return s


def _valid_pairs(n: int, d: int, edges: frozenset, deg: list[int]) -> list[tuple[int, int]]:
    out = []
    for u in range(n):
        if deg[u] >= d:
            continue
        for v in range(u + 1, n):
            if deg[v] >= d or (u, v) in edges:
                continue
            out.append((u, v))
    return out


def exact_enumeration(n: int, d: int) -> EnumerationTable:
    """Exact hitting-time / final-size / stuck distributions as rationals."""
    if n < 2 or d < 1 or d >= n:
        raise ParameterError(f"invalid instance n={n}, d={d}")
    max_edges = (d * n) // 2
    if n > MAX_N or max_edges > MAX_EDGES:
        raise GuardError(
            f"instance too large for enumeration: n={n} (max {MAX_N}), "
            f"floor(dn/2)={max_edges} (max {MAX_EDGES})"
        )

    t_dist: list[dict] = [{} for _ in range(max(0, d - 1))]
    final_edges_dist: dict = {}
    p_stuck = Fraction(0)

    level: dict[frozenset, Fraction] = {frozenset(): Fraction(1)}
    i = 0
    while level:
        nxt: dict[frozenset, Fraction] = {}
        for edges, p in level.items():
            deg = _degrees(n, edges)
            pairs = _valid_pairs(n, d, edges, deg)
            if not pairs:
                final_edges_dist[len(edges)] = final_edges_dist.get(len(edges), Fraction(0)) + p
                if len(edges) < max_edges:
                    p_stuck += p
                s_here = _s_counts(n, d, deg)
                for el in range(d - 1):
                    if s_here[el] > 0:
                        t_dist[el][NEVER] = t_dist[el].get(NEVER, Fraction(0)) + p
                continue
            share = p / len(pairs)
            s_old = _s_counts(n, d, deg)
            for u, v in pairs:
                new_edges = edges | {(u, v)}
                nxt[new_edges] = nxt.get(new_edges, Fraction(0)) + share
                deg[u] += 1
                deg[v] += 1
                s_new = _s_counts(n, d, deg)
                deg[u] -= 1
                deg[v] -= 1
                for el in range(d - 1):
                    if s_old[el] > 0 and s_new[el] == 0:
                        t_dist[el][i + 1] = t_dist[el].get(i + 1, Fraction(0)) + share
        level = nxt
        i += 1
        if i > max_edges + 1:
            raise AssertionError("enumeration exceeded the edge budget")

    total = sum(final_edges_dist.values())
    if total != 1:
        raise AssertionError(f"probability mass leak: total={total}")
    return EnumerationTable(
        n=n,
        d=d,
        max_edges=max_edges,
        t_dist=tuple(t_dist),
        final_edges_dist=final_edges_dist,
        p_stuck=p_stuck,
    )
