"""Late-window string diagnostics.

Over the last ~ln(n)^(d-0.8-k) steps the process removes its final vertices
of degree k.  Recording, per picked vertex (in the random emission order),
whether it had degree exactly k just before its pick yields a binary string
whose law is close to a uniform truncation: drop L ones into 2J slots
uniformly and read a prefix.  Under that model the chance that all L ones
land in a prefix of p slots is C(p, L) / C(2J, L), which approaches e^-r
when the prefix leaves an r*J/L-step suffix uncovered.  ``tail_law_report``
compares the process frequency, the truncation-model prediction, and e^-r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateSampleError, ParameterError, TailWindowError
from .process import ProcessParams, run_full
from .stats import TestReport
from .theory import phase_bounds


@dataclass(frozen=True)
class TailSequence:
    k: int                       # target degree class
    n: int
    d: int
    seed: int
    t_start: int                 # window opening step (i_before(k))
    t_end: int                   # last step actually executed
    bits: tuple[int, ...]        # 2 bits per step in [t_start, t_end)
    L: int                       # S[k] at t_start
    J: int                       # floor(dn/2) - t_start
    stuck: bool
    s_km1_at_start: int          # S[k-1] at t_start (0 for k = 0)

    @property
    def ones(self) -> int:
        return sum(self.bits)


def extract_tail_sequence(
    params: ProcessParams,
    k: int,
    backend: str = "auto",
    require_clean_start: bool = True,
) -> TailSequence:
    """Run the process and record the degree-k pick string over the final
    window [i_before(k), floor(dn/2)].

    The truncation-model comparison assumes no vertex can *enter* degree k
    inside the window, i.e. S[k-1] = 0 at the window start; with
    ``require_clean_start`` a violating run raises.  (For k = 0 the
    condition is vacuous.)
    """
    d = params.d
    if not (0 <= k <= d - 2):
        raise ParameterError(f"k must be in [0, d-2], got {k} for d={d}")
    bounds = phase_bounds(params.n, params.d)
    t_start = bounds.i_before[k]
    if t_start < 0:
        raise ParameterError(f"instance too small: i_before({k}) = {t_start}")
    record, bits, tail_L = run_full(
        params, (), tail_start=t_start, tail_degree=k, backend=backend
    )
    if record.stuck and record.final_edges < t_start:
        raise TailWindowError(
            f"run froze at step {record.final_edges}, before the window at {t_start}"
        )
    s_km1 = 0
    if k > 0:
        # deterministic replay of the same seed, reading S[k-1] at t_start
        _, _, s_km1 = run_full(
            params, (), tail_start=t_start, tail_degree=k - 1, backend=backend
        )
    if require_clean_start and k > 0 and s_km1 > 0:
        raise TailWindowError(
            f"{s_km1} vertices of degree < {k} remained at the window start; "
            "the truncation comparison does not apply"
        )
    J = params.max_edges - t_start
    return TailSequence(
        k=k,
        n=params.n,
        d=params.d,
        seed=params.seed,
        t_start=t_start,
        t_end=record.final_edges,
        bits=tuple(bits),
        L=tail_L,
        J=J,
        stuck=record.stuck,
        s_km1_at_start=s_km1,
    )


def truncation_model_probability(L: int, J: int, prefix_steps: int) -> float:
    """C(2*prefix_steps, L) / C(2J, L): all L ones inside the prefix under
    the uniform-truncation model."""
    if L < 0 or J < 0 or not (0 <= prefix_steps <= J):
        raise ParameterError("need 0 <= prefix_steps <= J and L, J >= 0")
    if L > 2 * J:
        return 0.0
    if L > 2 * prefix_steps:
        return 0.0
    return math.comb(2 * prefix_steps, L) / math.comb(2 * J, L)


def prefix_steps_for(seq_dn_half: float, t_start: int, J: int, L: int, r: float) -> int:
    """Steps in [t_start, t_end] for t_end = floor(dn/2 - r J / L)."""
    if L <= 0:
        raise DegenerateSampleError("L = 0: no degree-class vertices to place")
    t_end = math.floor(seq_dn_half - r * J / L)
    return max(0, min(J, t_end - t_start))


def tail_law_report(
    sequences: list[TailSequence],
    r: float,
    tolerance: float = 0.1,
) -> TestReport:
    """Compare three numbers over a batch of tail strings:

    (a) empirical frequency that every recorded one sits within the first
        2*(t_end - t_start) bits, with t_end = floor(dn/2 - r J / L) per run
        (conditioning on each run's realized L; runs with L = 0 count as
        vacuous successes, and their model prediction is 1);
    (b) the truncation-model prediction averaged over the observed (L, J);
    (c) e^-r.

    Reports all pairwise absolute gaps; ``passed`` means the largest gap is
    within ``tolerance``.  Stuck runs are excluded (they never place all
    their ones).
    """
    if r <= 0:
        raise ParameterError(f"r must be positive, got {r}")
    usable = [s for s in sequences if not s.stuck]
    if not usable:
        raise ParameterError("no usable (non-stuck) tail sequences")
    if all(s.L == 0 for s in usable):
        raise DegenerateSampleError("every run has L = 0; nothing to test")

    hits = 0
    q_sum = 0.0
    for s in usable:
        dn_half = s.d * s.n / 2
        if s.L == 0:
            hits += 1
            q_sum += 1.0
            continue
        p_steps = prefix_steps_for(dn_half, s.t_start, s.J, s.L, r)
        prefix_ones = sum(s.bits[: 2 * p_steps])
        if prefix_ones == s.L:
            hits += 1
        q_sum += truncation_model_probability(s.L, s.J, p_steps)

    empirical = hits / len(usable)
    q_model = q_sum / len(usable)
    reference = math.exp(-r)
    gaps = {
        "empirical_vs_model": abs(empirical - q_model),
        "empirical_vs_exp": abs(empirical - reference),
        "model_vs_exp": abs(q_model - reference),
    }
    worst = max(gaps.values())
    return TestReport(
        method="tail-law-consistency",
        statistic=worst,
        threshold_or_pvalue=tolerance,
        passed=worst <= tolerance,
        n_samples=len(usable),
        details={
            "r": r,
            "empirical": empirical,
            "truncation_model": q_model,
            "exp_neg_r": reference,
            "gaps": gaps,
            "skipped_stuck": len(sequences) - len(usable),
        },
    )
