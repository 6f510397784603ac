"""Deterministic trajectory functions and deviation envelopes.

The scaled vertex-class counts of the process track functions y_j(t), s_j(t)
on t in [0, d/2):

    y_j = y0 * u^j / j!          with u = -ln(y0),
    s_j = y_0 + ... + y_j,
    sum_j (d - j) * y_j = sum_j s_j = d - 2t.

Substituting the first relation into the last gives one transcendental
equation per time point,

    exp(-u) * P(u) = d - 2t,    P(u) = sum_{j<d} u^j (d-j) / j!,

whose left side decreases strictly from d (at u=0) to 0, so the root is
unique.  We solve in u rather than y0: near t = d/2 the value y0 = exp(-u)
underflows doubles long before u misbehaves.  Everything downstream
(envelopes, step-scale evaluation) is closed-form on top of the root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, GuardError, ParameterError

#: refuse t this close to (or beyond) d/2, where the root diverges
DOMAIN_MARGIN = 1e-15

#: switch y_j evaluation to log-domain above this root size
LOG_DOMAIN_U = 30.0

#: bisect the bracket down to this width before polishing with Newton
BISECT_WIDTH = 1e-3


@dataclass(frozen=True)
class TheoryEval:
    """Trajectory functions at one time point."""
    d: int
    t: float
    u: float                      # -ln(y0)
    y: tuple[float, ...]          # y[j]: fraction of vertices of degree j
    s: tuple[float, ...]          # s[j]: fraction of degree <= j
    residual_root: float          # |exp(-u) P(u) - (d - 2t)|
    residual_sum: float           # |sum_j s_j - (d - 2t)|


def _check_domain(d: int, t: float) -> None:
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    if not (0.0 <= t < d / 2 - DOMAIN_MARGIN):
        raise DomainError(f"t={t!r} outside [0, d/2) for d={d}")


def _log_poly_and_ratio(d: int, u: float) -> tuple[float, float]:
    """Return (ln P(u), P'(u)/P(u)) stably for u > 0."""
    # terms in log space: j*ln u + ln(d-j) - ln j!
    lu = math.log(u)
    logs = [j * lu + math.log(d - j) - math.lgamma(j + 1) for j in range(d)]
    mx = max(logs)
    ws = [math.exp(x - mx) for x in logs]
    tot = math.fsum(ws)
    log_p = mx + math.log(tot)
    mean_j = math.fsum(j * w for j, w in enumerate(ws)) / tot
    return log_p, mean_j / u


def _solve_u(d: int, target: float) -> float:
    """Root u of exp(-u) P(u) = target for target in (0, d].

    Bracket [0, u_hi] is grown by doubling, bisected to width 1e-3, then
    polished by Newton on u -> -u + ln P(u); steps escaping the bracket fall
    back to bisection.
    """
    if target >= d:              # t == 0 up to rounding
        return 0.0
    log_target = math.log(target)

    def g(u: float) -> tuple[float, float]:
        # value and derivative of F(u) - ln(target), F = -u + ln P
        log_p, ratio = _log_poly_and_ratio(d, u)
        return -u + log_p - log_target, -1.0 + ratio

    lo = 0.0
    hi = max(1.0, -log_target)
    while g(hi)[0] > 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise GuardError("root bracket expansion failed")
    while hi - lo > BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        if g(mid)[0] > 0.0:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    for _ in range(60):
        val, dval = g(u)
        if val > 0.0:
            lo = u
        else:
            hi = u
        step = val / dval
        nxt = u - step
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - u) <= 1e-16 * (1.0 + abs(u)):
            u = nxt
            break
        u = nxt
    return u


def solve_y0(d: int, t: float) -> tuple[float, float]:
    """Root (y0, u) of the time equation at t; |residual| << 1e-12 * d."""
    _check_domain(d, t)
    u = _solve_u(d, d - 2.0 * t)
    return math.exp(-u), u


def _y_values(d: int, u: float) -> list[float]:
    if u == 0.0:
        return [1.0] + [0.0] * (d - 1)
    if u <= LOG_DOMAIN_U:
        y0 = math.exp(-u)
        out = [y0]
        for j in range(1, d):
            out.append(out[-1] * u / j)
        return out
    lu = math.log(u)
    return [math.exp(-u + j * lu - math.lgamma(j + 1)) for j in range(d)]


def _eval_from_target(d: int, target: float, t: float) -> TheoryEval:
    u = _solve_u(d, target)
    y = _y_values(d, u)
    s = []
    acc = 0.0
    for v in y:
        acc += v
        s.append(acc)
    res_root = abs(math.fsum((d - j) * y[j] for j in range(d)) - target)
    res_sum = abs(math.fsum(s) - target)
    return TheoryEval(d=d, t=t, u=u, y=tuple(y), s=tuple(s),
                      residual_root=res_root, residual_sum=res_sum)


def eval_theory(d: int, t: float) -> TheoryEval:
    """Evaluate (u, y, s) and the defining-equation residuals at t."""
    _check_domain(d, t)
    return _eval_from_target(d, d - 2.0 * t, t)


def eval_theory_at_step(n: int, d: int, i: int) -> TheoryEval:
    """Trajectory functions at step i of an n-vertex process (t = i/n).

    The remaining-mass argument is formed exactly as (dn - 2i)/n, so steps
    within a few units of the last one keep full precision even where
    d - 2*(i/n) would cancel to zero in doubles.
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if not (0 <= 2 * i < d * n):
        raise DomainError(f"step i={i} outside [0, dn/2) for n={n}, d={d}")
    target = (d * n - 2 * i) / n
    if target <= 0.0:
        raise DomainError(f"remaining mass underflows at i={i}, n={n}")
    return _eval_from_target(d, target, i / n)


def asymptotic_sj(d: int, x: float, j: int) -> float:
    """First-order closed form for s_j when x = d - 2t is small:

        (d-1)! * x / (j! * (-ln x)^(d-1-j))

    First-order only: its relative error decays like ln(-ln x)/(-ln x) and
    is still tens of percent at x = 1e-9 for j far below d-1.
    """
    if not (0.0 < x < 1.0):
        raise DomainError("asymptotic form needs 0 < x < 1")
    if not (0 <= j <= d - 1):
        raise ParameterError(f"j must be in [0, d-1], got {j}")
    return math.factorial(d - 1) * x / (math.factorial(j) * (-math.log(x)) ** (d - 1 - j))


# -- independent ODE integration ------------------------------------------


def _ode_rhs(d: int, s: list[float]) -> list[float]:
    sd = s[d - 1]
    return [2.0 * ((s[j - 1] if j > 0 else 0.0) - s[j]) / sd for j in range(d)]


def _rk4_to_grid(d: int, t_grid: list[float], step: float) -> list[list[float]]:
    s = [1.0] * d
    t = 0.0
    out = []
    for tg in t_grid:
        span = tg - t
        if span > 0.0:
            nsub = max(1, math.ceil(span / step))
            h = span / nsub
            for _ in range(nsub):
                k1 = _ode_rhs(d, s)
                k2 = _ode_rhs(d, [s[j] + 0.5 * h * k1[j] for j in range(d)])
                k3 = _ode_rhs(d, [s[j] + 0.5 * h * k2[j] for j in range(d)])
                k4 = _ode_rhs(d, [s[j] + h * k3[j] for j in range(d)])
                s = [s[j] + (h / 6.0) * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j])
                     for j in range(d)]
            t = tg
        out.append(s[:])
    return out


def ode_crosscheck(
    d: int,
    t_grid,
    step: float = 1e-4,
    refine_check: bool = False,
    refine_tol: float = 1e-8,
) -> float:
    """Max |s_j from RK4 - s_j from the implicit root| over the grid.

    The fixed-step classical Runge-Kutta integration never touches the root
    solver, so agreement validates both sides.  With ``refine_check`` the
    integration is repeated at half the step and a disagreement beyond
    ``refine_tol`` raises (step size too large for this grid).
    """
    grid = sorted(float(t) for t in t_grid)
    if not grid:
        raise ParameterError("empty time grid")
    if grid[0] < 0.0:
        raise DomainError("grid times must be nonnegative")
    _check_domain(d, grid[-1])
    if step <= 0.0:
        raise ParameterError("step must be positive")

    ode = _rk4_to_grid(d, grid, step)
    if refine_check:
        fine = _rk4_to_grid(d, grid, step / 2.0)
        drift = max(abs(a[j] - b[j]) for a, b in zip(ode, fine) for j in range(d))
        if drift > refine_tol:
            raise GuardError(
                f"RK4 step {step} too large: halving moves the solution by {drift:.3e}"
            )
    err = 0.0
    for tg, s_ode in zip(grid, ode):
        s_imp = eval_theory(d, tg).s
        for j in range(d):
            err = max(err, abs(s_ode[j] - s_imp[j]))
    return err


# -- envelopes and phase boundaries ----------------------------------------


def i_trans(n: int, d: int) -> int:
    """Last step of the early window: floor(dn/2 - n^(1 - 1/(100d)))."""
    return math.floor(d * n / 2 - n ** (1.0 - 1.0 / (100.0 * d)))


def envelope_first(n: int, d: int, i: int) -> float:
    """Early-window deviation allowance  n^0.6 * (dn / (dn - 2i))^(4d)."""
    if not (0 <= i <= i_trans(n, d)):
        raise DomainError(f"step i={i} outside [0, i_trans] for n={n}, d={d}")
    dn = d * n
    return n ** 0.6 * (dn / (dn - 2 * i)) ** (4 * d)


def envelope_second(n: int, d: int, j: int, k: int, i: int) -> float:
    """Late-window deviation allowance  2^k ln(n)^0.05 (n s_j(i/n))^0.7."""
    bounds = phase_bounds(n, d)
    if not (0 <= k <= j <= d - 1) or k > d - 2:
        raise ParameterError(f"need k <= j <= d-1 and k <= d-2, got j={j}, k={k}")
    lo = bounds.i_trans + 1 if k == 0 else bounds.i_after[k - 1] + 1
    if not (lo <= i <= bounds.i_after[k]):
        raise DomainError(f"step i={i} outside window {k} = [{lo}, {bounds.i_after[k]}]")
    ns_j = n * eval_theory_at_step(n, d, i).s[j]
    return 2.0 ** k * math.log(n) ** 0.05 * ns_j ** 0.7


def i_of_r(n: int, d: int, r: float, ell: int) -> float:
    """Probe step  dn/2 - (ell! / (2 (d-1)!)) * r * ln(n)^(d-1-ell)."""
    if r < 0:
        raise ParameterError(f"r must be >= 0, got {r}")
    if not (0 <= ell <= d - 2):
        raise ParameterError(f"ell must be in [0, d-2], got {ell} for d={d}")
    coef = math.factorial(ell) / (2.0 * math.factorial(d - 1))
    return d * n / 2 - coef * r * math.log(n) ** (d - 1 - ell)


@dataclass(frozen=True)
class EnvelopeParams:
    """All phase boundaries for an (n, d) instance, with formula accessors.

    Window layout over steps i:
      [0, i_trans]                      early window (e_first applies)
      (i_trans, i_after[0]], ...,
      (i_after[k-1], i_after[k]], ...   late windows (4 * e_second applies)
      i_before[k]                       start of the final window for degree k
    """
    n: int
    d: int
    i_trans: int
    i_after: tuple[int, ...]      # index k = 0..d-2
    i_before: tuple[int, ...]     # index k = 0..d-2

    @property
    def well_ordered(self) -> bool:
        seq = (self.i_trans, *self.i_after)
        return all(a < b for a, b in zip(seq, seq[1:])) and (
            not self.i_after or self.i_after[-1] <= (self.d * self.n) // 2
        )

    def e_first(self, i: int) -> float:
        return envelope_first(self.n, self.d, i)

    def e_second(self, j: int, k: int, i: int) -> float:
        return envelope_second(self.n, self.d, j, k, i)

    def i_of_r(self, r: float, ell: int) -> float:
        return i_of_r(self.n, self.d, r, ell)

    def phase_of(self, i: int) -> tuple[str, int | None]:
        """Classify step i: ('first', None), ('second', k) or ('final', None)."""
        if i <= self.i_trans:
            return "first", None
        for k, hi in enumerate(self.i_after):
            if i <= hi:
                return "second", k
        return "final", None


def phase_bounds(n: int, d: int) -> EnvelopeParams:
    """Compute every phase boundary for an (n, d) instance."""
    if n < 2 or d < 1:
        raise ParameterError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    ln = math.log(n)
    after = tuple(math.floor(d * n / 2 - ln ** (d - 1.01 - k)) for k in range(d - 1))
    before = tuple(math.floor(d * n / 2 - ln ** (d - 0.8 - k)) for k in range(d - 1))
    return EnvelopeParams(n=n, d=d, i_trans=i_trans(n, d), i_after=after, i_before=before)
