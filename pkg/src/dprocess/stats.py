"""Statistical primitives for distributional verification.

Small, audit-friendly implementations: the KS distance is the exact sup over
jump points, chi-square thresholds come from the exact inverse distribution,
and independence testing uses seeded permutation nulls instead of asymptotic
formulas (desk-scale sample counts make that cheap and assumption-free).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import chdtri

from .errors import DegenerateSampleError, ParameterError
from .rng import SplitMix64


@dataclass(frozen=True)
class TestReport:
    method: str
    statistic: float
    threshold_or_pvalue: float
    passed: bool
    n_samples: int
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "method": self.method,
                "statistic": self.statistic,
                "threshold_or_pvalue": self.threshold_or_pvalue,
                "passed": self.passed,
                "n_samples": self.n_samples,
                "seed": self.seed,
                "details": self.details,
            },
            sort_keys=True,
        )


def exp_cdf(x: float) -> float:
    """CDF of the unit-mean exponential: 1 - e^-x for x > 0, else 0."""
    if x <= 0.0:
        return 0.0
    return -math.expm1(-x)


def ks_statistic(sample, cdf=exp_cdf) -> float:
    """One-sample KS distance sup_x |F_emp(x) - F(x)|.

    Exact: evaluated at both one-sided gaps of every order statistic.
    """
    xs = sorted(float(v) for v in sample)
    n = len(xs)
    if n == 0:
        raise ParameterError("empty sample")
    if any(not math.isfinite(v) for v in xs):
        raise ParameterError("sample contains non-finite values")
    dist = 0.0
    for i, x in enumerate(xs):
        fx = cdf(x)
        dist = max(dist, abs((i + 1) / n - fx), abs(fx - i / n))
    return dist


def chi_square_gof(observed, probs=None, significance: float = 1e-3,
                   min_expected: float = 5.0) -> TestReport:
    """Goodness-of-fit chi-square against given cell probabilities.

    Cells whose expected count is below ``min_expected`` are pooled into one
    remainder cell (smallest expectation first) so the chi-square reference
    distribution stays valid.  ``passed`` means the statistic is below the
    (1 - significance) quantile at (cells - 1) degrees of freedom.
    """
    obs = [int(c) for c in observed]
    if len(obs) < 2:
        raise DegenerateSampleError("need at least 2 categories")
    if any(c < 0 for c in obs):
        raise ParameterError("negative count")
    total = sum(obs)
    if total <= 0:
        raise DegenerateSampleError("total count is zero")
    if probs is None:
        probs = [1.0 / len(obs)] * len(obs)
    if len(probs) != len(obs):
        raise ParameterError("probs/observed length mismatch")
    if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
        raise ParameterError("probs must be nonnegative and sum to 1")

    expected = [p * total for p in probs]
    order = sorted(range(len(obs)), key=lambda idx: expected[idx])
    keep_o, keep_e = [], []
    pool_o = pool_e = 0.0
    for idx in order:
        if expected[idx] < min_expected:
            pool_o += obs[idx]
            pool_e += expected[idx]
        else:
            keep_o.append(float(obs[idx]))
            keep_e.append(expected[idx])
    if pool_e > 0.0 or pool_o > 0.0:
        keep_o.append(pool_o)
        keep_e.append(pool_e)
    if len(keep_o) < 2:
        raise DegenerateSampleError("too few well-populated cells for a chi-square")

    stat = 0.0
    for o, e in zip(keep_o, keep_e):
        if e == 0.0:
            if o > 0:
                stat = math.inf
            continue
        stat += (o - e) ** 2 / e
    dof = len(keep_o) - 1
    threshold = float(chdtri(dof, significance))
    return TestReport(
        method="chi-square-gof", statistic=stat, threshold_or_pvalue=threshold,
        passed=stat < threshold, n_samples=total,
        details={"significance": significance, "dof": dof},
    )


def chi_square_uniform(counts, significance: float = 1e-3) -> TestReport:
    """Chi-square test of equal cell probabilities."""
    report = chi_square_gof(counts, probs=None, significance=significance,
                            min_expected=0.0)
    return TestReport(
        method="chi-square-uniform", statistic=report.statistic,
        threshold_or_pvalue=report.threshold_or_pvalue, passed=report.passed,
        n_samples=report.n_samples, details=report.details,
    )


def _joint_cdf_distance(rx: np.ndarray, ry: np.ndarray, grid: int) -> float:
    """sup over a rank grid of |joint ECDF - product of marginal ECDFs|."""
    n = rx.shape[0]
    gx = np.minimum((rx * grid) // n, grid - 1)
    gy = np.minimum((ry * grid) // n, grid - 1)
    counts = np.zeros((grid, grid), dtype=np.int64)
    np.add.at(counts, (gx, gy), 1)
    joint = counts.cumsum(axis=0).cumsum(axis=1) / n
    # marginal ECDF at the right edge of each grid cell
    fx = joint[:, -1][:, None]
    fy = joint[-1, :][None, :]
    return float(np.abs(joint - fx * fy).max())


def independence_report(
    x,
    y,
    seed: int = 0,
    n_permutations: int = 500,
    level: float = 0.01,
    grid: int = 128,
) -> TestReport:
    """Permutation test of pairwise independence for paired samples.

    Two statistics are compared against a permutation null (y reshuffled):
    (a) Pearson correlation, two-sided; (b) sup distance between the joint
    empirical CDF and the product of its marginals, evaluated on a rank
    grid.  Passing means neither statistic is extreme: both permutation
    p-values exceed ``level``.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.ndim != 1 or ya.ndim != 1:
        raise ParameterError("samples must be one-dimensional")
    if xa.shape[0] != ya.shape[0]:
        raise ParameterError("paired samples must have equal length")
    n = xa.shape[0]
    if n < 50:
        raise ParameterError(f"need at least 50 pairs, got {n}")
    if not (np.isfinite(xa).all() and np.isfinite(ya).all()):
        raise ParameterError("samples contain non-finite values")
    if n_permutations < 500:
        raise ParameterError("need at least 500 permutations")
    if xa.std() == 0.0 or ya.std() == 0.0:
        raise DegenerateSampleError("constant sample: correlation undefined")

    g = min(grid, n)
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    corr_obs = float(xc @ yc) / denom
    rx = np.argsort(np.argsort(xa)).astype(np.int64)
    ry = np.argsort(np.argsort(ya)).astype(np.int64)
    dist_obs = _joint_cdf_distance(rx, ry, g)

    rng = np.random.Generator(np.random.PCG64(SplitMix64(seed).next_u64()))
    corr_hits = 0
    dist_hits = 0
    for _ in range(n_permutations):
        perm = rng.permutation(n)
        corr_p = float(xc @ yc[perm]) / denom
        if abs(corr_p) >= abs(corr_obs):
            corr_hits += 1
        if _joint_cdf_distance(rx, ry[perm], g) >= dist_obs:
            dist_hits += 1
    p_corr = (1 + corr_hits) / (1 + n_permutations)
    p_dist = (1 + dist_hits) / (1 + n_permutations)
    passed = p_corr > level and p_dist > level
    return TestReport(
        method="independence-permutation",
        statistic=max(abs(corr_obs), dist_obs),
        threshold_or_pvalue=min(p_corr, p_dist),
        passed=passed,
        n_samples=n,
        seed=seed,
        details={
            "pearson": corr_obs,
            "p_pearson": p_corr,
            "joint_cdf_distance": dist_obs,
            "p_joint_cdf": p_dist,
            "level": level,
            "n_permutations": n_permutations,
            "grid": g,
        },
    )
