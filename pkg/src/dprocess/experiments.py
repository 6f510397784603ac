"""Monte Carlo orchestration: seeded trial fan-out, JSONL persistence,
trajectory-envelope auditing, scaled hitting-time variables and probes.

Every result row is a pure function of (row-semantic config, trial index):
per-trial seeds are derived from the master seed by the published mixing
function, so any subset of trials can be re-run bit-identically regardless
of worker count or interruption.  Files are append-only JSON lines with a
header record carrying a hash of the row-semantic config; resume refuses to
append under a different hash.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import ConfigMismatchError, ParameterError
from .process import ProcessParams, TrajectoryRecord, run_full
from .rng import mix_seed
from .stats import TestReport, chi_square_gof, exp_cdf, independence_report, ks_statistic
from .theory import EnvelopeParams, eval_theory, phase_bounds

EXPERIMENT_SCHEMA = "dprocess-experiment/1"

DEFAULT_R_GRID = (0.25, 0.5, 1.0, 2.0)


def scale_hitting_time(T: int, ell: int, n: int, d: int) -> float:
    """Scaled saturation deficit  (d-1)! (dn - 2T) / (ell! ln(n)^(d-1-ell))."""
    if not (0 <= ell <= d - 2):
        raise ParameterError(f"ell must be in [0, d-2], got {ell} for d={d}")
    if not (0 <= T <= d * n / 2):
        raise ParameterError(f"hitting step {T} outside [0, dn/2]")
    return (
        math.factorial(d - 1)
        * (d * n - 2 * T)
        / (math.factorial(ell) * math.log(n) ** (d - 1 - ell))
    )


def default_checkpoints(n: int, d: int, count: int = 64) -> tuple[int, ...]:
    """Default audit schedule: log-spaced over the early window, plus every
    phase boundary (which all sit within polylog(n) of the last step)."""
    bounds = phase_bounds(n, d)
    pts = {0}
    top = bounds.i_trans
    if top >= 1 and count >= 2:
        ratio = top ** (1.0 / (count - 1))
        val = 1.0
        for _ in range(count):
            pts.add(min(top, round(val)))
            val *= ratio
        pts.add(top)
    max_edges = (d * n) // 2
    for b in (*bounds.i_after, *bounds.i_before):
        if 0 <= b <= max_edges:
            pts.add(b)
    return tuple(sorted(pts))


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    d: int
    trials: int
    master_seed: int
    checkpoints: tuple[int, ...] | None = None   # None -> default policy
    n_checkpoints: int = 64
    exclude_stuck: bool = True
    r_grid: tuple[float, ...] = DEFAULT_R_GRID

    def __post_init__(self):
        ProcessParams(self.n, self.d, self.master_seed)  # validate n/d/seed
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if any(r < 0 for r in self.r_grid):
            raise ParameterError("r grid values must be >= 0")

    def resolved_checkpoints(self) -> tuple[int, ...]:
        if self.checkpoints is not None:
            return tuple(sorted(set(int(x) for x in self.checkpoints)))
        return default_checkpoints(self.n, self.d, self.n_checkpoints)

    def row_semantics(self) -> dict:
        """The fields a row's content depends on (trial count excluded)."""
        return {
            "n": self.n,
            "d": self.d,
            "master_seed": self.master_seed,
            "checkpoints": list(self.resolved_checkpoints()),
            "r_grid": list(self.r_grid),
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.row_semantics(), sort_keys=True, separators=(",", ":"))
        return "sha256:" + hashlib.sha256(blob.encode()).hexdigest()

    def to_json_dict(self) -> dict:
        return {
            **self.row_semantics(),
            "trials": self.trials,
            "exclude_stuck": self.exclude_stuck,
        }


@dataclass(frozen=True)
class ResultRow:
    trial: int
    seed: int
    T: tuple[int | None, ...]
    V: tuple[float | None, ...]
    final_edges: int
    stuck: bool
    violations: dict
    zero_at: dict     # {repr(r): [bool per ell]}

    def to_json_dict(self) -> dict:
        return {
            "trial": self.trial,
            "seed": self.seed,
            "T": list(self.T),
            "V": list(self.V),
            "final_edges": self.final_edges,
            "stuck": self.stuck,
            "violations": self.violations,
            "zero_at": {k: list(v) for k, v in self.zero_at.items()},
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ResultRow":
        return cls(
            trial=int(obj["trial"]),
            seed=int(obj["seed"]),
            T=tuple(None if t is None else int(t) for t in obj["T"]),
            V=tuple(None if v is None else float(v) for v in obj["V"]),
            final_edges=int(obj["final_edges"]),
            stuck=bool(obj["stuck"]),
            violations=dict(obj["violations"]),
            zero_at={k: tuple(bool(b) for b in v) for k, v in obj["zero_at"].items()},
        )


@dataclass
class ExperimentBatch:
    config: ExperimentConfig
    rows: list[ResultRow]

    def kept_rows(self) -> list[ResultRow]:
        if self.config.exclude_stuck:
            return [r for r in self.rows if not r.stuck]
        return list(self.rows)


# -- trajectory audits ------------------------------------------------------


@dataclass(frozen=True)
class AuditSummary:
    mode: str
    audited: int                         # (checkpoint, j) pairs examined
    flags: dict                          # {(j, phase_label): violated?}
    counts: dict                         # {phase_label: violation count}
    max_normalized: float                # max |S - n s_j| / envelope
    ignored: tuple[int, ...]             # checkpoint steps outside the mode


@lru_cache(maxsize=65536)
def _ns_at(n: int, d: int, i: int) -> tuple[float, ...]:
    ev = eval_theory(d, i / n)
    return tuple(n * sj for sj in ev.s)


def _e_second_from_ns(n: int, k: int, ns_j: float) -> float:
    return 2.0 ** k * math.log(n) ** 0.05 * ns_j ** 0.7


def audit_trajectory(
    record: TrajectoryRecord,
    mode: str,
    bounds: EnvelopeParams | None = None,
) -> AuditSummary:
    """Check recorded checkpoints against the deviation envelopes.

    mode "first": steps i <= i_trans, all j, allowance e_first(i).
    mode "second": steps in the late windows, j >= window index k,
    allowance 4 * e_second(j, k, i).  Checkpoints outside the mode's windows
    are ignored and reported back.
    """
    if mode not in ("first", "second"):
        raise ParameterError(f"mode must be 'first' or 'second', got {mode!r}")
    n, d = record.params.n, record.params.d
    if bounds is None:
        bounds = phase_bounds(n, d)
    flags: dict = {}
    counts: dict = {}
    ignored: list[int] = []
    audited = 0
    max_norm = 0.0
    for i, S in record.checkpoints:
        phase, k = bounds.phase_of(i)
        if mode == "first":
            if phase != "first":
                ignored.append(i)
                continue
            ns = _ns_at(n, d, i)
            env = bounds.e_first(i)
            label = "first"
            js = range(d)
        else:
            if phase != "second":
                ignored.append(i)
                continue
            ns = _ns_at(n, d, i)
            label = f"I{k}"
            js = range(k, d)
        for j in js:
            env_j = env if mode == "first" else 4.0 * _e_second_from_ns(n, k, ns[j])
            dev = abs(S[j] - ns[j])
            norm = dev / env_j if env_j > 0 else math.inf
            audited += 1
            max_norm = max(max_norm, norm)
            violated = dev > env_j
            key = (j, label)
            flags[key] = flags.get(key, False) or violated
            if violated:
                counts[label] = counts.get(label, 0) + 1
    return AuditSummary(
        mode=mode,
        audited=audited,
        flags=flags,
        counts=counts,
        max_normalized=max_norm,
        ignored=tuple(ignored),
    )


def probe_zero_at(
    record: TrajectoryRecord,
    r: float,
    ell: int,
    n: int | None = None,
    d: int | None = None,
) -> bool:
    """True iff S[ell] had already hit zero by step floor(i(r, ell))."""
    n = record.params.n if n is None else n
    d = record.params.d if d is None else d
    bounds_step = math.floor(phase_bounds(n, d).i_of_r(r, ell))
    t = record.T[ell]
    return t is not None and t <= bounds_step


# -- the batch runner -------------------------------------------------------


def _simulate_trial(args) -> tuple[int, int, list, int, bool, list]:
    n, d, master_seed, trial, schedule = args
    seed = mix_seed(master_seed, trial)
    record, _, _ = run_full(ProcessParams(n, d, seed), schedule)
    return (
        trial,
        seed,
        record.T,
        record.final_edges,
        record.stuck,
        record.checkpoints,
    )


def _build_row(config: ExperimentConfig, bounds: EnvelopeParams, result) -> ResultRow:
    trial, seed, T, final_edges, stuck, checkpoints = result
    n, d = config.n, config.d
    record = TrajectoryRecord(
        params=ProcessParams(n, d, seed),
        T=T,
        checkpoints=checkpoints,
        final_edges=final_edges,
        stuck=stuck,
    )
    V = [
        None if t is None else scale_hitting_time(t, ell, n, d)
        for ell, t in enumerate(T)
    ]
    first = audit_trajectory(record, "first", bounds)
    second = audit_trajectory(record, "second", bounds)
    violations = {"first": sum(first.counts.values())}
    for k in range(max(0, d - 1)):
        violations[f"I{k}"] = second.counts.get(f"I{k}", 0)
    zero_at = {}
    for r in config.r_grid:
        zero_at[repr(float(r))] = tuple(
            probe_zero_at(record, r, ell) for ell in range(max(0, d - 1))
        )
    return ResultRow(
        trial=trial,
        seed=seed,
        T=tuple(T),
        V=tuple(V),
        final_edges=final_edges,
        stuck=stuck,
        violations=violations,
        zero_at=zero_at,
    )


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _read_jsonl(path: str) -> tuple[dict | None, list[dict], int]:
    """Parse header + rows; returns (header, rows, byte offset of last good line).

    A partial trailing line (interrupted write) is tolerated and will be
    truncated away on resume; malformed lines elsewhere are an error.
    """
    header = None
    rows: list[dict] = []
    good_end = 0
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0
    while pos < len(data):
        nl = data.find(b"\n", pos)
        if nl < 0:
            chunk, complete = data[pos:], False
        else:
            chunk, complete = data[pos : nl + 1], True
        try:
            obj = json.loads(chunk.decode())
        except (UnicodeDecodeError, json.JSONDecodeError):
            if complete and nl + 1 < len(data):
                raise ParameterError(f"corrupt results line at byte {pos} in {path}")
            break  # interrupted final write; resume truncates it away
        if header is None:
            if obj.get("schema") != EXPERIMENT_SCHEMA:
                raise ParameterError(f"not an experiment results file: {path}")
            header = obj
        else:
            rows.append(obj)
        pos = nl + 1 if nl >= 0 else len(data)
        good_end = pos
    return header, rows, good_end


def run_experiment(
    config: ExperimentConfig,
    out_path: str,
    workers: int = 1,
) -> ExperimentBatch:
    """Run (or resume) a batch and persist one JSON line per trial.

    Idempotent: trial indices already present in the file are skipped, and
    re-running any trial reproduces its row bit-exactly.
    """
    if workers < 1:
        raise ParameterError("workers must be >= 1")
    schedule = config.resolved_checkpoints()
    bounds = phase_bounds(config.n, config.d)
    want_hash = config.config_hash()

    existing: dict[int, ResultRow] = {}
    mode = "w"
    truncate_to = None
    if os.path.exists(out_path) and os.path.getsize(out_path) > 0:
        header, row_dicts, good_end = _read_jsonl(out_path)
        if header is None:
            raise ParameterError(f"existing file has no header: {out_path}")
        if header.get("config_hash") != want_hash:
            raise ConfigMismatchError(
                f"config hash mismatch for {out_path}: "
                f"file has {header.get('config_hash')}, config is {want_hash}"
            )
        for obj in row_dicts:
            row = ResultRow.from_json_dict(obj)
            existing[row.trial] = row
        mode = "a"
        truncate_to = good_end

    missing = [t for t in range(config.trials) if t not in existing]
    new_rows: list[ResultRow] = []

    if truncate_to is not None:
        with open(out_path, "rb+") as fh:
            fh.seek(0, os.SEEK_END)
            if fh.tell() != truncate_to:
                fh.truncate(truncate_to)

    with open(out_path, mode, encoding="utf-8") as fh:
        if mode == "w":
            fh.write(
                _dump_line(
                    {
                        "schema": EXPERIMENT_SCHEMA,
                        "config": config.to_json_dict(),
                        "config_hash": want_hash,
                    }
                )
            )
        args = [(config.n, config.d, config.master_seed, t, schedule) for t in missing]

        def _write(results):
            for res in results:
                row = _build_row(config, bounds, res)
                fh.write(_dump_line(row.to_json_dict()))
                new_rows.append(row)

        if workers == 1 or len(missing) <= 1:
            _write(map(_simulate_trial, args))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                _write(pool.map(
                    _simulate_trial, args,
                    chunksize=max(1, len(args) // (workers * 8)),
                ))

    all_rows = sorted([*existing.values(), *new_rows], key=lambda r: r.trial)
    return ExperimentBatch(config=config, rows=all_rows)


def load_results(path: str) -> ExperimentBatch:
    """Read a persisted batch back (never mutates the file)."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    header, row_dicts, _ = _read_jsonl(path)
    if header is None:
        raise ParameterError(f"no header record in {path}")
    cfg = header["config"]
    config = ExperimentConfig(
        n=cfg["n"],
        d=cfg["d"],
        trials=cfg["trials"],
        master_seed=cfg["master_seed"],
        checkpoints=tuple(cfg["checkpoints"]),
        exclude_stuck=cfg.get("exclude_stuck", True),
        r_grid=tuple(cfg["r_grid"]),
    )
    rows = sorted(
        (ResultRow.from_json_dict(obj) for obj in row_dicts), key=lambda r: r.trial
    )
    return ExperimentBatch(config=config, rows=rows)


# -- analysis ---------------------------------------------------------------


def analyze(
    batch: ExperimentBatch,
    level: float = 0.01,
    seed: int = 0,
    n_permutations: int = 500,
    test_independence: bool = True,
) -> dict:
    """Summarize a batch: per-class KS vs the unit exponential, probe
    frequencies vs their e^(-r) references, envelope violation rates, and
    pairwise independence reports (d >= 3)."""
    config = batch.config
    rows = batch.kept_rows()
    if not rows:
        raise ParameterError("no usable rows (all stuck or empty batch)")
    n, d = config.n, config.d
    n_ell = max(0, d - 1)

    per_ell = []
    for ell in range(n_ell):
        vs = [r.V[ell] for r in rows if r.V[ell] is not None]
        entry: dict = {"ell": ell, "count": len(vs)}
        if vs:
            entry["mean_V"] = sum(vs) / len(vs)
            entry["ks_exp1"] = ks_statistic(vs, exp_cdf)
        probes = {}
        for r_val in config.r_grid:
            key = repr(float(r_val))
            hits = [row.zero_at[key][ell] for row in rows if key in row.zero_at]
            if hits:
                probes[key] = {
                    "freq": sum(hits) / len(hits),
                    "reference": math.exp(-float(r_val)),
                }
        entry["zero_probe"] = probes
        per_ell.append(entry)

    joint = {}
    for r_val in config.r_grid:
        key = repr(float(r_val))
        oks = [
            all(row.zero_at[key][ell] for ell in range(n_ell))
            for row in rows
            if key in row.zero_at
        ]
        if oks and n_ell:
            joint[key] = {
                "freq": sum(oks) / len(oks),
                "reference": math.exp(-float(r_val) * n_ell),
            }

    phases = ["first"] + [f"I{k}" for k in range(n_ell)]
    envelope = {}
    for phase in phases:
        bad = sum(1 for r in rows if r.violations.get(phase, 0) > 0)
        envelope[phase] = {"runs_with_violation": bad, "rate": bad / len(rows)}

    independence = []
    if test_independence and n_ell >= 2:
        for a in range(n_ell):
            for b in range(a + 1, n_ell):
                pairs = [
                    (r.V[a], r.V[b])
                    for r in rows
                    if r.V[a] is not None and r.V[b] is not None
                ]
                if len(pairs) >= 50:
                    xs, ys = zip(*pairs)
                    rep = independence_report(
                        xs, ys, seed=seed, n_permutations=n_permutations, level=level
                    )
                    independence.append(
                        {
                            "pair": [a, b],
                            "passed": rep.passed,
                            "p_value": rep.threshold_or_pvalue,
                            "details": rep.details,
                        }
                    )

    return {
        "n": n,
        "d": d,
        "trials_total": len(batch.rows),
        "trials_used": len(rows),
        "stuck_count": sum(1 for r in batch.rows if r.stuck),
        "exclude_stuck": config.exclude_stuck,
        "per_ell": per_ell,
        "joint_zero_probe": joint,
        "envelope": envelope,
        "independence": independence,
    }


def export_v_csv(batch: ExperimentBatch, path: str) -> None:
    """Scaled-variable columns for external plotting."""
    n_ell = max(0, batch.config.d - 1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("trial," + ",".join(f"V{ell}" for ell in range(n_ell)) + ",stuck\n")
        for r in batch.rows:
            vs = ",".join("" if v is None else repr(v) for v in r.V)
            fh.write(f"{r.trial},{vs},{int(r.stuck)}\n")


def export_ecdf_csv(batch: ExperimentBatch, ell: int, path: str) -> None:
    """Empirical CDF of V[ell] next to the unit-exponential reference."""
    rows = batch.kept_rows()
    vs = sorted(r.V[ell] for r in rows if r.V[ell] is not None)
    if not vs:
        raise ParameterError(f"no defined V[{ell}] values")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("v,ecdf,exp_cdf\n")
        for idx, v in enumerate(vs):
            fh.write(f"{v!r},{(idx + 1) / len(vs)!r},{exp_cdf(v)!r}\n")


# -- Monte Carlo vs exact enumeration ---------------------------------------


def compare_counts_to_exact(
    observed: dict, exact_probs: dict, significance: float = 1e-3
) -> TestReport:
    """Chi-square a Monte Carlo count table against exact probabilities.

    Any observed category outside the exact support makes the test fail
    outright (it has probability zero).  Degenerate single-atom supports
    reduce to an exact membership check.
    """
    support = sorted(exact_probs.keys(), key=str)
    off_support = sum(c for k, c in observed.items() if k not in exact_probs)
    total = sum(observed.values())
    if total <= 0:
        raise ParameterError("empty observation table")
    if len(support) == 1:
        passed = off_support == 0
        return TestReport(
            method="exact-support",
            statistic=0.0 if passed else math.inf,
            threshold_or_pvalue=0.0,
            passed=passed,
            n_samples=total,
            details={"support": [str(s) for s in support]},
        )
    counts = [observed.get(k, 0) for k in support]
    probs = [float(exact_probs[k]) for k in support]
    if off_support:
        counts.append(off_support)
        probs.append(0.0)
    return chi_square_gof(counts, probs, significance=significance)
