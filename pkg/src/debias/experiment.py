"""Configuration grids, repeated runs, ranking and emergence-over-time studies."""

from __future__ import annotations

import csv
import hashlib
import itertools
import logging
import math
import os
import threading
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .engine import BatchDE, Crossover, DEConfig, Mutation
from .metrics import BiasClass, SBConfig, SBReport, sb_score
from .sdis import SdisKind

log = logging.getLogger(__name__)

PAPER_P_VALUES = (5, 20, 100)
PAPER_F_VALUES = (0.05, 0.266, 0.483, 0.7, 0.916, 1.133, 1.350, 1.566, 1.783, 2.0)
PAPER_CR_VALUES = (0.05, 0.285, 0.52, 0.755, 0.99)
PAPER_BUDGET = 300_000
PAPER_RUNS = 600
DESK_BUDGET = 10_000
EMERGENCE_RUNS = 100

RECOMMENDED_F = (0.483, 0.916)
RECOMMENDED_CR = (0.05, 0.52, 0.99)
RECOMMENDED_P = (20, 100)

LEDGER_COLUMNS = (
    "config_id", "mutation", "crossover", "p", "F", "Cr", "sdis",
    "n", "budget", "runs", "sb_score", "classification",
)


def derive_seed(base_seed: int, config_id: str, index: int) -> int:
    """Deterministic 64-bit seed for ``(base_seed, config_id, index)``."""
    digest = hashlib.sha256(f"{base_seed}|{config_id}|{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class GridSpec:
    """Cartesian sweep over DE configurations, plus optional explicit extras.

    ``current-to-rand/1`` is always paired with crossover ``none`` and no
    ``Cr``; every other mutation is crossed with ``crossovers`` and
    ``Cr_values``.
    """

    mutations: tuple[Mutation, ...] = tuple(Mutation)
    crossovers: tuple[Crossover, ...] = (Crossover.BIN, Crossover.EXP)
    sdis_list: tuple[SdisKind, ...] = tuple(SdisKind)
    p_values: tuple[int, ...] = PAPER_P_VALUES
    F_values: tuple[float, ...] = PAPER_F_VALUES
    Cr_values: tuple[float, ...] = PAPER_CR_VALUES
    n: int = 30
    budget: int = PAPER_BUDGET
    runs: int = PAPER_RUNS
    base_seed: int = 0
    include: tuple[DEConfig, ...] = ()

    @classmethod
    def paper(cls, base_seed: int = 0) -> "GridSpec":
        return cls(base_seed=base_seed)

    @classmethod
    def desk(cls, base_seed: int = 0) -> "GridSpec":
        """Reduced-budget grid used for quick replication.

        The ``F`` sweep of ``DE/best/1/bin-p5-sat`` at ``Cr = 0.99`` plus the
        unbiased and strongly biased exemplar configurations.
        """
        kw = dict(n=30, budget=DESK_BUDGET)
        sweep = tuple(
            DEConfig(Mutation.BEST_1, Crossover.BIN, F, 0.99, 5, SdisKind.SAT, **kw)
            for F in PAPER_F_VALUES
        )
        exemplars = (
            DEConfig(Mutation.BEST_1, Crossover.BIN, 0.916, 0.05, 20, SdisKind.COTN, **kw),
            DEConfig(Mutation.CURRENT_TO_RAND_1, Crossover.NONE, 0.05, None, 100, SdisKind.SAT, **kw),
        )
        return cls(mutations=(), budget=DESK_BUDGET, base_seed=base_seed, include=sweep + exemplars)

    def _product(self) -> Iterator[DEConfig]:
        for mut in self.mutations:
            mut = Mutation(mut)
            if mut is Mutation.CURRENT_TO_RAND_1:
                shapes: Iterable = [(Crossover.NONE, None)]
            else:
                shapes = itertools.product(self.crossovers, self.Cr_values)
            shapes = list(shapes)
            for (cx, cr), p, sdis, F in itertools.product(shapes, self.p_values, self.sdis_list, self.F_values):
                yield DEConfig(mut, cx, F, cr, p, sdis, n=self.n, budget=self.budget)

    def configs(self) -> list[DEConfig]:
        seen: set[str] = set()
        out = []
        for cfg in itertools.chain(self._product(), self.include):
            if cfg.config_id not in seen:
                seen.add(cfg.config_id)
                out.append(cfg)
        return out

    def expected_count(self) -> int:
        """Closed-form size of the Cartesian part of the grid."""
        no_cr = sum(Mutation(m) is Mutation.CURRENT_TO_RAND_1 for m in self.mutations)
        with_cr = len(self.mutations) - no_cr
        base = len(self.p_values) * len(self.sdis_list) * len(self.F_values)
        return no_cr * base + with_cr * len(self.crossovers) * base * len(self.Cr_values)


@dataclass(frozen=True)
class GridRow:
    config_id: str
    mutation: str
    crossover: str
    p: int
    F: float
    Cr: float | None
    sdis: str
    n: int
    budget: int
    runs: int
    sb_score: float
    classification: BiasClass

    @classmethod
    def from_report(cls, cfg: DEConfig, runs: int, report: SBReport) -> "GridRow":
        return cls(
            config_id=cfg.config_id,
            mutation=cfg.mutation.value,
            crossover=cfg.crossover.value,
            p=cfg.p,
            F=cfg.F,
            Cr=cfg.Cr,
            sdis=cfg.sdis.value,
            n=cfg.n,
            budget=cfg.budget,
            runs=runs,
            sb_score=report.sb_score,
            classification=report.classification,
        )

    def to_record(self) -> dict[str, str]:
        return {
            "config_id": self.config_id,
            "mutation": self.mutation,
            "crossover": self.crossover,
            "p": str(self.p),
            "F": repr(self.F),
            "Cr": "" if self.Cr is None else repr(self.Cr),
            "sdis": self.sdis,
            "n": str(self.n),
            "budget": str(self.budget),
            "runs": str(self.runs),
            "sb_score": repr(self.sb_score),
            "classification": self.classification.value,
        }

    @classmethod
    def from_record(cls, rec: dict[str, str]) -> "GridRow":
        return cls(
            config_id=rec["config_id"],
            mutation=rec["mutation"],
            crossover=rec["crossover"],
            p=int(rec["p"]),
            F=float(rec["F"]),
            Cr=float(rec["Cr"]) if rec["Cr"] else None,
            sdis=rec["sdis"],
            n=int(rec["n"]),
            budget=int(rec["budget"]),
            runs=int(rec["runs"]),
            sb_score=float(rec["sb_score"]),
            classification=BiasClass(rec["classification"]),
        )

    @property
    def variant(self) -> str:
        name = f"DE/{Mutation(self.mutation).short}"
        return name if self.crossover == "none" else f"{name}/{self.crossover}"


@dataclass
class GridResult:
    rows: list[GridRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def by_id(self) -> dict[str, GridRow]:
        return {row.config_id: row for row in self.rows}


def run_config(
    config: DEConfig,
    runs: int = PAPER_RUNS,
    base_seed: int = 0,
    sb_cfg: SBConfig | None = None,
    batch_size: int | None = None,
) -> tuple[np.ndarray, SBReport]:
    """Run ``config`` ``runs`` times on ``f0`` and score the final points.

    Runs are executed in lockstep batches of ``batch_size`` (all at once by
    default); batch ``k`` is seeded with ``derive_seed(base_seed, config_id, k)``.
    With ``batch_size=1`` every run therefore has its own derived seed.
    """
    batch_size = runs if batch_size is None else batch_size
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    chunks = []
    for k, start in enumerate(range(0, runs, batch_size)):
        size = min(batch_size, runs - start)
        engine = BatchDE(config, runs=size, seed=derive_seed(base_seed, config.config_id, k))
        chunks.append(engine.run().final_points())
    points = np.concatenate(chunks, axis=0)
    return points, sb_score(points, sb_cfg, config_id=config.config_id)


def _grid_job(args) -> tuple[DEConfig, np.ndarray, SBReport]:
    config, runs, base_seed, sb_cfg = args
    points, report = run_config(config, runs, base_seed, sb_cfg)
    return config, points, report


def _read_ledger(path: Path) -> list[GridRow]:
    if not path.exists():
        return []
    rows = []
    with path.open(newline="") as fh:
        for rec in csv.DictReader(fh):
            try:
                rows.append(GridRow.from_record(rec))
            except (KeyError, ValueError, TypeError):
                # truncated trailing line from an interrupted write
                log.warning("skipping malformed ledger line in %s", path)
    return rows


def _write_ledger(path: Path, rows: Sequence[GridRow]) -> None:
    tmp = path.with_suffix(".csv.tmp")
    with tmp.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LEDGER_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_record())
    os.replace(tmp, path)


def run_grid(
    spec: GridSpec,
    jobs: int = 1,
    out: str | os.PathLike | None = None,
    sb_cfg: SBConfig | None = None,
    save_points: bool = True,
    limit: int | None = None,
) -> GridResult:
    """Run every configuration of ``spec``.

    With ``out`` set, rows are appended to ``out/ledger.csv`` as they finish,
    along with per-configuration reports (and final points unless
    ``save_points`` is false). Configurations already in the ledger are
    skipped, so an interrupted sweep resumes where it stopped. Once the sweep
    is complete the ledger is rewritten in grid order, making the file
    independent of completion order. ``limit`` caps how many new
    configurations are run in this call.
    """
    from .export import write_points_csv, write_report_json

    configs = spec.configs()
    order = {cfg.config_id: i for i, cfg in enumerate(configs)}
    done: dict[str, GridRow] = {}
    ledger = None
    if out is not None:
        root = Path(out)
        (root / "reports").mkdir(parents=True, exist_ok=True)
        if save_points:
            (root / "points").mkdir(parents=True, exist_ok=True)
        ledger = root / "ledger.csv"
        done = {row.config_id: row for row in _read_ledger(ledger) if row.config_id in order}
        _write_ledger(ledger, sorted(done.values(), key=lambda r: order[r.config_id]))

    todo = [cfg for cfg in configs if cfg.config_id not in done]
    if limit is not None:
        todo = todo[:limit]
    lock = threading.Lock()

    def record(cfg: DEConfig, points: np.ndarray, report: SBReport) -> None:
        row = GridRow.from_report(cfg, spec.runs, report)
        with lock:
            done[cfg.config_id] = row
            if ledger is None:
                return
            write_report_json(report, root / "reports" / f"{cfg.file_stem}.json")
            if save_points:
                write_points_csv(points, root / "points" / f"{cfg.file_stem}.csv")
            with ledger.open("a", newline="") as fh:
                csv.DictWriter(fh, fieldnames=LEDGER_COLUMNS, lineterminator="\n").writerow(row.to_record())
        log.info("%s sb=%.3f (%s)", cfg.config_id, report.sb_score, report.classification.value)

    jobs_args = [(cfg, spec.runs, spec.base_seed, sb_cfg) for cfg in todo]
    if jobs <= 1:
        for args in jobs_args:
            record(*_grid_job(args))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_grid_job, args) for args in jobs_args]
            for fut in as_completed(futures):
                record(*fut.result())

    rows = sorted(done.values(), key=lambda r: order[r.config_id])
    if ledger is not None and len(rows) == len(configs):
        _write_ledger(ledger, rows)
    return GridResult(rows)


def load_grid(out: str | os.PathLike) -> GridResult:
    return GridResult(_read_ledger(Path(out) / "ledger.csv"))


def _matches(value: float | None, wanted: Iterable[float] | None) -> bool:
    if wanted is None:
        return True
    if value is None:
        return False
    return any(math.isclose(value, w, abs_tol=5e-4) for w in wanted)


def rank_configs(
    result: GridResult,
    sdis: Iterable[str] | str | None = None,
    F: Iterable[float] | None = None,
    Cr: Iterable[float] | None = None,
    p: Iterable[int] | None = None,
    mutations: Iterable[str] | None = None,
) -> list[GridRow]:
    """Rows matching the filter, strongest bias first, ties by ``config_id``.

    ``Cr`` filters only configurations that have a crossover rate; rows of
    ``current-to-rand/1`` pass the ``Cr`` filter untouched.
    """
    if isinstance(sdis, str):
        sdis = [sdis]
    sdis_set = None if sdis is None else {SdisKind.parse(s).value for s in sdis}
    p_set = None if p is None else set(p)
    mut_set = None if mutations is None else {Mutation.parse(m).value for m in mutations}
    rows = [
        row
        for row in result.rows
        if (sdis_set is None or row.sdis in sdis_set)
        and (p_set is None or row.p in p_set)
        and (mut_set is None or row.mutation in mut_set)
        and _matches(row.F, F)
        and (row.Cr is None or _matches(row.Cr, Cr))
    ]
    return sorted(rows, key=lambda r: (-r.sb_score, r.config_id))


@dataclass
class EmergenceTrace:
    """SB score of the pooled populations of many runs, against evaluations per run."""

    config_id: str
    evaluations: list[int]
    sb: list[float]
    runs_pooled: int
    sample_size: int

    def __len__(self) -> int:
        return len(self.evaluations)

    def value_at(self, evaluations: int) -> float:
        """Score at the last checkpoint not after ``evaluations``."""
        i = int(np.searchsorted(self.evaluations, evaluations, side="right")) - 1
        return self.sb[max(i, 0)]

    def noise_sigma(self) -> float:
        """Checkpoint-to-checkpoint noise level of the second half of the trace.

        Estimated as ``std(diff) / sqrt(2)``, which removes a slow trend and
        leaves the independent jitter of each checkpoint.
        """
        tail = np.asarray(self.sb[len(self.sb) // 2:], dtype=float)
        if tail.size < 3:
            return 0.0
        return float(np.std(np.diff(tail), ddof=1) / math.sqrt(2.0))


def checkpoints(config: DEConfig, stride: int) -> list[int]:
    """Per-run evaluation counts at which the pooled score is recorded."""
    if stride < 1:
        raise ValueError("checkpoint stride must be >= 1")
    points = list(range(config.p, config.budget + 1, stride))
    if points[-1] != config.budget:
        points.append(config.budget)
    return points


def run_emergence(
    config: DEConfig,
    runs_pooled: int = EMERGENCE_RUNS,
    checkpoint_stride: int = 100,
    base_seed: int = 0,
    sb_cfg: SBConfig | None = None,
) -> EmergenceTrace:
    """Track the SB score of the pooled active populations over a run.

    All runs advance one generation at a time. The population a run shows at
    evaluation count ``e`` is its state after the last generation that ended
    at or before ``e`` (replacement is synchronous, so nothing changes inside
    a generation). A checkpoint is scored once every run has passed it; runs
    that stop early keep contributing their final population.
    """
    engine = BatchDE(config, runs=runs_pooled, seed=derive_seed(base_seed, config.config_id, -1))
    marks = checkpoints(config, checkpoint_stride)
    R, p, n = runs_pooled, config.p, config.n
    marks_arr = np.asarray(marks)
    pending: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    scores: list[float] = []

    def fill(runs: np.ndarray, lo: np.ndarray, hi: np.ndarray, X: np.ndarray) -> None:
        # checkpoints in [lo, hi] of each run take the population X
        for k, r in enumerate(runs):
            a = int(np.searchsorted(marks_arr, lo[k], side="left"))
            b = int(np.searchsorted(marks_arr, hi[k], side="right"))
            for m in range(a, b):
                if m not in pending:
                    pending[m] = (np.empty((R, p, n)), np.zeros(R, dtype=bool))
                pending[m][0][r] = X[k]
                pending[m][1][r] = True

    def flush() -> None:
        while len(scores) < len(marks) and len(scores) in pending and pending[len(scores)][1].all():
            sample, _ = pending.pop(len(scores))
            scores.append(sb_score(sample.reshape(R * p, n), sb_cfg).sb_score)

    fill(np.arange(R), engine.evaluations, engine.evaluations, engine.X)
    flush()
    while not engine.done.all():
        before = engine.evaluations.copy()
        old = engine.X.copy()
        act = engine.step()
        after = engine.evaluations[act]
        fill(act, before[act] + 1, after - 1, old[act])
        fill(act, after, after, engine.X[act])
        flush()
    # runs stopped before the budget hold their final population to the end
    short = np.flatnonzero(engine.evaluations < config.budget)
    if short.size:
        fill(short, engine.evaluations[short], np.full(short.size, config.budget), engine.X[short])
    flush()
    return EmergenceTrace(
        config_id=config.config_id,
        evaluations=marks,
        sb=scores,
        runs_pooled=R,
        sample_size=R * p,
    )
