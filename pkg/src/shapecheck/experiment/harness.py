"""Accuracy-versus-sample-size runs comparing the chi-squared tester with the collision baseline."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterator, Optional, Sequence

from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn

from ..config import TestConfig, preset_config
from ..core.io import load_pmf
from ..core.models import Pmf, SampleCounts
from ..errors import ValidationError
from ..sampling import PaninskiSpec, draw, gen_paninski, gen_zipf, make_rng, perturb_far_from_monotone
from ..testers import active_set, chi2_statistic
from .bkr import bkr_statistic

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("m", "tester", "n", "eps", "accuracy", "accept_in", "reject_far", "seed", "wall_ms")

# Far instances sit at distance c * eps / 2 from uniform; c = 4 also keeps them eps-far from monotone.
FAR_CONSTANT = 4.0
ZIPF_EXPONENT = 1.0


class Instance(str, Enum):
    UNIFORM_PERTURBED = "uniform"
    ZIPF_PERTURBED = "zipf"
    CUSTOM = "custom"


class TesterKind(str, Enum):
    CHISQ = "chisq"
    BKR = "bkr"


@dataclass
class ExperimentConfig:
    """One accuracy sweep: ``reps`` paired trials at every sample size in ``sample_grid``."""

    n: int = 50000
    eps: float = 0.05
    reps: int = 400
    sample_grid: list[int] = field(default_factory=lambda: [10000, 20000, 30000])
    instance: Instance = Instance.UNIFORM_PERTURBED
    tester: TesterKind = TesterKind.CHISQ
    out_path: Optional[Path] = None
    seed: int = 0
    in_path: Optional[Path] = None  # CUSTOM in-class pmf
    far_path: Optional[Path] = None  # CUSTOM far pmf
    far_constant: float = FAR_CONSTANT
    preset: str = "experiment"

    def __post_init__(self):
        try:
            self.instance = Instance(self.instance)
            self.tester = TesterKind(self.tester)
        except ValueError as e:
            raise ValidationError(str(e))
        self.sample_grid = [int(m) for m in self.sample_grid]
        if self.reps < 1:
            raise ValidationError(f"reps must be at least 1, got {self.reps}")
        if not self.sample_grid:
            raise ValidationError("sample_grid must not be empty")
        if any(m < 1 for m in self.sample_grid) or self.sample_grid != sorted(self.sample_grid):
            raise ValidationError(f"sample_grid must be positive and ascending, got {self.sample_grid}")
        if not 0 < self.eps < 1:
            raise ValidationError(f"eps must lie in (0, 1), got {self.eps}")
        if self.instance is Instance.CUSTOM and (self.in_path is None or self.far_path is None):
            raise ValidationError("A custom instance needs both in_path and far_path")
        if self.out_path is not None:
            self.out_path = Path(self.out_path)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        try:
            return cls(**data)
        except TypeError as e:
            raise ValidationError(f"Invalid experiment settings: {e}")


@dataclass(frozen=True)
class ExperimentRow:
    m: int
    tester: str
    n: int
    eps: float
    accuracy: float
    accept_in: float
    reject_far: float
    seed: int
    wall_ms: float

    def as_row(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in CSV_COLUMNS}


def build_instances(cfg: ExperimentConfig) -> tuple[Pmf, Pmf]:
    """The (in-class, far) pair for a sweep; the far instance is drawn once per sweep seed."""
    if cfg.instance is Instance.CUSTOM:
        p_in, p_far = load_pmf(cfg.in_path), load_pmf(cfg.far_path)
        if p_in.n != p_far.n:
            raise ValidationError(f"Custom instances disagree on n: {p_in.n} vs {p_far.n}")
        return p_in, p_far
    if cfg.instance is Instance.UNIFORM_PERTURBED:
        spec = PaninskiSpec.random(cfg.n, cfg.eps, cfg.far_constant, make_rng(cfg.seed, 0))
        return Pmf.uniform(cfg.n), gen_paninski(spec)
    p_in = gen_zipf(cfg.n, ZIPF_EXPONENT)
    return p_in, perturb_far_from_monotone(p_in, cfg.eps, make_rng(cfg.seed, 0))


def _decider(cfg: ExperimentConfig, q: Pmf) -> Callable[[SampleCounts], bool]:
    if cfg.tester is TesterKind.BKR:
        def accept(counts: SampleCounts) -> bool:
            collisions, threshold = bkr_statistic(counts, cfg.eps)
            return collisions <= threshold
        return accept

    tcfg: TestConfig = preset_config(cfg.preset, eps=cfg.eps, seed=cfg.seed)
    mask = active_set(q, cfg.eps, tcfg.cutoff_constant)

    def accept(counts: SampleCounts) -> bool:
        return chi2_statistic(counts, q, mask) <= tcfg.threshold(counts.m_nominal, q.n)
    return accept


def iter_rows(cfg: ExperimentConfig, on_trial: Optional[Callable[[], None]] = None) -> Iterator[ExperimentRow]:
    """Yield one row per sample size; trials draw a fixed number of samples.

    The trial streams are derived from (seed, grid index, rep), so rows are reproducible.
    """
    p_in, p_far = build_instances(cfg)
    accept = _decider(cfg, p_in)
    for k, m in enumerate(cfg.sample_grid):
        start = time.perf_counter()
        accepted_in = rejected_far = 0
        for rep in range(cfg.reps):
            accepted_in += accept(draw(p_in, m, make_rng(cfg.seed, 1, k, rep, 0)))
            rejected_far += not accept(draw(p_far, m, make_rng(cfg.seed, 1, k, rep, 1)))
            if on_trial is not None:
                on_trial()
        accept_in = accepted_in / cfg.reps
        reject_far = rejected_far / cfg.reps
        row = ExperimentRow(
            m=m,
            tester=cfg.tester.value,
            n=p_in.n,
            eps=cfg.eps,
            accuracy=(accept_in + reject_far) / 2.0,
            accept_in=accept_in,
            reject_far=reject_far,
            seed=cfg.seed,
            wall_ms=round((time.perf_counter() - start) * 1000.0, 3),
        )
        logger.info("m=%d %s accuracy=%.3f", m, row.tester, row.accuracy)
        yield row


def experiment_accuracy(cfg: ExperimentConfig, show_progress: bool = False) -> list[ExperimentRow]:
    """Run the sweep and write the CSV to ``cfg.out_path`` when one is set.

    Raises:
        ValidationError: If a custom instance cannot be loaded
        OSError: If the CSV cannot be written
    """
    total = cfg.reps * len(cfg.sample_grid)
    if show_progress:
        with Progress(
            SpinnerColumn(),
            TextColumn("[cyan]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            TimeElapsedColumn(),
            transient=True,
        ) as progress:
            task = progress.add_task(f"{cfg.tester.value} trials", total=total)
            rows = list(iter_rows(cfg, lambda: progress.advance(task)))
    else:
        rows = list(iter_rows(cfg))
    if cfg.out_path is not None:
        write_csv(rows, cfg.out_path)
    if len(rows) > 1:
        dips = [r.m for prev, r in zip(rows, rows[1:]) if r.accuracy < prev.accuracy]
        if dips:
            logger.warning("accuracy dropped as m grew at m=%s", dips)
    return rows


def write_csv(rows: Sequence[ExperimentRow], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_row())


def read_csv(path: Path) -> list[dict[str, str]]:
    """Rows of an experiment CSV as strings.

    Raises:
        ValidationError: If the header does not match the experiment columns
    """
    with Path(path).open(newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValidationError(f"{path} is not an experiment CSV (columns {reader.fieldnames})")
        return list(reader)


def with_tester(cfg: ExperimentConfig, tester: TesterKind) -> ExperimentConfig:
    """A copy of cfg for one tester of a combined sweep; the caller writes the combined CSV."""
    return replace(cfg, tester=tester, out_path=None)
