#!/usr/bin/env python3
"""
Shapecheck CLI - test whether samples come from a shape-restricted distribution

Usage:
    shapecheck gen paninski --n 1000 --eps 0.1 --c 4 > far.json
    shapecheck sample --pmf far.json --m 200000 > counts.json
    shapecheck test --class monotone --eps 0.1 --samples counts.json
    shapecheck --preset experiment test --class unimodal --eps 0.2 --pmf p.json --trace
    shapecheck experiment run --m 10000 --m 30000 --reps 100

Exit codes: 0 accept / success, 2 reject, 1 error.
"""

import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, Optional

import typer
from rich.align import Align
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table
from rich.text import Text
from rich.tree import Tree
from typer.core import TyperGroup

from .config import ConfigManager
from .errors import ShapeCheckError

BANNER = """
███████╗██╗  ██╗ █████╗ ██████╗ ███████╗ ██████╗██╗  ██╗███████╗ ██████╗██╗  ██╗
██╔════╝██║  ██║██╔══██╗██╔══██╗██╔════╝██╔════╝██║  ██║██╔════╝██╔════╝██║ ██╔╝
███████╗███████║███████║██████╔╝█████╗  ██║     ███████║█████╗  ██║     █████╔╝
╚════██║██╔══██║██╔══██║██╔═══╝ ██╔══╝  ██║     ██╔══██║██╔══╝  ██║     ██╔═██╗
███████║██║  ██║██║  ██║██║     ███████╗╚██████╗██║  ██║███████╗╚██████╗██║  ██╗
╚══════╝╚═╝  ╚═╝╚═╝  ╚═╝╚═╝     ╚══════╝ ╚═════╝╚═╝  ╚═╝╚══════╝ ╚═════╝╚═╝  ╚═╝
"""

TAGLINE = "Learn, then chi-squared: testing shape-restricted distributions"

OUTPUT_FORMATS = ("json", "csv")
EXIT_REJECT = 2

GEN_KINDS = {
    "uniform": "uniform(n)",
    "zipf": "mass proportional to (i+1)^-s",
    "triangular": "discretized triangle (log-concave)",
    "geometric": "truncated r^i (log-concave, MHR)",
    "paninski": "paired +-c*eps perturbation of uniform(n)",
    "paninski-grid": "paired perturbation of uniform over [n]^d",
    "random-monotone": "random pmf non-increasing along every axis",
    "far-from-product": "independent +-c*eps per grid cell",
    "far-from-monotone": "perturbation of a monotone --base pmf, eps-far from monotone",
}

LEARN_CLASSES = ("monotone", "product", "logconcave", "mhr")
DIST_CLASSES = ("monotone", "unimodal", "logconcave", "mhr", "product", "identity")
TEST_CLASSES = ("monotone", "unimodal", "logconcave", "mhr", "independence", "identity")


class StageTracker:
    """Render the stages of a tester run as a tree, one line per stage."""

    def __init__(self, title: str):
        self.title = title
        self.steps = []  # list of dicts: {key, label, status, detail}

    def add(self, key: str, label: str, status: str, detail: str = ""):
        self.steps.append({"key": key, "label": label, "status": status, "detail": detail})

    def error(self, key: str, detail: str = ""):
        """Mark an added stage as the one that rejected."""
        for s in self.steps:
            if s["key"] == key:
                s["status"] = "error"
                if detail:
                    s["detail"] = detail
                return
        raise KeyError(key)

    @classmethod
    def from_verdict(cls, verdict) -> "StageTracker":
        tracker = cls(f"{verdict.detail.get('tester', 'test')} → {verdict.decision.value}")
        stages = verdict.detail.get("stages", [])
        for i, stage in enumerate(stages):
            info = ", ".join(f"{k}={_short(v)}" for k, v in stage.items() if k != "stage")
            tracker.add(f"{i}", stage["stage"], "done", info)
        if verdict.statistic is not None:
            detail = f"Z={verdict.statistic:.4g}, threshold={verdict.threshold:.4g}"
            tracker.add("gate", "statistic", "done" if verdict.accepted else "error", detail)
        elif not verdict.accepted:
            reason = verdict.detail.get("reason", "rejected")
            if stages:
                tracker.error(f"{len(stages) - 1}", f"rejected: {reason}")
            else:
                tracker.add("gate", "rejected", "error", reason)
        return tracker

    def render(self):
        tree = Tree(f"[cyan]{self.title}[/cyan]", guide_style="grey50")
        for step in self.steps:
            label = step["label"]
            detail_text = step["detail"].strip() if step["detail"] else ""

            symbol = "[red]●[/red]" if step["status"] == "error" else "[green]●[/green]"

            if detail_text:
                line = f"{symbol} [white]{label}[/white] [bright_black]({detail_text})[/bright_black]"
            else:
                line = f"{symbol} [white]{label}[/white]"
            tree.add(line)
        return tree


def _short(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {_short(v)}" for k, v in value.items()) + "}"
    return str(value)


console = Console()
err_console = Console(stderr=True)


class BannerGroup(TyperGroup):
    """Custom group that shows banner before help."""

    def format_help(self, ctx, formatter):
        show_banner()
        super().format_help(ctx, formatter)


app = typer.Typer(
    name="shapecheck",
    help="Sample-optimal testing of monotone, unimodal, log-concave, MHR and product distributions",
    add_completion=False,
    invoke_without_command=True,
    cls=BannerGroup,
)


def show_banner():
    """Display the ASCII art banner."""
    banner_lines = BANNER.strip().split('\n')
    colors = ["bright_blue", "blue", "cyan", "bright_cyan", "white", "bright_white"]

    styled_banner = Text()
    for i, line in enumerate(banner_lines):
        color = colors[i % len(colors)]
        styled_banner.append(line + "\n", style=color)

    err_console.print(Align.center(styled_banner))
    err_console.print(Align.center(Text(TAGLINE, style="italic bright_yellow")))
    err_console.print()


@dataclass
class CliState:
    """Global options shared by every subcommand."""

    seed: int
    out: Optional[Path]
    fmt: str
    preset: str
    verbose: bool
    config: ConfigManager

    @property
    def interactive(self) -> bool:
        return err_console.is_terminal

    def test_config(self, eps: Optional[float] = None):
        return self.config.test_config(eps=eps, seed=self.seed)


def setup_logging(verbose: bool) -> None:
    """Route the package loggers through rich on stderr."""
    logger = logging.getLogger("shapecheck")
    logger.handlers.clear()
    logger.addHandler(RichHandler(console=err_console, show_path=False, markup=False))
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


@app.callback()
def callback(
    ctx: typer.Context,
    seed: Optional[int] = typer.Option(None, "--seed", help="Master seed (default: tester.seed from config, else 0)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the result here instead of stdout"),
    fmt: str = typer.Option("json", "--format", help="Output format: json or csv"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging on stderr"),
    preset: Optional[str] = typer.Option(None, "--preset", "--constants-preset", help="Constants preset: proven or experiment"),
):
    """Show banner when no subcommand is provided."""
    setup_logging(verbose)
    if fmt not in OUTPUT_FORMATS:
        err_console.print(f"[red]Error:[/red] --format must be one of {', '.join(OUTPUT_FORMATS)}")
        raise typer.Exit(1)

    manager = ConfigManager(Path.cwd(), overrides={"preset": preset} if preset else None)
    try:
        resolved_preset = manager.get_value("preset", "proven")
        resolved_seed = seed if seed is not None else int(manager.get_value("tester.seed", 0))
    except ShapeCheckError as e:
        err_console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(1)
    ctx.obj = CliState(resolved_seed, out, fmt, resolved_preset, verbose, manager)

    if ctx.invoked_subcommand is None and "--help" not in sys.argv and "-h" not in sys.argv:
        show_banner()
        err_console.print(Align.center("[dim]Run 'shapecheck --help' for usage information[/dim]"))
        err_console.print()


# ===== Output helpers =====

def _fail(message: str) -> None:
    err_console.print(f"[red]Error:[/red] {message}")
    raise typer.Exit(1)


def _write(state: CliState, text: str) -> None:
    if state.out is None:
        typer.echo(text.rstrip("\n"))
        return
    try:
        state.out.parent.mkdir(parents=True, exist_ok=True)
        state.out.write_text(text if text.endswith("\n") else text + "\n")
    except OSError as e:
        _fail(f"Cannot write {state.out}: {e}")
    err_console.print(f"[green]✓[/green] Wrote {state.out}")


def _emit_record(state: CliState, record: dict) -> None:
    """A flat record as JSON or a two-line CSV (nested values are JSON-encoded)."""
    if state.fmt == "json":
        _write(state, json.dumps(record, indent=2))
        return
    values = []
    for value in record.values():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, separators=(",", ":"))
        values.append("" if value is None else value)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(record)
    writer.writerow(values)
    _write(state, buf.getvalue())


def _emit_pmf(state: CliState, pmf) -> None:
    from .core.io import dump_pmf

    _write(state, dump_pmf(pmf, "json" if state.fmt == "json" else "text"))


def _load_pmf(path: Path, renormalize: bool = False):
    from .core.io import load_pmf

    return load_pmf(path, renormalize=renormalize)


# ===== Commands =====

@app.command()
def gen(
    ctx: typer.Context,
    kind: str = typer.Argument(help=f"One of: {', '.join(GEN_KINDS)}"),
    n: int = typer.Option(100, "--n", help="Domain size (per axis for grids)"),
    d: int = typer.Option(2, "--d", help="Dimension for paninski-grid"),
    dims: Optional[List[int]] = typer.Option(None, "--dim", help="Axis size; repeat for grids"),
    eps: float = typer.Option(0.1, "--eps", help="Distance parameter"),
    c: float = typer.Option(4.0, "--c", help="Perturbation constant"),
    s: float = typer.Option(1.0, "--s", help="Zipf exponent"),
    r: float = typer.Option(0.9, "--r", help="Geometric ratio"),
    base: Optional[Path] = typer.Option(None, "--base", help="Monotone pmf for far-from-monotone"),
):
    """Generate a named instance pmf."""
    from . import sampling
    from .core.models import Pmf

    state: CliState = ctx.obj
    if kind not in GEN_KINDS:
        _fail(f"Unknown instance {kind!r}; choose from {', '.join(GEN_KINDS)}")
    try:
        if kind == "uniform":
            pmf = Pmf.uniform(n)
        elif kind == "zipf":
            pmf = sampling.gen_zipf(n, s)
        elif kind == "triangular":
            pmf = sampling.gen_triangular(n)
        elif kind == "geometric":
            pmf = sampling.gen_geometric(n, r)
        elif kind == "paninski":
            pmf = sampling.gen_paninski(sampling.PaninskiSpec.random(n, eps, c, state.seed))
        elif kind == "paninski-grid":
            pmf = sampling.gen_paninski_grid(n, d, eps, c, state.seed)
        elif kind == "random-monotone":
            pmf = sampling.gen_random_monotone(dims or [n], state.seed)
        elif kind == "far-from-product":
            pmf = sampling.gen_far_from_product(dims or [n, n], eps, c, state.seed)
        else:
            if base is None:
                _fail("far-from-monotone needs --base <monotone pmf file>")
            pmf = sampling.perturb_far_from_monotone(_load_pmf(base), eps, state.seed)
    except ShapeCheckError as e:
        _fail(str(e))
    _emit_pmf(state, pmf)


@app.command()
def sample(
    ctx: typer.Context,
    pmf_path: Path = typer.Option(..., "--pmf", help="Pmf file (JSON or one mass per line)"),
    m: int = typer.Option(..., "--m", help="Sample size (Poisson mean unless --fixed)"),
    fixed: bool = typer.Option(False, "--fixed", help="Exactly m samples instead of Poisson(m)"),
    renormalize: bool = typer.Option(False, "--renormalize", help="Rescale a pmf that does not sum to 1"),
):
    """Draw a sample from a pmf and emit its counts."""
    from .core.io import counts_to_dict
    from .sampling import draw, poissonized_draw

    state: CliState = ctx.obj
    try:
        pmf = _load_pmf(pmf_path, renormalize)
        counts = draw(pmf, m, state.seed) if fixed else poissonized_draw(pmf, m, state.seed)
    except ShapeCheckError as e:
        _fail(str(e))
    if state.fmt == "json":
        _write(state, json.dumps(counts_to_dict(counts), indent=2))
    else:
        _write(state, "\n".join(str(int(x)) for x in counts.counts))


@app.command()
def learn(
    ctx: typer.Context,
    cls: str = typer.Option(..., "--class", help=f"One of: {', '.join(LEARN_CLASSES)}"),
    eps: float = typer.Option(..., "--eps", help="Accuracy parameter"),
    samples: Path = typer.Option(..., "--samples", help="Counts JSON from 'shapecheck sample'"),
    gamma: Optional[float] = typer.Option(None, "--gamma", help="Birgé gamma for monotone (default from eps)"),
):
    """Learn a hypothesis pmf from a sample and emit it with its trusted support."""
    from .core.io import load_counts
    from .learn import LearnOutcome, lcd_learn, mhr_learn, monotone_learn, product_learn
    from .partition import gamma_for_eps

    state: CliState = ctx.obj
    if cls not in LEARN_CLASSES:
        _fail(f"Unknown class {cls!r} for learn; choose from {', '.join(LEARN_CLASSES)}")
    try:
        cfg = state.test_config(eps)
        counts = load_counts(samples)
        if cls == "monotone":
            g = gamma or cfg.birge_gamma or gamma_for_eps(eps, len(counts.shape))
            q, part = monotone_learn(counts, g)
            outcome = LearnOutcome.accept(q, range(q.n), gamma=g, partition=part.to_dict())
        elif cls == "product":
            q = product_learn(counts.marginals())
            outcome = LearnOutcome.accept(q, range(q.n))
        elif cls == "logconcave":
            outcome = lcd_learn(
                counts,
                eps,
                sample_constant=cfg.lcd_sample_constant,
                band_constant=cfg.lcd_band_constant,
                normalization_slack=cfg.lcd_normalization_slack,
            )
        else:
            outcome = mhr_learn(
                counts,
                eps,
                sample_constant=cfg.mhr_sample_constant,
                b_constant=cfg.mhr_b_constant,
                tail_constant=cfg.mhr_tail_constant,
                band_constant=cfg.mhr_band_constant,
            )
    except ShapeCheckError as e:
        _fail(str(e))
    _emit_record(state, outcome.to_dict())
    if outcome.rejected:
        raise typer.Exit(EXIT_REJECT)


def _class_id(name: str, shape: tuple, target: Optional[Path], renormalize: bool = False):
    from .core.models import ClassId

    if name == "monotone":
        return ClassId.monotone(len(shape), shape if len(shape) > 1 else None)
    if name == "unimodal":
        return ClassId.unimodal()
    if name == "logconcave":
        return ClassId.log_concave()
    if name == "mhr":
        return ClassId.mhr()
    if name in ("product", "independence"):
        return ClassId.product(shape)
    if target is None:
        _fail("identity needs --target <pmf file>")
    return ClassId.single_target(_load_pmf(target, renormalize))


@app.command()
def dist(
    ctx: typer.Context,
    cls: str = typer.Option(..., "--class", help=f"One of: {', '.join(DIST_CLASSES)}"),
    pmf_path: Path = typer.Option(..., "--pmf", help="Pmf file"),
    target: Optional[Path] = typer.Option(None, "--target", help="Target pmf for identity"),
    partition: Optional[Path] = typer.Option(None, "--partition", help="Partition JSON q is constant on"),
    brute_force: bool = typer.Option(False, "--brute-force", help="Exhaustive lattice search (n <= 8)"),
    step: float = typer.Option(1e-2, "--step", help="Lattice step for --brute-force"),
    renormalize: bool = typer.Option(False, "--renormalize", help="Rescale pmfs that do not sum to 1"),
):
    """Print the total-variation distance from a pmf to a class."""
    from .classdist import brute_force_dist, dist_to_class
    from .partition import IntervalPartition

    state: CliState = ctx.obj
    if cls not in DIST_CLASSES:
        _fail(f"Unknown class {cls!r} for dist; choose from {', '.join(DIST_CLASSES)}")
    try:
        pmf = _load_pmf(pmf_path, renormalize)
        class_id = _class_id(cls, pmf.shape, target, renormalize)
        if brute_force:
            value = brute_force_dist(class_id, pmf, step)
        else:
            part = None
            if partition is not None:
                try:
                    part = IntervalPartition.from_dict(json.loads(partition.read_text()))
                except (OSError, json.JSONDecodeError) as e:
                    _fail(f"Cannot read partition {partition}: {e}")
            value = dist_to_class(class_id, pmf, part)
    except ShapeCheckError as e:
        _fail(str(e))
    _emit_record(state, {"class": class_id.label, "distance": value, "method": "lattice" if brute_force else "exact"})


@app.command()
def test(
    ctx: typer.Context,
    cls: str = typer.Option(..., "--class", help=f"One of: {', '.join(TEST_CLASSES)}"),
    eps: float = typer.Option(..., "--eps", help="Distance parameter"),
    pmf_path: Optional[Path] = typer.Option(None, "--pmf", help="Sample fresh batches from this pmf"),
    samples: Optional[Path] = typer.Option(None, "--samples", help="Split this fixed sample across stages"),
    target: Optional[Path] = typer.Option(None, "--target", help="Target pmf for identity"),
    trace: bool = typer.Option(False, "--trace", help="Show the stage trail on stderr"),
    renormalize: bool = typer.Option(False, "--renormalize", help="Rescale pmfs that do not sum to 1"),
):
    """Run a class tester and emit its verdict (exit 0 accept, 2 reject)."""
    from .core.io import load_counts
    from .sampling import CountsSource, PmfSource
    from .testers import run_tester

    state: CliState = ctx.obj
    if cls not in TEST_CLASSES:
        _fail(f"Unknown class {cls!r} for test; choose from {', '.join(TEST_CLASSES)}")
    if (pmf_path is None) == (samples is None):
        _fail("Give exactly one of --pmf or --samples")
    try:
        cfg = state.test_config(eps)
        if pmf_path is not None:
            source = PmfSource(_load_pmf(pmf_path, renormalize), state.seed)
        else:
            source = CountsSource(load_counts(samples), state.seed)
        class_id = _class_id(cls, source.dims or (source.n,), target, renormalize)
        verdict = run_tester(class_id, source, eps, cfg)
    except ShapeCheckError as e:
        _fail(str(e))

    if trace:
        err_console.print(StageTracker.from_verdict(verdict).render())
    record = verdict.to_dict()
    if state.fmt == "csv":
        record = {k: v for k, v in record.items() if k != "detail"}
    _emit_record(state, record)
    if not verdict.accepted:
        raise typer.Exit(EXIT_REJECT)


def _installed_version(dist: str) -> str:
    import importlib.metadata

    try:
        return importlib.metadata.version(dist)
    except importlib.metadata.PackageNotFoundError:
        return "not installed"


def _source_version() -> str:
    """Version from pyproject.toml when running from a source checkout."""
    import tomllib

    manifest = Path(__file__).resolve().parents[2] / "pyproject.toml"
    try:
        with manifest.open("rb") as f:
            return tomllib.load(f)["project"]["version"]
    except (OSError, KeyError, tomllib.TOMLDecodeError):
        return "unknown"


@app.command()
def version():
    """Display version and system information."""
    import platform

    show_banner()

    cli_version = _installed_version("shapecheck-cli")
    if cli_version == "not installed":
        cli_version = _source_version()

    info_table = Table(show_header=False, box=None, padding=(0, 2))
    info_table.add_column("Key", style="cyan", justify="right")
    info_table.add_column("Value", style="white")

    info_table.add_row("CLI Version", cli_version)
    for name in ("numpy", "scipy"):
        info_table.add_row(name, _installed_version(name))
    info_table.add_row("", "")
    info_table.add_row("Python", platform.python_version())
    info_table.add_row("Platform", platform.system())
    info_table.add_row("Architecture", platform.machine())

    panel = Panel(
        info_table,
        title="[bold cyan]Shapecheck CLI Information[/bold cyan]",
        border_style="cyan",
        padding=(1, 2)
    )

    console.print(panel)
    console.print()


# ===== Experiment Commands =====

from .experiment.cli import experiment_app  # noqa: E402
app.add_typer(experiment_app, name="experiment")


def main():
    app()

if __name__ == "__main__":
    main()
