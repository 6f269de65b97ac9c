"""Experiment subcommands for the shapecheck CLI."""

from pathlib import Path
from typing import List, Optional

import typer
from rich.console import Console
from rich.table import Table

from ..errors import ShapeCheckError

console = Console()
err_console = Console(stderr=True)

experiment_app = typer.Typer(
    name="experiment",
    help="Accuracy sweeps of the chi-squared tester against the collision baseline",
    add_completion=False,
)


def _rows_table(rows: list[dict], title: str) -> Table:
    from .harness import CSV_COLUMNS

    table = Table(title=title, show_lines=False)
    for name in CSV_COLUMNS:
        table.add_column(name, style="cyan" if name in ("m", "tester") else "white", justify="right")
    for row in rows:
        cells = []
        for name in CSV_COLUMNS:
            value = row[name]
            if name in ("accuracy", "accept_in", "reject_far"):
                value = f"{float(value):.3f}"
            cells.append(str(value))
        table.add_row(*cells)
    return table


@experiment_app.command("run")
def experiment_run(
    ctx: typer.Context,
    n: Optional[int] = typer.Option(None, "--n", help="Domain size (default 50000)"),
    eps: Optional[float] = typer.Option(None, "--eps", help="Distance parameter (default 0.05)"),
    reps: Optional[int] = typer.Option(None, "--reps", help="Paired trials per sample size (default 400)"),
    sample_grid: Optional[List[int]] = typer.Option(None, "--m", help="Sample size; repeat for a grid"),
    instance: Optional[str] = typer.Option(None, "--instance", help="uniform, zipf or custom"),
    tester: str = typer.Option("both", "--tester", help="chisq, bkr or both"),
    in_path: Optional[Path] = typer.Option(None, "--in-pmf", help="In-class pmf for --instance custom"),
    far_path: Optional[Path] = typer.Option(None, "--far-pmf", help="Far pmf for --instance custom"),
):
    """Run an accuracy sweep and emit one CSV row per (tester, m)."""
    from .harness import ExperimentConfig, TesterKind, experiment_accuracy, with_tester, write_csv

    state = ctx.find_root().obj
    settings = dict(state.config.get_value("experiment", {}) or {})
    overrides = {
        "n": n,
        "eps": eps,
        "reps": reps,
        "sample_grid": sample_grid or None,
        "instance": instance,
        "in_path": in_path,
        "far_path": far_path,
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    settings["seed"] = state.seed
    settings["preset"] = state.preset

    if tester != "both" and tester not in {k.value for k in TesterKind}:
        err_console.print(f"[red]Error:[/red] Unknown tester {tester!r}; choose chisq, bkr or both")
        raise typer.Exit(1)
    kinds = list(TesterKind) if tester == "both" else [TesterKind(tester)]
    try:
        base = ExperimentConfig.from_dict(settings)
    except ShapeCheckError as e:
        err_console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(1)

    rows = []
    try:
        for kind in kinds:
            rows.extend(experiment_accuracy(with_tester(base, kind), show_progress=state.interactive))
    except ShapeCheckError as e:
        err_console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(1)

    out = state.out or base.out_path
    if out is not None:
        try:
            write_csv(rows, out)
        except OSError as e:
            err_console.print(f"[red]Error:[/red] Cannot write {out}: {e}")
            raise typer.Exit(1)
        err_console.print(f"[green]✓[/green] Wrote {len(rows)} rows to {out}")
        return

    if state.fmt == "json":
        import json

        typer.echo(json.dumps([r.as_row() for r in rows], indent=2))
    else:
        from .harness import CSV_COLUMNS

        typer.echo(",".join(CSV_COLUMNS))
        for r in rows:
            typer.echo(",".join(str(v) for v in r.as_row().values()))


@experiment_app.command("summary")
def experiment_summary(
    csv_path: Path = typer.Argument(help="CSV written by 'experiment run'"),
):
    """Render an experiment CSV as a table."""
    from .harness import read_csv

    try:
        rows = read_csv(csv_path)
    except OSError as e:
        err_console.print(f"[red]Error:[/red] Cannot read {csv_path}: {e}")
        raise typer.Exit(1)
    except ShapeCheckError as e:
        err_console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(1)

    if not rows:
        console.print("[yellow]No rows in this file.[/yellow]")
        return
    console.print(_rows_table(rows, title=str(csv_path)))
    best = max(rows, key=lambda r: float(r["accuracy"]))
    console.print(
        f"\nBest accuracy [bold]{float(best['accuracy']):.3f}[/bold] "
        f"({best['tester']} at m={best['m']})"
    )
