"""``hierfdr`` command line: adjust hypothesis files, run simulations, render reports.

Exit status is 0 on success, 2 on usage or validation errors and 3 when an
internal consistency check fails.  Output files are written to a temporary
sibling first and renamed into place, so a failed run never leaves a partial
file behind.
"""

from __future__ import annotations

import functools
import os
import sys
import tempfile
from pathlib import Path

import click

from .errors import HierFdrError, InvariantError
from .model import HypothesisTree, format_results_text, parse_tree, serialize_results
from .rpp import DEFAULT_ALPHA, ingest_records, render_report
from .simulate import SimulationConfig, run_replication_experiment
from .tree import flat_results, treebh

ADJUST_METHODS = ("bonferroni", "bh", "by", "treebh")


def _read_input(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise HierFdrError(f"cannot read {path}: {exc}") from None


def _write_output(text: str, output: str | None) -> None:
    if output is None or output == "-":
        click.echo(text, nl=False)
        return
    target = Path(output)
    try:
        fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except OSError as exc:
        raise HierFdrError(f"cannot write {output}: {exc}") from None


def _guard(fn):
    """Map package errors to exit codes without tracebacks."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HierFdrError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except InvariantError as exc:
            click.echo(f"internal error: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _level(ctx, param, value):
    if value is not None and not 0.0 < value < 1.0:
        raise click.BadParameter(f"{value} is outside (0, 1)")
    return value


def _detect_format(path: str, text: str, given: str | None) -> str:
    if given:
        return given
    suffix = Path(path).suffix.lower()
    if suffix in (".json", ".csv"):
        return suffix[1:]
    return "json" if text.lstrip().startswith("{") else "csv"


def adjust_tree(tree: HypothesisTree, method: str, q: float) -> tuple[HypothesisTree, list]:
    """Library path behind ``hierfdr adjust``.

    Flat methods on a hierarchical input adjust the pooled leaf set, which is
    then the tree reported.
    """
    tree = HypothesisTree(tree.nodes, q)
    if method == "treebh":
        return tree, treebh(tree, q)
    if not tree.is_flat:
        tree = tree.leaf_family()
    return tree, flat_results(tree, method, q)


@click.group()
def cli() -> None:
    """Multiplicity adjustment (Bonferroni, BH, BY, TreeBH), FDR simulation and replicability reports."""


@cli.command()
@click.argument("input", default="-")
@click.option("--method", type=click.Choice(ADJUST_METHODS), default="treebh", show_default=True)
@click.option("--q", "q", type=float, default=None, callback=_level,
              help="Target FDR level (default: the document's q, else 0.05).")
@click.option("--format", "fmt", type=click.Choice(("text", "json", "csv")), default="text", show_default=True)
@click.option("--input-format", type=click.Choice(("json", "csv")), default=None,
              help="Input format (default: from the file extension or content).")
@click.option("--output", "-o", default=None, help="Output file (default: standard output).")
@_guard
def adjust(input: str, method: str, q: float | None, fmt: str, input_format: str | None,
           output: str | None) -> None:
    """Adjust the p-values of a hypothesis file (JSON tree or CSV)."""
    text = _read_input(input)
    tree = parse_tree(text, _detect_format(input, text, input_format))
    q = tree.q if q is None else q
    tree, results = adjust_tree(tree, method, q)
    if fmt == "text":
        doc = format_results_text(tree, results, method)
    else:
        doc = serialize_results(tree, results, fmt, method=method)
    _write_output(doc, output)


@cli.command()
@click.argument("config", default="-")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--q", "q", type=float, default=None, callback=_level, help="Override the config q.")
@click.option("--format", "fmt", type=click.Choice(("text", "json")), default="text", show_default=True)
@click.option("--output", "-o", default=None, help="Report file (default: standard output).")
@click.option("--raw-csv", default=None, help="Also write per-replication results as CSV.")
@_guard
def simulate(config: str, seed: int | None, q: float | None, fmt: str, output: str | None,
             raw_csv: str | None) -> None:
    """Run the Monte Carlo FDR/power/replication experiment for a JSON config."""
    doc = SimulationConfig.from_json(_read_input(config)).to_dict()
    if seed is not None:
        doc["seed"] = seed
    if q is not None:
        doc["q"] = q
    report = run_replication_experiment(SimulationConfig.from_dict(doc))
    _write_output(report.to_json() if fmt == "json" else report.to_text(), output)
    if raw_csv:
        _write_output(report.per_rep_csv(), raw_csv)


@cli.command()
@click.argument("input", default="-")
@click.option("--q", "q", type=float, default=None, callback=_level,
              help="Significance threshold (also the replication alpha unless --alpha is given).")
@click.option("--alpha", type=float, default=None, help="Replication threshold in (0, 1].")
@click.option("--format", "fmt", type=click.Choice(("text", "json")), default="text", show_default=True)
@click.option("--output", "-o", default=None, help="Report file (default: standard output).")
@_guard
def report(input: str, q: float | None, alpha: float | None, fmt: str, output: str | None) -> None:
    """Replicability report for an original/replication results CSV."""
    records = ingest_records(_read_input(input))
    level = alpha if alpha is not None else (q if q is not None else DEFAULT_ALPHA)
    _write_output(render_report(records, level, fmt), output)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
