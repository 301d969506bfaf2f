"""Command-line harness: batch runs, cooperative-vs-baseline comparison,
scenario validation, default inspection, and the live control server.

Exit codes: 0 success, 2 configuration error, 3 runtime violation.
"""

from __future__ import annotations

import asyncio
import sys
from pathlib import Path

import click

from .live import serve
from .runner import RuntimeViolation, Simulation, compare as run_compare
from .scenario import ScenarioError, explain_defaults, load_scenario
from .telemetry import export_csv, export_report_json

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load(path: str):
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        for err in exc.errors:
            click.echo(f"config error: {err}", err=True)
        sys.exit(EXIT_CONFIG)


@click.group()
def main() -> None:
    """Cooperative-DBA fronthaul simulator."""


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["cti", "sr"]), default=None,
              help="Override the scenario's DBA mode.")
@click.option("--out", type=click.Path(), default=None,
              help="Write the full run report (JSON) to this file.")
@click.option("--csv", "csv_out", type=click.Path(), default=None,
              help="Write the per-window series as CSV.")
@click.option("--trace", type=click.Path(), default=None,
              help="Write the per-frame BwMap trace to this file.")
def run(scenario: str, mode: str | None, out: str | None, csv_out: str | None,
        trace: str | None) -> None:
    """Run one scenario in batch mode (as fast as possible)."""
    cfg = _load(scenario)
    sim = Simulation(cfg, mode, capture_trace=trace is not None)
    try:
        report = sim.run()
    except RuntimeViolation as exc:
        click.echo(f"runtime violation: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    if out:
        Path(out).write_text(export_report_json(report))
    if csv_out:
        Path(csv_out).write_text(export_csv(report))
    if trace:
        Path(trace).write_text("\n".join(sim.trace) + "\n" if sim.trace else "")
    click.echo(f"mode={report.mode} samples={report.samples} "
               f"mean_q_us={report.mean_q_us} p99_q_us={report.p99_q_us} "
               f"util={report.util} drops={report.drops}")


@main.command(name="compare")
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None,
              help="Directory for cti.json / sr.json / comparison.json.")
def compare_cmd(scenario: str, out: str | None) -> None:
    """Run both DBA modes on the same seed and report the deltas."""
    cfg = _load(scenario)
    try:
        result = run_compare(cfg)
    except RuntimeViolation as exc:
        click.echo(f"runtime violation: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "cti.json").write_text(export_report_json(result.cti))
        (out_dir / "sr.json").write_text(export_report_json(result.sr))
        (out_dir / "comparison.json").write_text(result.to_json())
    ratio = result.mean_q_ratio
    click.echo(f"mean_q_us cti={result.cti.mean_q_us} sr={result.sr.mean_q_us} "
               f"ratio_sr_over_cti={round(ratio, 3) if ratio else 'n/a'}")
    click.echo(f"p99_q_us  cti={result.cti.p99_q_us} sr={result.sr.p99_q_us}")


@main.command(name="serve")
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--port", type=int, default=None, help="Listen port (default from scenario).")
@click.option("--pace", type=float, default=None,
              help="Sim-to-wall-clock ratio; 0 runs unpaced.")
def serve_cmd(scenario: str, port: int | None, pace: float | None) -> None:
    """Run paced to wall clock, steerable over line-delimited JSON."""
    cfg = _load(scenario)
    try:
        asyncio.run(serve(cfg, port=port, pace=pace))
    except OSError as exc:
        click.echo(f"cannot listen: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    except KeyboardInterrupt:
        pass


@main.command(name="explain-config")
def explain_config() -> None:
    """Print every default the scenario loader applies."""
    click.echo(explain_defaults(), nl=False)


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
def validate(scenario: str) -> None:
    """Validate a scenario file, reporting all problems."""
    cfg = _load(scenario)
    click.echo(f"ok: {cfg.scenario_id} hash={cfg.scenario_hash()[:16]} "
               f"ues={len(cfg.ues)} onus={len(cfg.onus)}")


if __name__ == "__main__":
    main()
