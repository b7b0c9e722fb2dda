"""Comandos `cto evaluate` e `cto report`."""

import click

from app.commands.context import CLIState, pass_state
from app.services.evaluation import render_summary
from app.services.pipeline import run_evaluate, run_report


@click.command("evaluate")
@pass_state
def evaluate(state: CLIState):
    """Compara os rótulos com o ouro e grava metrics.json e o relatório."""
    click.echo("📊 Avaliando rótulos contra o ouro...")
    report = state.run("evaluate", run_evaluate)
    click.echo(render_summary(report), nl=False)
    click.echo("✅ Avaliação concluída")


@click.command("report")
@pass_state
def report(state: CLIState):
    """Regrava report.csv e summary.txt a partir de metrics.json."""
    result = state.run("report", run_report)
    click.echo(render_summary(result), nl=False)
