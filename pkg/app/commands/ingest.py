"""Comando `cto ingest`: leitura e seleção dos ensaios."""

import click

from app.commands.context import CLIState, pass_state
from app.services.pipeline import run_ingest


@click.command("ingest")
@pass_state
def ingest(state: CLIState):
    """Lê o registro de ensaios e grava o conjunto selecionado."""
    click.echo("📥 Lendo ensaios...")
    trials = state.run("ingest", run_ingest)
    click.echo(f"✅ {len(trials)} ensaios selecionados em {state.config.output_dir}")
