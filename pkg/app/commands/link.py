"""Comando `cto link`: ligação entre fases e pareamento com aprovações do FDA."""

import click

from app.commands.context import CLIState, pass_state
from app.models.schemas import WeakLabel
from app.services.pipeline import run_link


@click.command("link")
@pass_state
def link(state: CLIState):
    """Liga ensaios de fases posteriores às anteriores e deriva os rótulos de ligação."""
    click.echo("🔗 Ligando ensaios entre fases...")
    graph, labels = state.run("link", run_link)
    successes = sum(1 for label in labels.values() if label == WeakLabel.SUCCESS)
    click.echo(f"✅ {len(graph.edges)} arestas, {len(graph.fda_matches)} aprovações pareadas")
    click.echo(f"   rótulos de ligação: {successes} SUCCESS de {len(labels)}")
