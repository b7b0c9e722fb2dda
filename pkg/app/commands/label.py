"""Comando `cto label`: matriz de rótulos e agregação."""

import click

from app.commands.context import CLIState, pass_state
from app.models.schemas import WeakLabel
from app.services.pipeline import run_label


@click.command("label")
@pass_state
def label(state: CLIState):
    """Aplica as funções de rotulagem e agrega os votos no rótulo final."""
    method = state.config.label_model.method
    click.echo(f"🏷️ Rotulando ensaios (agregador: {method})...")
    matrix, labels = state.run("label", run_label)
    successes = sum(1 for p in labels if p.hard_label == WeakLabel.SUCCESS)
    undecided = sum(1 for p in labels if p.undecided)
    click.echo(f"✅ {matrix.shape[0]} ensaios x {matrix.shape[1]} funções")
    click.echo(f"   SUCCESS: {successes}  FAILURE: {len(labels) - successes}  indecisos: {undecided}")
