"""Comando `cto tune`: limiares das funções numéricas por fase."""

import click

from app.commands.context import CLIState, pass_state
from app.services.pipeline import run_tune


@click.command("tune")
@pass_state
def tune(state: CLIState):
    """Resolve os limiares (ajustados contra o ouro quando disponível)."""
    click.echo("🎯 Ajustando limiares...")
    cfg = state.run("tune", run_tune)
    for phase, per_lf in sorted(cfg.entries.items(), key=lambda item: item[0].value):
        chosen = ", ".join(f"{name}={entry.quantile}" for name, entry in sorted(per_lf.items()))
        click.echo(f"   {phase.value}: {chosen}")
    click.echo("✅ Limiares gravados")
