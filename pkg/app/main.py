"""CLI principal `cto` do motor de rotulagem de desfechos de ensaios clínicos."""

import logging
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from app import __version__
from app.commands import evaluate, ingest, label, link, tune
from app.commands.context import CLIState
from app.config import Settings
from app.exceptions import CTOError


class CTOGroup(click.Group):
    """Converte erros do domínio em mensagens curtas e códigos de saída estáveis (0, 1, 2)."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except CTOError as e:
            click.echo(f"❌ {e}", err=True)
            ctx.exit(e.exit_code)
        except ValidationError as e:
            click.echo(f"❌ Dados inválidos: {e}", err=True)
            ctx.exit(1)


@click.group(cls=CTOGroup)
@click.version_option(__version__, prog_name="cto")
@click.option("--config", "config_path", type=click.Path(path_type=Path), help="Documento JSON da execução (ou CTO_CONFIG)")
@click.option("--out", "output_dir", type=click.Path(path_type=Path), help="Diretório de saída")
@click.option("--seed", type=int, help="Semente única de toda aleatoriedade")
@click.option("--workers", type=click.IntRange(min=1), help="Paralelismo dentro de cada etapa")
@click.option("--phase", type=click.Choice(["1", "2", "3", "4", "all"]), help="Grupo de fase avaliado")
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: Optional[Path],
    output_dir: Optional[Path],
    seed: Optional[int],
    workers: Optional[int],
    phase: Optional[str],
):
    """Rotulagem fraca de desfechos de ensaios clínicos: ingest -> link -> tune -> label -> evaluate."""
    settings = Settings()
    logging.basicConfig(
        level=settings.LOG_LEVEL.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    overrides = {
        "seed": seed,
        "workers": workers,
        "output_dir": str(output_dir.resolve()) if output_dir is not None else None,
        "phase": phase,
    }
    ctx.obj = CLIState(config_path, overrides, settings)


# Registrar subcomandos
cli.add_command(ingest.ingest)
cli.add_command(link.link)
cli.add_command(tune.tune)
cli.add_command(label.label)
cli.add_command(evaluate.evaluate)
cli.add_command(evaluate.report)


if __name__ == "__main__":
    cli()
