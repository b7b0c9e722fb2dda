"""Estado compartilhado entre o grupo `cto` e os subcomandos."""

from pathlib import Path
from typing import Any, Callable, Dict, Optional, TypeVar

import click

from app.config import RunConfig, Settings, load_run_config
from app.services.pipeline import ManifestRecorder

T = TypeVar("T")


class CLIState:
    """Carrega a configuração só quando um subcomando de fato executa (--help não precisa dela)."""

    def __init__(self, config_path: Optional[Path], overrides: Dict[str, Any], settings: Settings):
        self.config_path = config_path
        self.overrides = overrides
        self.settings = settings
        self._config: Optional[RunConfig] = None

    @property
    def config(self) -> RunConfig:
        if self._config is None:
            self._config = load_run_config(self.config_path, self.settings, self.overrides)
        return self._config

    def run(self, command: str, stage: Callable[[RunConfig, ManifestRecorder], T]) -> T:
        """Executa a etapa e grava manifest_<comando>.json no diretório de saída."""
        config = self.config
        Path(config.output_dir).mkdir(parents=True, exist_ok=True)
        recorder = ManifestRecorder(command, config)
        result = stage(config, recorder)
        manifest = recorder.write()
        click.echo(f"📝 Manifesto: {manifest}")
        return result


pass_state = click.make_pass_decorator(CLIState)
