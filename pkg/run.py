"""Script para executar a CLI durante o desenvolvimento."""

import os
import sys

# Adicionar o diretório raiz ao path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

if __name__ == "__main__":
    from app.config import Settings
    from app.main import cli

    settings = Settings()
    print("🚀 Iniciando CTO...", file=sys.stderr)
    print(f"📍 Configuração: {settings.CONFIG or '(via --config)'}", file=sys.stderr)
    print(f"📂 Saída: {settings.OUT or '(config)'}", file=sys.stderr)
    print(file=sys.stderr)

    cli()
