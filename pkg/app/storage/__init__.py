"""Camada de acesso a arquivos (entradas CSV e artefatos do pipeline)."""
