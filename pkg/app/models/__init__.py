"""Módulo de modelos/schemas Pydantic."""
