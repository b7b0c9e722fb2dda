"""Serviços de domínio do motor de rotulagem."""
