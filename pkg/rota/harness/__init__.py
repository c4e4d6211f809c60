"""Execução de experimentos, métricas e relatórios."""
