"""Roteamento multiobjetivo com preferências dinâmicas via Q-learning em redes com perdas."""
import logging


logging.getLogger(__name__).addHandler(logging.NullHandler())
