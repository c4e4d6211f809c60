from pathlib import Path

import numpy as np
import pytest

from rota.topology import Topology
from rota.topology import grid_topology
from rota.topology import line_topology


CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def diamante(energia_confiavel: float = 1.0) -> Topology:
    """Dois caminhos de 0 a 3: por 1, barato e com perdas; por 2, caro e sem perdas."""
    arestas = {
        (0, 1): (0.3, 0.1),
        (1, 0): (0.3, 0.1),
        (1, 3): (0.3, 0.1),
        (3, 1): (0.3, 0.1),
        (0, 2): (0.0, energia_confiavel),
        (2, 0): (0.0, energia_confiavel),
        (2, 3): (0.0, energia_confiavel),
        (3, 2): (0.0, energia_confiavel),
    }
    return Topology(
        node_count=4,
        neighbors={0: [1, 2], 1: [0, 3], 2: [0, 3], 3: [1, 2]},
        loss_prob={aresta: valores[0] for aresta, valores in arestas.items()},
        hop_energy={aresta: valores[1] for aresta, valores in arestas.items()},
        sink=3,
    )


@pytest.fixture
def linha3() -> Topology:
    return line_topology(3, 0.0, 1.0)


@pytest.fixture
def grade3() -> Topology:
    return grid_topology(3, 3, 0.1, 1.0)


@pytest.fixture
def topologia_diamante() -> Topology:
    return diamante()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def pasta_configs() -> Path:
    return CONFIGS


@pytest.fixture
def criar_diamante():
    return diamante
