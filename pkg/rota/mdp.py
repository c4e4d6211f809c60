"""Processo de decisão de caminho mínimo estocástico do roteamento de pacotes."""

import enum

from typing import NamedTuple
from typing import Tuple
from typing import Union

import numpy as np

from rota.erros import AcaoIlegal
from rota.erros import ErroContrato
from rota.topology import Topology
from rota.utils import validar_beta


class Pair(NamedTuple):
    """Estado (nó atual, destino) de um pacote em trânsito."""

    current: int
    dest: int


class Terminal(enum.Enum):
    """Estado terminal absorvente (pacote entregue ou descartado)."""

    TERMINAL = "terminal"

    def __repr__(self) -> str:
        """Representação curta."""
        return "Terminal"


TERMINAL = Terminal.TERMINAL

State = Union[Pair, Terminal]


class RewardPair(NamedTuple):
    """Recompensas de energia (<= 0, em mJ) e de entrega ({0, 1}) de uma ação."""

    r_energy: float
    r_pdr: float


class TransitionSample(NamedTuple):
    """Amostra (estado, ação, recompensas, próximo estado)."""

    state: Pair
    action: int
    rewards: RewardPair
    next_state: State


def _validar_par(topology: Topology, state: State) -> Pair:
    if state is TERMINAL:
        raise ErroContrato("o estado terminal não possui ações")
    current, dest = state
    for nome, no in (("current", current), ("dest", dest)):
        if not 0 <= no < topology.node_count:
            raise ErroContrato(f"{nome}={no} não é um nó da topologia")
    return Pair(int(current), int(dest))


def _validar_acao(topology: Topology, state: Pair, action: int) -> None:
    if action not in topology.neighbors[state.current]:
        raise AcaoIlegal(
            f"o nó {action} não é vizinho de {state.current} "
            f"(vizinhos: {list(topology.neighbors[state.current])})"
        )


def actions(topology: Topology, state: State) -> Tuple[int, ...]:
    """
    Ações admissíveis (próximos saltos) de um estado.

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    state : State
        Estado de origem. O estado terminal não possui ações.

    Returns
    -------
    Tuple[int, ...]
        Vizinhos do nó atual, na ordem da topologia.
    """
    par = _validar_par(topology, state)
    return topology.neighbors[par.current]


def reward_pair(topology: Topology, state: State, action: int) -> RewardPair:
    """
    Recompensas de energia e de entrega da ação `action` no estado `state`.

    Fora do destino a recompensa de energia é -E(i, a) e a de entrega é 0; no destino
    são 0 e 1, respectivamente.
    """
    par = _validar_par(topology, state)
    _validar_acao(topology, par, action)
    if par.current == par.dest:
        return RewardPair(0.0, 1.0)
    return RewardPair(-topology.hop_energy[(par.current, action)], 0.0)


def step(
    topology: Topology, state: State, action: int, rng: np.random.Generator
) -> TransitionSample:
    """
    Executa uma transição do processo de decisão.

    No destino a transição leva ao terminal sem consumir números aleatórios. Nos
    demais estados é sorteada a perda no enlace e, se o pacote chegar a um nó não
    confiável, o descarte no nó. As recompensas são devidas mesmo quando o pacote
    se perde.

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    state : State
        Estado atual.

    action : int
        Próximo salto escolhido.

    rng : np.random.Generator
        Gerador do episódio.

    Returns
    -------
    TransitionSample
        Amostra da transição.
    """
    par = _validar_par(topology, state)
    recompensas = reward_pair(topology, par, action)
    if par.current == par.dest:
        return TransitionSample(par, action, recompensas, TERMINAL)

    if rng.random() < topology.loss_prob[(par.current, action)]:
        return TransitionSample(par, action, recompensas, TERMINAL)

    p_drop = topology.p_drop(action)
    if p_drop > 0.0 and rng.random() < p_drop:
        return TransitionSample(par, action, recompensas, TERMINAL)

    return TransitionSample(par, action, recompensas, Pair(action, par.dest))


def scalarize(rewards: RewardPair, beta: float) -> float:
    """Recompensa escalarizada beta * r_energy + (1 - beta) * r_pdr."""
    beta = validar_beta(beta)
    return beta * rewards.r_energy + (1.0 - beta) * rewards.r_pdr


def scalarize_vetor(rewards: RewardPair, betas: np.ndarray) -> np.ndarray:
    """Recompensa escalarizada para um vetor de preferências já validadas."""
    return betas * rewards.r_energy + (1.0 - betas) * rewards.r_pdr
