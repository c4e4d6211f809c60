"""Políticas de comparação: reinício a cada troca de preferência, Q estático e caminho mínimo."""

import logging

from typing import Annotated
from typing import Dict
from typing import Iterable
from typing import List
from typing import Literal
from typing import NamedTuple
from typing import Optional
from typing import Union

import networkx as nx
import numpy as np

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import PositiveInt

from rota.erros import ErroContrato
from rota.learner import Behavior
from rota.learner import EpisodeResult
from rota.learner import EpsilonLinear
from rota.learner import ExplorationSchedule
from rota.learner import LearningRateSchedule
from rota.learner import QTableFamily
from rota.learner import epsilon_at
from rota.learner import limite_passos
from rota.learner import run_episode
from rota.mdp import TERMINAL
from rota.mdp import Pair
from rota.mdp import TransitionSample
from rota.mdp import step
from rota.topology import Topology


logger = logging.getLogger(__name__)


class _Modelo(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)


class Smorlr(_Modelo):
    """Aprendiz de tabela única que recomeça a cada troca de preferência."""

    kind: Literal["smorlr"] = "smorlr"
    keep_table: bool = Field(default=False, alias="smorlr_keep_table")
    decay_episodes: Optional[PositiveInt] = Field(default=None, alias="smorlr_decay_episodes")


class StaticQ(_Modelo):
    """Aprendiz de tabela única com preferência fixa."""

    kind: Literal["static-q"] = "static-q"
    fixed_beta: float = Field(default=0.9, ge=0.0, le=1.0)


class ShortestPath(_Modelo):
    """Roteador de caminho mínimo em saltos ou energia, alheio às perdas."""

    kind: Literal["shortest-path"] = "shortest-path"
    metric: Literal["hops", "energy"] = "hops"


BaselineKind = Annotated[
    Union[Smorlr, StaticQ, ShortestPath], Field(discriminator="kind")
]


def rotulo(baseline: BaselineKind) -> str:
    """Nome do método nos relatórios."""
    if isinstance(baseline, Smorlr):
        return "smorlr"
    if isinstance(baseline, StaticQ):
        return f"static_q_{baseline.fixed_beta:g}"
    return f"shortest_path_{baseline.metric}"


class EstadoSmorlr(NamedTuple):
    """Tabela corrente, preferência corrente e início do decaimento de epsilon."""

    familia: Optional[QTableFamily]
    beta: Optional[float]
    inicio: int
    horizonte: int

    def epsilon(self, episode_index: int) -> float:
        """Epsilon linear de 1 a 0 ao longo de `horizonte` episódios desde a última troca."""
        return epsilon_at(EpsilonLinear(horizon=self.horizonte), max(episode_index - self.inicio, 0))


def smorlr_on_preference_change(
    state: EstadoSmorlr,
    new_beta: float,
    episode_index: int,
    topology: Topology,
    destinos: Optional[Iterable[int]] = None,
    keep_table: bool = False,
) -> EstadoSmorlr:
    """
    Reinicia o aprendiz quando a preferência muda.

    Sem troca de preferência o estado é devolvido inalterado. Numa troca, epsilon
    volta a 1 e recomeça o decaimento; a tabela é zerada, a menos que `keep_table`
    seja True.

    Parameters
    ----------
    state : EstadoSmorlr
        Estado atual.

    new_beta : float
        Preferência do episódio.

    episode_index : int
        Episódio em que a preferência é aplicada.

    topology : Topology
        Rede de roteamento.

    destinos : Optional[Iterable[int]]
        Destinos da tabela nova.

    keep_table : bool
        Mantém os valores aprendidos com a preferência anterior.

    Returns
    -------
    EstadoSmorlr
        Estado para a nova preferência.
    """
    if state.familia is not None and new_beta == state.beta:
        return state

    nova = QTableFamily(topology, (new_beta,), destinos)
    if keep_table and state.familia is not None:
        nova.valores[...] = state.familia.valores
        nova.visitas[...] = state.familia.visitas
    if state.familia is not None:
        logger.debug(
            "SMORLR: preferência %s -> %s no episódio %d", state.beta, new_beta, episode_index
        )
    return EstadoSmorlr(nova, new_beta, episode_index, state.horizonte)


def shortest_path_route(
    topology: Topology, source: int, dest: int, metric: str = "hops"
) -> Dict[int, int]:
    """
    Tabela de próximos saltos de custo mínimo até `dest`.

    O custo de cada enlace é 1 (metric="hops") ou E(i, j) (metric="energy"); as perdas
    são ignoradas. Empates vão para o vizinho de menor índice. No próprio destino o
    próximo salto é o vizinho de menor índice (passo de entrega).

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    source : int
        Nó de origem; precisa alcançar `dest`.

    dest : int
        Nó de destino.

    metric : str
        "hops" ou "energy".

    Returns
    -------
    Dict[int, int]
        Próximo salto de cada nó que alcança `dest`.
    """
    if metric == "hops":
        peso = lambda u, v, atributos: 1.0  # noqa: E731
        custo = lambda i, j: 1.0  # noqa: E731
    elif metric == "energy":
        peso = "energy"
        custo = lambda i, j: topology.hop_energy[(i, j)]  # noqa: E731
    else:
        raise ErroContrato(f"metric={metric!r} desconhecida")

    distancia = nx.single_source_dijkstra_path_length(topology.grafo().reverse(), dest, weight=peso)
    if source not in distancia:
        raise ErroContrato(f"o destino {dest} é inalcançável a partir de {source}")

    proximos = {}
    for no in distancia:
        vizinhos = topology.neighbors[no]
        if no == dest:
            proximos[no] = min(vizinhos)
            continue
        proximos[no] = min(
            a
            for a in vizinhos
            if a in distancia and np.isclose(custo(no, a) + distancia[a], distancia[no])
        )
    return proximos


class AgenteQEstatico:
    """Aprendiz com uma única tabela de preferência fixa."""

    def __init__(
        self,
        topology: Topology,
        fixed_beta: float,
        exploracao: ExplorationSchedule,
        lr: LearningRateSchedule,
        destinos: Optional[Iterable[int]] = None,
        step_cap: Optional[int] = None,
    ) -> None:
        """Cria a tabela zerada."""
        self.topology = topology
        self.fixed_beta = fixed_beta
        self.exploracao = exploracao
        self.lr = lr
        self.step_cap = step_cap
        self.familia = QTableFamily(topology, (fixed_beta,), destinos)

    def executar_episodio(
        self, indice: int, source: int, dest: int, beta: float, rng: np.random.Generator
    ) -> EpisodeResult:
        """Episódio guiado sempre pela preferência fixa; `beta` só pontua o resultado."""
        return run_episode(
            self.topology,
            self.familia,
            self.fixed_beta,
            Behavior(epsilon_at(self.exploracao, indice)),
            source,
            dest,
            rng,
            self.lr,
            self.step_cap,
        )

    def familia_atual(self) -> QTableFamily:
        """Tabela aprendida."""
        return self.familia


class AgenteSmorlr:
    """Aprendiz que recomeça do zero a cada troca de preferência."""

    def __init__(
        self,
        topology: Topology,
        lr: LearningRateSchedule,
        horizonte: int,
        keep_table: bool = False,
        destinos: Optional[Iterable[int]] = None,
        step_cap: Optional[int] = None,
    ) -> None:
        """Estado inicial sem tabela; a primeira preferência cria a tabela."""
        self.topology = topology
        self.lr = lr
        self.keep_table = keep_table
        self.destinos = None if destinos is None else tuple(destinos)
        self.step_cap = step_cap
        self.estado = EstadoSmorlr(None, None, 0, horizonte)
        self.reinicios = 0

    def executar_episodio(
        self, indice: int, source: int, dest: int, beta: float, rng: np.random.Generator
    ) -> EpisodeResult:
        """Episódio com a preferência corrente, reiniciando se ela mudou."""
        novo = smorlr_on_preference_change(
            self.estado, beta, indice, self.topology, self.destinos, self.keep_table
        )
        if novo is not self.estado and self.estado.familia is not None:
            self.reinicios += 1
        self.estado = novo
        return run_episode(
            self.topology,
            self.estado.familia,
            beta,
            Behavior(self.estado.epsilon(indice)),
            source,
            dest,
            rng,
            self.lr,
            self.step_cap,
        )

    def familia_atual(self) -> Optional[QTableFamily]:
        """Tabela da preferência corrente."""
        return self.estado.familia


class AgenteCaminhoMinimo:
    """Roteador de caminho mínimo; não aprende."""

    def __init__(self, topology: Topology, metric: str = "hops", step_cap: Optional[int] = None) -> None:
        """Guarda a métrica; as tabelas de próximos saltos são calculadas sob demanda."""
        self.topology = topology
        self.metric = metric
        self.step_cap = step_cap if step_cap is not None else limite_passos(topology)
        self._rotas: Dict[int, Dict[int, int]] = {}

    def executar_episodio(
        self, indice: int, source: int, dest: int, beta: float, rng: np.random.Generator
    ) -> EpisodeResult:
        """Segue a tabela de próximos saltos até o terminal ou o limite de passos."""
        if dest not in self._rotas:
            self._rotas[dest] = shortest_path_route(self.topology, source, dest, self.metric)
        rota = self._rotas[dest]

        estado = Pair(int(source), int(dest))
        trajetoria: List[TransitionSample] = []
        entregue = False
        while len(trajetoria) < self.step_cap:
            amostra = step(self.topology, estado, rota[estado.current], rng)
            trajetoria.append(amostra)
            if estado.current == dest:
                entregue = True
            if amostra.next_state is TERMINAL:
                break
            estado = amostra.next_state
        return EpisodeResult(trajetoria, entregue, len(trajetoria))

    def familia_atual(self) -> None:
        """Não há tabela."""
        return None
