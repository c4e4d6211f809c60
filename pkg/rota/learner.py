"""
Aprendizado Q com preferências dinâmicas.

Uma família de tabelas Q, uma por ponto da grade de preferências, é atualizada em
paralelo a partir de cada amostra de transição (aprendizado fora da política). A
política gulosa por interpolação usa a combinação convexa das duas tabelas vizinhas
da preferência pedida.

Cada atualização custa O(|B|) operações e cada escolha de ação O(|A|).
"""

import logging

from typing import Annotated
from typing import Iterable
from typing import List
from typing import Literal
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import NonNegativeInt
from pydantic import PositiveInt

from rota.config import config
from rota.erros import AcaoIlegal
from rota.erros import ErroContrato
from rota.erros import ErroPreferencia
from rota.mdp import TERMINAL
from rota.mdp import Pair
from rota.mdp import State
from rota.mdp import TransitionSample
from rota.mdp import scalarize_vetor
from rota.mdp import step
from rota.preference import Orientacao
from rota.preference import PreferenceGrid
from rota.preference import bracket
from rota.preference import criar_grade
from rota.preference import interpolar
from rota.topology import Topology
from rota.utils import validar_beta


logger = logging.getLogger(__name__)

TOLERANCIA_BETA = 1e-12


class _Modelo(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ConstantRate(_Modelo):
    """Taxa de aprendizado constante."""

    kind: Literal["constant"] = "constant"
    alpha: float = Field(default=0.9, gt=0.0, le=1.0)

    def alpha_para(self, visitas: int) -> float:
        """Taxa de aprendizado (independe das visitas)."""
        return self.alpha


class VisitDecay(_Modelo):
    """Taxa c / (1 + visitas) ** omega, com soma divergente e soma dos quadrados finita."""

    kind: Literal["visit-decay"] = "visit-decay"
    c: float = Field(default=1.0, gt=0.0, le=1.0)
    omega: float = Field(default=0.7, gt=0.5, le=1.0)

    def alpha_para(self, visitas: int) -> float:
        """Taxa de aprendizado para um par com `visitas` atualizações anteriores."""
        return self.c / (1.0 + visitas) ** self.omega


LearningRateSchedule = Annotated[
    Union[ConstantRate, VisitDecay], Field(discriminator="kind")
]


class Sequential(_Modelo):
    """Exploração pura nos primeiros `m_exp` episódios e gula depois."""

    kind: Literal["sequential"] = "sequential"
    m_exp: NonNegativeInt = 1000


class EpsilonLinear(_Modelo):
    """Epsilon decrescendo linearmente de `eps_begin` a `eps_end` em `horizon` episódios."""

    kind: Literal["linear"] = "linear"
    eps_begin: float = Field(default=1.0, ge=0.0, le=1.0)
    eps_end: float = Field(default=0.0, ge=0.0, le=1.0)
    horizon: PositiveInt = 5000


ExplorationSchedule = Annotated[
    Union[Sequential, EpsilonLinear], Field(discriminator="kind")
]


def epsilon_at(schedule: ExplorationSchedule, episode_index: int) -> float:
    """
    Probabilidade de exploração no episódio `episode_index`.

    Parameters
    ----------
    schedule : ExplorationSchedule
        Cronograma de exploração.

    episode_index : int
        Índice do episódio (>= 0).

    Returns
    -------
    float
        Epsilon em [0, 1].
    """
    if isinstance(schedule, Sequential):
        return 1.0 if episode_index < schedule.m_exp else 0.0
    fracao = min(episode_index / schedule.horizon, 1.0)
    return schedule.eps_begin + (schedule.eps_end - schedule.eps_begin) * fracao


class VisaoTabela:
    """Interface comum das tabelas Q armazenadas e interpoladas."""

    def __init__(self, topology: Topology, destinos: Tuple[int, ...], beta: Optional[float]) -> None:
        """Guarda a topologia e os destinos cobertos pela tabela."""
        self.topology = topology
        self.destinos = destinos
        self.beta = beta
        self._indice_destino = {d: k for k, d in enumerate(destinos)}

    def indice_destino(self, dest: int) -> int:
        """Posição do destino `dest` na tabela."""
        try:
            return self._indice_destino[dest]
        except KeyError:
            raise ErroContrato(f"o destino {dest} não está entre os destinos da tabela")

    def _linha(self, no: int, indice_destino: int) -> np.ndarray:
        raise NotImplementedError

    def materializar(self) -> np.ndarray:
        """Cópia dos valores no formato N x D x grau_max (posições inválidas em zero)."""
        raise NotImplementedError

    def acoes(self, state: Pair) -> Tuple[int, ...]:
        """Ações do estado, na ordem da topologia."""
        return self.topology.neighbors[state.current]

    def linha(self, state: State) -> np.ndarray:
        """Valores das ações legais do estado, na ordem dos vizinhos."""
        if state is TERMINAL:
            raise ErroContrato("o estado terminal não possui linha na tabela")
        return self._linha(state.current, self.indice_destino(state.dest))

    def valor(self, state: Pair, action: int) -> float:
        """Valor Q(state, action)."""
        try:
            posicao = self.topology.indice_acao(state.current, action)
        except KeyError:
            raise AcaoIlegal(f"o nó {action} não é vizinho de {state.current}")
        return float(self.linha(state)[posicao])

    def max_q(self, state: State) -> float:
        """Maior valor do estado; 0 no terminal."""
        if state is TERMINAL:
            return 0.0
        return float(self.linha(state).max())


class QTable(VisaoTabela):
    """
    Tabela Q de uma preferência.

    Os valores ficam num array N x D x grau_max em que a posição k da última
    dimensão corresponde ao k-ésimo vizinho do nó. A tabela pode ser uma visão
    sobre o array de uma família: as alterações da família aparecem nela.
    """

    def __init__(
        self,
        topology: Topology,
        destinos: Tuple[int, ...],
        valores: np.ndarray,
        beta: Optional[float] = None,
    ) -> None:
        """Associa o array de valores à topologia."""
        super().__init__(topology, destinos, beta)
        esperado = (topology.node_count, len(destinos), topology.grau_max)
        if valores.shape != esperado:
            raise ErroContrato(f"formato {valores.shape} difere do esperado {esperado}")
        self.valores = valores

    def _linha(self, no: int, indice_destino: int) -> np.ndarray:
        return self.valores[no, indice_destino, : len(self.topology.neighbors[no])]

    def materializar(self) -> np.ndarray:
        """Cópia dos valores."""
        return self.valores.copy()


class TabelaInterpolada(VisaoTabela):
    """Combinação convexa, calculada sob demanda, de duas tabelas vizinhas da grade."""

    def __init__(
        self,
        inferior: QTable,
        superior: QTable,
        rho: float,
        beta: float,
        orientacao: Orientacao = "consistente",
    ) -> None:
        """Guarda as duas tabelas e o peso da superior."""
        super().__init__(inferior.topology, inferior.destinos, beta)
        self.inferior = inferior
        self.superior = superior
        self.rho = rho
        self.orientacao = orientacao

    def _linha(self, no: int, indice_destino: int) -> np.ndarray:
        return interpolar(
            self.inferior._linha(no, indice_destino),
            self.superior._linha(no, indice_destino),
            self.rho,
            self.orientacao,
        )

    def materializar(self) -> np.ndarray:
        """Tabela interpolada completa."""
        return interpolar(
            self.inferior.valores, self.superior.valores, self.rho, self.orientacao
        )


class QTableFamily:
    """
    Família de tabelas Q, uma por preferência, com contagem de visitas compartilhada.

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    betas : Union[PreferenceGrid, Sequence[float]]
        Preferências das tabelas, em ordem estritamente crescente. Uma sequência que
        começa em 0 e termina em 1 é tratada como grade; outras (por exemplo uma única
        preferência) formam uma família sem interpolação.

    destinations : Optional[Iterable[int]]
        Destinos cobertos pelas tabelas. Por padrão, todos os nós.
    """

    def __init__(
        self,
        topology: Topology,
        betas: Union[PreferenceGrid, Sequence[float]],
        destinations: Optional[Iterable[int]] = None,
    ) -> None:
        """Cria as tabelas zeradas."""
        self.topology = topology
        if isinstance(betas, PreferenceGrid):
            self.grade: Optional[PreferenceGrid] = betas
            valores_beta = betas.values
        else:
            valores_beta = tuple(validar_beta(b) for b in betas)
            if not valores_beta:
                raise ErroPreferencia("a família precisa de ao menos uma preferência")
            if any(b <= a for a, b in zip(valores_beta, valores_beta[1:])):
                raise ErroPreferencia(f"preferências {valores_beta} não são estritamente crescentes")
            forma_grade = len(valores_beta) >= 2 and valores_beta[0] == 0.0 and valores_beta[-1] == 1.0
            self.grade = criar_grade(valores_beta) if forma_grade else None
        self.betas = np.asarray(valores_beta, dtype=float)

        if destinations is None:
            destinos = tuple(range(topology.node_count))
        else:
            destinos = tuple(sorted(set(int(d) for d in destinations)))
        for d in destinos:
            if not 0 <= d < topology.node_count:
                raise ErroContrato(f"destino {d} não é um nó da topologia")
        self.destinos = destinos
        self._indice_destino = {d: k for k, d in enumerate(destinos)}

        formato = (topology.node_count, len(destinos), topology.grau_max)
        self.valores = np.zeros((len(self.betas),) + formato)
        self.visitas = np.zeros(formato, dtype=np.int64)

    def indice_destino(self, dest: int) -> int:
        """Posição do destino `dest` nas tabelas."""
        try:
            return self._indice_destino[dest]
        except KeyError:
            raise ErroContrato(f"o destino {dest} não está entre os destinos da família")

    def indice_beta(self, beta: float) -> Optional[int]:
        """Posição da tabela de preferência `beta`, ou None."""
        posicoes = np.flatnonzero(np.abs(self.betas - beta) <= TOLERANCIA_BETA)
        return int(posicoes[0]) if posicoes.size else None

    def tabela(self, beta: float) -> QTable:
        """Tabela armazenada da preferência `beta` (visão sobre os valores da família)."""
        posicao = self.indice_beta(validar_beta(beta))
        if posicao is None:
            raise ErroPreferencia(f"beta={beta} não pertence à família {tuple(self.betas)}")
        return self._tabela(posicao)

    def _tabela(self, posicao: int) -> QTable:
        return QTable(
            self.topology, self.destinos, self.valores[posicao], float(self.betas[posicao])
        )

    @property
    def tabelas(self) -> List[QTable]:
        """Tabelas em ordem crescente de preferência."""
        return [self._tabela(k) for k in range(len(self.betas))]

    @property
    def mascara(self) -> np.ndarray:
        """Máscara N x 1 x grau_max das entradas legais, para broadcast sobre as tabelas."""
        return self.topology.mascara_acoes[:, None, :]

    def copiar(self) -> "QTableFamily":
        """Cópia independente da família."""
        copia = QTableFamily.__new__(QTableFamily)
        copia.__dict__.update(self.__dict__)
        copia.valores = self.valores.copy()
        copia.visitas = self.visitas.copy()
        return copia

    def zerar(self) -> None:
        """Reinicia valores e visitas."""
        self.valores[...] = 0.0
        self.visitas[...] = 0

    def memoria_bytes(self) -> int:
        """Memória dos valores: 8 * |B| * |S| * |A| bytes sobre as entradas legais."""
        pares = len(self.destinos) * sum(len(v) for v in self.topology.neighbors.values())
        return config.bytes_por_valor * len(self.betas) * pares

    def exportar(self) -> pd.DataFrame:
        """
        Fotografia das tabelas, uma linha por (current, dest, action, beta, value).

        As linhas seguem a ordem crescente de beta, depois nó atual, destino e a ordem
        dos vizinhos.
        """
        no, posicao_destino, posicao_acao = np.nonzero(
            np.broadcast_to(self.mascara, self.visitas.shape)
        )
        acao = self.topology.matriz_vizinhos[no, posicao_acao]
        destino = np.asarray(self.destinos)[posicao_destino]
        quadros = [
            pd.DataFrame(
                {
                    "current": no,
                    "dest": destino,
                    "action": acao,
                    "beta": beta,
                    "value": self.valores[k][no, posicao_destino, posicao_acao],
                }
            )
            for k, beta in enumerate(self.betas)
        ]
        return pd.concat(quadros, ignore_index=True)


def atualizar_q(q: np.ndarray, alpha: float, recompensa: np.ndarray, bootstrap: np.ndarray) -> np.ndarray:
    """Passo de diferença temporal q + alpha * (recompensa + bootstrap - q)."""
    return q + alpha * (recompensa + bootstrap - q)


def dpq_update(
    family: QTableFamily, sample: TransitionSample, lr: LearningRateSchedule
) -> QTableFamily:
    """
    Atualiza todas as tabelas da família com a mesma amostra.

    O alvo de cada tabela é a recompensa escalarizada com a sua preferência somada ao
    maior valor do próximo estado (0 no terminal). A contagem de visitas do par
    (estado, ação) é incrementada uma vez por amostra.

    Parameters
    ----------
    family : QTableFamily
        Família atualizada no lugar.

    sample : TransitionSample
        Amostra de transição.

    lr : LearningRateSchedule
        Cronograma da taxa de aprendizado.

    Returns
    -------
    QTableFamily
        A própria família.
    """
    estado = sample.state
    posicao_destino = family.indice_destino(estado.dest)
    try:
        posicao = family.topology.indice_acao(estado.current, sample.action)
    except KeyError:
        raise AcaoIlegal(f"o nó {sample.action} não é vizinho de {estado.current}")

    if sample.next_state is TERMINAL:
        bootstrap = np.zeros(len(family.betas))
    else:
        seguinte = sample.next_state.current
        grau = len(family.topology.neighbors[seguinte])
        bootstrap = family.valores[:, seguinte, posicao_destino, :grau].max(axis=1)

    recompensa = scalarize_vetor(sample.rewards, family.betas)
    alpha = lr.alpha_para(int(family.visitas[estado.current, posicao_destino, posicao]))
    q = family.valores[:, estado.current, posicao_destino, posicao]
    family.valores[:, estado.current, posicao_destino, posicao] = atualizar_q(
        q, alpha, recompensa, bootstrap
    )
    family.visitas[estado.current, posicao_destino, posicao] += 1
    return family


def replay(
    family: QTableFamily, trajetorias: Iterable[Sequence[TransitionSample]], lr: LearningRateSchedule
) -> QTableFamily:
    """Reaplica trajetórias já gravadas sobre a família, na ordem dada."""
    for trajetoria in trajetorias:
        for amostra in trajetoria:
            dpq_update(family, amostra, lr)
    return family


def gip_table(
    family: QTableFamily, beta: float, orientacao: Orientacao = "consistente"
) -> VisaoTabela:
    """
    Tabela usada pela política gulosa por interpolação.

    Se `beta` é uma preferência da família, devolve a tabela armazenada; senão, a
    combinação convexa das tabelas dos pontos da grade que envolvem `beta`.
    """
    beta = validar_beta(beta)
    posicao = family.indice_beta(beta)
    if posicao is not None:
        return family._tabela(posicao)
    if family.grade is None:
        raise ErroPreferencia(
            f"beta={beta} fora da família {tuple(family.betas)} e sem grade para interpolar"
        )
    inferior, superior, rho = bracket(family.grade, beta)
    return TabelaInterpolada(
        family.tabela(inferior), family.tabela(superior), rho, beta, orientacao
    )


def _argmax_menor_id(acoes: Sequence[int], linha: np.ndarray) -> int:
    maior = linha.max()
    return min(a for a, v in zip(acoes, linha) if v == maior)


def greedy_action(table: VisaoTabela, state: Pair) -> int:
    """Ação de maior valor; empates vão para o vizinho de menor índice."""
    return _argmax_menor_id(table.acoes(state), table.linha(state))


def escolher_acao(
    acoes: Sequence[int], linha: np.ndarray, epsilon: float, rng: np.random.Generator
) -> int:
    """
    Regra epsilon-gulosa sobre uma linha de valores.

    Um número uniforme é sempre sorteado; abaixo de `epsilon` a ação é sorteada
    uniformemente entre `acoes`.
    """
    if rng.random() < epsilon:
        return acoes[int(rng.integers(len(acoes)))]
    return _argmax_menor_id(acoes, linha)


def behavior_action(
    table: VisaoTabela, state: Pair, epsilon: float, rng: np.random.Generator
) -> int:
    """Ação epsilon-gulosa em relação à tabela."""
    if not 0.0 <= epsilon <= 1.0:
        raise ErroContrato(f"epsilon={epsilon} fora de [0, 1]")
    return escolher_acao(table.acoes(state), table.linha(state), epsilon, rng)


class Behavior(NamedTuple):
    """Modo de política epsilon-guloso."""

    epsilon: float


class GreedyGip(NamedTuple):
    """Modo de política gulosa por interpolação, sem sorteios."""


GREEDY_GIP = GreedyGip()

PolicyMode = Union[Behavior, GreedyGip]


class EpisodeResult(NamedTuple):
    """Trajetória de um episódio, indicador de entrega e número de ações."""

    trajectory: List[TransitionSample]
    delivered: bool
    steps: int

    @property
    def cap_hit(self) -> bool:
        """Indica se o episódio terminou pelo limite de passos."""
        return bool(self.trajectory) and self.trajectory[-1].next_state is not TERMINAL


def limite_passos(topology: Topology) -> int:
    """Limite padrão de ações por episódio."""
    return config.fator_limite_passos * topology.node_count


def run_episode(
    topology: Topology,
    family: QTableFamily,
    beta_m: float,
    policy_mode: PolicyMode,
    source: int,
    dest: int,
    rng: np.random.Generator,
    lr: Optional[LearningRateSchedule] = None,
    step_cap: Optional[int] = None,
    aprender: bool = True,
) -> EpisodeResult:
    """
    Executa um episódio de roteamento do nó `source` até `dest`.

    A ação de cada passo vem da tabela interpolada em `beta_m`; todas as amostras
    atualizam a família inteira, qualquer que seja o modo da política. O episódio
    termina no estado terminal ou ao atingir `step_cap` ações (padrão 4 * N), caso em
    que é contado como não entregue.

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    family : QTableFamily
        Família de tabelas, atualizada no lugar.

    beta_m : float
        Preferência do episódio.

    policy_mode : PolicyMode
        `Behavior(epsilon)` ou `GREEDY_GIP`.

    source, dest : int
        Nós de origem e destino.

    rng : np.random.Generator
        Gerador do episódio (escolhas de ação e transições).

    lr : Optional[LearningRateSchedule]
        Taxa de aprendizado; padrão `ConstantRate(alpha=0.9)`.

    step_cap : Optional[int]
        Limite de ações.

    aprender : bool
        Se False, a família não é atualizada.

    Returns
    -------
    EpisodeResult
        Trajetória, entrega e número de ações.
    """
    lr = lr if lr is not None else ConstantRate()
    limite = step_cap if step_cap is not None else limite_passos(topology)
    tabela = gip_table(family, beta_m)
    estado: State = Pair(int(source), int(dest))
    trajetoria: List[TransitionSample] = []
    entregue = False

    while len(trajetoria) < limite:
        if isinstance(policy_mode, Behavior):
            acao = behavior_action(tabela, estado, policy_mode.epsilon, rng)
        else:
            acao = greedy_action(tabela, estado)
        amostra = step(topology, estado, acao, rng)
        if aprender:
            dpq_update(family, amostra, lr)
        trajetoria.append(amostra)
        if estado.current == estado.dest:
            entregue = True
        if amostra.next_state is TERMINAL:
            break
        estado = amostra.next_state

    resultado = EpisodeResult(trajetoria, entregue, len(trajetoria))
    if resultado.cap_hit:
        logger.debug("Episódio %d -> %d atingiu o limite de %d passos", source, dest, limite)
    return resultado
