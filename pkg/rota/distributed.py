"""
Execução distribuída do aprendizado: cada nó guarda apenas as linhas da tabela Q
das suas próprias ações e aprende com os reconhecimentos (acks) dos vizinhos.

A troca de mensagens é simulada em ordem determinística de saltos; com a mesma
semente, o resultado é idêntico ao do aprendizado centralizado.
"""

import enum
import logging

from typing import Iterable
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Union

import numpy as np
import pandas as pd

from rota.config import config
from rota.erros import AcaoIlegal
from rota.erros import ErroContrato
from rota.erros import ErroPreferencia
from rota.learner import ConstantRate
from rota.learner import LearningRateSchedule
from rota.learner import QTableFamily
from rota.learner import atualizar_q
from rota.learner import escolher_acao
from rota.learner import limite_passos
from rota.mdp import TERMINAL
from rota.mdp import Pair
from rota.mdp import RewardPair
from rota.mdp import TransitionSample
from rota.mdp import reward_pair
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

COLUNAS_MENSAGENS = ["episode", "hop", "kind", "from", "to", "dest", "payload_bytes"]


class DataMessage(NamedTuple):
    """Pacote de dados enviado de `from_` para `to`."""

    dest: int
    from_: int
    to: int
    payload_bytes: int


class AckMessage(NamedTuple):
    """
    Reconhecimento devolvido pelo receptor `from_` de um pacote de dados.

    `max_q` traz, para cada preferência, o maior valor do receptor para o destino do
    pacote. Reconhecimentos locais (entrega no próprio destino) não trafegam na rede.
    """

    from_: int
    delivered_reward: float
    max_q: np.ndarray
    local: bool = False


class Timeout(enum.Enum):
    """Ausência de reconhecimento: o pacote foi perdido."""

    TIMEOUT = "timeout"


TIMEOUT = Timeout.TIMEOUT


class NodeAgent:
    """
    Agente de um nó da rede.

    Guarda, para cada preferência da grade, as linhas Q^i(dest, a) de todos os
    destinos armazenados e de todos os vizinhos `a` do nó.

    Parameters
    ----------
    id : int
        Nó do agente.

    neighbor_list : Sequence[int]
        Vizinhos do nó, na ordem da topologia.

    destinos : Iterable[int]
        Destinos armazenados localmente.

    betas : Union[PreferenceGrid, Sequence[float]]
        Preferências das tabelas locais, em ordem crescente.

    guardar_recebidos : bool
        Se True, guarda os reconhecimentos aplicados para auditoria.
    """

    def __init__(
        self,
        id: int,
        neighbor_list: Sequence[int],
        destinos: Iterable[int],
        betas: Union[PreferenceGrid, Sequence[float]],
        guardar_recebidos: bool = False,
    ) -> None:
        """Cria as linhas locais zeradas."""
        self.id = int(id)
        self.neighbor_list = tuple(int(v) for v in neighbor_list)
        self.destinos = tuple(sorted(set(int(d) for d in destinos)))
        self._indice_destino = {d: k for k, d in enumerate(self.destinos)}
        self._indice_acao = {a: k for k, a in enumerate(self.neighbor_list)}

        valores_beta = betas.values if isinstance(betas, PreferenceGrid) else tuple(betas)
        self.betas = np.asarray([validar_beta(b) for b in valores_beta], dtype=float)
        forma_grade = len(valores_beta) >= 2 and valores_beta[0] == 0.0 and valores_beta[-1] == 1.0
        self.grade = criar_grade(valores_beta) if forma_grade else None

        self.local_q = np.zeros((len(self.betas), len(self.destinos), len(self.neighbor_list)))
        self.visitas = np.zeros((len(self.destinos), len(self.neighbor_list)), dtype=np.int64)
        self.recebidos: Optional[List[AckMessage]] = [] if guardar_recebidos else None

    def indice_destino(self, dest: int) -> int:
        """Posição local do destino `dest`."""
        try:
            return self._indice_destino[dest]
        except KeyError:
            raise ErroContrato(f"o nó {self.id} não armazena o destino {dest}")

    def indice_acao(self, action: int) -> int:
        """Posição local do vizinho `action`."""
        try:
            return self._indice_acao[action]
        except KeyError:
            raise AcaoIlegal(f"o nó {action} não é vizinho de {self.id}")

    def linha_gip(
        self, dest: int, beta: float, orientacao: Orientacao = "consistente"
    ) -> np.ndarray:
        """Linha local do destino, interpolada em `beta` quando necessário."""
        posicao_destino = self.indice_destino(dest)
        beta = validar_beta(beta)
        exatos = np.flatnonzero(np.abs(self.betas - beta) <= 1e-12)
        if exatos.size:
            return self.local_q[int(exatos[0]), posicao_destino]
        if self.grade is None:
            raise ErroPreferencia(f"beta={beta} fora das preferências do nó {self.id}")
        inferior, superior, rho = bracket(self.grade, beta)
        return interpolar(
            self.local_q[self.grade.indice(inferior), posicao_destino],
            self.local_q[self.grade.indice(superior), posicao_destino],
            rho,
            orientacao,
        )

    def responder(self, dest: int, delivered_reward: float) -> AckMessage:
        """Reconhecimento de um pacote recebido com destino `dest`."""
        max_q = self.local_q[:, self.indice_destino(dest), :].max(axis=1)
        return AckMessage(self.id, float(delivered_reward), max_q)

    def __repr__(self) -> str:
        """Representação resumida."""
        return f"NodeAgent(id={self.id}, vizinhos={self.neighbor_list}, destinos={len(self.destinos)})"


def criar_agentes(
    topology: Topology,
    betas: Union[PreferenceGrid, Sequence[float]],
    destinos: Optional[Iterable[int]] = None,
    guardar_recebidos: bool = False,
) -> List[NodeAgent]:
    """
    Cria um agente por nó.

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    betas : Union[PreferenceGrid, Sequence[float]]
        Preferências das tabelas.

    destinos : Optional[Iterable[int]]
        Destinos armazenados em cada nó; por padrão apenas o sorvedouro.

    guardar_recebidos : bool
        Guarda os reconhecimentos aplicados para auditoria.

    Returns
    -------
    List[NodeAgent]
        Agentes indexados pelo nó.
    """
    destinos = (topology.sink,) if destinos is None else tuple(destinos)
    return [
        NodeAgent(no, topology.neighbors[no], destinos, betas, guardar_recebidos)
        for no in range(topology.node_count)
    ]


def node_forward(
    agent: NodeAgent,
    dest: int,
    beta: float,
    epsilon: float,
    rng: np.random.Generator,
    orientacao: Orientacao = "consistente",
) -> int:
    """Próximo salto epsilon-guloso sobre a linha local interpolada do destino."""
    return escolher_acao(agent.neighbor_list, agent.linha_gip(dest, beta, orientacao), epsilon, rng)


def node_apply_ack(
    agent: NodeAgent,
    dest: int,
    action: int,
    rewards: RewardPair,
    ack: Union[AckMessage, Timeout],
    lr: LearningRateSchedule,
) -> NodeAgent:
    """
    Atualiza a linha local Q^i(dest, action) de todas as preferências.

    Com reconhecimento, a recompensa de entrega vem do ack e o valor futuro é
    `ack.max_q`; sem reconhecimento (perda), ambos são zero.

    Parameters
    ----------
    agent : NodeAgent
        Agente remetente, atualizado no lugar.

    dest : int
        Destino do pacote.

    action : int
        Vizinho usado no envio.

    rewards : RewardPair
        Recompensas da ação; a parcela de entrega é substituída pela do ack.

    ack : Union[AckMessage, Timeout]
        Reconhecimento recebido ou `TIMEOUT`.

    lr : LearningRateSchedule
        Taxa de aprendizado.

    Returns
    -------
    NodeAgent
        O próprio agente.
    """
    posicao_destino = agent.indice_destino(dest)
    posicao = agent.indice_acao(action)

    if ack is TIMEOUT:
        recompensas = RewardPair(rewards.r_energy, 0.0)
        bootstrap = np.zeros(len(agent.betas))
    else:
        if len(ack.max_q) != len(agent.betas):
            raise ErroContrato(
                f"ack com {len(ack.max_q)} valores para {len(agent.betas)} preferências"
            )
        recompensas = RewardPair(rewards.r_energy, ack.delivered_reward)
        bootstrap = ack.max_q
        if agent.recebidos is not None:
            agent.recebidos.append(ack)

    alpha = lr.alpha_para(int(agent.visitas[posicao_destino, posicao]))
    agent.local_q[:, posicao_destino, posicao] = atualizar_q(
        agent.local_q[:, posicao_destino, posicao],
        alpha,
        scalarize_vetor(recompensas, agent.betas),
        bootstrap,
    )
    agent.visitas[posicao_destino, posicao] += 1
    return agent


class RegistroMensagens:
    """Registro ordenado das mensagens trocadas nos episódios distribuídos."""

    def __init__(self, quantidade_betas: int) -> None:
        """Registro vazio para acks com `quantidade_betas` valores."""
        self.quantidade_betas = quantidade_betas
        self.linhas: List[tuple] = []
        self.acks: List[AckMessage] = []

    @property
    def bytes_ack(self) -> int:
        """Tamanho de um ack: cabeçalho, um valor por preferência e a recompensa de entrega."""
        return config.bytes_overhead + config.bytes_por_valor * self.quantidade_betas + 1

    def dados(self, episodio: int, salto: int, mensagem: DataMessage) -> None:
        """Registra um pacote de dados."""
        self.linhas.append(
            (episodio, salto, "data", mensagem.from_, mensagem.to, mensagem.dest, mensagem.payload_bytes)
        )

    def ack(self, episodio: int, salto: int, ack: AckMessage, para: int, dest: int) -> None:
        """Registra um reconhecimento."""
        self.linhas.append((episodio, salto, "ack", ack.from_, para, dest, self.bytes_ack))
        self.acks.append(ack)

    def timeout(self, episodio: int, salto: int, de: int, para: int, dest: int) -> None:
        """Registra a falta de reconhecimento de um envio."""
        self.linhas.append((episodio, salto, "timeout", de, para, dest, 0))

    def para_dataframe(self) -> pd.DataFrame:
        """Registro no formato tabular de exportação."""
        return pd.DataFrame(self.linhas, columns=COLUNAS_MENSAGENS)

    def auditar(self, agentes: Sequence[NodeAgent]) -> List[str]:
        """
        Verifica o protocolo e a localidade da informação.

        Cada pacote de dados deve ser seguido de exatamente um ack (do receptor) ou um
        timeout, e todo valor de outro nó usado numa atualização deve ter chegado por
        um ack registrado.

        Parameters
        ----------
        agentes : Sequence[NodeAgent]
            Agentes criados com `guardar_recebidos=True`.

        Returns
        -------
        List[str]
            Problemas encontrados; vazia quando a auditoria passa.
        """
        problemas = []
        for posicao, linha in enumerate(self.linhas):
            if linha[2] != "data":
                continue
            seguinte = self.linhas[posicao + 1] if posicao + 1 < len(self.linhas) else None
            if seguinte is None or seguinte[2] not in ("ack", "timeout") or seguinte[:2] != linha[:2]:
                problemas.append(f"dados sem resposta no episódio {linha[0]}, salto {linha[1]}")
                continue
            if seguinte[2] == "ack" and (seguinte[3], seguinte[4]) != (linha[4], linha[3]):
                problemas.append(f"ack de remetente errado no episódio {linha[0]}, salto {linha[1]}")

        respostas = sum(1 for linha in self.linhas if linha[2] in ("ack", "timeout"))
        envios = sum(1 for linha in self.linhas if linha[2] == "data")
        if respostas != envios:
            problemas.append(f"{envios} pacotes de dados para {respostas} respostas")

        registrados = {id(ack) for ack in self.acks}
        for agente in agentes:
            if agente.recebidos is None:
                problemas.append(f"o nó {agente.id} não guardou os acks recebidos")
                continue
            for ack in agente.recebidos:
                if ack.local:
                    if ack.from_ != agente.id or np.any(ack.max_q != 0.0):
                        problemas.append(f"ack local inválido no nó {agente.id}")
                elif id(ack) not in registrados:
                    problemas.append(f"o nó {agente.id} usou um valor do nó {ack.from_} fora de um ack")
        return problemas


class DistributedEpisodeResult(NamedTuple):
    """Resultado de um episódio distribuído."""

    delivered: bool
    steps: int
    per_hop_energy: List[float]
    trajectory: List[TransitionSample]


def run_distributed_episode(
    agents: Sequence[NodeAgent],
    topology: Topology,
    beta_m: float,
    source: int,
    dest: int,
    epsilon: float,
    rng: np.random.Generator,
    lr: Optional[LearningRateSchedule] = None,
    step_cap: Optional[int] = None,
    registro: Optional[RegistroMensagens] = None,
    episodio: int = 0,
) -> DistributedEpisodeResult:
    """
    Executa um episódio com a troca de dados e acks entre os agentes.

    A ordem dos sorteios é a mesma do episódio centralizado: escolha da ação e, em
    seguida, o canal. A entrega no próprio destino é uma atualização local com
    recompensa de entrega 1 e valor futuro zero, sem mensagem na rede.

    Parameters
    ----------
    agents : Sequence[NodeAgent]
        Agentes indexados pelo nó.

    topology : Topology
        Rede de roteamento (usada apenas como canal).

    beta_m : float
        Preferência do episódio.

    source, dest : int
        Nós de origem e destino.

    epsilon : float
        Probabilidade de exploração.

    rng : np.random.Generator
        Gerador do episódio.

    lr : Optional[LearningRateSchedule]
        Taxa de aprendizado; padrão `ConstantRate(alpha=0.9)`.

    step_cap : Optional[int]
        Limite de ações (padrão 4 * N).

    registro : Optional[RegistroMensagens]
        Registro de mensagens a ser preenchido.

    episodio : int
        Índice do episódio, usado no registro.

    Returns
    -------
    DistributedEpisodeResult
        Entrega, número de ações, energia de cada salto e a trajetória equivalente.
    """
    lr = lr if lr is not None else ConstantRate()
    limite = step_cap if step_cap is not None else limite_passos(topology)
    atual = int(source)
    trajetoria: List[TransitionSample] = []
    energias: List[float] = []
    entregue = False

    while len(trajetoria) < limite:
        salto = len(trajetoria)
        agente = agents[atual]
        acao = node_forward(agente, dest, beta_m, epsilon, rng)
        estado = Pair(atual, dest)
        recompensas = reward_pair(topology, estado, acao)

        if atual == dest:
            ack = AckMessage(atual, 1.0, np.zeros(len(agente.betas)), local=True)
            node_apply_ack(agente, dest, acao, recompensas, ack, lr)
            trajetoria.append(TransitionSample(estado, acao, recompensas, TERMINAL))
            entregue = True
            break

        if registro is not None:
            bytes_dados = config.bytes_dados + config.bytes_overhead
            registro.dados(episodio, salto, DataMessage(dest, atual, acao, bytes_dados))
        amostra = step(topology, estado, acao, rng)
        energias.append(-recompensas.r_energy)

        if amostra.next_state is TERMINAL:
            if registro is not None:
                registro.timeout(episodio, salto, atual, acao, dest)
            node_apply_ack(agente, dest, acao, recompensas, TIMEOUT, lr)
            trajetoria.append(amostra)
            break

        ack = agents[acao].responder(dest, recompensas.r_pdr)
        if registro is not None:
            registro.ack(episodio, salto, ack, atual, dest)
        node_apply_ack(agente, dest, acao, recompensas, ack, lr)
        trajetoria.append(amostra)
        atual = acao

    return DistributedEpisodeResult(entregue, len(trajetoria), energias, trajetoria)


def local_memory_bytes(agent: NodeAgent, grid: Union[PreferenceGrid, Sequence[float]]) -> int:
    """Memória das linhas locais: 8 * |B| * |S_local| * |A| bytes."""
    return config.bytes_por_valor * len(grid) * len(agent.destinos) * len(agent.neighbor_list)


def centralizar(agents: Sequence[NodeAgent], topology: Topology) -> QTableFamily:
    """
    Junta as linhas locais dos agentes numa família centralizada.

    Parameters
    ----------
    agents : Sequence[NodeAgent]
        Agentes indexados pelo nó, com as mesmas preferências e destinos.

    topology : Topology
        Rede de roteamento.

    Returns
    -------
    QTableFamily
        Família com os valores e visitas dos agentes.
    """
    referencia = agents[0]
    betas = referencia.grade if referencia.grade is not None else tuple(referencia.betas)
    familia = QTableFamily(topology, betas, referencia.destinos)
    for agente in agents:
        if agente.destinos != familia.destinos:
            raise ErroContrato(f"o nó {agente.id} armazena destinos diferentes")
        grau = len(agente.neighbor_list)
        familia.valores[:, agente.id, :, :grau] = agente.local_q
        familia.visitas[agente.id, :, :grau] = agente.visitas
    return familia


def distribuir(family: QTableFamily) -> List[NodeAgent]:
    """Separa uma família centralizada em agentes com as linhas locais correspondentes."""
    betas = family.grade if family.grade is not None else tuple(family.betas)
    agentes = criar_agentes(family.topology, betas, family.destinos)
    for agente in agentes:
        grau = len(agente.neighbor_list)
        agente.local_q[...] = family.valores[:, agente.id, :, :grau]
        agente.visitas[...] = family.visitas[agente.id, :, :grau]
    return agentes

