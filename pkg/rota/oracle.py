"""
Solução exata e verificação teórica em instâncias pequenas.

Calcula Q* por iteração de valor, as constantes Gamma (maior diferença entre as duas
recompensas) e H (maior duração esperada de um episódio sob políticas ótimas), e
verifica a continuidade de Lipschitz de Q* em beta e o limite de erro da tabela
interpolada.
"""

import itertools
import logging
import math

from typing import Dict
from typing import Iterable
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import networkx as nx
import numpy as np
import pandas as pd
import scipy.linalg

from rota.config import config
from rota.erros import ErroContrato
from rota.erros import ErroConvergencia
from rota.erros import PoliticaImpropria
from rota.learner import QTable
from rota.learner import QTableFamily
from rota.learner import gip_table
from rota.learner import greedy_action
from rota.mdp import Pair
from rota.preference import PreferenceGrid
from rota.preference import bracket
from rota.preference import criar_grade
from rota.topology import Topology
from rota.utils import norma_sup
from rota.utils import validar_beta


logger = logging.getLogger(__name__)

COLUNAS_TEORIA = ["check", "topology", "beta", "lhs", "rhs", "holds"]

FOLGA_MINIMA = 1e-8

# nó fictício que representa o fim do episódio no grafo das ações empatadas
SAIDA = -1


class ExactSolution(NamedTuple):
    """Q* e V* de uma preferência, no mesmo formato N x D x grau_max das tabelas."""

    beta: float
    topology: Topology
    destinos: Tuple[int, ...]
    q_star: np.ndarray
    v_star: np.ndarray
    residual: float

    def como_tabela(self) -> QTable:
        """Q* como tabela."""
        return QTable(self.topology, self.destinos, self.q_star, self.beta)

    def v(self, state: Pair) -> float:
        """V*(state)."""
        return float(self.v_star[state.current, self.destinos.index(state.dest)])

    def q(self, state: Pair, action: int) -> float:
        """Q*(state, action)."""
        return self.como_tabela().valor(state, action)


class TheoryConstants(NamedTuple):
    """Constantes Gamma e H de uma instância; `exato` é False quando H é estimativa inferior."""

    gamma_const: float
    horizon: float
    exato: bool = True

    @property
    def horizonte_efetivo(self) -> float:
        """H usado nos limites: inflado quando é estimativa inferior."""
        return self.horizon if self.exato else self.horizon * config.inflacao_horizonte


class Horizonte(NamedTuple):
    """Duração esperada máxima dos episódios sob políticas ótimas."""

    valor: float
    exato: bool
    por_estado: np.ndarray
    politicas: int


class RelatorioTeoria(NamedTuple):
    """Linha do relatório de verificação teórica."""

    check: str
    topology: str
    beta: str
    lhs: float
    rhs: float
    holds: bool


class _Arranjos(NamedTuple):
    vizinhos: np.ndarray
    mascara: np.ndarray
    energia: np.ndarray
    sobrevivencia: np.ndarray


def _arranjos(topology: Topology) -> _Arranjos:
    mascara = topology.mascara_acoes
    vizinhos = np.where(mascara, topology.matriz_vizinhos, 0)
    energia = np.zeros(mascara.shape)
    sobrevivencia = np.zeros(mascara.shape)
    for i, lista in topology.neighbors.items():
        for k, j in enumerate(lista):
            energia[i, k] = topology.hop_energy[(i, j)]
            sobrevivencia[i, k] = (1.0 - topology.loss_prob[(i, j)]) * (1.0 - topology.p_drop(j))
    return _Arranjos(vizinhos, mascara, energia, sobrevivencia)


def _destinos(topology: Topology, destinations: Optional[Iterable[int]]) -> Tuple[int, ...]:
    if destinations is None:
        return tuple(range(topology.node_count))
    return tuple(sorted(set(int(d) for d in destinations)))


def value_iteration(
    topology: Topology,
    beta: float,
    tol: float = config.tolerancia_padrao,
    destinations: Optional[Iterable[int]] = None,
) -> ExactSolution:
    """
    Resolve Q*_beta por iteração de valor.

    A esperança considera as três saídas de uma transmissão: perda no enlace, descarte
    no nó de chegada e avanço. O terminal vale 0.

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    beta : float
        Preferência.

    tol : float
        Tolerância do resíduo de Bellman na norma do supremo.

    destinations : Optional[Iterable[int]]
        Destinos considerados; por padrão todos os nós.

    Returns
    -------
    ExactSolution
        Q*, V* e o resíduo final.
    """
    beta = validar_beta(beta)
    if tol <= 0:
        raise ErroContrato(f"tol={tol} deve ser positiva")
    destinos = _destinos(topology, destinations)
    arranjos = _arranjos(topology)

    no = np.arange(topology.node_count)[:, None]
    eh_destino = (no == np.asarray(destinos)[None, :])[:, :, None]
    r_energy = np.where(eh_destino, 0.0, -arranjos.energia[:, None, :])
    r_pdr = np.where(eh_destino, 1.0, 0.0)
    recompensa = beta * r_energy + (1.0 - beta) * r_pdr
    continuacao = np.where(eh_destino, 0.0, arranjos.sobrevivencia[:, None, :])
    mascara = arranjos.mascara[:, None, :]

    def bellman(v: np.ndarray) -> np.ndarray:
        futuro = v[arranjos.vizinhos].transpose(0, 2, 1)
        return np.where(mascara, recompensa + continuacao * futuro, -np.inf)

    v = np.zeros((topology.node_count, len(destinos)))
    for iteracao in range(config.max_iteracoes_oraculo):
        q = bellman(v)
        novo = q.max(axis=2)
        variacao = float(np.max(np.abs(novo - v)))
        v = novo
        if variacao <= tol:
            break
    else:
        raise ErroConvergencia(
            f"iteração de valor não convergiu em {config.max_iteracoes_oraculo} iterações "
            f"(beta={beta}, variação={variacao:.3e}); a instância pode ser imprópria"
        )

    q = bellman(v)
    v_final = q.max(axis=2)
    residuo = float(np.max(np.abs(v_final - v)))
    logger.debug("Iteração de valor beta=%s: %d iterações, resíduo %.3e", beta, iteracao + 1, residuo)
    return ExactSolution(beta, topology, destinos, np.where(mascara, q, 0.0), v_final, residuo)


def gamma_constant(topology: Topology) -> float:
    """
    Maior diferença |r_energy - r_pdr| sobre os pares (estado, ação) legais.

    Nos estados em trânsito a diferença é E(i, a); nos estados de destino é 1.
    """
    return max(1.0, max(topology.hop_energy.values()))


def _vaza(topology: Topology, i: int, j: int) -> bool:
    return (1.0 - topology.loss_prob[(i, j)]) * (1.0 - topology.p_drop(j)) < 1.0


def _chega(topology: Topology, i: int, j: int) -> bool:
    return (1.0 - topology.loss_prob[(i, j)]) * (1.0 - topology.p_drop(j)) > 0.0


def _eh_propria(topology: Topology, dest: int, escolha: Dict[int, int]) -> bool:
    saidas = {dest} | {i for i, j in escolha.items() if i != dest and _vaza(topology, i, j)}
    grafo = nx.DiGraph()
    grafo.add_nodes_from(range(topology.node_count))
    grafo.add_edges_from((i, j) for i, j in escolha.items() if i not in saidas)
    alcancam = set(saidas)
    for saida in saidas:
        alcancam |= nx.ancestors(grafo, saida)
    return len(alcancam) == topology.node_count


def _comprimento(topology: Topology, dest: int, escolha: Dict[int, int]) -> np.ndarray:
    transicao = np.zeros((topology.node_count, topology.node_count))
    for i, j in escolha.items():
        if i != dest:
            transicao[i, j] = (1.0 - topology.loss_prob[(i, j)]) * (1.0 - topology.p_drop(j))
    try:
        return scipy.linalg.solve(
            np.eye(topology.node_count) - transicao, np.ones(topology.node_count)
        )
    except (scipy.linalg.LinAlgError, ValueError) as erro:
        raise PoliticaImpropria(f"sistema de duração singular para o destino {dest}: {erro}")


def _empates(solution: ExactSolution, posicao_destino: int) -> List[List[int]]:
    topology = solution.topology
    empates = []
    for i in range(topology.node_count):
        acoes = topology.neighbors[i]
        linha = solution.q_star[i, posicao_destino, : len(acoes)]
        melhor = solution.v_star[i, posicao_destino]
        empatadas = [a for a, q in zip(acoes, linha) if q >= melhor - config.tolerancia_empate]
        # no destino o episódio termina com qualquer ação
        empates.append(empatadas[:1] if i == solution.destinos[posicao_destino] else empatadas)
    return empates


def _grafo_de_empates(topology: Topology, dest: int, empates: List[List[int]]) -> nx.DiGraph:
    """Ações empatadas como arestas; perda e descarte levam também ao nó `SAIDA`."""
    grafo = nx.DiGraph()
    grafo.add_edge(dest, SAIDA)
    for i, opcoes in enumerate(empates):
        if i == dest:
            continue
        for a in opcoes:
            if _chega(topology, i, a):
                grafo.add_edge(i, a)
            if _vaza(topology, i, a):
                grafo.add_edge(i, SAIDA)
    return grafo


def _politica_de_desempate(topology: Topology, dest: int, empates: List[List[int]]) -> Dict[int, int]:
    reverso = _grafo_de_empates(topology, dest, empates).reverse()
    ate_destino = nx.single_source_shortest_path_length(reverso, dest)
    ate_saida = nx.single_source_shortest_path_length(reverso, SAIDA)

    def chave(i: int, a: int) -> Tuple[float, float, int]:
        destino = ate_destino.get(a, math.inf) if _chega(topology, i, a) else math.inf
        saida = 0 if _vaza(topology, i, a) else ate_saida.get(a, math.inf)
        return destino, saida, a

    return {i: min(opcoes, key=lambda a: chave(i, a)) for i, opcoes in enumerate(empates)}


def analisar_horizonte(topology: Topology, solution: ExactSolution) -> Horizonte:
    """
    Duração esperada máxima dos episódios sob as políticas gulosas ótimas.

    Para cada destino, as políticas que escolhem apenas ações empatadas no ótimo são
    enumeradas quando há no máximo 16 delas; políticas impróprias são descartadas.
    Com mais empates, usa-se uma única política montada só com ações empatadas: em cada
    estado, a ação mais próxima do destino pelo grafo dessas ações; sem caminho até o
    destino, a mais próxima de uma perda ou descarte; por fim, a de menor índice. Essa
    política é própria sempre que alguma política empatada o for, e o H obtido é uma
    estimativa inferior.

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    solution : ExactSolution
        Solução convergida.

    Returns
    -------
    Horizonte
        H, indicador de exatidão, duração por estado (N x D) e número de políticas avaliadas.
    """
    por_estado = np.zeros((topology.node_count, len(solution.destinos)))
    exato = True
    avaliadas = 0
    for posicao_destino, dest in enumerate(solution.destinos):
        empates = _empates(solution, posicao_destino)
        total = math.prod(len(e) for e in empates)

        if total <= config.max_politicas_enumeradas:
            candidatas = [dict(enumerate(escolha)) for escolha in itertools.product(*empates)]
        else:
            exato = False
            candidatas = [_politica_de_desempate(topology, dest, empates)]

        comprimentos = [
            _comprimento(topology, dest, escolha)
            for escolha in candidatas
            if _eh_propria(topology, dest, escolha)
        ]
        if not comprimentos:
            raise PoliticaImpropria(
                f"nenhuma política ótima própria para o destino {dest} (beta={solution.beta})"
            )
        avaliadas += len(comprimentos)
        por_estado[:, posicao_destino] = np.max(comprimentos, axis=0)

    if not exato:
        logger.warning(
            "H para beta=%s é uma estimativa inferior (empates demais para enumerar)", solution.beta
        )
    return Horizonte(float(por_estado.max()), exato, por_estado, avaliadas)


def expected_episode_length(topology: Topology, solution: ExactSolution) -> float:
    """Maior duração esperada de um episódio sob políticas ótimas (H_beta)."""
    return analisar_horizonte(topology, solution).valor


def resolver_varios(
    topology: Topology,
    betas: Iterable[float],
    tol: float = config.tolerancia_teoria,
    destinations: Optional[Iterable[int]] = None,
    solucoes: Optional[Dict[float, ExactSolution]] = None,
) -> Dict[float, ExactSolution]:
    """Soluções exatas para várias preferências, reaproveitando as já calculadas."""
    solucoes = {} if solucoes is None else solucoes
    for beta in betas:
        if beta not in solucoes:
            solucoes[beta] = value_iteration(topology, beta, tol, destinations)
    return solucoes


def theory_constants(
    topology: Topology,
    betas: Iterable[float],
    tol: float = config.tolerancia_teoria,
    destinations: Optional[Iterable[int]] = None,
    solucoes: Optional[Dict[float, ExactSolution]] = None,
) -> TheoryConstants:
    """
    Gamma e H da instância, com H máximo sobre as preferências dadas.

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    betas : Iterable[float]
        Preferências usadas no cálculo de H.

    tol : float
        Tolerância da iteração de valor.

    destinations : Optional[Iterable[int]]
        Destinos considerados.

    solucoes : Optional[Dict[float, ExactSolution]]
        Cache de soluções, preenchido no lugar.

    Returns
    -------
    TheoryConstants
        Constantes da instância.
    """
    solucoes = resolver_varios(topology, betas, tol, destinations, solucoes)
    horizontes = [analisar_horizonte(topology, solucoes[b]) for b in betas]
    return TheoryConstants(
        gamma_const=gamma_constant(topology),
        horizon=max(h.valor for h in horizontes),
        exato=all(h.exato for h in horizontes),
    )


def _folga(tol: float) -> float:
    return max(2.0 * tol, FOLGA_MINIMA)


def check_lipschitz(
    topology: Topology,
    beta_1: float,
    beta_2: float,
    constants: TheoryConstants,
    tol: float = config.tolerancia_teoria,
    solucoes: Optional[Dict[float, ExactSolution]] = None,
    nome: str = "",
) -> RelatorioTeoria:
    """
    Verifica ||Q*_beta1 - Q*_beta2|| <= Gamma (H + 1) |beta1 - beta2|.

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    beta_1, beta_2 : float
        Preferências comparadas.

    constants : TheoryConstants
        Gamma e H da instância.

    tol : float
        Tolerância da iteração de valor; a desigualdade é aceita com folga max(2 tol, 1e-8).

    solucoes : Optional[Dict[float, ExactSolution]]
        Cache de soluções.

    nome : str
        Nome da instância no relatório.

    Returns
    -------
    RelatorioTeoria
        Os dois lados da desigualdade e o resultado.
    """
    solucoes = resolver_varios(topology, (beta_1, beta_2), tol, solucoes=solucoes)
    primeira, segunda = solucoes[beta_1], solucoes[beta_2]
    lhs = norma_sup(primeira.q_star, segunda.q_star, topology.mascara_acoes[:, None, :])
    rhs = constants.gamma_const * (constants.horizonte_efetivo + 1.0) * abs(beta_1 - beta_2)
    relatorio = RelatorioTeoria(
        "lipschitz", nome, f"({beta_1},{beta_2})", lhs, rhs, bool(lhs <= rhs + _folga(tol))
    )
    if not relatorio.holds:
        logger.warning("Violação de Lipschitz em %s: %s", nome, relatorio)
    return relatorio


def familia_exata(
    topology: Topology,
    grid: Union[PreferenceGrid, Sequence[float]],
    tol: float = config.tolerancia_teoria,
    destinations: Optional[Iterable[int]] = None,
    solucoes: Optional[Dict[float, ExactSolution]] = None,
) -> QTableFamily:
    """Família cujas tabelas são os Q* exatos dos pontos da grade."""
    grade = criar_grade(grid)
    familia = QTableFamily(topology, grade, destinations)
    solucoes = resolver_varios(topology, grade.values, tol, familia.destinos, solucoes)
    for k, beta in enumerate(grade.values):
        familia.valores[k] = solucoes[beta].q_star
    return familia


def medir_epsilon(family: QTableFamily, solucoes: Dict[float, ExactSolution]) -> float:
    """Maior distância entre as tabelas da família e os Q* correspondentes."""
    return max(
        norma_sup(tabela.valores, solucoes[tabela.beta].q_star, family.mascara)
        for tabela in family.tabelas
    )


def check_gip_bound(
    topology: Topology,
    grid: Union[PreferenceGrid, Sequence[float]],
    beta: float,
    epsilon_hat: float,
    learned_or_exact_tables: QTableFamily,
    constants: TheoryConstants,
    tol: float = config.tolerancia_teoria,
    solucoes: Optional[Dict[float, ExactSolution]] = None,
    nome: str = "",
) -> RelatorioTeoria:
    """
    Verifica ||Q_int(beta) - Q*_beta|| <= epsilon_hat + Gamma (H + 1) (beta_sup - beta_inf).

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    grid : Union[PreferenceGrid, Sequence[float]]
        Grade das tabelas.

    beta : float
        Preferência avaliada.

    epsilon_hat : float
        Erro medido das tabelas da grade em relação a Q*.

    learned_or_exact_tables : QTableFamily
        Tabelas aprendidas ou exatas da grade.

    constants : TheoryConstants
        Gamma e H da instância.

    tol : float
        Tolerância da iteração de valor.

    solucoes : Optional[Dict[float, ExactSolution]]
        Cache de soluções.

    nome : str
        Nome da instância no relatório.

    Returns
    -------
    RelatorioTeoria
        Os dois lados da desigualdade e o resultado.
    """
    grade = criar_grade(grid)
    familia = learned_or_exact_tables
    solucoes = resolver_varios(topology, (beta,), tol, familia.destinos, solucoes)
    interpolada = gip_table(familia, beta).materializar()
    lhs = norma_sup(interpolada, solucoes[beta].q_star, familia.mascara)
    inferior, superior, _ = bracket(grade, beta)
    rhs = epsilon_hat + constants.gamma_const * (constants.horizonte_efetivo + 1.0) * (superior - inferior)
    relatorio = RelatorioTeoria(
        "gip_bound", nome, str(beta), lhs, rhs, bool(lhs <= rhs + _folga(tol))
    )
    if not relatorio.holds:
        logger.warning("Violação do limite de interpolação em %s: %s", nome, relatorio)
    return relatorio


def _valor_politica(topology: Topology, solution: ExactSolution, dest: int, escolha: Dict[int, int]) -> np.ndarray:
    beta = solution.beta
    transicao = np.zeros((topology.node_count, topology.node_count))
    recompensa = np.zeros(topology.node_count)
    for i, j in escolha.items():
        if i == dest:
            recompensa[i] = 1.0 - beta
        else:
            recompensa[i] = -beta * topology.hop_energy[(i, j)]
            transicao[i, j] = (1.0 - topology.loss_prob[(i, j)]) * (1.0 - topology.p_drop(j))
    return scipy.linalg.solve(np.eye(topology.node_count) - transicao, recompensa)


def lacuna_valor_gip(
    topology: Topology, family: QTableFamily, beta: float, solution: ExactSolution
) -> float:
    """
    Maior perda de valor da política gulosa interpolada: max_s V*_beta(s) - V^GIP_beta(s).

    Devolve infinito se a política não for própria.
    """
    tabela = gip_table(family, beta)
    lacuna = 0.0
    for posicao_destino, dest in enumerate(family.destinos):
        escolha = {
            i: greedy_action(tabela, Pair(i, dest)) for i in range(topology.node_count)
        }
        if not _eh_propria(topology, dest, escolha):
            return float("inf")
        valor = _valor_politica(topology, solution, dest, escolha)
        lacuna = max(lacuna, float(np.max(solution.v_star[:, solution.destinos.index(dest)] - valor)))
    return lacuna


def verificar_instancia(
    topology: Topology,
    nome: str,
    grades: Sequence[Sequence[float]],
    betas: Sequence[float],
    betas_fora: Sequence[float],
    tol: float = config.tolerancia_teoria,
) -> List[RelatorioTeoria]:
    """
    Executa todas as verificações teóricas numa instância.

    Gera uma linha de Lipschitz por par de `betas`, uma linha do limite de
    interpolação por grade e preferência de `betas_fora`, e linhas informativas com a
    perda de valor da política interpolada (sempre com holds=True).

    Parameters
    ----------
    topology : Topology
        Rede de roteamento.

    nome : str
        Nome da instância.

    grades : Sequence[Sequence[float]]
        Grades avaliadas.

    betas : Sequence[float]
        Preferências dos pares de Lipschitz.

    betas_fora : Sequence[float]
        Preferências avaliadas com a tabela interpolada.

    tol : float
        Tolerância da iteração de valor.

    Returns
    -------
    List[RelatorioTeoria]
        Linhas do relatório.
    """
    grades = [criar_grade(g) for g in grades]
    todas = sorted(set(betas) | set(betas_fora) | {b for g in grades for b in g.values})
    solucoes = resolver_varios(topology, todas, tol)
    constantes = theory_constants(topology, todas, tol, solucoes=solucoes)
    logger.info(
        "Instância %s: Gamma=%.4g, H=%.4g (%s)",
        nome,
        constantes.gamma_const,
        constantes.horizon,
        "exato" if constantes.exato else "estimativa inferior",
    )

    linhas = [
        check_lipschitz(topology, b1, b2, constantes, tol, solucoes, nome)
        for b1, b2 in itertools.combinations(betas, 2)
    ]
    for grade in grades:
        familia = familia_exata(topology, grade, tol, solucoes=solucoes)
        epsilon_hat = medir_epsilon(familia, solucoes)
        rotulo = f"{nome}[grid={len(grade)}]"
        for beta in betas_fora:
            linhas.append(
                check_gip_bound(topology, grade, beta, epsilon_hat, familia, constantes, tol, solucoes, rotulo)
            )
            lacuna = lacuna_valor_gip(topology, familia, beta, solucoes[beta])
            linhas.append(RelatorioTeoria("gip_value_gap", rotulo, str(beta), lacuna, float("nan"), True))
    return linhas


def relatorios_para_dataframe(linhas: Sequence[RelatorioTeoria]) -> pd.DataFrame:
    """Relatório teórico no formato tabular de exportação."""
    return pd.DataFrame(list(linhas), columns=COLUNAS_TEORIA)
