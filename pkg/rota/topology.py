"""Topologia da rede de roteamento: nós, enlaces direcionados, perdas, energias, sorvedouro e nós não confiáveis."""

import logging

from pathlib import Path
from types import MappingProxyType
from typing import Dict
from typing import Iterable
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import networkx as nx
import numpy as np
import toml

from rota.erros import ErroTopologia
from rota.utils import escrever_texto_atomico


try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


logger = logging.getLogger(__name__)

Aresta = Tuple[int, int]

CANTOS = ("top-left", "top-right", "bottom-left", "bottom-right")


class Topology:
    """
    Rede de roteamento imutável.

    A validação acontece na construção: índices densos em [0, N), listas de
    vizinhos sem duplicatas nem laços, probabilidades de perda em [0, 1),
    energias não negativas e o sorvedouro alcançável a partir de todos os nós.

    Parameters
    ----------
    node_count : int
        Número de nós N >= 2.

    neighbors : Mapping[int, Sequence[int]]
        Lista ordenada de vizinhos (arestas direcionadas) de cada nó.

    loss_prob : Mapping[Tuple[int, int], float]
        Probabilidade de perda P(i, j) de cada aresta.

    hop_energy : Mapping[Tuple[int, int], float]
        Energia E(i, j), em mJ, de cada aresta.

    sink : int
        Nó sorvedouro usado como destino nos experimentos.

    unreliable : Optional[Mapping[int, float]]
        Probabilidade de descarte p_drop de cada nó não confiável.
    """

    __slots__ = (
        "_node_count",
        "_neighbors",
        "_loss_prob",
        "_hop_energy",
        "_sink",
        "_unreliable",
        "_grau_max",
        "_matriz_vizinhos",
        "_indice_acao",
    )

    def __init__(
        self,
        node_count: int,
        neighbors: Mapping[int, Sequence[int]],
        loss_prob: Mapping[Aresta, float],
        hop_energy: Mapping[Aresta, float],
        sink: int,
        unreliable: Optional[Mapping[int, float]] = None,
    ) -> None:
        """Valida e congela a topologia."""
        node_count = int(node_count)
        if node_count < 2:
            raise ErroTopologia(f"node_count={node_count}: são necessários ao menos 2 nós")

        if set(neighbors) != set(range(node_count)):
            raise ErroTopologia(
                "neighbors: as chaves devem ser exatamente os nós 0..N-1"
            )

        vizinhos: Dict[int, Tuple[int, ...]] = {}
        for no in range(node_count):
            lista = tuple(int(v) for v in neighbors[no])
            if not lista:
                raise ErroTopologia(f"neighbors: o nó {no} não possui vizinhos")
            if len(set(lista)) != len(lista):
                raise ErroTopologia(f"neighbors: o nó {no} possui vizinhos duplicados")
            if no in lista:
                raise ErroTopologia(f"neighbors: o nó {no} possui laço para si mesmo")
            for v in lista:
                if not 0 <= v < node_count:
                    raise ErroTopologia(f"neighbors: vizinho {v} do nó {no} inválido")
            vizinhos[no] = lista

        arestas = {(i, j) for i, lista in vizinhos.items() for j in lista}

        perdas = _validar_mapa_arestas(loss_prob, arestas, "loss_prob")
        for aresta, p in perdas.items():
            if not 0.0 <= p < 1.0:
                raise ErroTopologia(f"loss_prob{aresta}={p} fora do intervalo [0, 1)")

        energias = _validar_mapa_arestas(hop_energy, arestas, "hop_energy")
        for aresta, e in energias.items():
            if e < 0.0:
                raise ErroTopologia(f"hop_energy{aresta}={e} negativa")

        sink = int(sink)
        if not 0 <= sink < node_count:
            raise ErroTopologia(f"sink={sink} não é um nó válido")

        nao_confiaveis: Dict[int, float] = {}
        for no, p_drop in (unreliable or {}).items():
            no, p_drop = int(no), float(p_drop)
            if not 0 <= no < node_count:
                raise ErroTopologia(f"unreliable: nó {no} inválido")
            if not 0.0 <= p_drop <= 1.0:
                raise ErroTopologia(f"unreliable: p_drop={p_drop} do nó {no} fora de [0, 1]")
            nao_confiaveis[no] = p_drop

        grafo = nx.DiGraph()
        grafo.add_nodes_from(range(node_count))
        grafo.add_edges_from(arestas)
        alcancam_sorvedouro = nx.ancestors(grafo, sink)
        isolados = sorted(set(range(node_count)) - alcancam_sorvedouro - {sink})
        if isolados:
            raise ErroTopologia(
                f"sink={sink} inalcançável a partir dos nós {isolados[:10]}"
            )

        self._node_count = node_count
        self._neighbors = MappingProxyType(vizinhos)
        self._loss_prob = MappingProxyType(perdas)
        self._hop_energy = MappingProxyType(energias)
        self._sink = sink
        self._unreliable = MappingProxyType(nao_confiaveis)

        self._grau_max = max(len(lista) for lista in vizinhos.values())
        matriz = np.full((node_count, self._grau_max), -1, dtype=np.int64)
        for no, lista in vizinhos.items():
            matriz[no, : len(lista)] = lista
        matriz.setflags(write=False)
        self._matriz_vizinhos = matriz
        self._indice_acao = MappingProxyType(
            {(i, a): k for i, lista in vizinhos.items() for k, a in enumerate(lista)}
        )

    @property
    def node_count(self) -> int:
        """Número de nós N."""
        return self._node_count

    @property
    def neighbors(self) -> Mapping[int, Tuple[int, ...]]:
        """Vizinhos ordenados de cada nó."""
        return self._neighbors

    @property
    def loss_prob(self) -> Mapping[Aresta, float]:
        """Probabilidade de perda de cada aresta."""
        return self._loss_prob

    @property
    def hop_energy(self) -> Mapping[Aresta, float]:
        """Energia de transmissão de cada aresta, em mJ."""
        return self._hop_energy

    @property
    def sink(self) -> int:
        """Nó sorvedouro."""
        return self._sink

    @property
    def unreliable(self) -> Mapping[int, float]:
        """Probabilidade de descarte dos nós não confiáveis."""
        return self._unreliable

    @property
    def grau_max(self) -> int:
        """Maior número de vizinhos de um nó."""
        return self._grau_max

    @property
    def matriz_vizinhos(self) -> np.ndarray:
        """Matriz N x grau_max com os vizinhos de cada nó, completada com -1."""
        return self._matriz_vizinhos

    @property
    def mascara_acoes(self) -> np.ndarray:
        """Máscara N x grau_max das posições de ação válidas."""
        return self._matriz_vizinhos >= 0

    @property
    def arestas(self) -> List[Aresta]:
        """Arestas na ordem das listas de vizinhos."""
        return [(i, j) for i in range(self._node_count) for j in self._neighbors[i]]

    def indice_acao(self, no: int, acao: int) -> int:
        """Posição da ação `acao` na lista de vizinhos de `no`."""
        return self._indice_acao[(no, acao)]

    def p_drop(self, no: int) -> float:
        """Probabilidade de descarte ao chegar em `no` (0 para nós confiáveis)."""
        return self._unreliable.get(no, 0.0)

    def grafo(self) -> nx.DiGraph:
        """
        Grafo direcionado do networkx com os atributos `loss` e `energy` nas arestas.

        Returns
        -------
        nx.DiGraph
            Grafo da topologia.
        """
        grafo = nx.DiGraph()
        grafo.add_nodes_from(range(self._node_count))
        for i, j in self.arestas:
            grafo.add_edge(
                i, j, loss=self._loss_prob[(i, j)], energy=self._hop_energy[(i, j)]
            )
        return grafo

    def __eq__(self, outro: object) -> bool:
        """Igualdade estrutural."""
        if not isinstance(outro, Topology):
            return NotImplemented
        return (
            self._node_count == outro._node_count
            and dict(self._neighbors) == dict(outro._neighbors)
            and dict(self._loss_prob) == dict(outro._loss_prob)
            and dict(self._hop_energy) == dict(outro._hop_energy)
            and self._sink == outro._sink
            and dict(self._unreliable) == dict(outro._unreliable)
        )

    def __hash__(self) -> int:
        """Hash pelos campos escalares; a igualdade completa fica com __eq__."""
        return hash((self._node_count, self._sink, len(self._loss_prob)))

    def __repr__(self) -> str:
        """Representação resumida."""
        return (
            f"Topology(N={self._node_count}, arestas={len(self._loss_prob)}, "
            f"sink={self._sink}, unreliable={dict(self._unreliable)})"
        )


def _validar_mapa_arestas(
    mapa: Mapping[Aresta, float], arestas: set, campo: str
) -> Dict[Aresta, float]:
    convertido = {(int(i), int(j)): float(v) for (i, j), v in mapa.items()}
    sobrando = set(convertido) - arestas
    if sobrando:
        raise ErroTopologia(f"{campo}: arestas inexistentes {sorted(sobrando)[:5]}")
    faltando = arestas - set(convertido)
    if faltando:
        raise ErroTopologia(f"{campo}: arestas sem valor {sorted(faltando)[:5]}")
    return convertido


def _validar_comum(loss: float, energy_per_hop: float) -> None:
    if not 0.0 <= loss < 1.0:
        raise ErroTopologia(f"loss={loss} fora do intervalo [0, 1)")
    if energy_per_hop < 0.0:
        raise ErroTopologia(f"energy_per_hop={energy_per_hop} negativa")


def _montar_nao_confiaveis(
    unreliable_spec: Iterable[Tuple[int, float]], node_count: int, sink: int
) -> Dict[int, float]:
    nao_confiaveis = {}
    for no, p_drop in unreliable_spec:
        if not 0 <= int(no) < node_count:
            raise ErroTopologia(f"unreliable_spec: nó {no} inválido")
        if int(no) == sink:
            raise ErroTopologia(f"unreliable_spec: o sorvedouro {sink} não pode ser não confiável")
        if not 0.0 <= float(p_drop) <= 1.0:
            raise ErroTopologia(f"unreliable_spec: p_drop={p_drop} fora de [0, 1]")
        nao_confiaveis[int(no)] = float(p_drop)
    return nao_confiaveis


def centro_grade(rows: int, cols: int) -> int:
    """Índice do nó central de uma grade `rows` x `cols`."""
    return (rows // 2) * cols + cols // 2


def grid_topology(
    rows: int,
    cols: int,
    loss: float,
    energy_per_hop: float,
    sink_corner: str = "bottom-right",
    unreliable_spec: Iterable[Tuple[int, float]] = (),
) -> Topology:
    """
    Grade 4-conectada com enlaces bidirecionais uniformes.

    Os nós são numerados linha a linha (nó = linha * cols + coluna) e cada lista de
    vizinhos é ordenada por índice.

    Parameters
    ----------
    rows : int
        Número de linhas (>= 2).

    cols : int
        Número de colunas (>= 2).

    loss : float
        Probabilidade de perda de todos os enlaces, em [0, 1).

    energy_per_hop : float
        Energia de cada transmissão, em mJ.

    sink_corner : str
        Canto do sorvedouro: top-left, top-right, bottom-left ou bottom-right.

    unreliable_spec : Iterable[Tuple[int, float]]
        Pares (nó, p_drop) dos nós não confiáveis.

    Returns
    -------
    Topology
        Grade com 2 * (rows * (cols - 1) + cols * (rows - 1)) arestas direcionadas.
    """
    if int(rows) < 2:
        raise ErroTopologia(f"rows={rows}: a grade precisa de ao menos 2 linhas")
    if int(cols) < 2:
        raise ErroTopologia(f"cols={cols}: a grade precisa de ao menos 2 colunas")
    if sink_corner not in CANTOS:
        raise ErroTopologia(f"sink_corner={sink_corner!r} não está em {CANTOS}")
    _validar_comum(loss, energy_per_hop)
    rows, cols = int(rows), int(cols)

    cantos = {
        "top-left": 0,
        "top-right": cols - 1,
        "bottom-left": (rows - 1) * cols,
        "bottom-right": rows * cols - 1,
    }
    sink = cantos[sink_corner]

    vizinhos: Dict[int, List[int]] = {}
    for linha in range(rows):
        for coluna in range(cols):
            no = linha * cols + coluna
            lista = []
            if linha > 0:
                lista.append(no - cols)
            if coluna > 0:
                lista.append(no - 1)
            if coluna < cols - 1:
                lista.append(no + 1)
            if linha < rows - 1:
                lista.append(no + cols)
            vizinhos[no] = lista

    arestas = [(i, j) for i, lista in vizinhos.items() for j in lista]
    return Topology(
        node_count=rows * cols,
        neighbors=vizinhos,
        loss_prob={aresta: float(loss) for aresta in arestas},
        hop_energy={aresta: float(energy_per_hop) for aresta in arestas},
        sink=sink,
        unreliable=_montar_nao_confiaveis(unreliable_spec, rows * cols, sink),
    )


def line_topology(
    n: int,
    loss: float,
    energy_per_hop: float,
    unreliable_spec: Iterable[Tuple[int, float]] = (),
) -> Topology:
    """
    Caminho 0 - 1 - ... - (n-1) com enlaces bidirecionais e sorvedouro em n-1.

    Parameters
    ----------
    n : int
        Número de nós (>= 2).

    loss : float
        Probabilidade de perda de todos os enlaces.

    energy_per_hop : float
        Energia de cada transmissão, em mJ.

    unreliable_spec : Iterable[Tuple[int, float]]
        Pares (nó, p_drop) dos nós não confiáveis.

    Returns
    -------
    Topology
        Topologia em linha.
    """
    if int(n) < 2:
        raise ErroTopologia(f"n={n}: a linha precisa de ao menos 2 nós")
    _validar_comum(loss, energy_per_hop)
    n = int(n)

    vizinhos = {
        no: [v for v in (no - 1, no + 1) if 0 <= v < n] for no in range(n)
    }
    arestas = [(i, j) for i, lista in vizinhos.items() for j in lista]
    return Topology(
        node_count=n,
        neighbors=vizinhos,
        loss_prob={aresta: float(loss) for aresta in arestas},
        hop_energy={aresta: float(energy_per_hop) for aresta in arestas},
        sink=n - 1,
        unreliable=_montar_nao_confiaveis(unreliable_spec, n, n - 1),
    )


def para_toml(topology: Topology) -> str:
    """
    Serializa a topologia no formato de arquivo de topologia.

    Os campos são `nodes`, `sink`, `edges` (lista de [i, j, loss, energy], na ordem
    das listas de vizinhos) e `unreliable` (lista de [i, p_drop]).

    Parameters
    ----------
    topology : Topology
        Topologia a ser serializada.

    Returns
    -------
    str
        Texto TOML.
    """
    conteudo = {
        "nodes": topology.node_count,
        "sink": topology.sink,
        "edges": [
            [i, j, topology.loss_prob[(i, j)], topology.hop_energy[(i, j)]]
            for i, j in topology.arestas
        ],
        "unreliable": [[no, p] for no, p in sorted(topology.unreliable.items())],
    }
    return toml.dumps(conteudo)


def de_toml(texto: str) -> Topology:
    """
    Reconstrói uma topologia a partir do texto do arquivo de topologia.

    Parameters
    ----------
    texto : str
        Conteúdo TOML com os campos `nodes`, `sink`, `edges` e `unreliable`.

    Returns
    -------
    Topology
        Topologia reconstruída.
    """
    dados = tomllib.loads(texto)
    for campo in ("nodes", "sink", "edges"):
        if campo not in dados:
            raise ErroTopologia(f"arquivo de topologia sem o campo {campo!r}")

    vizinhos: Dict[int, List[int]] = {no: [] for no in range(int(dados["nodes"]))}
    perdas, energias = {}, {}
    for registro in dados["edges"]:
        if len(registro) != 4:
            raise ErroTopologia(f"edges: registro {registro} não tem 4 valores")
        i, j, perda, energia = registro
        i, j = int(i), int(j)
        if i not in vizinhos:
            raise ErroTopologia(f"edges: nó {i} inválido")
        vizinhos[i].append(j)
        perdas[(i, j)] = float(perda)
        energias[(i, j)] = float(energia)

    nao_confiaveis = {int(no): float(p) for no, p in dados.get("unreliable", [])}
    return Topology(
        node_count=int(dados["nodes"]),
        neighbors=vizinhos,
        loss_prob=perdas,
        hop_energy=energias,
        sink=int(dados["sink"]),
        unreliable=nao_confiaveis,
    )


def salvar_topologia(topology: Topology, caminho: Union[str, Path]) -> Path:
    """Grava a topologia em disco no formato de arquivo de topologia."""
    return escrever_texto_atomico(para_toml(topology), Path(caminho))


def carregar_topologia(caminho: Union[str, Path]) -> Topology:
    """Lê uma topologia gravada no formato de arquivo de topologia."""
    topologia = de_toml(Path(caminho).read_text(encoding="utf-8"))
    logger.debug("Topologia carregada de %s: %r", caminho, topologia)
    return topologia
