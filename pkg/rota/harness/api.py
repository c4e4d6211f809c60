"""Orquestração dos experimentos: laço de episódios, contabilidade de energia, métricas e saídas CSV."""

import logging

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict
from typing import Iterable
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Union

import numpy as np
import pandas as pd

from rota.baselines import AgenteCaminhoMinimo
from rota.baselines import AgenteQEstatico
from rota.baselines import AgenteSmorlr
from rota.baselines import ShortestPath
from rota.baselines import Smorlr
from rota.baselines import StaticQ
from rota.baselines import rotulo
from rota.distributed import RegistroMensagens
from rota.distributed import centralizar
from rota.distributed import criar_agentes
from rota.distributed import run_distributed_episode
from rota.erros import ErroConfiguracao
from rota.erros import ErroContrato
from rota.harness.config import ExperimentConfig
from rota.harness.config import carregar_config
from rota.harness.config import config
from rota.learner import Behavior
from rota.learner import EpisodeResult
from rota.learner import ExplorationSchedule
from rota.learner import LearningRateSchedule
from rota.learner import QTableFamily
from rota.learner import epsilon_at
from rota.learner import run_episode
from rota.mdp import scalarize
from rota.oracle import relatorios_para_dataframe
from rota.oracle import verificar_instancia
from rota.preference import PreferenceGrid
from rota.preference import criar_grade
from rota.preference import mudancas_de_preferencia
from rota.preference import schedule_beta
from rota.topology import Topology
from rota.utils import criar_geradores
from rota.utils import escrever_csv_atomico
from rota.utils import resolver_semente


logger = logging.getLogger(__name__)

COLUNAS_EPISODIOS = ["episode", "beta", "reward", "delivered", "energy_mJ", "steps"]
COLUNAS_ACUMULADO = ["episode", "cum_reward", "cum_energy", "cum_delivered"]
COLUNAS_SENSIBILIDADE = [
    "method",
    "window",
    "reward_mean",
    "reward_std",
    "pdr_mean",
    "pdr_std",
    "energy_mean",
    "energy_std",
]


class MetricsRecord(NamedTuple):
    """Métricas de um episódio."""

    episode: int
    beta: float
    overall_reward: float
    delivered: bool
    energy_mJ: float
    steps: int


class AgenteDPQ:
    """Aprendiz centralizado com uma tabela por ponto da grade."""

    def __init__(
        self,
        topology: Topology,
        grade: PreferenceGrid,
        exploracao: ExplorationSchedule,
        lr: LearningRateSchedule,
        destinos: Optional[Iterable[int]] = None,
        step_cap: Optional[int] = None,
    ) -> None:
        """Cria a família de tabelas zerada."""
        self.topology = topology
        self.exploracao = exploracao
        self.lr = lr
        self.step_cap = step_cap
        self.familia = QTableFamily(topology, grade, destinos)

    def executar_episodio(
        self, indice: int, source: int, dest: int, beta: float, rng: np.random.Generator
    ) -> EpisodeResult:
        """Episódio epsilon-guloso sobre a tabela interpolada em `beta`."""
        return run_episode(
            self.topology,
            self.familia,
            beta,
            Behavior(epsilon_at(self.exploracao, indice)),
            source,
            dest,
            rng,
            self.lr,
            self.step_cap,
        )

    def familia_atual(self) -> QTableFamily:
        """Família aprendida."""
        return self.familia


class AgenteDPQDistribuido:
    """Aprendiz distribuído: um agente por nó e troca de dados e acks."""

    def __init__(
        self,
        topology: Topology,
        grade: PreferenceGrid,
        exploracao: ExplorationSchedule,
        lr: LearningRateSchedule,
        destinos: Optional[Iterable[int]] = None,
        step_cap: Optional[int] = None,
        registrar: bool = True,
    ) -> None:
        """Cria os agentes e, se pedido, o registro de mensagens."""
        self.topology = topology
        self.exploracao = exploracao
        self.lr = lr
        self.step_cap = step_cap
        self.agentes = criar_agentes(topology, grade, destinos)
        self.registro = RegistroMensagens(len(grade)) if registrar else None

    def executar_episodio(
        self, indice: int, source: int, dest: int, beta: float, rng: np.random.Generator
    ) -> EpisodeResult:
        """Episódio conduzido pelas mensagens entre os agentes."""
        resultado = run_distributed_episode(
            self.agentes,
            self.topology,
            beta,
            source,
            dest,
            epsilon_at(self.exploracao, indice),
            rng,
            self.lr,
            self.step_cap,
            self.registro,
            indice,
        )
        return EpisodeResult(resultado.trajectory, resultado.delivered, resultado.steps)

    def familia_atual(self) -> QTableFamily:
        """União das linhas locais dos agentes."""
        return centralizar(self.agentes, self.topology)


def criar_agente(cfg: ExperimentConfig, topology: Topology):
    """
    Agente descrito pela configuração.

    Parameters
    ----------
    cfg : ExperimentConfig
        Configuração do experimento.

    topology : Topology
        Rede de roteamento.

    Returns
    -------
    AgenteDPQ, AgenteDPQDistribuido, AgenteSmorlr, AgenteQEstatico ou AgenteCaminhoMinimo
        Agente com o método `executar_episodio`.
    """
    destinos = (topology.sink,) if cfg.destinations == "sink" else tuple(range(topology.node_count))
    if cfg.agent == "dpq-centralized":
        return AgenteDPQ(topology, cfg.grid, cfg.exploration, cfg.learning_rate, destinos, cfg.step_cap)
    if cfg.agent == "dpq-distributed":
        return AgenteDPQDistribuido(
            topology, cfg.grid, cfg.exploration, cfg.learning_rate, destinos, cfg.step_cap
        )

    baseline = cfg.baseline
    if isinstance(baseline, Smorlr):
        return AgenteSmorlr(
            topology, cfg.learning_rate, cfg.horizonte_smorlr(), baseline.keep_table, destinos, cfg.step_cap
        )
    if isinstance(baseline, StaticQ):
        return AgenteQEstatico(
            topology, baseline.fixed_beta, cfg.exploration, cfg.learning_rate, destinos, cfg.step_cap
        )
    return AgenteCaminhoMinimo(topology, baseline.metric, cfg.step_cap)


def rotulo_metodo(cfg: ExperimentConfig) -> str:
    """Nome do método de uma configuração nos relatórios."""
    if cfg.agent == "dpq-centralized":
        return f"dpq_{len(cfg.grid)}"
    if cfg.agent == "dpq-distributed":
        return f"dpq_distributed_{len(cfg.grid)}"
    return rotulo(cfg.baseline)


class Experimento:
    """
    Execução de um experimento.

    Além das métricas por episódio, acompanha a bateria de cada nó (com piso em zero),
    os esgotamentos de bateria e os episódios interrompidos pelo limite de passos.

    Parameters
    ----------
    cfg : ExperimentConfig
        Configuração do experimento.

    semente : Optional[int]
        Semente da linha de comando; ver `resolver_semente`.

    agente : optional
        Agente já construído; por padrão, o descrito em `cfg`.

    topology : Optional[Topology]
        Topologia já construída; por padrão, a descrita em `cfg`.
    """

    def __init__(
        self,
        cfg: ExperimentConfig,
        semente: Optional[int] = None,
        agente=None,
        topology: Optional[Topology] = None,
    ) -> None:
        """Prepara topologia, agente e baterias."""
        self.cfg = cfg
        self.topology = topology if topology is not None else cfg.topology.construir()
        if cfg.source is not None and not 0 <= cfg.source < self.topology.node_count:
            raise ErroConfiguracao(f"source={cfg.source} não é um nó da topologia")
        self.semente = resolver_semente(semente, cfg.seed)
        self.agente = agente if agente is not None else criar_agente(cfg, self.topology)
        self.baterias = np.full(self.topology.node_count, cfg.energy.initial_energy)
        self.esgotamentos = 0
        self.eventos_limite = 0
        self.registros: List[MetricsRecord] = []

    def _debitar(self, resultado: EpisodeResult) -> None:
        energia = self.cfg.energy
        antes = self.baterias > 0.0
        for amostra in resultado.trajectory:
            if amostra.state.current != amostra.state.dest:
                self.baterias[amostra.state.current] -= energia.e_tx
        self.baterias -= energia.e_idle * resultado.steps
        np.maximum(self.baterias, 0.0, out=self.baterias)

        esgotados = np.flatnonzero(antes & (self.baterias <= 0.0))
        for no in esgotados:
            logger.warning("Bateria do nó %d esgotada", no)
        self.esgotamentos += len(esgotados)

    def _sortear_origem(self, rng: np.random.Generator) -> int:
        if self.cfg.source is not None:
            return self.cfg.source
        candidatos = [no for no in range(self.topology.node_count) if no != self.topology.sink]
        return candidatos[int(rng.integers(len(candidatos)))]

    def executar(self) -> List[MetricsRecord]:
        """
        Executa todos os episódios.

        Returns
        -------
        List[MetricsRecord]
            Uma linha por episódio.
        """
        cfg = self.cfg
        rng_origem, rng_episodio = criar_geradores(self.semente, 2)
        destino = self.topology.sink
        logger.info(
            "Iniciando %s: %d episódios, semente %d, %d trocas de preferência",
            rotulo_metodo(cfg),
            cfg.episodes,
            self.semente,
            mudancas_de_preferencia(cfg.schedule, cfg.episodes),
        )

        for indice in range(cfg.episodes):
            origem = self._sortear_origem(rng_origem)
            beta = schedule_beta(cfg.schedule, indice)
            resultado = self.agente.executar_episodio(indice, origem, destino, beta, rng_episodio)

            recompensa = sum(scalarize(amostra.rewards, beta) for amostra in resultado.trajectory)
            saltos = sum(1 for amostra in resultado.trajectory if amostra.state.current != amostra.state.dest)
            energia = cfg.energy.e_tx * saltos + cfg.energy.e_idle * self.topology.node_count * resultado.steps
            self._debitar(resultado)
            if resultado.cap_hit:
                self.eventos_limite += 1

            self.registros.append(
                MetricsRecord(indice, beta, recompensa, resultado.delivered, energia, resultado.steps)
            )
            if (indice + 1) % config.intervalo_progresso == 0:
                logger.info("Episódio %d de %d", indice + 1, cfg.episodes)

        if self.eventos_limite:
            logger.warning("%d episódios atingiram o limite de passos", self.eventos_limite)
        logger.info(
            "Experimento concluído: %d episódios, %d esgotamentos de bateria",
            len(self.registros),
            self.esgotamentos,
        )
        return self.registros

    def baterias_dataframe(self) -> pd.DataFrame:
        """Energia restante de cada nó."""
        return pd.DataFrame(
            {"node": np.arange(self.topology.node_count), "remaining_mJ": self.baterias}
        )


def run_experiment(cfg: ExperimentConfig, semente: Optional[int] = None) -> List[MetricsRecord]:
    """Executa o experimento descrito por `cfg` e devolve as métricas por episódio."""
    return Experimento(cfg, semente).executar()


def registros_para_dataframe(records: Sequence[MetricsRecord]) -> pd.DataFrame:
    """Métricas por episódio no formato de `episodes.csv`."""
    df = pd.DataFrame(list(records), columns=list(MetricsRecord._fields))
    df = df.rename(columns={"overall_reward": "reward"})
    df["delivered"] = df["delivered"].astype(int)
    return df[COLUNAS_EPISODIOS]


def cumulative_series(records: Sequence[MetricsRecord]) -> pd.DataFrame:
    """
    Somas acumuladas de recompensa, energia e entregas, na ordem dos episódios.

    Parameters
    ----------
    records : Sequence[MetricsRecord]
        Métricas por episódio.

    Returns
    -------
    pd.DataFrame
        Colunas episode, cum_reward, cum_energy e cum_delivered.
    """
    df = registros_para_dataframe(records).sort_values("episode")
    return pd.DataFrame(
        {
            "episode": df["episode"].to_numpy(),
            "cum_reward": df["reward"].cumsum().to_numpy(),
            "cum_energy": df["energy_mJ"].cumsum().to_numpy(),
            "cum_delivered": df["delivered"].cumsum().to_numpy(),
        },
        columns=COLUNAS_ACUMULADO,
    )


def sensitivity(
    records: Sequence[MetricsRecord], window: int, method: str = "", eval_start: int = 0
) -> Dict[str, Union[str, int, float]]:
    """
    Estatísticas por janelas consecutivas de `window` episódios.

    Em cada janela são calculadas a recompensa média, a fração de entregas e a energia
    média; o resultado traz a média e o desvio padrão populacional entre janelas. Uma
    janela final incompleta é descartada; se `window` excede o número de episódios, há
    uma única janela com todos eles.

    Parameters
    ----------
    records : Sequence[MetricsRecord]
        Métricas por episódio.

    window : int
        Tamanho da janela (> 0).

    method : str
        Nome do método na linha gerada.

    eval_start : int
        Primeiro episódio considerado.

    Returns
    -------
    Dict[str, Union[str, int, float]]
        Linha no formato de `sensitivity.csv`.
    """
    if window <= 0:
        raise ErroContrato(f"window={window} deve ser positiva")
    df = registros_para_dataframe(records)
    df = df[df["episode"] >= eval_start].reset_index(drop=True)

    if len(df) <= window:
        grupos = np.zeros(len(df), dtype=int)
    else:
        grupos = np.arange(len(df)) // window
        completos = grupos < len(df) // window
        df, grupos = df[completos], grupos[completos]

    janelas = df.groupby(grupos).agg(
        reward=("reward", "mean"), pdr=("delivered", "mean"), energy=("energy_mJ", "mean")
    )
    linha: Dict[str, Union[str, int, float]] = {"method": method, "window": int(window)}
    for coluna in ("reward", "pdr", "energy"):
        linha[f"{coluna}_mean"] = float(janelas[coluna].mean()) if len(janelas) else float("nan")
        linha[f"{coluna}_std"] = float(janelas[coluna].std(ddof=0)) if len(janelas) else float("nan")
    return linha


def _resumo(cfg: ExperimentConfig, registros: Sequence[MetricsRecord], nome: str) -> Dict[str, object]:
    acumulado = cumulative_series(registros)
    ultima = acumulado.iloc[-1] if len(acumulado) else None
    return {
        "config": nome,
        "method": rotulo_metodo(cfg),
        "episodes": len(registros),
        "cum_reward": float(ultima["cum_reward"]) if ultima is not None else 0.0,
        "cum_energy": float(ultima["cum_energy"]) if ultima is not None else 0.0,
        "cum_delivered": int(ultima["cum_delivered"]) if ultima is not None else 0,
    }


def _executar_arquivo(caminho: str, saida: str, semente: Optional[int]) -> Dict[str, object]:
    cfg = carregar_config(caminho)
    experimento = harness.executar(cfg, Path(saida), semente)
    return _resumo(cfg, experimento.registros, Path(caminho).stem)


class Harness:
    """Comandos de alto nível sobre arquivos de configuração e diretórios de saída."""

    def __init__(self) -> None:
        """Inicialização do orquestrador."""
        pass

    def executar(
        self, cfg: ExperimentConfig, saida: Optional[Path] = None, semente: Optional[int] = None
    ) -> Experimento:
        """
        Executa um experimento e grava episodes.csv, cumulative.csv e batteries.csv.

        Execuções distribuídas também gravam messages.csv.

        Parameters
        ----------
        cfg : ExperimentConfig
            Configuração do experimento.

        saida : Optional[Path]
            Diretório de saída; sem ele nada é gravado.

        semente : Optional[int]
            Semente da linha de comando.

        Returns
        -------
        Experimento
            Experimento executado.
        """
        experimento = Experimento(cfg, semente)
        registros = experimento.executar()
        if saida is None:
            return experimento

        saida = Path(saida)
        escrever_csv_atomico(registros_para_dataframe(registros), saida / config.arquivo_episodios)
        escrever_csv_atomico(cumulative_series(registros), saida / config.arquivo_acumulado)
        escrever_csv_atomico(experimento.baterias_dataframe(), saida / config.arquivo_baterias)
        registro = getattr(experimento.agente, "registro", None)
        if registro is not None:
            escrever_csv_atomico(registro.para_dataframe(), saida / config.arquivo_mensagens)
        return experimento

    def metodos_sensibilidade(self, cfg: ExperimentConfig) -> Dict[str, ExperimentConfig]:
        """Variações da configuração comparadas na análise de sensibilidade."""
        sens = cfg.sensitivity
        metodos = {
            f"dpq_coarse_{len(sens.coarse_grid)}": cfg.model_copy(
                update={"agent": "dpq-centralized", "grid": criar_grade(sens.coarse_grid)}
            ),
            f"dpq_fine_{len(sens.fine_grid)}": cfg.model_copy(
                update={"agent": "dpq-centralized", "grid": criar_grade(sens.fine_grid)}
            ),
            "smorlr": cfg.model_copy(update={"agent": "baseline", "baseline": Smorlr()}),
        }
        estatico = StaticQ(fixed_beta=sens.static_beta)
        metodos[rotulo(estatico)] = cfg.model_copy(update={"agent": "baseline", "baseline": estatico})
        if sens.shortest_path_metric is not None:
            caminho = ShortestPath(metric=sens.shortest_path_metric)
            metodos[rotulo(caminho)] = cfg.model_copy(update={"agent": "baseline", "baseline": caminho})
        return metodos

    def sensibilidade(
        self,
        cfg: ExperimentConfig,
        janelas: Optional[Sequence[int]] = None,
        saida: Optional[Path] = None,
        semente: Optional[int] = None,
    ) -> pd.DataFrame:
        """
        Executa cada método com a mesma semente e tabula as estatísticas por janela.

        Parameters
        ----------
        cfg : ExperimentConfig
            Configuração base.

        janelas : Optional[Sequence[int]]
            Tamanhos de janela; por padrão os da configuração.

        saida : Optional[Path]
            Diretório onde gravar sensitivity.csv.

        semente : Optional[int]
            Semente da linha de comando.

        Returns
        -------
        pd.DataFrame
            Uma linha por método e janela.
        """
        janelas = list(janelas) if janelas else list(cfg.sensitivity.windows)
        inicio = cfg.sensitivity.eval_start
        inicio = cfg.fim_exploracao() if inicio is None else inicio

        linhas = []
        for nome, variacao in self.metodos_sensibilidade(cfg).items():
            logger.info("Sensibilidade: executando %s", nome)
            registros = run_experiment(variacao, semente)
            linhas.extend(sensitivity(registros, janela, nome, inicio) for janela in janelas)

        tabela = pd.DataFrame(linhas, columns=COLUNAS_SENSIBILIDADE)
        if saida is not None:
            escrever_csv_atomico(tabela, Path(saida) / config.arquivo_sensibilidade)
        return tabela

    def verificar_teoria(
        self, cfg: ExperimentConfig, saida: Optional[Path] = None, nome: str = "instancia"
    ) -> pd.DataFrame:
        """Verificações teóricas na topologia da configuração; grava theory.csv."""
        oraculo = cfg.oracle
        linhas = verificar_instancia(
            cfg.topology.construir(), nome, oraculo.grids, oraculo.betas, oraculo.off_grid_betas, oraculo.tol
        )
        tabela = relatorios_para_dataframe(linhas)
        violacoes = int((~tabela["holds"]).sum())
        logger.info("Verificação teórica: %d linhas, %d violações", len(tabela), violacoes)
        if saida is not None:
            escrever_csv_atomico(tabela, Path(saida) / config.arquivo_teoria)
        return tabela

    def exportar_q(
        self, cfg: ExperimentConfig, caminho: Path, semente: Optional[int] = None
    ) -> pd.DataFrame:
        """Treina o agente da configuração e grava a fotografia das tabelas Q."""
        experimento = self.executar(cfg, None, semente)
        familia = experimento.agente.familia_atual()
        if familia is None:
            raise ErroConfiguracao(f"o método {rotulo_metodo(cfg)} não possui tabela Q")
        tabela = familia.exportar()
        escrever_csv_atomico(tabela, Path(caminho))
        return tabela

    def comparar(
        self,
        caminhos: Sequence[Union[str, Path]],
        saida: Path,
        jobs: int = 1,
        semente: Optional[int] = None,
    ) -> pd.DataFrame:
        """
        Executa várias configurações, cada uma em `saida/<nome do arquivo>/`, e grava compare.csv.

        Parameters
        ----------
        caminhos : Sequence[Union[str, Path]]
            Arquivos de configuração.

        saida : Path
            Diretório de saída.

        jobs : int
            Processos em paralelo.

        semente : Optional[int]
            Semente da linha de comando, aplicada a todas as configurações.

        Returns
        -------
        pd.DataFrame
            Totais acumulados finais de cada configuração.
        """
        saida = Path(saida)
        nomes = [Path(c).stem for c in caminhos]
        if len(set(nomes)) != len(nomes):
            raise ErroConfiguracao(f"nomes de configuração repetidos: {nomes}")
        # valida todas antes de executar
        for caminho in caminhos:
            carregar_config(caminho)

        argumentos = [(str(c), str(saida / nome), semente) for c, nome in zip(caminhos, nomes)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as executor:
                resumos = list(executor.map(_executar_arquivo, *zip(*argumentos)))
        else:
            resumos = [_executar_arquivo(*args) for args in argumentos]

        tabela = pd.DataFrame(resumos)
        escrever_csv_atomico(tabela, saida / config.arquivo_comparacao)
        return tabela


harness = Harness()
