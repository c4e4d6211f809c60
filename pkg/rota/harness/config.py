"""Configurações dos experimentos: arquivos de saída, modelo de energia e arquivos TOML de experimento."""

from pathlib import Path
from typing import List
from typing import Literal
from typing import Optional
from typing import Tuple
from typing import Union

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import NonNegativeInt
from pydantic import PositiveInt
from pydantic import field_validator
from pydantic import model_validator

from rota.baselines import BaselineKind
from rota.baselines import Smorlr
from rota.config import config as config_rota
from rota.erros import ErroConfiguracao
from rota.learner import ConstantRate
from rota.learner import EpsilonLinear
from rota.learner import ExplorationSchedule
from rota.learner import LearningRateSchedule
from rota.learner import Sequential
from rota.preference import GRADE_FINA
from rota.preference import GRADE_GROSSA
from rota.preference import PeriodicStep
from rota.preference import PreferenceGrid
from rota.preference import PreferenceSchedule
from rota.topology import Topology
from rota.topology import carregar_topologia
from rota.topology import centro_grade
from rota.topology import grid_topology
from rota.topology import line_topology


try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class ConfiguracoesHarness(BaseModel):
    """Nomes dos arquivos de saída e parâmetros de execução."""

    arquivo_episodios: str = "episodes.csv"
    arquivo_acumulado: str = "cumulative.csv"
    arquivo_baterias: str = "batteries.csv"
    arquivo_mensagens: str = "messages.csv"
    arquivo_sensibilidade: str = "sensitivity.csv"
    arquivo_teoria: str = "theory.csv"
    arquivo_comparacao: str = "compare.csv"
    intervalo_progresso: int = 1000
    janelas_padrao: Tuple[int, ...] = (50, 200, 500)
    horizonte_smorlr_padrao: int = 1000


config = ConfiguracoesHarness()


class _Secao(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TopologiaConfig(_Secao):
    """
    Descrição da topologia de um experimento.

    `unreliable` aceita pares [nó, p_drop] ou apenas o nó (p_drop padrão). Sem o campo,
    uma grade recebe um único nó não confiável no centro e as demais topologias nenhum.
    """

    kind: Literal["grid", "line", "file"] = "grid"
    rows: int = 10
    cols: int = 10
    n: int = 10
    loss: float = 0.0
    energy_per_hop: float = 0.007
    sink_corner: str = "bottom-right"
    unreliable: Optional[List[Union[int, Tuple[int, float]]]] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _arquivo_exigido(self) -> "TopologiaConfig":
        if self.kind == "file" and not self.path:
            raise ValueError("topology.kind='file' exige o campo path")
        return self

    def _nao_confiaveis(self) -> List[Tuple[int, float]]:
        if self.unreliable is None:
            if self.kind == "grid":
                return [(centro_grade(self.rows, self.cols), config_rota.p_drop_padrao)]
            return []
        return [
            (int(item), config_rota.p_drop_padrao) if isinstance(item, int) else (int(item[0]), float(item[1]))
            for item in self.unreliable
        ]

    def construir(self) -> Topology:
        """Constrói a topologia descrita."""
        if self.kind == "grid":
            return grid_topology(
                self.rows, self.cols, self.loss, self.energy_per_hop, self.sink_corner, self._nao_confiaveis()
            )
        if self.kind == "line":
            return line_topology(self.n, self.loss, self.energy_per_hop, self._nao_confiaveis())
        return carregar_topologia(self.path)


class EnergyModel(_Secao):
    """Modelo de energia dos nós, em mJ."""

    e_tx: float = Field(default=0.007, ge=0.0)
    e_idle: float = Field(default=0.0000005, ge=0.0)
    initial_energy: float = Field(default=25.0, ge=0.0)
    e_awake: float = Field(default=0.0005, ge=0.0)


class OracleConfig(_Secao):
    """Instância e preferências das verificações teóricas."""

    grids: List[List[float]] = [list(GRADE_GROSSA), list(GRADE_FINA)]
    betas: List[float] = list(GRADE_FINA)
    off_grid_betas: List[float] = [round(0.05 + 0.1 * k, 2) for k in range(10)]
    tol: float = Field(default=config_rota.tolerancia_teoria, gt=0.0)

    @field_validator("grids")
    @classmethod
    def _grades_validas(cls, grades: List[List[float]]) -> List[List[float]]:
        for grade in grades:
            PreferenceGrid(values=tuple(grade))
        return grades


class SensibilidadeConfig(_Secao):
    """Métodos e janelas da análise de sensibilidade."""

    windows: List[PositiveInt] = list(config.janelas_padrao)
    eval_start: Optional[NonNegativeInt] = None
    coarse_grid: List[float] = list(GRADE_GROSSA)
    fine_grid: List[float] = list(GRADE_FINA)
    static_beta: float = Field(default=0.9, ge=0.0, le=1.0)
    shortest_path_metric: Optional[Literal["hops", "energy"]] = "hops"


class ExperimentConfig(_Secao):
    """Configuração completa de um experimento."""

    topology: TopologiaConfig = TopologiaConfig()
    grid: PreferenceGrid = PreferenceGrid(values=GRADE_FINA)
    schedule: PreferenceSchedule = PeriodicStep()
    exploration: ExplorationSchedule = Sequential()
    learning_rate: LearningRateSchedule = ConstantRate()
    agent: Literal["dpq-centralized", "dpq-distributed", "baseline"] = "dpq-centralized"
    baseline: Optional[BaselineKind] = None
    energy: EnergyModel = EnergyModel()
    episodes: NonNegativeInt = 10000
    seed: NonNegativeInt = 0
    source: Optional[NonNegativeInt] = None
    destinations: Literal["sink", "all"] = "sink"
    step_cap: Optional[PositiveInt] = None
    oracle: OracleConfig = OracleConfig()
    sensitivity: SensibilidadeConfig = SensibilidadeConfig()

    @field_validator("grid", mode="before")
    @classmethod
    def _converter_grade(cls, valor):
        if isinstance(valor, (list, tuple)):
            return {"values": tuple(valor)}
        return valor

    @model_validator(mode="after")
    def _baseline_exigido(self) -> "ExperimentConfig":
        if self.agent == "baseline" and self.baseline is None:
            raise ValueError("agent='baseline' exige a seção baseline")
        return self

    def horizonte_smorlr(self) -> int:
        """Episódios de decaimento de epsilon do SMORLR após cada troca de preferência."""
        if isinstance(self.baseline, Smorlr) and self.baseline.decay_episodes is not None:
            return self.baseline.decay_episodes
        if isinstance(self.schedule, PeriodicStep):
            return self.schedule.period
        return config.horizonte_smorlr_padrao

    def fim_exploracao(self) -> int:
        """Primeiro episódio após a fase de exploração."""
        if isinstance(self.exploration, Sequential):
            return self.exploration.m_exp
        if isinstance(self.exploration, EpsilonLinear):
            return self.exploration.horizon
        return 0


def carregar_config(caminho: Union[str, Path]) -> ExperimentConfig:
    """
    Lê e valida um arquivo TOML de experimento.

    Caminhos relativos de topologia são resolvidos a partir do diretório do arquivo.

    Parameters
    ----------
    caminho : Union[str, Path]
        Arquivo de configuração.

    Returns
    -------
    ExperimentConfig
        Configuração validada.
    """
    caminho = Path(caminho)
    try:
        with caminho.open("rb") as arquivo:
            dados = tomllib.load(arquivo)
    except FileNotFoundError:
        raise ErroConfiguracao(f"arquivo de configuração {caminho} não encontrado")
    except tomllib.TOMLDecodeError as erro:
        raise ErroConfiguracao(f"{caminho}: TOML inválido ({erro})")

    experimento = ExperimentConfig.model_validate(dados)
    if experimento.topology.path and not Path(experimento.topology.path).is_absolute():
        topologia = experimento.topology.model_copy(
            update={"path": str(caminho.parent / experimento.topology.path)}
        )
        experimento = experimento.model_copy(update={"topology": topologia})
    return experimento
