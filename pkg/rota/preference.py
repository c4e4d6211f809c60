"""Grade de preferências, colchetes de interpolação e cronogramas de preferência por episódio."""

from typing import Annotated
from typing import Literal
from typing import NamedTuple
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import PositiveInt
from pydantic import field_validator
from pydantic import model_validator

from rota.erros import ErroPreferencia
from rota.utils import validar_beta


TOLERANCIA_GRADE = 1e-12

GRADE_GROSSA = (0.0, 1.0)
GRADE_FINA = tuple(k / 10 for k in range(11))

# Sequência padrão de 10 preferências; os trechos 1000-2000 (0.1) e 6000-7000 (0.2)
# coincidem com os valores conhecidos dos experimentos periódicos.
SEQUENCIA_PADRAO = (0.2, 0.1, 0.4, 0.3, 0.5, 0.3, 0.2, 0.4, 0.1, 0.3)

Orientacao = Literal["consistente", "impressa"]


class PreferenceGrid(BaseModel):
    """Conjunto finito de preferências, estritamente crescente, de 0 a 1."""

    model_config = ConfigDict(frozen=True)

    values: Tuple[float, ...]

    @field_validator("values")
    @classmethod
    def _validar_valores(cls, valores: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(valores) < 2:
            raise ValueError("a grade precisa de ao menos 2 valores")
        if valores[0] != 0.0 or valores[-1] != 1.0:
            raise ValueError("a grade deve começar em 0 e terminar em 1")
        if any(b <= a for a, b in zip(valores, valores[1:])):
            raise ValueError("a grade deve ser estritamente crescente")
        return tuple(float(v) for v in valores)

    def __len__(self) -> int:
        """Número de valores da grade."""
        return len(self.values)

    def indice(self, beta: float) -> Optional[int]:
        """Posição de `beta` na grade, ou None se `beta` não pertence à grade."""
        posicao = int(np.searchsorted(self.values, beta - TOLERANCIA_GRADE, side="left"))
        if posicao < len(self.values) and abs(self.values[posicao] - beta) <= TOLERANCIA_GRADE:
            return posicao
        return None

    def contem(self, beta: float) -> bool:
        """Indica se `beta` é um ponto da grade."""
        return self.indice(beta) is not None

    @property
    def maior_intervalo(self) -> float:
        """Maior distância entre pontos adjacentes da grade."""
        return max(b - a for a, b in zip(self.values, self.values[1:]))

    @property
    def como_array(self) -> np.ndarray:
        """Valores da grade como array."""
        return np.asarray(self.values, dtype=float)


def criar_grade(valores) -> PreferenceGrid:
    """Atalho para construir uma grade a partir de uma sequência de valores."""
    if isinstance(valores, PreferenceGrid):
        return valores
    return PreferenceGrid(values=tuple(valores))


class Bracket(NamedTuple):
    """Pontos vizinhos da grade ao redor de uma preferência e o peso do ponto superior."""

    lower: float
    upper: float
    rho: float


def bracket(grid: PreferenceGrid, beta: float) -> Bracket:
    """
    Encontra os pontos da grade que envolvem `beta`.

    Se `beta` pertence à grade, os dois pontos coincidem e rho vale 1.

    Parameters
    ----------
    grid : PreferenceGrid
        Grade de preferências.

    beta : float
        Preferência em [0, 1].

    Returns
    -------
    Bracket
        (beta inferior, beta superior, rho), com rho = (beta - inferior) / (superior - inferior).
    """
    beta = validar_beta(beta)
    indice = grid.indice(beta)
    if indice is not None:
        valor = grid.values[indice]
        return Bracket(valor, valor, 1.0)

    superior = int(np.searchsorted(grid.values, beta, side="right"))
    baixo, alto = grid.values[superior - 1], grid.values[superior]
    return Bracket(baixo, alto, (beta - baixo) / (alto - baixo))


def interpolar(
    baixo: np.ndarray, alto: np.ndarray, rho: float, orientacao: Orientacao = "consistente"
) -> np.ndarray:
    """
    Combinação convexa de duas tabelas (ou linhas de tabela).

    Na orientação consistente o resultado é (1 - rho) * baixo + rho * alto, que
    coincide com a tabela superior quando rho = 1. A orientação impressa troca os
    pesos: rho * baixo + (1 - rho) * alto.
    """
    if orientacao == "consistente":
        return (1.0 - rho) * baixo + rho * alto
    if orientacao == "impressa":
        return rho * baixo + (1.0 - rho) * alto
    raise ErroPreferencia(f"orientacao={orientacao!r} desconhecida")


class _Cronograma(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class Constant(_Cronograma):
    """Preferência fixa durante todo o experimento."""

    kind: Literal["constant"] = "constant"
    beta: float = Field(ge=0.0, le=1.0)


class PeriodicStep(_Cronograma):
    """Preferência trocada a cada `period` episódios, percorrendo `values` ciclicamente."""

    kind: Literal["periodic"] = "periodic"
    values: Tuple[Annotated[float, Field(ge=0.0, le=1.0)], ...] = SEQUENCIA_PADRAO
    period: PositiveInt = 1000

    @field_validator("values")
    @classmethod
    def _nao_vazia(cls, valores: Tuple[float, ...]) -> Tuple[float, ...]:
        if not valores:
            raise ValueError("a sequência de preferências não pode ser vazia")
        return valores


class PerEpisodeRandom(_Cronograma):
    """Preferência sorteada a cada episódio, reprodutível a partir da semente."""

    kind: Literal["random"] = "random"
    seed: int = Field(default=0, ge=0)
    distribution: Literal["uniform", "grid"] = "uniform"
    grid: Optional[PreferenceGrid] = None

    @field_validator("grid", mode="before")
    @classmethod
    def _converter_grade(cls, valor):
        if valor is None or isinstance(valor, (PreferenceGrid, dict)):
            return valor
        return {"values": tuple(valor)}

    @model_validator(mode="after")
    def _grade_exigida(self) -> "PerEpisodeRandom":
        if self.distribution == "grid" and self.grid is None:
            raise ValueError("distribution='grid' exige o campo grid")
        return self


PreferenceSchedule = Annotated[
    Union[Constant, PeriodicStep, PerEpisodeRandom], Field(discriminator="kind")
]


def schedule_beta(schedule: PreferenceSchedule, episode_index: int) -> float:
    """
    Preferência do episódio `episode_index`.

    Parameters
    ----------
    schedule : PreferenceSchedule
        Cronograma de preferências.

    episode_index : int
        Índice do episódio (>= 0).

    Returns
    -------
    float
        Preferência em [0, 1].
    """
    if episode_index < 0:
        raise ErroPreferencia(f"episode_index={episode_index} negativo")

    if isinstance(schedule, Constant):
        return schedule.beta
    if isinstance(schedule, PeriodicStep):
        return schedule.values[(episode_index // schedule.period) % len(schedule.values)]
    if isinstance(schedule, PerEpisodeRandom):
        gerador = np.random.default_rng([schedule.seed, episode_index])
        if schedule.distribution == "grid":
            return schedule.grid.values[int(gerador.integers(len(schedule.grid)))]
        return float(gerador.random())
    raise ErroPreferencia(f"cronograma desconhecido: {schedule!r}")


def mudancas_de_preferencia(schedule: PreferenceSchedule, episodios: int) -> int:
    """Número de trocas de preferência nos primeiros `episodios` episódios."""
    anterior = None
    trocas = 0
    for k in range(episodios):
        beta = schedule_beta(schedule, k)
        if anterior is not None and beta != anterior:
            trocas += 1
        anterior = beta
    return trocas
