import numpy as np
import pytest

from pydantic import TypeAdapter
from pydantic import ValidationError

from rota.erros import ErroPreferencia
from rota.preference import GRADE_FINA
from rota.preference import SEQUENCIA_PADRAO
from rota.preference import Constant
from rota.preference import PerEpisodeRandom
from rota.preference import PeriodicStep
from rota.preference import PreferenceSchedule
from rota.preference import bracket
from rota.preference import criar_grade
from rota.preference import interpolar
from rota.preference import mudancas_de_preferencia
from rota.preference import schedule_beta


@pytest.fixture
def grade_fina():
    return criar_grade(GRADE_FINA)


def test_colchete_na_grade_grossa():
    lower, upper, rho = bracket(criar_grade([0.0, 1.0]), 0.3)

    assert (lower, upper) == (0.0, 1.0)
    assert rho == pytest.approx(0.3)


def test_colchete_na_grade_fina(grade_fina):
    lower, upper, rho = bracket(grade_fina, 0.35)

    assert (lower, upper) == (0.3, 0.4)
    assert rho == pytest.approx(0.5)


def test_colchete_em_ponto_da_grade(grade_fina):
    assert bracket(grade_fina, 0.4) == (0.4, 0.4, 1.0)
    assert bracket(grade_fina, 0.0) == (0.0, 0.0, 1.0)
    assert bracket(grade_fina, 1.0) == (1.0, 1.0, 1.0)


@pytest.mark.parametrize("beta", np.linspace(0.0, 1.0, 37))
def test_colchete_reconstroi_a_preferencia(grade_fina, beta):
    lower, upper, rho = bracket(grade_fina, beta)

    assert lower <= beta <= upper
    assert 0.0 <= rho <= 1.0
    assert upper - lower <= grade_fina.maior_intervalo + 1e-12
    if lower != upper:
        assert lower + rho * (upper - lower) == pytest.approx(beta)


@pytest.mark.parametrize("beta", [-0.01, 1.01])
def test_colchete_fora_do_intervalo(grade_fina, beta):
    with pytest.raises(ErroPreferencia):
        bracket(grade_fina, beta)


@pytest.mark.parametrize(
    "valores", [[0.0], [0.1, 1.0], [0.0, 0.9], [0.0, 0.5, 0.5, 1.0], [0.0, 0.6, 0.4, 1.0]]
)
def test_grades_invalidas(valores):
    with pytest.raises(ValidationError):
        criar_grade(valores)


def test_grade_localiza_valores(grade_fina):
    assert len(grade_fina) == 11
    assert grade_fina.indice(0.7) == 7
    assert grade_fina.indice(0.1 + 0.2) == 3
    assert grade_fina.indice(0.35) is None
    assert grade_fina.contem(1.0)
    assert grade_fina.maior_intervalo == pytest.approx(0.1)


def test_interpolacao_convexa():
    baixo, alto = np.array([0.0, 2.0]), np.array([1.0, 4.0])

    np.testing.assert_allclose(interpolar(baixo, alto, 0.25), [0.25, 2.5])
    np.testing.assert_allclose(interpolar(baixo, alto, 1.0), alto)
    np.testing.assert_allclose(interpolar(baixo, alto, 0.25, "impressa"), [0.75, 3.5])


def test_orientacao_desconhecida():
    with pytest.raises(ErroPreferencia):
        interpolar(np.zeros(2), np.ones(2), 0.5, "invertida")


def test_cronograma_periodico():
    cronograma = PeriodicStep(values=SEQUENCIA_PADRAO, period=1000)

    assert schedule_beta(cronograma, 0) == 0.2
    assert schedule_beta(cronograma, 999) == 0.2
    assert schedule_beta(cronograma, 1000) == 0.1
    assert schedule_beta(cronograma, 1500) == 0.1
    assert schedule_beta(cronograma, 6500) == 0.2
    assert schedule_beta(cronograma, 10000) == 0.2


def test_cronograma_constante():
    assert schedule_beta(Constant(beta=0.3), 12345) == 0.3


def test_cronograma_aleatorio_reprodutivel():
    cronograma = PerEpisodeRandom(seed=11)
    betas = [schedule_beta(cronograma, k) for k in range(200)]

    assert betas == [schedule_beta(cronograma, k) for k in range(200)]
    assert all(0.0 <= b <= 1.0 for b in betas)
    assert len(set(betas)) > 150
    assert schedule_beta(cronograma, 50) == schedule_beta(PerEpisodeRandom(seed=11), 50)
    assert schedule_beta(PerEpisodeRandom(seed=12), 50) != schedule_beta(cronograma, 50)


def test_cronograma_aleatorio_na_grade():
    cronograma = PerEpisodeRandom(seed=3, distribution="grid", grid=[0.0, 0.5, 1.0])

    assert {schedule_beta(cronograma, k) for k in range(300)} == {0.0, 0.5, 1.0}


def test_cronograma_aleatorio_na_grade_exige_a_grade():
    with pytest.raises(ValidationError):
        PerEpisodeRandom(distribution="grid")


def test_episodio_negativo():
    with pytest.raises(ErroPreferencia):
        schedule_beta(Constant(beta=0.5), -1)


@pytest.mark.parametrize(
    "dados,tipo",
    [
        ({"kind": "constant", "beta": 0.4}, Constant),
        ({"kind": "periodic", "period": 10}, PeriodicStep),
        ({"kind": "random", "seed": 1}, PerEpisodeRandom),
    ],
)
def test_cronograma_discriminado_por_tipo(dados, tipo):
    assert isinstance(TypeAdapter(PreferenceSchedule).validate_python(dados), tipo)


def test_cronograma_invalido():
    adaptador = TypeAdapter(PreferenceSchedule)
    with pytest.raises(ValidationError):
        adaptador.validate_python({"kind": "constant", "beta": 1.5})
    with pytest.raises(ValidationError):
        adaptador.validate_python({"kind": "periodic", "values": []})


def test_mudancas_de_preferencia():
    assert mudancas_de_preferencia(PeriodicStep(values=(0.1, 0.2), period=10), 35) == 3
    assert mudancas_de_preferencia(Constant(beta=0.5), 100) == 0
