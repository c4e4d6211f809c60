import numpy as np
import pytest

from pydantic import TypeAdapter
from pydantic import ValidationError

from rota.baselines import AgenteCaminhoMinimo
from rota.baselines import AgenteQEstatico
from rota.baselines import AgenteSmorlr
from rota.baselines import BaselineKind
from rota.baselines import EstadoSmorlr
from rota.baselines import ShortestPath
from rota.baselines import Smorlr
from rota.baselines import StaticQ
from rota.baselines import rotulo
from rota.baselines import shortest_path_route
from rota.baselines import smorlr_on_preference_change
from rota.erros import ErroContrato
from rota.learner import ConstantRate
from rota.learner import Sequential
from rota.mdp import Pair
from rota.topology import grid_topology


@pytest.mark.parametrize(
    "baseline,esperado",
    [
        (Smorlr(), "smorlr"),
        (StaticQ(fixed_beta=0.9), "static_q_0.9"),
        (ShortestPath(metric="energy"), "shortest_path_energy"),
    ],
)
def test_rotulos(baseline, esperado):
    assert rotulo(baseline) == esperado


def test_baseline_pelo_tipo():
    adaptador = TypeAdapter(BaselineKind)

    smorlr = adaptador.validate_python({"kind": "smorlr", "smorlr_keep_table": True})
    assert isinstance(smorlr, Smorlr)
    assert smorlr.keep_table
    assert adaptador.validate_python({"kind": "static-q"}).fixed_beta == 0.9
    with pytest.raises(ValidationError):
        adaptador.validate_python({"kind": "static-q", "fixed_beta": 2.0})
    with pytest.raises(ValidationError):
        adaptador.validate_python({"kind": "shortest-path", "metric": "latencia"})


def test_primeira_preferencia_cria_a_tabela(linha3):
    estado = smorlr_on_preference_change(EstadoSmorlr(None, None, 0, 100), 0.2, 0, linha3)

    assert estado.beta == 0.2
    assert estado.familia.betas.tolist() == [0.2]
    assert estado.epsilon(0) == 1.0


def test_mesma_preferencia_mantem_o_estado(linha3):
    estado = smorlr_on_preference_change(EstadoSmorlr(None, None, 0, 100), 0.2, 0, linha3)

    assert smorlr_on_preference_change(estado, 0.2, 57, linha3) is estado


def test_troca_de_preferencia_reinicia(linha3):
    estado = smorlr_on_preference_change(EstadoSmorlr(None, None, 0, 100), 0.2, 0, linha3)
    estado.familia.valores[...] = 1.0

    novo = smorlr_on_preference_change(estado, 0.1, 1000, linha3)

    assert novo.familia.valores.sum() == 0.0
    assert novo.familia.betas.tolist() == [0.1]
    assert novo.inicio == 1000
    assert novo.epsilon(1000) == 1.0
    assert novo.epsilon(1050) == pytest.approx(0.5)
    assert novo.epsilon(1200) == 0.0


def test_troca_mantendo_a_tabela(linha3):
    estado = smorlr_on_preference_change(EstadoSmorlr(None, None, 0, 100), 0.2, 0, linha3)
    estado.familia.valores[...] = 1.0

    novo = smorlr_on_preference_change(estado, 0.1, 1000, linha3, keep_table=True)

    np.testing.assert_array_equal(novo.familia.valores, estado.familia.valores)
    assert novo.familia is not estado.familia
    assert novo.epsilon(1000) == 1.0


def test_caminho_minimo_em_saltos(grade3):
    rota = shortest_path_route(grade3, 0, 8, "hops")

    assert rota[0] == 1
    assert rota[1] == 2
    assert rota[4] == 5
    assert rota[8] == 5


@pytest.mark.parametrize("energia,primeiro", [(1.0, 1), (0.05, 2)])
def test_caminho_minimo_em_energia(criar_diamante, energia, primeiro):
    assert shortest_path_route(criar_diamante(energia), 0, 3, "energy")[0] == primeiro


def test_caminho_minimo_ignora_perdas(topologia_diamante):
    # empate em saltos vai para o menor vizinho, mesmo com perdas de 30%
    assert shortest_path_route(topologia_diamante, 0, 3, "hops")[0] == 1


def test_metrica_desconhecida(grade3):
    with pytest.raises(ErroContrato):
        shortest_path_route(grade3, 0, 8, "latencia")


def test_roteador_de_caminho_minimo(linha3, rng):
    agente = AgenteCaminhoMinimo(linha3)

    resultado = agente.executar_episodio(0, 0, 2, 0.5, rng)

    assert resultado.delivered
    assert resultado.steps == 3
    assert [a.action for a in resultado.trajectory] == [1, 2, 1]
    assert agente.familia_atual() is None


def test_roteador_nao_desvia_do_no_que_descarta(rng):
    topologia = grid_topology(3, 3, 0.0, 1.0, "bottom-right", [(1, 1.0)])
    agente = AgenteCaminhoMinimo(topologia)

    resultados = [agente.executar_episodio(k, 0, 8, 0.5, rng) for k in range(20)]

    assert not any(r.delivered for r in resultados)
    assert all(r.steps == 1 for r in resultados)


def test_q_estatico_aprende_so_a_preferencia_fixa(grade3, rng):
    agente = AgenteQEstatico(grade3, 0.9, Sequential(m_exp=10), ConstantRate(), destinos=[8])

    for k in range(20):
        agente.executar_episodio(k, k % 8, 8, 0.1, rng)

    assert agente.familia_atual().betas.tolist() == [0.9]
    assert agente.familia_atual().visitas.sum() > 0


def test_smorlr_conta_os_reinicios(grade3, rng):
    agente = AgenteSmorlr(grade3, ConstantRate(), horizonte=10, destinos=[8])
    betas = [0.2] * 5 + [0.7] * 5 + [0.2] * 5

    for k, beta in enumerate(betas):
        agente.executar_episodio(k, 0, 8, beta, rng)

    assert agente.reinicios == 2
    assert agente.familia_atual().betas.tolist() == [0.2]
    assert agente.estado.inicio == 10


def test_smorlr_comeca_explorando(grade3):
    agente = AgenteSmorlr(grade3, ConstantRate(), horizonte=1000, destinos=[8])
    rng = np.random.default_rng(3)

    resultado = agente.executar_episodio(0, 0, 8, 0.5, rng)

    assert resultado.trajectory[0].state == Pair(0, 8)
    assert agente.estado.epsilon(0) == 1.0
