import numpy as np
import pytest

from pydantic import ValidationError

from rota.erros import AcaoIlegal
from rota.erros import ErroContrato
from rota.erros import ErroPreferencia
from rota.learner import GREEDY_GIP
from rota.learner import Behavior
from rota.learner import ConstantRate
from rota.learner import EpsilonLinear
from rota.learner import QTable
from rota.learner import QTableFamily
from rota.learner import Sequential
from rota.learner import VisitDecay
from rota.learner import behavior_action
from rota.learner import dpq_update
from rota.learner import epsilon_at
from rota.learner import gip_table
from rota.learner import greedy_action
from rota.learner import limite_passos
from rota.learner import replay
from rota.learner import run_episode
from rota.mdp import TERMINAL
from rota.mdp import Pair
from rota.mdp import RewardPair
from rota.mdp import TransitionSample
from rota.mdp import step
from rota.oracle import familia_exata
from rota.oracle import theory_constants
from rota.oracle import value_iteration
from rota.preference import GRADE_FINA
from rota.topology import grid_topology
from rota.topology import line_topology
from rota.utils import criar_geradores
from rota.utils import norma_sup


ENTREGA = TransitionSample(Pair(2, 2), 1, RewardPair(0.0, 1.0), TERMINAL)


def test_taxa_com_decaimento_por_visitas():
    taxa = VisitDecay(c=1.0, omega=0.7)

    assert taxa.alpha_para(0) == 1.0
    assert taxa.alpha_para(9) == pytest.approx(10 ** -0.7)
    assert ConstantRate(alpha=0.3).alpha_para(1000) == 0.3


@pytest.mark.parametrize(
    "modelo,argumentos",
    [
        (VisitDecay, dict(omega=0.5)),
        (VisitDecay, dict(c=0.0)),
        (ConstantRate, dict(alpha=0.0)),
        (ConstantRate, dict(alpha=1.2)),
        (EpsilonLinear, dict(horizon=0)),
    ],
)
def test_cronogramas_invalidos(modelo, argumentos):
    with pytest.raises(ValidationError):
        modelo(**argumentos)


def test_epsilon_sequencial():
    assert epsilon_at(Sequential(m_exp=1000), 999) == 1.0
    assert epsilon_at(Sequential(m_exp=1000), 1000) == 0.0


def test_epsilon_linear():
    cronograma = EpsilonLinear(eps_begin=1.0, eps_end=0.0, horizon=5000)

    assert epsilon_at(cronograma, 0) == 1.0
    assert epsilon_at(cronograma, 2500) == pytest.approx(0.5)
    assert epsilon_at(cronograma, 9000) == 0.0


def test_atualizacao_a_partir_de_zero(linha3):
    familia = QTableFamily(linha3, [0.0, 1.0])

    dpq_update(familia, ENTREGA, ConstantRate(alpha=0.5))

    assert familia.tabela(0.0).valor(Pair(2, 2), 1) == pytest.approx(0.5)
    assert familia.tabela(1.0).valor(Pair(2, 2), 1) == 0.0
    assert familia.visitas[2, familia.indice_destino(2), 0] == 1


def test_atualizacao_converge_para_menos_os_saltos_restantes(linha3):
    familia = QTableFamily(linha3, [0.0, 1.0], destinations=[2])
    taxa = ConstantRate(alpha=0.9)
    varredura = [
        TransitionSample(Pair(2, 2), 1, RewardPair(0.0, 1.0), TERMINAL),
        TransitionSample(Pair(1, 2), 2, RewardPair(-1.0, 0.0), Pair(2, 2)),
        TransitionSample(Pair(1, 2), 0, RewardPair(-1.0, 0.0), Pair(0, 2)),
        TransitionSample(Pair(0, 2), 1, RewardPair(-1.0, 0.0), Pair(1, 2)),
    ]

    replay(familia, [varredura] * 200, taxa)

    assert familia.tabela(1.0).valor(Pair(0, 2), 1) == pytest.approx(-2.0, abs=1e-6)
    exato = value_iteration(linha3, 1.0, 1e-10, destinations=[2])
    assert familia.tabela(1.0).valor(Pair(0, 2), 1) == pytest.approx(exato.q(Pair(0, 2), 1), abs=1e-6)


def test_acao_ilegal_na_atualizacao(linha3):
    amostra = TransitionSample(Pair(0, 2), 2, RewardPair(-1.0, 0.0), Pair(2, 2))
    with pytest.raises(AcaoIlegal):
        dpq_update(QTableFamily(linha3, [0.0, 1.0]), amostra, ConstantRate())


def test_terminal_vale_zero(linha3):
    tabela = QTableFamily(linha3, [0.0, 1.0]).tabela(0.0)

    assert tabela.max_q(TERMINAL) == 0.0
    with pytest.raises(ErroContrato):
        tabela.linha(TERMINAL)


def test_familia_valida_preferencias(linha3):
    with pytest.raises(ErroPreferencia):
        QTableFamily(linha3, [0.5, 0.2])
    with pytest.raises(ErroPreferencia):
        QTableFamily(linha3, [])
    with pytest.raises(ErroContrato):
        QTableFamily(linha3, [0.0, 1.0], destinations=[7])


def test_familia_em_ordem_crescente(linha3):
    familia = QTableFamily(linha3, GRADE_FINA)

    assert [t.beta for t in familia.tabelas] == list(GRADE_FINA)
    assert familia.grade is not None
    assert QTableFamily(linha3, [0.9]).grade is None


def test_interpolacao_no_ponto_medio(linha3):
    familia = QTableFamily(linha3, [0.0, 1.0])
    familia.tabela(0.0).valores[0, 2, 0] = 2.0
    familia.tabela(1.0).valores[0, 2, 0] = -4.0

    assert gip_table(familia, 0.5).valor(Pair(0, 2), 1) == pytest.approx(-1.0)


def test_tabela_da_grade_sem_interpolacao(linha3):
    familia = QTableFamily(linha3, GRADE_FINA)
    familia.valores[...] = np.random.default_rng(0).normal(size=familia.valores.shape)

    tabela = gip_table(familia, 0.3)

    assert isinstance(tabela, QTable)
    np.testing.assert_array_equal(tabela.valores, familia.tabela(0.3).valores)


def test_interpolacao_fora_do_intervalo(linha3):
    with pytest.raises(ErroPreferencia):
        gip_table(QTableFamily(linha3, [0.0, 1.0]), 1.2)


def test_interpolacao_sem_grade(linha3):
    with pytest.raises(ErroPreferencia):
        gip_table(QTableFamily(linha3, [0.9]), 0.5)


def test_interpolacao_convexa_entre_as_tabelas(grade3):
    familia = QTableFamily(grade3, [0.0, 0.5, 1.0])
    familia.valores[...] = np.random.default_rng(5).normal(size=familia.valores.shape)

    interpolada = gip_table(familia, 0.7).materializar()
    baixo, alto = familia.tabela(0.5).valores, familia.tabela(1.0).valores

    assert np.all(interpolada >= np.minimum(baixo, alto) - 1e-12)
    assert np.all(interpolada <= np.maximum(baixo, alto) + 1e-12)


def test_interpolacao_exata_respeita_o_limite_teorico():
    topologia = line_topology(5, 0.1, 1.0)
    familia = familia_exata(topologia, [0.0, 0.5, 1.0])
    constantes = theory_constants(topologia, [0.0, 0.25, 0.5, 1.0])

    distancia = norma_sup(
        gip_table(familia, 0.25).materializar(),
        value_iteration(topologia, 0.25, 1e-10).q_star,
        familia.mascara,
    )

    assert distancia <= constantes.gamma_const * (constantes.horizonte_efetivo + 1.0) * 0.5 + 1e-8


def test_acao_gulosa_unica(linha3):
    familia = QTableFamily(linha3, [0.0, 1.0])
    familia.tabela(0.0).valores[0, 2, 0] = 0.4

    assert greedy_action(familia.tabela(0.0), Pair(0, 2)) == 1


def test_empate_vai_para_o_menor_vizinho(linha3):
    assert greedy_action(QTableFamily(linha3, [0.0, 1.0]).tabela(0.0), Pair(1, 2)) == 0


def test_acao_gulosa_na_tabela_exata(linha3):
    assert greedy_action(value_iteration(linha3, 0.0).como_tabela(), Pair(0, 2)) == 1


def test_escala_positiva_preserva_a_acao_gulosa(grade3):
    tabela = value_iteration(grade3, 0.4, 1e-12).como_tabela()
    escalada = QTable(grade3, tabela.destinos, tabela.valores * 3.0, 0.4)

    for no in range(9):
        for dest in range(9):
            estado = Pair(no, dest)
            assert greedy_action(escalada, estado) == greedy_action(tabela, estado)


def test_energia_escalada_equivale_a_outra_preferencia():
    topologia = grid_topology(3, 3, 0.2, 0.5, "bottom-right", [(4, 0.5)])
    escalada = grid_topology(3, 3, 0.2, 1.5, "bottom-right", [(4, 0.5)])
    beta, fator = 0.4, 3.0
    # beta (-3E) + (1 - beta) = k [beta' (-E) + (1 - beta')]
    k = fator * beta + 1.0 - beta
    beta_equivalente = fator * beta / k

    np.testing.assert_allclose(
        value_iteration(escalada, beta, 1e-12).q_star,
        k * value_iteration(topologia, beta_equivalente, 1e-12).q_star,
        atol=1e-8,
    )


def test_comportamento_guloso_com_epsilon_zero(grade3, rng):
    familia = QTableFamily(grade3, [0.0, 1.0])
    familia.valores[...] = np.random.default_rng(2).normal(size=familia.valores.shape)
    tabela = familia.tabela(0.0)

    for no in range(9):
        estado = Pair(no, 8)
        assert behavior_action(tabela, estado, 0.0, rng) == greedy_action(tabela, estado)


def test_exploracao_uniforme(grade3):
    tabela = QTableFamily(grade3, [0.0, 1.0]).tabela(0.0)
    rng = np.random.default_rng(99)
    escolhas = [behavior_action(tabela, Pair(4, 8), 1.0, rng) for _ in range(100000)]

    for acao in (1, 3, 5, 7):
        assert escolhas.count(acao) / 100000 == pytest.approx(0.25, abs=0.01)


def test_frequencia_gulosa_com_epsilon_meio(grade3):
    familia = QTableFamily(grade3, [0.0, 1.0])
    familia.tabela(0.0).valores[4, 8, 2] = 1.0
    tabela = familia.tabela(0.0)
    rng = np.random.default_rng(4)

    escolhas = [behavior_action(tabela, Pair(4, 8), 0.5, rng) for _ in range(40000)]

    assert escolhas.count(5) / 40000 == pytest.approx(0.5 + 0.5 / 4, abs=0.01)


def test_epsilon_invalido(grade3, rng):
    with pytest.raises(ErroContrato):
        behavior_action(QTableFamily(grade3, [0.0, 1.0]).tabela(0.0), Pair(0, 8), 1.5, rng)


def test_episodio_guloso_convergido_na_linha(linha3, rng):
    familia = familia_exata(linha3, [0.0, 1.0])

    resultado = run_episode(linha3, familia, 0.5, GREEDY_GIP, 0, 2, rng, aprender=False)

    assert [a.state for a in resultado.trajectory] == [Pair(0, 2), Pair(1, 2), Pair(2, 2)]
    assert resultado.delivered
    assert resultado.steps == 3
    assert not resultado.cap_hit


def test_origem_igual_ao_destino(linha3, rng):
    familia = QTableFamily(linha3, [0.0, 1.0])

    resultado = run_episode(linha3, familia, 0.5, Behavior(1.0), 2, 2, rng)

    assert resultado.steps == 1
    assert resultado.delivered
    assert sum(a.rewards.r_pdr for a in resultado.trajectory) == 1.0


def test_todas_as_amostras_atualizam_a_familia(linha3, rng):
    familia = QTableFamily(linha3, [0.0, 1.0])

    resultado = run_episode(linha3, familia, 0.0, GREEDY_GIP, 0, 2, rng)

    assert familia.visitas.sum() == resultado.steps


def test_descarte_certo_no_centro_da_grade():
    topologia = grid_topology(10, 10, 0.0, 0.007, "bottom-right", [(55, 1.0)])
    familia = QTableFamily(topologia, [0.0, 1.0], destinations=[99])
    rng = np.random.default_rng(8)
    entradas = 0

    for origem in range(99):
        resultado = run_episode(topologia, familia, 0.5, Behavior(1.0), origem, 99, rng)
        passou = [a for a in resultado.trajectory if a.action == 55 and a.state.current != 99]
        if passou:
            entradas += 1
            assert not resultado.delivered
            assert resultado.trajectory[-1] is passou[0]
            assert passou[0].next_state is TERMINAL

    assert entradas > 0


def test_limite_de_passos(linha3):
    familia = QTableFamily(linha3, [0.0, 1.0])
    # vai e volta entre 0 e 1 enquanto 0 for preferido
    familia.tabela(0.0).valores[1, 2, 0] = 10.0

    resultado = run_episode(linha3, familia, 0.0, GREEDY_GIP, 0, 2, np.random.default_rng(0), aprender=False)

    assert resultado.steps == limite_passos(linha3) == 12
    assert not resultado.delivered
    assert resultado.cap_hit


def _trajetorias(topologia, episodios, semente):
    """Trajetórias de exploração pura geradas sem tabela."""
    rng_origem, rng_episodio = criar_geradores(semente, 2)
    trajetorias = []
    for _ in range(episodios):
        origem = int(rng_origem.integers(topologia.node_count - 1))
        estado = Pair(origem, topologia.sink)
        trajetoria = []
        while len(trajetoria) < limite_passos(topologia):
            acoes = topologia.neighbors[estado.current]
            amostra = step(topologia, estado, acoes[int(rng_episodio.integers(len(acoes)))], rng_episodio)
            trajetoria.append(amostra)
            if amostra.next_state is TERMINAL:
                break
            estado = amostra.next_state
        trajetorias.append(trajetoria)
    return trajetorias


def test_familia_equivale_a_aprendizes_independentes():
    topologia = grid_topology(4, 4, 0.1, 0.007, "bottom-right", [(5, 0.5)])
    trajetorias = _trajetorias(topologia, 300, semente=21)
    taxa = VisitDecay()

    familia = replay(QTableFamily(topologia, GRADE_FINA, [topologia.sink]), trajetorias, taxa)

    for beta in GRADE_FINA:
        sozinho = replay(QTableFamily(topologia, [beta], [topologia.sink]), trajetorias, taxa)
        np.testing.assert_array_equal(sozinho.valores[0], familia.tabela(beta).valores)
        np.testing.assert_array_equal(sozinho.visitas, familia.visitas)


def test_memoria_e_exportacao(linha3):
    familia = QTableFamily(linha3, [0.0, 1.0], destinations=[2])
    dpq_update(familia, ENTREGA, ConstantRate(alpha=0.5))

    tabela = familia.exportar()

    assert familia.memoria_bytes() == 8 * 2 * 1 * 4
    assert list(tabela.columns) == ["current", "dest", "action", "beta", "value"]
    assert len(tabela) == 2 * 4
    linha = tabela[(tabela.current == 2) & (tabela.beta == 0.0)]
    assert linha.value.tolist() == [0.5]


def test_copia_independente(linha3):
    familia = QTableFamily(linha3, [0.0, 1.0])
    copia = familia.copiar()

    dpq_update(familia, ENTREGA, ConstantRate())

    assert copia.valores.sum() == 0.0
    assert copia.visitas.sum() == 0
    familia.zerar()
    assert familia.valores.sum() == 0.0


@pytest.mark.lento
def test_exploracao_pura_converge_para_o_oraculo():
    topologia = grid_topology(4, 4, 0.1, 0.007)
    familia = QTableFamily(topologia, [0.0, 0.5, 1.0], destinations=[topologia.sink])
    rng_origem, rng_episodio = criar_geradores(2024, 2)
    taxa = VisitDecay(c=1.0, omega=0.7)

    for _ in range(10000):
        origem = int(rng_origem.integers(topologia.node_count - 1))
        run_episode(topologia, familia, 0.5, Behavior(1.0), origem, topologia.sink, rng_episodio, taxa)

    for beta in (0.0, 0.5, 1.0):
        exato = value_iteration(topologia, beta, 1e-10, destinations=[topologia.sink])
        assert norma_sup(familia.tabela(beta).valores, exato.q_star, familia.mascara) <= 0.05
