import numpy as np
import pytest

from rota.config import config
from rota.erros import ErroContrato
from rota.erros import ErroConvergencia
from rota.mdp import Pair
from rota.oracle import COLUNAS_TEORIA
from rota.oracle import analisar_horizonte
from rota.oracle import check_gip_bound
from rota.oracle import check_lipschitz
from rota.oracle import expected_episode_length
from rota.oracle import familia_exata
from rota.oracle import gamma_constant
from rota.oracle import lacuna_valor_gip
from rota.oracle import medir_epsilon
from rota.oracle import relatorios_para_dataframe
from rota.oracle import resolver_varios
from rota.oracle import theory_constants
from rota.oracle import value_iteration
from rota.oracle import verificar_instancia
from rota.preference import GRADE_FINA
from rota.preference import GRADE_GROSSA
from rota.topology import grid_topology
from rota.topology import line_topology


BETAS = [k / 10 for k in range(11)]
BETAS_FORA = [round(0.05 + k / 10, 2) for k in range(10)]


def test_linha_sem_perdas_com_energia(linha3):
    solucao = value_iteration(linha3, 1.0, 1e-12)

    assert solucao.q(Pair(0, 2), 1) == pytest.approx(-2.0)
    assert solucao.v(Pair(1, 2)) == pytest.approx(-1.0)
    assert solucao.q(Pair(1, 2), 0) == pytest.approx(-3.0)
    assert solucao.v(Pair(2, 2)) == 0.0


def test_linha_sem_perdas_so_entrega(linha3):
    solucao = value_iteration(linha3, 0.0, 1e-12)

    np.testing.assert_allclose(solucao.v_star, 1.0)


def test_linha_com_preferencia_intermediaria(linha3):
    solucao = value_iteration(linha3, 0.5, 1e-12, destinations=[2])

    assert solucao.destinos == (2,)
    np.testing.assert_allclose(solucao.v_star[:, 0], [-0.5, 0.0, 0.5])


def test_perda_reduz_a_entrega():
    solucao = value_iteration(line_topology(2, 0.3, 1.0), 0.0, 1e-12)

    assert solucao.v(Pair(0, 1)) == pytest.approx(0.7)
    assert solucao.residual <= 1e-12


def test_solucao_satisfaz_bellman(grade3):
    solucao = value_iteration(grade3, 0.4, 1e-12)

    for no in range(9):
        for dest in range(9):
            estado = Pair(no, dest)
            melhor = max(solucao.q(estado, a) for a in grade3.neighbors[no])
            assert solucao.v(estado) == pytest.approx(melhor)


def test_descarte_entra_na_esperanca():
    topologia = grid_topology(2, 2, 0.0, 1.0, "bottom-right", [(1, 0.5)])
    solucao = value_iteration(topologia, 0.0, 1e-12, destinations=[3])

    assert solucao.q(Pair(0, 3), 1) == pytest.approx(0.5)
    assert solucao.q(Pair(0, 3), 2) == pytest.approx(1.0)


def test_tolerancia_invalida(linha3):
    with pytest.raises(ErroContrato):
        value_iteration(linha3, 0.5, 0.0)


def test_sem_convergencia(monkeypatch, grade3):
    monkeypatch.setattr(config, "max_iteracoes_oraculo", 2)
    with pytest.raises(ErroConvergencia):
        value_iteration(grade3, 0.5, 1e-12)


@pytest.mark.parametrize("energia,esperado", [(1.0, 1.0), (0.007, 1.0), (3.0, 3.0)])
def test_constante_gamma(energia, esperado):
    assert gamma_constant(line_topology(3, 0.1, energia)) == esperado


def test_horizonte_exato_na_linha(linha3):
    for beta in (0.0, 0.5, 1.0):
        horizonte = analisar_horizonte(linha3, value_iteration(linha3, beta, 1e-12))
        assert horizonte.valor == pytest.approx(3.0)
        assert horizonte.exato


def test_horizonte_com_perdas():
    topologia = line_topology(2, 0.5, 1.0)

    assert expected_episode_length(topologia, value_iteration(topologia, 0.5, 1e-12)) == pytest.approx(1.5)


def test_horizonte_estimado_com_muitos_empates():
    topologia = grid_topology(4, 4, 0.0, 1.0)

    horizonte = analisar_horizonte(topologia, value_iteration(topologia, 0.0, 1e-12))

    assert not horizonte.exato
    assert horizonte.valor == pytest.approx(7.0)


def test_horizonte_estimado_segue_so_acoes_empatadas():
    # o centro descarta metade dos pacotes; em beta = 0 os demais vizinhos empatam
    topologia = grid_topology(3, 3, 0.0, 1.0, "bottom-right", [(4, 0.5)])

    horizonte = analisar_horizonte(topologia, value_iteration(topologia, 0.0, 1e-12, destinations=[7]))

    assert not horizonte.exato
    assert horizonte.politicas == 1
    assert horizonte.por_estado[1, 0] == pytest.approx(5.0)
    assert horizonte.valor == pytest.approx(5.0)


def test_constantes_da_instancia(linha3):
    constantes = theory_constants(linha3, [0.0, 0.5, 1.0])

    assert constantes.gamma_const == 1.0
    assert constantes.horizon == pytest.approx(3.0)
    assert constantes.exato
    assert constantes.horizonte_efetivo == constantes.horizon


def test_lipschitz_na_grade_4x4():
    topologia = grid_topology(4, 4, 0.0, 1.0)
    solucoes = {}
    constantes = theory_constants(topologia, [0.0, 0.1], solucoes=solucoes)

    relatorio = check_lipschitz(topologia, 0.0, 0.1, constantes, solucoes=solucoes, nome="grade4")

    assert relatorio.check == "lipschitz"
    assert relatorio.beta == "(0.0,0.1)"
    assert relatorio.lhs == pytest.approx(0.8)
    assert not constantes.exato
    assert relatorio.rhs == pytest.approx(0.87)
    assert relatorio.holds


def test_lipschitz_acusa_constante_pequena(linha3):
    constantes = theory_constants(linha3, [0.0, 1.0])._replace(gamma_const=0.1)

    assert not check_lipschitz(linha3, 0.0, 1.0, constantes).holds


def test_tabelas_exatas_tem_erro_nulo():
    topologia = line_topology(5, 0.1, 1.0)
    solucoes = resolver_varios(topologia, GRADE_FINA, 1e-10)

    familia = familia_exata(topologia, GRADE_FINA, solucoes=solucoes)

    assert medir_epsilon(familia, solucoes) == 0.0


def test_limite_de_interpolacao_com_tabelas_exatas():
    topologia = line_topology(5, 0.1, 1.0)
    familia = familia_exata(topologia, [0.0, 0.5, 1.0])
    constantes = theory_constants(topologia, [0.0, 0.25, 0.5, 1.0])

    relatorio = check_gip_bound(topologia, [0.0, 0.5, 1.0], 0.25, 0.0, familia, constantes, nome="linha5")

    assert relatorio.check == "gip_bound"
    assert relatorio.beta == "0.25"
    assert relatorio.holds


def test_limite_de_interpolacao_acusa_tabelas_ruins():
    topologia = line_topology(5, 0.1, 1.0)
    familia = familia_exata(topologia, GRADE_GROSSA)
    familia.valores[1] += 50.0
    constantes = theory_constants(topologia, [0.0, 0.5, 1.0])

    assert not check_gip_bound(topologia, GRADE_GROSSA, 0.5, 0.0, familia, constantes).holds


def test_politica_interpolada_otima_na_linha():
    topologia = line_topology(5, 0.1, 1.0)
    familia = familia_exata(topologia, GRADE_FINA)

    lacuna = lacuna_valor_gip(topologia, familia, 0.35, value_iteration(topologia, 0.35, 1e-10))

    assert lacuna == pytest.approx(0.0, abs=1e-8)


def test_politica_impropria_tem_lacuna_infinita(linha3):
    familia = familia_exata(linha3, GRADE_GROSSA)
    # no nó 1 o melhor passa a ser voltar para o nó 0
    familia.valores[:, 1, 2, 0] = 100.0

    assert lacuna_valor_gip(linha3, familia, 0.5, value_iteration(linha3, 0.5, 1e-10)) == float("inf")


TOPOLOGIAS = {
    "linha3": lambda p: line_topology(3, p, 1.0),
    "linha5": lambda p: line_topology(5, p, 1.0),
    "grade3x3": lambda p: grid_topology(3, 3, p, 1.0, "bottom-right", [(4, 0.5)]),
    "grade4x4": lambda p: grid_topology(4, 4, p, 1.0),
}


@pytest.mark.parametrize("nome", sorted(TOPOLOGIAS))
@pytest.mark.parametrize("perda", [0.0, 0.1, 0.3])
def test_verificacoes_valem_nas_instancias_pequenas(nome, perda):
    linhas = verificar_instancia(TOPOLOGIAS[nome](perda), nome, [GRADE_GROSSA, GRADE_FINA], BETAS, BETAS_FORA)

    tabela = relatorios_para_dataframe(linhas)
    assert list(tabela.columns) == COLUNAS_TEORIA
    assert len(tabela[tabela.check == "lipschitz"]) == 55
    assert len(tabela[tabela.check == "gip_bound"]) == 20
    assert tabela.holds.all()
    assert set(tabela[tabela.check == "gip_bound"].topology) == {f"{nome}[grid=2]", f"{nome}[grid=11]"}


def _erros_de_interpolacao(topologia, nome):
    linhas = verificar_instancia(topologia, nome, [GRADE_GROSSA, GRADE_FINA], [0.0, 1.0], BETAS_FORA)
    tabela = relatorios_para_dataframe(linhas)
    assert tabela.holds.all()
    return tabela[tabela.check == "gip_bound"].groupby("topology").lhs


@pytest.mark.parametrize(
    "nome,parametro",
    [("diamante", 1.0), ("diamante", 0.5), ("grade3x3", 0.0), ("grade3x3", 0.1), ("grade3x3", 0.3)],
)
def test_grade_fina_reduz_o_erro_de_interpolacao(criar_diamante, nome, parametro):
    topologia = criar_diamante(parametro) if nome == "diamante" else TOPOLOGIAS[nome](parametro)

    erros = _erros_de_interpolacao(topologia, nome).mean()

    assert erros[f"{nome}[grid=2]"] > erros[f"{nome}[grid=11]"]


@pytest.mark.parametrize("nome", ["linha5", "grade4x4"])
@pytest.mark.parametrize("perda", [0.0, 0.3])
def test_sem_troca_de_politica_as_duas_grades_sao_exatas(nome, perda):
    # a mesma política é ótima para todo beta, então Q* é linear em beta
    erros = _erros_de_interpolacao(TOPOLOGIAS[nome](perda), nome).max()

    assert erros.max() < 1e-6


@pytest.mark.parametrize("beta,melhor", [(0.1, 2), (0.2, 2), (0.25, 1), (0.5, 1)])
def test_troca_de_politica_no_diamante(topologia_diamante, beta, melhor):
    # a troca acontece perto de beta = 0.218
    solucao = value_iteration(topologia_diamante, beta, 1e-12)

    valores = {a: solucao.q(Pair(0, 3), a) for a in (1, 2)}
    assert max(valores, key=valores.get) == melhor
