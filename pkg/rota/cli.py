"""Interface de linha de comando."""

import logging
import sys

from pathlib import Path
from typing import List
from typing import Optional
from typing import Sequence

import click

from pydantic import ValidationError

from rota.config import config
from rota.erros import ErroConfiguracao
from rota.erros import ErroRota
from rota.erros import ViolacaoTeorica
from rota.harness.api import harness
from rota.harness.config import carregar_config


logger = logging.getLogger(__name__)

VERIFICACOES_OBRIGATORIAS = ("lipschitz", "gip_bound")


def _janelas(ctx: click.Context, param: click.Parameter, valor: Optional[str]) -> Optional[List[int]]:
    if valor is None:
        return None
    try:
        janelas = [int(parte) for parte in valor.split(",") if parte.strip()]
    except ValueError:
        raise click.BadParameter(f"{valor!r} não é uma lista de inteiros separados por vírgula")
    if not janelas or any(j <= 0 for j in janelas):
        raise click.BadParameter("as janelas devem ser inteiros positivos")
    return janelas


opcao_config = click.option(
    "--config",
    "caminho_config",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Arquivo TOML do experimento.",
)
opcao_saida = click.option(
    "--out", "saida", required=True, type=click.Path(file_okay=False, path_type=Path), help="Diretório de saída."
)
opcao_semente = click.option("--seed", "semente", type=click.IntRange(min=0), default=None, help="Semente.")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Mensagens de depuração.")
def cli(verbose: bool) -> None:
    """Roteamento multiobjetivo com preferências dinâmicas."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=config.formato_log,
        stream=sys.stderr,
        force=True,
    )


@cli.command("run")
@opcao_config
@opcao_saida
@opcao_semente
def executar(caminho_config: Path, saida: Path, semente: Optional[int]) -> int:
    """Treina e avalia o agente da configuração."""
    harness.executar(carregar_config(caminho_config), saida, semente)
    return 0


@cli.command("oracle-check")
@opcao_config
@opcao_saida
def oracle_check(caminho_config: Path, saida: Path) -> int:
    """Verifica a continuidade de Lipschitz e o limite de interpolação com a solução exata."""
    tabela = harness.verificar_teoria(carregar_config(caminho_config), saida, caminho_config.stem)
    falhas = tabela[tabela["check"].isin(VERIFICACOES_OBRIGATORIAS) & ~tabela["holds"]]
    if len(falhas):
        for linha in falhas.itertuples():
            logger.warning(
                "Violação %s em %s, beta=%s: %.6g > %.6g",
                linha.check,
                linha.topology,
                linha.beta,
                linha.lhs,
                linha.rhs,
            )
        raise ViolacaoTeorica(f"{len(falhas)} verificações teóricas falharam")
    return 0


@cli.command()
@opcao_config
@click.option(
    "--windows",
    "janelas",
    callback=_janelas,
    default=None,
    help="Janelas separadas por vírgula, ex.: 50,200,500.",
)
@opcao_saida
@opcao_semente
def sensitivity(caminho_config: Path, janelas: Optional[List[int]], saida: Path, semente: Optional[int]) -> int:
    """Compara os métodos por janelas de episódios."""
    harness.sensibilidade(carregar_config(caminho_config), janelas, saida, semente)
    return 0


@cli.command("dump-q")
@opcao_config
@click.option(
    "--out", "saida", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Arquivo CSV."
)
@opcao_semente
def dump_q(caminho_config: Path, saida: Path, semente: Optional[int]) -> int:
    """Treina o agente e grava as tabelas Q."""
    harness.exportar_q(carregar_config(caminho_config), saida, semente)
    return 0


@cli.command()
@click.argument("caminhos", nargs=-1, required=True, type=click.Path(dir_okay=False, path_type=Path))
@opcao_saida
@click.option("--jobs", type=click.IntRange(min=1), default=1, help="Processos em paralelo.")
@opcao_semente
def compare(caminhos: Sequence[Path], saida: Path, jobs: int, semente: Optional[int]) -> int:
    """Executa várias configurações e resume os totais acumulados."""
    harness.comparar(list(caminhos), saida, jobs, semente)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Ponto de entrada da linha de comando.

    Parameters
    ----------
    argv : Optional[Sequence[str]]
        Argumentos; por padrão, os do processo.

    Returns
    -------
    int
        0 em caso de sucesso, 2 quando uma verificação teórica falha e 1 para
        os demais erros.
    """
    argumentos = list(sys.argv[1:] if argv is None else argv)
    try:
        resultado = cli.main(args=argumentos, prog_name="rota", standalone_mode=False)
    except click.ClickException as erro:
        erro.show(file=sys.stderr)
        return 1
    except click.Abort:
        click.echo("Interrompido.", err=True)
        return 1
    except (ErroConfiguracao, ValidationError) as erro:
        click.echo(f"Configuração inválida: {erro}", err=True)
        return 1
    except ViolacaoTeorica as erro:
        click.echo(str(erro), err=True)
        return 2
    except ErroRota as erro:
        click.echo(f"Erro: {erro}", err=True)
        return 1
    return resultado if isinstance(resultado, int) else 0


def run() -> None:
    """Executa a linha de comando e encerra o processo com o código de saída."""
    sys.exit(main())
