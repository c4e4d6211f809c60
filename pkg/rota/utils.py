"""Funções de utilidade para sementes, escrita de arquivos e comparação de tabelas."""

import logging
import os
import tempfile

from pathlib import Path
from typing import List
from typing import Optional

import numpy as np
import pandas as pd

from rota.config import config
from rota.erros import ErroConfiguracao
from rota.erros import ErroPreferencia


logger = logging.getLogger(__name__)


def validar_beta(beta: float) -> float:
    """
    Garante que a preferência esteja em [0, 1].

    Parameters
    ----------
    beta : float
        Preferência pelo objetivo de energia.

    Returns
    -------
    float
        A própria preferência, convertida para float.
    """
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise ErroPreferencia(f"beta={beta} fora do intervalo [0, 1]")
    return beta


def resolver_semente(semente_cli: Optional[int], semente_config: int) -> int:
    """
    Define a semente de um experimento.

    A ordem de prioridade é: argumento de linha de comando, variável de ambiente
    `DPQ_SEED` e, por fim, a semente do arquivo de configuração.

    Parameters
    ----------
    semente_cli : Optional[int]
        Semente informada na linha de comando.

    semente_config : int
        Semente do arquivo de configuração.

    Returns
    -------
    int
        Semente efetiva.
    """
    if semente_cli is not None:
        return int(semente_cli)

    valor_ambiente = os.environ.get(config.variavel_semente)
    if valor_ambiente:
        try:
            return int(valor_ambiente)
        except ValueError:
            raise ErroConfiguracao(
                f"{config.variavel_semente}={valor_ambiente!r} não é um inteiro"
            )
    return int(semente_config)


def criar_geradores(semente: int, quantidade: int) -> List[np.random.Generator]:
    """
    Cria geradores independentes a partir de uma única semente.

    Parameters
    ----------
    semente : int
        Semente raiz.

    quantidade : int
        Número de fluxos independentes.

    Returns
    -------
    List[np.random.Generator]
        Geradores derivados de `SeedSequence(semente).spawn(quantidade)`.
    """
    sequencia = np.random.SeedSequence(semente)
    return [np.random.default_rng(filho) for filho in sequencia.spawn(quantidade)]


def escrever_texto_atomico(texto: str, caminho: Path) -> Path:
    """
    Grava um arquivo de texto de forma atômica (arquivo temporário + renomeação).

    Parameters
    ----------
    texto : str
        Conteúdo do arquivo.

    caminho : Path
        Caminho de destino.

    Returns
    -------
    Path
        Caminho gravado.
    """
    caminho = Path(caminho)
    caminho.parent.mkdir(parents=True, exist_ok=True)
    descritor, temporario = tempfile.mkstemp(
        dir=caminho.parent, prefix=f".{caminho.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(descritor, "w", encoding="utf-8", newline="") as f:
            f.write(texto)
        os.replace(temporario, caminho)
    except BaseException:
        Path(temporario).unlink(missing_ok=True)
        raise

    logger.info("Arquivo %s gravado", caminho)
    return caminho


def escrever_csv_atomico(df: pd.DataFrame, caminho: Path) -> Path:
    """
    Grava um dataframe em CSV de forma atômica.

    Parameters
    ----------
    df : pd.DataFrame
        Dados a serem gravados. O index não é gravado.

    caminho : Path
        Caminho de destino.

    Returns
    -------
    Path
        Caminho gravado.
    """
    return escrever_texto_atomico(df.to_csv(index=False, lineterminator="\n"), caminho)


def norma_sup(a: np.ndarray, b: np.ndarray, mascara: np.ndarray) -> float:
    """
    Distância na norma do supremo entre duas tabelas, restrita às entradas válidas.

    Parameters
    ----------
    a, b : np.ndarray
        Tabelas de mesmo formato.

    mascara : np.ndarray
        Máscara booleana que seleciona as entradas válidas, com broadcast para o formato das tabelas.

    Returns
    -------
    float
        max |a - b| sobre as entradas válidas (0 quando não há entradas).
    """
    mascara = np.broadcast_to(mascara, a.shape)
    if not mascara.any():
        return 0.0
    return float(np.max(np.abs(a[mascara] - b[mascara])))
