"""Configurações gerais do pacote."""

from pydantic import BaseModel


class ConfiguracoesRota(BaseModel):
    """Valores padrão compartilhados pelos módulos do pacote."""

    p_drop_padrao: float = 0.5
    fator_limite_passos: int = 4
    tolerancia_teoria: float = 1e-10
    tolerancia_padrao: float = 1e-6
    max_iteracoes_oraculo: int = 200_000
    tolerancia_empate: float = 1e-9
    max_politicas_enumeradas: int = 16
    inflacao_horizonte: float = 1.1
    bytes_dados: int = 133
    bytes_overhead: int = 30
    bytes_por_valor: int = 8
    variavel_semente: str = "DPQ_SEED"
    formato_log: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"


config = ConfiguracoesRota()
