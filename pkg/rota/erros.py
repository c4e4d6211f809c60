"""Exceções do pacote."""


class ErroRota(Exception):
    """Erro base do pacote."""


class ErroConfiguracao(ErroRota, ValueError):
    """Configuração ou argumento de construção inválido."""


class ErroTopologia(ErroConfiguracao):
    """Topologia inválida."""


class ErroPreferencia(ErroRota, ValueError):
    """Preferência fora do intervalo [0, 1]."""


class ErroContrato(ErroRota):
    """Violação de pré-condição de uma operação."""


class AcaoIlegal(ErroContrato, ValueError):
    """Ação que não corresponde a um vizinho do nó atual."""


class ErroConvergencia(ErroRota, RuntimeError):
    """Iteração de valor sem convergência dentro do limite de iterações."""


class PoliticaImpropria(ErroRota, RuntimeError):
    """Política que não alcança o estado terminal com probabilidade 1."""


class ViolacaoTeorica(ErroRota):
    """Falha de uma verificação da continuidade de Lipschitz ou do limite de interpolação."""
