"""Excepciones del paquete iid"""


class IIDError(Exception):
    """Error base de la librería"""


class InvalidParameterError(IIDError, ValueError):
    """Parámetro fuera de su rango válido"""


class InvalidInputError(IIDError, ValueError):
    """Entrada con forma, dimensiones o valores inválidos"""


class ConfigError(InvalidParameterError):
    """Configuración de pipeline inválida (clave desconocida, tipo incorrecto)"""


class LoadError(IIDError, OSError):
    """No se pudo cargar un archivo del disco"""


class ParseError(IIDError, ValueError):
    """Documento mal formado; incluye la ubicación del problema"""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{message} (en {location})"
        super().__init__(message)


class GenerationError(IIDError):
    """El generador sintético no pudo cumplir sus restricciones"""
