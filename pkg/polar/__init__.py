"""POLar (escala de escritorio) - etiquetado de roles semánticos en diálogos.

Grafo latente orientado al predicado: codificador de diálogo, inducción de
aristas HardKuma, poda con alpha-entmax, GCN y decodificación BIO.
"""

from .errors import PolarError

__version__ = "0.1.0"
