"""Node embedding from graph samples: eigen neighbour functions and supervised
normalised Laplacian embeddings, fitted on a full graph or estimated from
snowball and random-walk samples through weighted estimating equations."""

from .errors import DataError, NumericalError
from .graph import Graph, Variant, karate_club

__all__ = ["DataError", "Graph", "NumericalError", "Variant", "karate_club"]
__version__ = "0.1.0"
