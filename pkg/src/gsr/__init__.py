"""Graph spectral regularization: structured hidden layers for small networks.

Penalizes a designated layer's activations with a graph Laplacian quadratic
form so that graph-neighbor units activate on similar inputs, learns feature
graphs from co-activations when no graph is known, and ships the analysis
and CLI tooling to reproduce the synthetic and MNIST experiments at desk
scale.
"""

from . import analyze, data, graph, graphlearn, models, nn, regularize
from .errors import GsrError

__all__ = [
    "analyze",
    "data",
    "graph",
    "graphlearn",
    "models",
    "nn",
    "regularize",
    "GsrError",
]

__version__ = "0.1.0"
