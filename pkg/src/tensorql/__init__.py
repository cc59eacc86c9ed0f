"""RDF graphs as sparse Boolean tensors, queried with tensor algebra."""

from .rdf_store import Graph, load_ntriples, load_ntriples_file, serialize
from .tensor_core import BoolMatrix, BoolTensor3, BoolVector

__version__ = "0.1.0"

__all__ = [
    "BoolMatrix", "BoolTensor3", "BoolVector", "Graph", "load_ntriples", "load_ntriples_file",
    "serialize", "__version__",
]
