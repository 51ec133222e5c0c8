"""polywave: discontinuous Galerkin wave solver on polygonal meshes."""

__version__ = "0.1.0"
