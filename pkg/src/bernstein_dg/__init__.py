"""Bernstein-basis kernels on simplices, fast mass inversion and a DG
solver for 2-D linear acoustics."""

__version__ = "0.1.0"

from .counters import OpCounter
from .mass import StructureError
from .mesh import SimplexMesh, build_structured_mesh
from .dg import AcousticDG, AcousticState
from .report import ExperimentReport

__all__ = [
    "__version__",
    "OpCounter",
    "StructureError",
    "SimplexMesh",
    "build_structured_mesh",
    "AcousticDG",
    "AcousticState",
    "ExperimentReport",
]
