"""P1 finite elements for u_xx + x u_xy + u_yy = f on the unit disc with u = 0 on the circle."""

from .expr import differentiate, evaluate, parse, to_text
from .fem import CoefficientField, build_fespace, solve
from .mesh import Mesh, build_disc_mesh, delaunay, mesh_size

__version__ = "0.1.0"

__all__ = [
    "parse",
    "evaluate",
    "differentiate",
    "to_text",
    "Mesh",
    "build_disc_mesh",
    "delaunay",
    "mesh_size",
    "CoefficientField",
    "build_fespace",
    "solve",
]
