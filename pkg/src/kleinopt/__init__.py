"""Derivative-free optimization on matrix manifolds presented as Klein geometries."""

from .errors import (ConfigError, DomainError, GeometryError, InjectivityRadiusError,
                     LogUnavailableError)
from .manifolds import (GEOMETRIES, SE, SL, SO, SPD, AlgebraBasis, GLPlus, Grassmann,
                        KleinGeometry, Sphere, Stiefel, Translation, Unipotent, make_geometry,
                        sl_sample)
from .randgen import GeneratorConfig, random_group_element, random_source, random_tangent
from .solvers import (CoordinateSearch, Objective, SolverConfig, Trace, TraceRecord, direct_search,
                      forcing, probabilistic_descent_algebra, probabilistic_descent_group)
from .seminmf import SemiNmfConfig, fit, karcher_mean, nnls, spread

__version__ = "0.1.0"
