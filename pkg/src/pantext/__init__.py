"""Two-stage quadrilateral text detector with FPA and GAU attention in the feature pyramid.

Forward-only, float64, deterministic. The heavy inner loops live in an
optional Cython extension; a pure-Python implementation is used when the
extension is not built (see :mod:`pantext._backend`).
"""

from pantext._backend import backend_name, set_backend
from pantext.errors import FormatError, GeometryError, PanTextError, ShapeError, WeightsError

__version__ = "0.1.0"

__all__ = [
    "FormatError",
    "GeometryError",
    "PanTextError",
    "ShapeError",
    "WeightsError",
    "backend_name",
    "set_backend",
]
