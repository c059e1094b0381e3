"""Desk-scale numerics for pseudoholomorphic strips with mixed Lagrangian boundary.

Modules: ``geometry`` (surface profiles, singular points, winding degree,
flattening), ``contact`` (λ̂, Reeb field, Ĵ, Ω), ``exact`` (closed-form
solutions, residuals, energies), ``spectral`` (asymptotic operator),
``decay`` (weighted norms, α(s), convexity, asymptotic fits), ``solver``
(Gauss-Newton) and ``cli``.
"""

from .errors import StriplabError
from .geometry import ChartPoint, SurfaceProfile
from .grid import FieldGrid

__all__ = ["ChartPoint", "FieldGrid", "StriplabError", "SurfaceProfile"]
__version__ = "0.1.0"
