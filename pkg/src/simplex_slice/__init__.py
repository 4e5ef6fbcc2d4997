"""Central sections of the regular simplex and related slicing estimates."""

__version__ = "0.1.0"

from .bounds import (classify_case, fourier_bound, global_linear_bound,
                     logconcavity_bound, psi, search_extremiser,
                     stability_deficit_bound, verify_direction, webb_bound)
from .core import (BoundReport, CaseTrace, Direction, Polytope, Subspace,
                   delta, extremiser, normalize_direction, subspace_distance)
from .expdensity import (density_at_zero, density_at_zero_montecarlo,
                         density_at_zero_quadrature)
from .isotropy import (busemann_N, grunbaum_ratio, hensley_interval,
                       lipschitz_experiment, polytope_moments, principal_bases,
                       subspace_chain, to_isotropic)
from .slicer import (halfspace_clip, polytope_section, simplex_section,
                     standard_simplex, volume)

__all__ = [
    "BoundReport", "CaseTrace", "Direction", "Polytope", "Subspace",
    "busemann_N", "classify_case", "delta", "density_at_zero",
    "density_at_zero_montecarlo", "density_at_zero_quadrature", "extremiser",
    "fourier_bound", "global_linear_bound", "grunbaum_ratio", "halfspace_clip",
    "hensley_interval", "lipschitz_experiment", "logconcavity_bound",
    "normalize_direction", "polytope_moments", "polytope_section",
    "principal_bases", "psi", "search_extremiser", "simplex_section",
    "stability_deficit_bound", "standard_simplex", "subspace_chain",
    "subspace_distance", "to_isotropic", "verify_direction", "volume",
    "webb_bound",
]
