"""Riesz transforms, Cauchy-Clifford operators and boundary regularity experiments."""

__version__ = "1.0.0"

# bumped whenever a module's numerical output changes
MODULE_VERSIONS = {
    "clifford": "1.0",
    "geometry": "1.1",
    "polynomials": "1.0",
    "spherical": "1.0",
    "kernels": "1.0",
    "quadrature": "1.0",
    "operators": "1.0",
    "identities": "1.0",
    "regularity": "1.1",
    "fileio": "1.0",
    "cli": "1.0",
}

from .clifford import Multivector, blade_mul, check_axioms, embed, mv_conj, mv_mul, mv_norm  # noqa: E402
from .geometry import (BoundaryMesh, make_bump_circle, make_ellipse, make_family,  # noqa: E402
                       make_sphere, make_square, probe_ladder)
from .kernels import PolyKernel, RieszKernel, SeriesKernel, jump_symbol  # noqa: E402
from .operators import (cauchy_domain, cauchy_pv, double_layer, generalized_pv,  # noqa: E402
                        grad_single_layer, nontangential_trace, recover_normal, riesz_pv,
                        riesz_truncated, single_layer)
from .polynomials import (HomogeneousPoly, gamma_coefficient, harmonic_decompose,  # noqa: E402
                          kernel_symbol, parse_poly, semmes_decompose)
from .regularity import (besov_seminorm, bmo_sharp, holder_seminorm,  # noqa: E402
                         refinement_study, second_difference_seminorm)
from .spherical import SphericalExpansion, expand_on_sphere, summability_report  # noqa: E402

__all__ = [
    "__version__", "MODULE_VERSIONS",
    "Multivector", "blade_mul", "check_axioms", "embed", "mv_conj", "mv_mul", "mv_norm",
    "BoundaryMesh", "make_bump_circle", "make_ellipse", "make_family", "make_sphere",
    "make_square", "probe_ladder",
    "PolyKernel", "RieszKernel", "SeriesKernel", "jump_symbol",
    "cauchy_domain", "cauchy_pv", "double_layer", "generalized_pv", "grad_single_layer",
    "nontangential_trace", "recover_normal", "riesz_pv", "riesz_truncated", "single_layer",
    "HomogeneousPoly", "gamma_coefficient", "harmonic_decompose", "kernel_symbol",
    "parse_poly", "semmes_decompose",
    "besov_seminorm", "bmo_sharp", "holder_seminorm", "refinement_study",
    "second_difference_seminorm",
    "SphericalExpansion", "expand_on_sphere", "summability_report",
]
