"""Numerical Kobayashi–Royden metric bounds and visibility experiments near non-pseudoconvex boundary points."""

__version__ = "0.1.0"

from .config import DiscSearchConfig, DNTConfig, ExperimentConfig, GraphConfig
from .domains import builtin, load_domain
from .geometry import (
    DomainSpec,
    boundary_project,
    contains,
    inner_normal,
    levi_form,
    signed_distance,
    slice_domain,
    split_hn,
    tangent_levi_spectrum,
)
from .metric import (
    admissible_radius,
    curve_kappa_length,
    disc_search_provider,
    dnt_bound,
    exact_provider,
    fit_dnt_constant,
    kappa_exact_ball,
    kappa_exact_disc,
    kappa_exact_polydisc,
    kappa_lower,
    kappa_upper,
    kobayashi_distance_lower,
)
from .distance import kobayashi_distance_upper
from .curves import (
    embed_curve,
    horizontal_connect,
    integrate_tangential_curve,
    offset_curve,
    tangential_field,
)
from .visibility import (
    claim_check,
    comparability_check,
    fit_constants,
    geodesic_defect,
    lemma22_check,
    visibility_violation_experiment,
)
