"""Transport maps to mixture distributions for higher-order point sets.

Build mixtures of shifted/scaled copies of a simple reference density,
generate quadrature point sets (Halton, Gauss-Hermite sparse grids, MC),
push them through an explicit transport ODE, and measure quadrature
convergence, including a layered adaptive importance sampling pipeline.
"""

from ._backend import BACKEND
from .mixtures import (
    MixtureSpec,
    MomentSummary,
    ReferenceDensity,
    composition_sample,
    demo_three_component,
    mixture_log_density,
    mixture_log_density_many,
    mixture_moments,
    random_mixture,
    spec_from_dict,
    spec_to_dict,
)
from .pointsets import (
    SparseGridLevel,
    WeightedPointSet,
    gauss_hermite_rule,
    halton,
    halton_normal_set,
    inverse_erf,
    mc_points,
    read_pointset_csv,
    smolyak_grid,
    uniform_to_normal,
    write_pointset_csv,
)
from .transport import (
    TransportConfig,
    componentwise_transport,
    intermediate_log_density,
    transport_point,
    transport_set,
    velocity,
    velocity_many,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "MixtureSpec",
    "MomentSummary",
    "ReferenceDensity",
    "composition_sample",
    "demo_three_component",
    "mixture_log_density",
    "mixture_log_density_many",
    "mixture_moments",
    "random_mixture",
    "spec_from_dict",
    "spec_to_dict",
    "SparseGridLevel",
    "WeightedPointSet",
    "gauss_hermite_rule",
    "halton",
    "halton_normal_set",
    "inverse_erf",
    "mc_points",
    "read_pointset_csv",
    "smolyak_grid",
    "uniform_to_normal",
    "write_pointset_csv",
    "TransportConfig",
    "componentwise_transport",
    "intermediate_log_density",
    "transport_point",
    "transport_set",
    "velocity",
    "velocity_many",
    "__version__",
]
