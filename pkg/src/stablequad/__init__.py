"""stablequad: inference of quadratic dynamical models that are stable by design.

The package learns models of the form dx/dt = A x + H (x ⊗ x) + B from
trajectory data, with the stability guarantee (local, global, or
attracting trapping region) encoded in the parameterization rather than
checked after the fact.
"""

from . import autograd, cli, odesim, optimize, quadtensor, reduction, stableparam
from .exceptions import (
    AllPruned,
    ConfigError,
    NonFinite,
    NonFiniteLoss,
    NonSPD,
    NotEnergyPreserving,
    NotStrictlyStable,
    RankTooLarge,
    ShapeMismatch,
    SolveFailed,
    StableQuadError,
    ZeroTruth,
)
from .odesim import BenchmarkConfig, Dataset, SimResult, default_config, generate_benchmark, rk4_step, simulate
from .optimize import FitConfig, FitReport, fit, sparse_fit
from .quadtensor import (
    QuadModel,
    colwise_kron,
    energy_preserving_residual,
    gen_energy_preserving_residual,
    kron_squared,
    matricize,
    symmetrize_H,
    to_skew_form,
    to_skew_form_general,
    translate,
)
from .reduction import PodBasis, blockdiag_basis, pod_basis, project, relative_l2, unproject
from .stableparam import (
    AtrParams,
    GasParams,
    LasParams,
    StabilityCertificate,
    assemble_atr,
    assemble_gas,
    assemble_las,
    certify,
    local_radius,
    trapping_radius,
)

__version__ = "0.1.0"
