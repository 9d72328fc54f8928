"""Sub-Riemannian (Carnot-Caratheodory) geodesic flows, reductions and first integrals."""

from ccflow.errors import CCFlowError
from ccflow.geometry import (
    AnnihilatorBasis,
    CCMetricTensor,
    DistributionFrame,
    RiemannianMetric,
    annihilator,
    cc_cometric,
    curve_energy,
    curve_length,
    horizontal_velocity,
)
from ccflow.hamiltonian import (
    FlowModel,
    PhaseState,
    Trajectory,
    drift_report,
    hamilton_rhs,
    integrate,
    involution_residual,
    poisson_bracket,
)
from ccflow.lie import LieAlgebraSpec, ad_star, bracket, e3, heis3, lie_poisson_structure, so3
from ccflow.poisson import PoissonStructure, canonical_structure, constant_structure
from ccflow.runner import MODELS, RunConfig, build_model, simulate

__version__ = "0.1.0"
