"""cavitylab: BP fixed points, Bethe free energies and exact oracles for pairwise factor models."""

from .bethe import (
    BetheBreakdown,
    PairBelief,
    PopDynEstimate,
    embed,
    interpolation_functionals,
    optimize_local_polytope,
    phi_local_polytope,
    phi_popdyn,
    phi_regular,
    second_order_check,
    stationarity_check,
)
from .bp import BPResult, bp_fixed_point_regular, bp_run_graph, bp_tree_boundary
from .errors import CavityError
from .exact import BoundaryCondition, ExactResult, exact_log_z, rc_log_z, transfer_matrix_rate, tree_log_z
from .factor_spec import (
    FactorSpec,
    load_spec,
    make_hardcore,
    make_ising,
    make_potts,
    make_raw,
    spec_from_config,
    validate_permissive,
)
from .graphs import (
    FiniteGraph,
    OffspringLaw,
    RootedTree,
    gen_random_regular,
    gen_tree,
    graph_from_edge_list,
    neighborhood,
)
from .phase import (
    PhaseReport,
    PottsRecursion,
    hardcore_lambda_c,
    hardcore_phi,
    ising_phase,
    potts_fixed_points,
    potts_free_energy_bounds,
    potts_llr_map,
    potts_region,
    potts_thresholds,
    tv_diagnostic,
)

__version__ = "0.1.0"
