"""Convex-cost many-to-one matching with a utility floor."""
from .errors import (CCMatchError, ConvergenceError, ConvexityError, InfeasibleError,
                     InstanceError, StructureError)
from .instance import (ConvexCostTable, CostSpec, GroupFamily, Instance, assignment_arrays,
                       classify_groups, cost_preset, load_counts, matching_cost,
                       matching_utility, validate_instance)
from .network import (FlowNetwork, build_disjoint, build_laminar, build_network,
                      flow_to_matching, matching_to_flow)
from .mcmf import (FlowState, Tie, min_cost_flow_fixed, min_cost_flow_free,
                   shortest_path_potentials_init)
from .solver import Bracket, Solution, Status, additive_bound, solve, verify_solution
from .generators import (brute_force_opt, gen_independent_set_reduction, gen_laminar,
                         gen_random)

__version__ = "0.1.0"
