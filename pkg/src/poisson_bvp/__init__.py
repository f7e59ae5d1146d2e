"""Boundary-value problems ``X_0 = psi(X_1)`` for SDEs driven by a Poisson process."""

from .boundary import (check_backward_envelope, check_backward_existence, deterministic_fixed_point,
                       find_fixed_point, invert_jump_map, solve_backward_bvp, solve_forward_bvp)
from .chaos import (ChaosSeries, ChaosTerm, ConstKernel, FunctionKernel, IndicatorKernel,
                    build_case5_chaos, build_first_order_chaos, charlier, eval_chaos,
                    skorohod_integral_series)
from .errors import (CapabilityError, MultipleSolutions, NoFixedPoint, NumericalOverflow,
                     PoissonBVPError, PreconditionError)
from .fields import BoundaryMap, CoefficientField, TimeFunction
from .flow import (FlowResult, det_flow, det_flow_partials, flow_jump_derivative, flow_x_derivative,
                   forward_flow, verify_change_of_variables)
from .law import (LawEstimate, check_carlen_pardoux, check_condition_P, estimate_flow_law,
                  estimate_law, ks_stratified_test)
from .linear import (LinearCoefficients, LinearFactors, LinearPathSolution, solve_linear_backward,
                     solve_linear_bvp, solve_linear_forward)
from .montecarlo import flow_batch, sample_paths, solve_bvp_batch
from .paths import (EMPTY, JumpPath, Rng, count_jumps, insert_jump, remove_jump, sample_conditional,
                    sample_path)
from .problems import PRESETS, Problem, SpecError, load_spec, parse_spec, preset
from .reciprocal import (CIReport, ci_permutation_test, markov_chain_check_case5, reciprocal_case,
                         representation_check_case3, representation_check_case4)
from .sensitivity import dX0_dsj, dXt_dsj, fd_oracle, rel_err, weight_A, weight_B
from .skorohod import (CanonicalFunctional, LinearSkorohod, SkorohodSolver, phi_operator,
                       psi_operator, solve_skorohod_bvp)
from .trajectory import Trajectory

__version__ = "0.1.0"
