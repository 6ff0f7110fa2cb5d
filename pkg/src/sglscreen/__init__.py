"""Sparse-Group Lasso solver with GAP safe screening rules."""

__version__ = "0.1.0"

from .exceptions import (DimensionError, GroupPartitionParseError,  # noqa: E402
                         IndexOutOfRangeError, ParseError, PartitionError,
                         RaggedRowsError)
from .problem import GroupPartition, Problem  # noqa: E402
from .penalty import (EpsilonParams, PenaltyParams, epsilon_decomposition,  # noqa: E402
                      epsilon_dual_norm, epsilon_norm, epsilon_norm_gradient,
                      group_soft_threshold, lambda_solver, sgl_dual_norm,
                      sgl_norm, soft_threshold)
from .screening import (ActiveSet, DualPoint, GapReport, SafeSphere,  # noqa: E402
                        SphereContext, SphereKind, apply_screening,
                        dual_point_from_residual, dual_value, feature_test,
                        gap_radius, group_test, lambda_max, primal_value,
                        reference_sphere)
from .solver import (PathConfig, PathResult, Rule, SolveResult,  # noqa: E402
                     SolverConfig, block_lipschitz, block_update, solve,
                     solve_path)
from .data import (SyntheticConfig, elastic_net_augment,  # noqa: E402
                   generate_synthetic, load_problem, save_problem)
