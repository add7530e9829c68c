"""Sparse semidefinite programming by primal-dual interior-point iterations on a chordal extension."""

from .completion import (PartialMatrix, completed_apply, inverse_factor, legacy_apply,
                         legacy_factorize, legacy_inverse_factor)
from .dense import (dense_cholesky, inverse_lower_triangular, reversal_permutation,
                    sym_eigenvalues, triangular_solve)
from .errors import (MaxIterations, McsdpError, NoConvergence, NotChordal, NotPositiveDefinite,
                     ParseError, SdpaIndexError, StepTooSmall, WorkerPanic, ZeroDiagonal)
from .generators import (Graph, LatticeGraph, lattice_graph, maxclique_sdp, maxcut_sdp,
                         random_chordal_sdp)
from .ipm import Model, SolveResult, SolverParams, solve
from .problem import SdpProblem, SymMatrix
from .reference import solve_dense
from .report import CliqueStatsReport, TimingReport, emit_timing_report, scaling_bench
from .sdpa import read_sdpa_sparse, write_sdpa_sparse
from .sparse import SymPattern, aggregate_pattern, chordal_structure

__version__ = "0.1.0"
