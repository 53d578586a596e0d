"""Snapshots, POD bases, structured Galerkin projection and DEIM."""

from .deim import (DEIMOperator, ReducedGeneralSystem, build_pod_deim_rom, deim_build,
                   deim_indices)
from .pod import (BlockBasis, PODBasis, SnapshotSet, collect_snapshots, compute_pod_basis,
                  nonlinear_snapshots, numerical_rank)
from .project import (DEFAULT_BUDGET, ReducedQB, ReducedQBDAE, ReducedQuartic, SubstitutedODE,
                      precompute_substituted_ode, project_linear, project_qb, project_qbdae,
                      project_quartic, project_tensor)

__all__ = [
    "DEIMOperator", "ReducedGeneralSystem", "build_pod_deim_rom", "deim_build", "deim_indices",
    "BlockBasis", "PODBasis", "SnapshotSet", "collect_snapshots", "compute_pod_basis",
    "nonlinear_snapshots", "numerical_rank", "DEFAULT_BUDGET", "ReducedQB", "ReducedQBDAE",
    "ReducedQuartic", "SubstitutedODE", "precompute_substituted_ode", "project_linear",
    "project_qb", "project_qbdae", "project_quartic", "project_tensor",
]
