"""Benchmark models: scalar example, FitzHugh-Nagumo, tubular reactor."""

from .config import (ConfigError, FHNConfig, TubularConfig, config_from_mapping, load_mapping,
                     load_profile)
from .fhn import (build_fhn_fom, build_fhn_lifted_qb, fhn_initial_state, fhn_input,
                  fhn_stimulus, neumann_laplacian)
from .lift import consistent_lift_ic, tubular_aux
from .scalar import scalar_exact, scalar_lift_ic, scalar_qb_dae, scalar_qb_ode, scalar_quartic
from .tubular import (QBDAE_VARS, QUARTIC_VARS, DomainError, build_tubular_fom,
                      build_tubular_qbdae, build_tubular_quartic, reactor_operators,
                      tubular_initial_state, tubular_input)

__all__ = [
    "ConfigError", "FHNConfig", "TubularConfig", "config_from_mapping", "load_mapping",
    "load_profile",
    "build_fhn_fom", "build_fhn_lifted_qb", "fhn_initial_state", "fhn_input", "fhn_stimulus",
    "neumann_laplacian", "consistent_lift_ic", "tubular_aux", "scalar_exact",
    "scalar_lift_ic", "scalar_qb_dae", "scalar_qb_ode", "scalar_quartic", "QBDAE_VARS",
    "QUARTIC_VARS", "DomainError", "build_tubular_fom", "build_tubular_qbdae",
    "build_tubular_quartic", "reactor_operators", "tubular_initial_state", "tubular_input",
]
