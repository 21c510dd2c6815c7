"""Threshold and bifurcation analysis for an epidemic model with
age-structured waning immunity and reinfection.

The public surface re-exports the parameter containers, the threshold and
crossing analysis, equilibrium machinery, branch continuation, the
reduction-based cross-check of the curvature coefficient, and the
time-domain simulator.
"""

from .params import (
    ImmunityKernel,
    ModelParams,
    DiseaseFreeEquilibrium,
    BifSummary,
    validate_params,
)
from .quadrature import (
    QuadConfig,
    kernel_eval,
    moment_integrals,
    survival_integrals,
)
from .core import dfe, r0, r0_affine, beta_star, crossing_coupling, coeff_a, classify
from .equilibrium import (
    Equilibrium,
    residual,
    find_equilibria,
    verify_equilibrium,
    embed_dfe,
)
from .continuation import (
    Branch,
    BranchPoint,
    FoldPoint,
    trace_branch,
    detect_folds,
    label_stability,
)
from .reduction import (
    KernelEigenfunction,
    AdjointEigenfunction,
    eigenfunctions,
    apply_A,
    coeff_a_ls,
    transversality,
)
from .simulate import (
    SimConfig,
    SimState,
    dfe_state,
    state_from_equilibrium,
    state_from_totals,
    integrate,
    stability_probe,
    bistability_experiment,
)
from .config import RunConfig, load_config, serialize_config
from . import errors

__version__ = "0.1.0"
