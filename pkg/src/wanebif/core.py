"""Threshold quantities: infection-free state, reproduction number, crossing.

The basic reproduction number of this model is affine in the reinfection
coupling bar_beta, because reinfection enters the next-generation balance
only through the kernel-weighted immune reservoir of the infection-free
state.  That makes the critical coupling (where the endemic branch meets
the trivial one) a one-line inversion, and the curvature coefficient of
the emerging branch decides whether the crossing is backward (a subcritical
endemic fold exists) or forward.
"""

from __future__ import annotations

from typing import Optional, Tuple

from .errors import ThresholdError
from .params import BifSummary, DiseaseFreeEquilibrium, ModelParams
from .quadrature import DEFAULT_QUAD, QuadConfig, moment_integrals

__all__ = [
    "dfe",
    "r0",
    "r0_affine",
    "beta_star",
    "crossing_coupling",
    "coeff_a",
    "classify",
]


def dfe(p: ModelParams) -> DiseaseFreeEquilibrium:
    """Infection-free stationary state.

    Susceptibles balance recruitment against vaccination and mortality;
    the immune profile is the vaccination inflow alpha*S0 thinned by
    mortality.  With alpha = 0 the immune pool is empty and S0 = Lambda/u.
    """
    S0 = p.Lambda / (p.alpha + p.u)
    return DiseaseFreeEquilibrium(
        S0=S0,
        r0_at_zero=p.alpha * S0,
        N0=p.Lambda / p.u,
        u=p.u,
    )


def r0_affine(p: ModelParams, cfg: QuadConfig = DEFAULT_QUAD) -> Tuple[float, float]:
    """(intercept, slope) of bar_beta -> R0.

    intercept is the reproduction number without any reinfection; slope is
    the marginal contribution of the kernel-weighted immune reservoir.
    """
    eq0 = dfe(p)
    j0, _ = moment_integrals(p.kernel, p.u, cfg)
    scale = p.K_sum / ((p.sigma + p.u) * eq0.N0)
    return p.beta_s * eq0.S0 * scale, j0 * eq0.r0_at_zero * scale


def r0(p: ModelParams, bar_beta: Optional[float] = None,
       cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Basic reproduction number at the given (default: configured) coupling."""
    intercept, slope = r0_affine(p, cfg)
    bb = p.bar_beta if bar_beta is None else bar_beta
    return intercept + slope * bb


def crossing_coupling(p: ModelParams, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Signed coupling at which R0(bar_beta) = 1.

    Negative when the reinfection-free configuration is already
    supercritical; callers that require a physical (nonnegative) coupling
    should use beta_star, which raises in that situation instead.
    """
    intercept, slope = r0_affine(p, cfg)
    if slope <= 0.0:
        raise ThresholdError("crossing undefined: R0 does not depend on bar_beta")
    return (1.0 - intercept) / slope


def beta_star(p: ModelParams, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Critical reinfection coupling, defined only while R0(0) < 1."""
    intercept, slope = r0_affine(p, cfg)
    if intercept >= 1.0:
        raise ThresholdError("R0 >= 1 already at bar_beta = 0")
    if slope <= 0.0:
        raise ThresholdError("crossing undefined: R0 does not depend on bar_beta")
    return (1.0 - intercept) / slope


def coeff_a(p: ModelParams, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Curvature coefficient of the endemic branch at the crossing.

    Assembled from the null direction of the linearisation at the
    infection-free state, evaluated at the crossing coupling: positive
    means the branch bends into the subcritical region (backward, a
    bistable window below threshold), negative means forward.
    """
    eq0 = dfe(p)
    bbc = crossing_coupling(p, cfg)
    j0, j1 = moment_integrals(p.kernel, p.u, cfg)
    K = p.K_sum

    # null direction, normalised to a unit exposed component:
    # susceptible dip, asymptomatic/symptomatic ratios, immune profile
    # x5(tau) = exp(-u tau) (x50 - c5 B(tau))
    x1 = -p.beta_s * eq0.S0 * K / ((p.alpha + p.u) * eq0.N0)
    x3 = p.k_A
    x4 = p.k_I
    x50 = p.alpha * x1 + p.gamma_A * x3 + p.gamma_I * x4
    c5 = bbc * K * eq0.r0_at_zero / eq0.N0

    int_x5 = x50 / p.u - c5 * j0 / p.u          # total immune perturbation mass
    w_x5 = x50 * j0 - c5 * j1                   # kernel-weighted perturbation
    sigma_tot = x1 + 1.0 + x3 + x4 + int_x5     # population perturbation

    return -(2.0 / eq0.N0) * (
        (p.sigma + p.u) * sigma_tot - K * bbc * w_x5 - K * p.beta_s * x1
    )


def classify(p: ModelParams, cfg: QuadConfig = DEFAULT_QUAD,
             tol_a: float = 1e-12) -> BifSummary:
    """Summary of the crossing: R0 at the configured coupling, the signed
    crossing coupling, the curvature coefficient, and its sign class."""
    a = coeff_a(p, cfg)
    if a > tol_a:
        crit = "Backward"
    elif a < -tol_a:
        crit = "Forward"
    else:
        crit = "Degenerate"
    return BifSummary(
        r0_value=r0(p, cfg=cfg),
        beta_star=crossing_coupling(p, cfg),
        a_coeff=a,
        criticality=crit,
    )
