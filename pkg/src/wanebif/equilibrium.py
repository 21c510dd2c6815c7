"""Endemic equilibria: reduction to one unknown, root finding, verification.

At a stationary point every compartment can be written in terms of the
force of infection lam alone:

    S       = Lambda / (beta_s lam + alpha + u)
    A, I    = k_A E, k_I E
    r(0)    = alpha S + c_gamma E        (inflow into the immune pool)
    r(tau)  = r(0) exp(-u tau - m B(tau)),  m = bar_beta lam
    R_total = r(0) Phi(m)

and E follows from the bookkeeping identity lam N = K_sum E.  What remains
is a single scalar balance for the exposed class, whose roots over lam in
(0, 1] are the endemic equilibria.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import FeasibilityError, ParamError, WanebifError
from .params import ImmunityKernel, ModelParams
from .quadrature import DEFAULT_QUAD, QuadConfig, survival_integrals

__all__ = [
    "Equilibrium",
    "residual",
    "find_equilibria",
    "verify_equilibrium",
    "embed_dfe",
]


@dataclass(frozen=True)
class Equilibrium:
    """One stationary state, including the immune-profile parameters."""

    S: float
    E: float
    A: float
    I: float
    lam: float        # force of infection
    r_at_zero: float  # immune density at immunity age 0
    R_total: float    # total immune pool
    N: float          # total population
    bar_beta: float   # reinfection coupling this state was computed at
    m: float          # reinfection pressure bar_beta * lam
    u: float
    kernel: ImmunityKernel

    def r_profile(self, tau):
        """Immune density over immunity age."""
        t = np.asarray(tau, dtype=float)
        out = self.r_at_zero * np.exp(-self.u * t - self.m * self.kernel.cumulative(t))
        return out if out.ndim else float(out)


def _phi_psi(p: ModelParams, bar_beta: float, lam, cfg: QuadConfig):
    m = np.atleast_1d(np.asarray(lam, dtype=float)) * bar_beta
    return survival_integrals(p.kernel, p.u, m, cfg)


def _residual_vec(lams: np.ndarray, p: ModelParams, bar_beta: float,
                  cfg: QuadConfig) -> np.ndarray:
    """Exposed-class balance over a batch of lam values; NaN where the
    bookkeeping identity has no admissible solution (E would be negative)."""
    phi, psi = _phi_psi(p, bar_beta, lams, cfg)
    S = p.Lambda / (p.beta_s * lams + p.alpha + p.u)
    den = p.K_sum - lams * (1.0 + p.k_A + p.k_I + p.c_gamma * phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        E = lams * S * (1.0 + p.alpha * phi) / den
    E = np.where(den > 0.0, E, np.nan)
    r0v = p.alpha * S + p.c_gamma * E
    return (p.beta_s * S + bar_beta * r0v * psi) * lams - (p.sigma + p.u) * E


def residual(lam: float, p: ModelParams, bar_beta: float,
             cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Scalar equilibrium balance at force of infection lam in (0, 1]."""
    if not (0.0 < lam <= 1.0):
        raise ParamError("lam out of range")
    out = _residual_vec(np.atleast_1d(float(lam)), p, bar_beta, cfg)[0]
    if np.isnan(out):
        raise FeasibilityError("lam beyond feasible range")
    return float(out)


def _assemble(lam: float, p: ModelParams, bar_beta: float,
              cfg: QuadConfig) -> Equilibrium:
    phi, _ = _phi_psi(p, bar_beta, lam, cfg)
    phi = float(phi[0])
    S = p.Lambda / (p.beta_s * lam + p.alpha + p.u)
    den = p.K_sum - lam * (1.0 + p.k_A + p.k_I + p.c_gamma * phi)
    if den <= 0.0:
        raise FeasibilityError("lam beyond feasible range")
    E = lam * S * (1.0 + p.alpha * phi) / den
    A = p.k_A * E
    I = p.k_I * E
    r0v = p.alpha * S + p.c_gamma * E
    R_total = r0v * phi
    return Equilibrium(
        S=S, E=E, A=A, I=I, lam=lam,
        r_at_zero=r0v, R_total=R_total,
        N=S + E + A + I + R_total,
        bar_beta=bar_beta, m=bar_beta * lam,
        u=p.u, kernel=p.kernel,
    )


def embed_dfe(p: ModelParams, cfg: QuadConfig = DEFAULT_QUAD) -> Equilibrium:
    """The infection-free state expressed as an Equilibrium record (lam = 0)."""
    phi, _ = _phi_psi(p, 0.0, 0.0, cfg)
    phi = float(phi[0])
    S = p.Lambda / (p.alpha + p.u)
    r0v = p.alpha * S
    R_total = r0v * phi
    return Equilibrium(
        S=S, E=0.0, A=0.0, I=0.0, lam=0.0,
        r_at_zero=r0v, R_total=R_total, N=S + R_total,
        bar_beta=p.bar_beta, m=0.0, u=p.u, kernel=p.kernel,
    )


def find_equilibria(p: ModelParams, bar_beta: float,
                    cfg: QuadConfig = DEFAULT_QUAD,
                    lam_min: float = 1e-12,
                    n_grid: int = 2000) -> List[Equilibrium]:
    """All endemic equilibria at the given coupling, ordered by lam.

    Scans a logarithmic grid over [lam_min, 1], brackets every sign change
    of the balance, and bisects each bracket to a relative width of 1e-12.
    Roots closer than 1e-9 in relative lam are treated as one.
    """
    if bar_beta < 0.0:
        raise ParamError("bar_beta must be nonnegative")
    grid = np.logspace(np.log10(lam_min), 0.0, n_grid)
    vals = _residual_vec(grid, p, bar_beta, cfg)

    roots: List[float] = []
    for i in range(len(grid) - 1):
        fa, fb = vals[i], vals[i + 1]
        if np.isnan(fa) or np.isnan(fb):
            continue
        if fa == 0.0:
            roots.append(float(grid[i]))
            continue
        if fa * fb < 0.0:
            roots.append(_bisect(grid[i], grid[i + 1], fa, fb, p, bar_beta, cfg))
    if not np.isnan(vals[-1]) and vals[-1] == 0.0:
        roots.append(float(grid[-1]))

    roots.sort()
    kept: List[float] = []
    for r in roots:
        if kept and (r - kept[-1]) / r < 1e-9:
            continue
        kept.append(r)

    out = [_assemble(r, p, bar_beta, cfg) for r in kept]
    for eq in out:
        worst = verify_equilibrium(eq, p, bar_beta, cfg)
        if worst >= 1e-8:
            raise WanebifError(
                f"equilibrium failed self-check at lam={eq.lam:.6g} "
                f"(violation {worst:.3g})"
            )
    return out


def _bisect(a: float, b: float, fa: float, fb: float, p: ModelParams,
            bar_beta: float, cfg: QuadConfig) -> float:
    for _ in range(200):
        mid = 0.5 * (a + b)
        if (b - a) < 1e-12 * mid:
            return mid
        fm = _residual_vec(np.atleast_1d(mid), p, bar_beta, cfg)[0]
        if fm == 0.0 or np.isnan(fm):
            return mid
        if fa * fm < 0.0:
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def verify_equilibrium(eq: Equilibrium, p: ModelParams, bar_beta: float,
                       cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Largest relative violation across every stationary balance.

    Substitutes the record into the four compartment balances, the immune
    boundary inflow, the immune-pool mass, the population identity, and the
    force-of-infection definition.  The transport balance along immunity age
    is checked at sampled ages using the exact derivative of the stored
    profile against the sink computed from the state's own force of
    infection, which catches a profile inconsistent with the compartments.
    """
    lam_state = (p.theta * eq.E + p.epsilon * eq.A + eq.I) / eq.N
    phi, psi = _phi_psi(p, bar_beta, eq.lam, cfg)
    phi, psi = float(phi[0]), float(psi[0])

    def rel(residual_value: float, *scales: float) -> float:
        s = max(*(abs(x) for x in scales), 1e-300)
        return abs(residual_value) / s

    rows = [
        rel(p.Lambda - p.beta_s * eq.S * eq.lam - (p.alpha + p.u) * eq.S,
            p.Lambda, p.beta_s * eq.S * eq.lam, (p.alpha + p.u) * eq.S),
        rel((p.beta_s * eq.S + bar_beta * eq.r_at_zero * psi) * eq.lam
            - (p.sigma + p.u) * eq.E,
            (p.sigma + p.u) * eq.E, p.beta_s * eq.S * eq.lam, (p.sigma + p.u) * 1.0),
        rel((1.0 - p.rho) * p.sigma * eq.E - (p.gamma_A + p.u) * eq.A,
            (1.0 - p.rho) * p.sigma * eq.E, (p.gamma_A + p.u) * eq.A, 1.0),
        rel(p.rho * p.sigma * eq.E - (p.gamma_I + p.mu + p.u) * eq.I,
            p.rho * p.sigma * eq.E, (p.gamma_I + p.mu + p.u) * eq.I, 1.0),
        rel(eq.r_at_zero - (p.alpha * eq.S + p.gamma_A * eq.A + p.gamma_I * eq.I),
            eq.r_at_zero, p.alpha * eq.S, 1.0),
        rel(eq.R_total - eq.r_at_zero * phi, eq.R_total, eq.r_at_zero * phi, 1.0),
        rel(eq.N - (eq.S + eq.E + eq.A + eq.I + eq.R_total), eq.N),
        rel(eq.lam * eq.N - (p.theta * eq.E + p.epsilon * eq.A + eq.I),
            eq.lam * eq.N, p.theta * eq.E, 1.0),
    ]

    # transport balance at sampled ages: derivative of the stored profile
    # vs the sink implied by the state's force of infection
    tc = cfg.resolve_tau_cut(p.kernel)
    ages = np.array([0.0, 0.25 * tc, 0.5 * tc, tc])
    beta = np.asarray(p.kernel.value(ages))
    rprof = np.asarray(eq.r_profile(ages))
    d_stored = -(p.u + eq.m * beta) * rprof
    d_state = -(p.u + bar_beta * lam_state * beta) * rprof
    scale = np.maximum(np.abs(d_stored).max(), (p.u * eq.r_at_zero))
    rows.append(float(np.max(np.abs(d_stored - d_state)) / max(scale, 1e-300)))

    return max(rows)
