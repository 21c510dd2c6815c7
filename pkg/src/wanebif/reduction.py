"""Crossing analysis via the null space of the linearised generator.

At the critical coupling the linearisation of the model around the
infection-free state has a one-dimensional kernel.  This module builds the
kernel direction (a closed-form compartment dip plus an immune-age profile),
the matching adjoint direction, the action of the linearised generator on
arbitrary perturbations (for cross-checks), and the quadratic forms whose
pairing with the adjoint direction yields the branch curvature coefficient.
That pairing is a second, structurally independent route to the same number
as `core.coeff_a`, which assembles the coefficient from precomputed kernel
moments instead of integrating profiles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .core import crossing_coupling, dfe
from .errors import GridError
from .params import ModelParams
from .quadrature import DEFAULT_QUAD, QuadConfig, moment_integrals, panel_arrays

__all__ = [
    "KernelEigenfunction",
    "AdjointEigenfunction",
    "Direction",
    "eigenfunctions",
    "apply_A",
    "H1",
    "H2",
    "H3",
    "pair_with_adjoint",
    "coeff_a_ls",
    "transversality",
]


@dataclass(frozen=True)
class Direction:
    """A perturbation of the state: four scalars plus an immune-age profile.

    The profile is a callable on [0, inf).  Because profiles here decay on
    the slow demographic scale, integrals over [tau_cut, inf) carry real
    mass; the two tail fields hold those contributions in closed form:
    `tail_mass` = int_{tau_cut}^inf x5, `tail_kernel_mass` = the same
    integral weighted by the kernel.
    """

    x1: float
    x2: float
    x3: float
    x4: float
    profile: Callable[[np.ndarray], np.ndarray]
    tail_mass: float = 0.0
    tail_kernel_mass: float = 0.0


@dataclass(frozen=True)
class KernelEigenfunction:
    """Null direction at the crossing, normalised to a unit exposed component.

    The immune-age component is x5(tau) = exp(-u tau) (x5_at_zero - c5 B(tau)):
    boundary inflow thinned by mortality, minus the reinfection drain that the
    unit force of infection applies to the baseline immune profile.
    """

    x1: float
    x2: float  # = 1 by normalisation
    x3: float
    x4: float
    x5_at_zero: float
    c5: float
    u: float
    kernel: "object"

    def x5(self, tau):
        t = np.asarray(tau, dtype=float)
        out = np.exp(-self.u * t) * (self.x5_at_zero - self.c5 * self.kernel.cumulative(t))
        return out if out.ndim else float(out)

    def direction(self, cfg: QuadConfig = DEFAULT_QUAD) -> Direction:
        pa = panel_arrays(self.kernel, cfg)
        decay = np.exp(-self.u * pa.tau_cut)
        head = self.x5_at_zero - self.c5 * pa.B_cut
        # beyond tau_cut: B is linear with slope beta_cut, so both tails close
        tail_mass = decay * (head / self.u - self.c5 * pa.beta_cut / self.u**2)
        return Direction(
            x1=self.x1, x2=self.x2, x3=self.x3, x4=self.x4,
            profile=self.x5,
            tail_mass=float(tail_mass),
            tail_kernel_mass=float(pa.beta_cut * tail_mass),
        )


@dataclass(frozen=True)
class AdjointEigenfunction:
    """Null direction of the adjoint, normalised to a unit exposed component.

    The immune-age component vanishes identically: at the crossing the
    adjoint balance closes through the scalar compartments alone.
    """

    xi1: float  # = 0
    xi2: float  # = 1
    xi3: float
    xi4: float

    def xi5(self, tau):
        t = np.asarray(tau, dtype=float)
        out = np.zeros_like(t)
        return out if out.ndim else 0.0


def eigenfunctions(p: ModelParams, cfg: QuadConfig = DEFAULT_QUAD
                   ) -> Tuple[KernelEigenfunction, AdjointEigenfunction]:
    """Kernel and adjoint directions of the linearisation at the crossing."""
    eq0 = dfe(p)
    bbc = crossing_coupling(p, cfg)
    K = p.K_sum

    x1 = -p.beta_s * eq0.S0 * K / ((p.alpha + p.u) * eq0.N0)
    x3 = p.k_A
    x4 = p.k_I
    x50 = p.alpha * x1 + p.gamma_A * x3 + p.gamma_I * x4
    c5 = bbc * K * eq0.r0_at_zero / eq0.N0
    xhat = KernelEigenfunction(
        x1=x1, x2=1.0, x3=x3, x4=x4,
        x5_at_zero=x50, c5=c5, u=p.u, kernel=p.kernel,
    )

    # adjoint weights: infectivity credit of each compartment, scaled so the
    # exposed balance closes at the crossing
    crossing_rate = (p.sigma + p.u) / K
    xi = AdjointEigenfunction(
        xi1=0.0,
        xi2=1.0,
        xi3=p.epsilon * crossing_rate / (p.gamma_A + p.u),
        xi4=crossing_rate / (p.gamma_I + p.mu + p.u),
    )
    return xhat, xi


def apply_A(x_scalars: Tuple[float, float, float, float], x5: np.ndarray,
            p: ModelParams, grid: np.ndarray,
            cfg: QuadConfig = DEFAULT_QUAD):
    """Action of the linearised generator at the crossing on a perturbation.

    `x5` holds the immune-age component sampled on `grid` (strictly
    increasing ages).  Returns four scalars and the age row sampled on the
    same grid.  The age derivative is a second-order finite difference, so
    the grid must resolve the profile's curvature; a curvature estimate
    beyond tolerance raises GridError rather than returning garbage.
    """
    x1, x2, x3, x4 = (float(v) for v in x_scalars)
    grid = np.asarray(grid, dtype=float)
    x5 = np.asarray(x5, dtype=float)
    if grid.ndim != 1 or grid.size < 5 or np.any(np.diff(grid) <= 0.0):
        raise GridError("age grid must be strictly increasing with at least 5 nodes")
    if x5.shape != grid.shape:
        raise GridError("profile values must match the age grid")

    eq0 = dfe(p)
    bbc = crossing_coupling(p, cfg)
    j0, _ = moment_integrals(p.kernel, p.u, cfg)
    lam_hat = (p.theta * x2 + p.epsilon * x3 + x4) / eq0.N0

    dx5 = np.gradient(x5, grid, edge_order=2)
    d2x5 = np.gradient(dx5, grid, edge_order=2)
    h = np.max(np.diff(grid))
    scale = max(np.max(np.abs(x5)), 1e-300)
    if np.max(np.abs(d2x5)) * h * h / 6.0 > 1e-6 * scale:
        raise GridError("grid too coarse (curvature estimate exceeds tolerance)")

    beta = np.asarray(p.kernel.value(grid))
    r0_prof = eq0.r0_at_zero * np.exp(-p.u * grid)

    row1 = -(p.alpha + p.u) * x1 - p.beta_s * eq0.S0 * lam_hat
    row2 = (p.beta_s * eq0.S0 + bbc * j0 * eq0.r0_at_zero) * lam_hat - (p.sigma + p.u) * x2
    row3 = (1.0 - p.rho) * p.sigma * x2 - (p.gamma_A + p.u) * x3
    row4 = p.rho * p.sigma * x2 - (p.gamma_I + p.mu + p.u) * x4
    row5 = -dx5 - p.u * x5 - bbc * beta * r0_prof * lam_hat
    return row1, row2, row3, row4, row5


def _lam_hat(x: Direction, N0: float, theta: float, epsilon: float) -> float:
    return (theta * x.x2 + epsilon * x.x3 + x.x4) / N0


def _mass_and_kernel_mass(x: Direction, pa) -> Tuple[float, float]:
    vals = np.asarray(x.profile(pa.tau))
    return (
        float(np.dot(pa.w, vals)) + x.tail_mass,
        float(np.dot(pa.w, pa.beta * vals)) + x.tail_kernel_mass,
    )


def _sigma_total(x: Direction, pa) -> float:
    mass, _ = _mass_and_kernel_mass(x, pa)
    return x.x1 + x.x2 + x.x3 + x.x4 + mass


def H1(x: Direction, y: Direction, p: ModelParams,
       cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Quadratic form of the susceptible balance at the crossing."""
    eq0 = dfe(p)
    pa = panel_arrays(p.kernel, cfg)
    lx, ly = _lam_hat(x, eq0.N0, p.theta, p.epsilon), _lam_hat(y, eq0.N0, p.theta, p.epsilon)
    sx, sy = _sigma_total(x, pa), _sigma_total(y, pa)
    return -p.beta_s * (x.x1 * ly + y.x1 * lx - eq0.S0 * (lx * sy + ly * sx) / eq0.N0)


def H2(x: Direction, y: Direction, p: ModelParams,
       cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Quadratic form of the exposed balance at the crossing.

    Contains the negative of the susceptible form (infections lost there
    arrive here) plus the reinfection terms: perturbed immune profiles hit
    by the perturbed force of infection, and the crowding correction from
    the perturbed population size.
    """
    eq0 = dfe(p)
    bbc = crossing_coupling(p, cfg)
    j0, _ = moment_integrals(p.kernel, p.u, cfg)
    pa = panel_arrays(p.kernel, cfg)
    lx, ly = _lam_hat(x, eq0.N0, p.theta, p.epsilon), _lam_hat(y, eq0.N0, p.theta, p.epsilon)
    sx, sy = _sigma_total(x, pa), _sigma_total(y, pa)
    _, wx = _mass_and_kernel_mass(x, pa)
    _, wy = _mass_and_kernel_mass(y, pa)
    reinf = bbc * (lx * wy + ly * wx
                   - (lx * sy + ly * sx) * j0 * eq0.r0_at_zero / eq0.N0)
    return -H1(x, y, p, cfg) + reinf


def H3(x: Direction, y: Direction, p: ModelParams,
       cfg: QuadConfig = DEFAULT_QUAD) -> Callable[[np.ndarray], np.ndarray]:
    """Quadratic form of the immune-age transport row (a function of age)."""
    eq0 = dfe(p)
    bbc = crossing_coupling(p, cfg)
    pa = panel_arrays(p.kernel, cfg)
    lx, ly = _lam_hat(x, eq0.N0, p.theta, p.epsilon), _lam_hat(y, eq0.N0, p.theta, p.epsilon)
    sx, sy = _sigma_total(x, pa), _sigma_total(y, pa)

    def form(tau):
        t = np.asarray(tau, dtype=float)
        beta = np.asarray(p.kernel.value(t))
        x5t = np.asarray(x.profile(t))
        y5t = np.asarray(y.profile(t))
        r0t = eq0.r0_at_zero * np.exp(-p.u * t)
        return -bbc * beta * (lx * y5t + ly * x5t
                              - (lx * sy + ly * sx) * r0t / eq0.N0)

    return form


def pair_with_adjoint(x: Direction, y: Direction, p: ModelParams,
                      cfg: QuadConfig = DEFAULT_QUAD,
                      xi: Optional[AdjointEigenfunction] = None) -> float:
    """Adjoint pairing of the full quadratic form: sum of scalar rows
    weighted by the adjoint components plus the age row integrated against
    the adjoint profile.  The asymptomatic and symptomatic rows carry no
    quadratic terms, so only the first two scalars and the age integral
    appear."""
    if xi is None:
        _, xi = eigenfunctions(p, cfg)
    pa = panel_arrays(p.kernel, cfg)
    h3 = H3(x, y, p, cfg)
    age_term = float(np.dot(pa.w, np.asarray(xi.xi5(pa.tau)) * h3(pa.tau)))
    return (xi.xi1 * H1(x, y, p, cfg)
            + xi.xi2 * H2(x, y, p, cfg)
            + age_term)


def coeff_a_ls(p: ModelParams, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Branch curvature coefficient via the adjoint pairing route.

    Builds the kernel direction, evaluates the quadratic forms on it, and
    pairs with the adjoint direction.  Independent of `core.coeff_a` in
    structure (profile integrals instead of moment algebra); the two must
    agree to quadrature accuracy.
    """
    xhat, xi = eigenfunctions(p, cfg)
    d = xhat.direction(cfg)
    return pair_with_adjoint(d, d, p, cfg, xi=xi)


def transversality(p: ModelParams, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Speed at which R0 moves with the coupling at the crossing.

    Proportional to the kernel-weighted immune reservoir of the
    infection-free state; zero exactly when there is no vaccination inflow
    (the coupling then has nothing to act on and the crossing degenerates).
    """
    eq0 = dfe(p)
    j0, _ = moment_integrals(p.kernel, p.u, cfg)
    return p.K_sum * j0 * eq0.r0_at_zero / eq0.N0
