"""Quadrature over immunity age for kernel moments and survival integrals.

All infinite-horizon integrals in the model share one structure: a smooth
integrand on [0, tau_cut] where the kernel still varies, plus a tail where
the kernel is constant and the integral closes in elementary terms.  The
body is integrated with a composite Gauss-Legendre rule whose panels always
break at the kernel's plateau end (the integrand has a kink there), and the
panel count is doubled until two successive refinements agree to rel_tol.

Quantities provided:

* moment integrals      J0 = int beta(tau) exp(-u tau) dtau
                        J1 = int beta(tau) exp(-u tau) B(tau) dtau
  with B the exact cumulative of the kernel;

* survival integrals    Phi(m) = int exp(-u tau - m B(tau)) dtau
                        Psi(m) = int beta(tau) exp(-u tau - m B(tau)) dtau
  for a reinfection pressure m >= 0 (scalar or batch).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ParamError, QuadratureError
from .params import ImmunityKernel

__all__ = [
    "QuadConfig",
    "kernel_eval",
    "moment_integrals",
    "survival_integrals",
    "panel_arrays",
    "PanelArrays",
]

_MAX_DOUBLINGS = 6


@dataclass(frozen=True)
class QuadConfig:
    """Controls the composite rule: tolerance, truncation age, panel layout."""

    rel_tol: float = 1e-10
    tau_cut: Optional[float] = None  # None: kernel saturation age
    panel_order: int = 10            # Gauss-Legendre points per panel
    panel_count: int = 40            # starting number of panels

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-4):
            raise ParamError("rel_tol out of range")
        if self.panel_order < 2:
            raise ParamError("panel_order must be at least 2")
        if self.panel_count < 2:
            raise ParamError("panel_count must be at least 2")

    @property
    def panel_rule(self) -> str:
        """Identifier of the fixed-order composite rule."""
        return f"gauss-legendre-{self.panel_order}x{self.panel_count}"

    def resolve_tau_cut(self, kernel: ImmunityKernel) -> float:
        tc = self.tau_cut if self.tau_cut is not None else kernel.saturation_age
        if tc < kernel.tau_hat and not kernel.is_tabulated:
            raise ParamError("tau_cut below kernel plateau end")
        if kernel.is_tabulated and tc < kernel.profile_ages[-1]:
            raise ParamError("tau_cut below last tabulated kernel age")
        return float(tc)


DEFAULT_QUAD = QuadConfig()


@dataclass(frozen=True)
class PanelArrays:
    """Precomputed node data for one (kernel, tau_cut, rule) combination."""

    tau: np.ndarray      # quadrature nodes on [0, tau_cut]
    w: np.ndarray        # matching weights
    beta: np.ndarray     # kernel values at the nodes
    B: np.ndarray        # exact kernel cumulative at the nodes
    tau_cut: float
    beta_cut: float      # kernel value at tau_cut (constant beyond)
    B_cut: float         # cumulative at tau_cut


def kernel_eval(kernel: ImmunityKernel, tau) -> Tuple:
    """Kernel value and exact cumulative at tau; rejects negative ages."""
    return kernel.value(tau), kernel.cumulative(tau)


@lru_cache(maxsize=128)
def _cached_panels(kernel: ImmunityKernel, tau_cut: float, order: int, count: int) -> PanelArrays:
    # split the panel budget across [0, tau_hat] and [tau_hat, tau_cut] in
    # proportion to length, keeping the kink at tau_hat on a panel boundary
    kink = kernel.tau_hat if not kernel.is_tabulated else None
    if kink is not None and 0.0 < kink < tau_cut:
        n1 = min(max(1, round(count * kink / tau_cut)), count - 1)
        n2 = count - n1
        breaks = np.concatenate([
            np.linspace(0.0, kink, n1 + 1),
            np.linspace(kink, tau_cut, n2 + 1)[1:],
        ])
    elif kernel.is_tabulated:
        # piecewise-linear kernel: every table node is a kink
        ages = np.asarray(kernel.profile_ages)
        ages = ages[ages < tau_cut]
        breaks = np.unique(np.concatenate([ages, np.linspace(0.0, tau_cut, count + 1)]))
    else:
        breaks = np.linspace(0.0, tau_cut, count + 1)
    x, wref = leggauss(order)
    half = 0.5 * np.diff(breaks)
    mid = 0.5 * (breaks[:-1] + breaks[1:])
    tau = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    w = (half[:, None] * wref[None, :]).ravel()
    beta, B = kernel_eval(kernel, tau)
    arrs = PanelArrays(
        tau=tau, w=w, beta=np.asarray(beta), B=np.asarray(B),
        tau_cut=tau_cut,
        beta_cut=float(kernel.value(tau_cut)),
        B_cut=float(kernel.cumulative(tau_cut)),
    )
    for a in (arrs.tau, arrs.w, arrs.beta, arrs.B):
        a.setflags(write=False)
    return arrs


def panel_arrays(kernel: ImmunityKernel, cfg: QuadConfig = DEFAULT_QUAD,
                 count: Optional[int] = None) -> PanelArrays:
    """Node arrays for the configured rule (used by the reduction machinery)."""
    tc = cfg.resolve_tau_cut(kernel)
    return _cached_panels(kernel, tc, cfg.panel_order, count or cfg.panel_count)


def _converge(kernel: ImmunityKernel, cfg: QuadConfig, evaluate, what: str):
    """Run `evaluate(PanelArrays) -> ndarray` with panel doubling to rel_tol."""
    tc = cfg.resolve_tau_cut(kernel)
    count = cfg.panel_count
    prev = evaluate(_cached_panels(kernel, tc, cfg.panel_order, count))
    for _ in range(_MAX_DOUBLINGS):
        count *= 2
        cur = evaluate(_cached_panels(kernel, tc, cfg.panel_order, count))
        scale = np.maximum(np.abs(cur), 1e-300)
        if np.max(np.abs(cur - prev) / scale) <= cfg.rel_tol:
            return cur
        prev = cur
    raise QuadratureError(f"quadrature did not converge for {what}")


def moment_integrals(kernel: ImmunityKernel, u: float,
                     cfg: QuadConfig = DEFAULT_QUAD) -> Tuple[float, float]:
    """(J0, J1): kernel-weighted survival moments of the immune profile.

    The tail beyond tau_cut treats the kernel as the constant beta_cut and
    its cumulative as the matching linear extension, which closes both
    integrals exactly:

        J0_tail = beta_cut exp(-u tc) / u
        J1_tail = beta_cut exp(-u tc) (B_cut / u + beta_cut / u**2)
    """
    if not (u > 0.0):
        raise ParamError("u must be positive")

    def evaluate(pa: PanelArrays) -> np.ndarray:
        e = np.exp(-u * pa.tau)
        j0 = float(np.dot(pa.w, pa.beta * e))
        j1 = float(np.dot(pa.w, pa.beta * e * pa.B))
        decay = np.exp(-u * pa.tau_cut)
        j0 += pa.beta_cut * decay / u
        j1 += pa.beta_cut * decay * (pa.B_cut / u + pa.beta_cut / u**2)
        return np.array([j0, j1])

    j0, j1 = _converge(kernel, cfg, evaluate, "moment integrals")
    return float(j0), float(j1)


def survival_integrals(kernel: ImmunityKernel, u: float, lam_eff,
                       cfg: QuadConfig = DEFAULT_QUAD):
    """(Phi, Psi) at reinfection pressure lam_eff (scalar or 1-d batch).

    Phi is the expected residence of a newly immune individual discounted by
    both mortality and reinfection; Psi is the same integral weighted by the
    kernel.  The constant-kernel tail closes as

        Phi_tail = exp(-u tc - m B_cut) / (u + m beta_cut)

    and Psi_tail = beta_cut * Phi_tail.
    """
    if not (u > 0.0):
        raise ParamError("u must be positive")
    m = np.asarray(lam_eff, dtype=float)
    scalar = m.ndim == 0
    m = np.atleast_1d(m)
    if np.any(m < 0.0) or not np.all(np.isfinite(m)):
        raise ParamError("lam_eff must be nonnegative")

    def evaluate(pa: PanelArrays) -> np.ndarray:
        expo = np.exp(-u * pa.tau[None, :] - m[:, None] * pa.B[None, :])
        phi = expo @ pa.w
        psi = expo @ (pa.w * pa.beta)
        denom = u + m * pa.beta_cut
        tail = np.exp(-u * pa.tau_cut - m * pa.B_cut) / denom
        phi = phi + tail
        psi = psi + pa.beta_cut * tail
        return np.concatenate([phi, psi])

    out = _converge(kernel, cfg, evaluate, "survival integrals")
    n = m.size
    phi, psi = out[:n], out[n:]
    if scalar:
        return float(phi[0]), float(psi[0])
    return phi, psi
