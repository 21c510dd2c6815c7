"""Parameter containers and validation for the waning-immunity model.

The model tracks susceptibles S, exposed E, asymptomatic A, symptomatic I,
and a recovered/vaccinated pool structured by immunity age tau.  Protection
wanes with tau according to a relative-susceptibility kernel that starts at
1 - eta right after exit from the infectious classes, stays flat for tau_hat
days, and then relaxes back toward 1 at rate gamma_w.  Fully protected would
be kernel == 0; the kernel must stay strictly positive, so immunity is always
leaky here.

Two coupling strengths drive infection: beta_s scales transmission to the
naive susceptible pool and bar_beta scales reinfection of the immune pool
(modulated by the kernel).  The force of infection weights exposed and
asymptomatic carriers by theta and epsilon relative to symptomatic ones.

All demographic and progression rates are per day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ParamError

__all__ = [
    "ImmunityKernel",
    "ModelParams",
    "DiseaseFreeEquilibrium",
    "BifSummary",
    "validate_params",
]

# Beyond tau_hat the kernel relaxes exponentially; 40 e-folding times of the
# relaxation rate put the remaining gap below 5e-18, so the kernel is treated
# as exactly constant past this age when building quadrature tails.
_SATURATION_EFOLDS = 40.0


@dataclass(frozen=True)
class ImmunityKernel:
    """Relative susceptibility of the immune pool as a function of immunity age.

    Closed-form variant (default): value 1 - eta on [0, tau_hat), then
    1 - eta * exp(-gamma_w * (tau - tau_hat)) beyond, rising back toward 1.

    Tabulated variant: supply ``profile_ages``/``profile_values`` and the
    kernel becomes the piecewise-linear interpolant through those nodes,
    extended as a constant beyond the last age.  The cumulative integral is
    the exact integral of the interpolant.
    """

    eta: float = 0.2
    gamma_w: float = 0.5
    tau_hat: float = 200.0
    profile_ages: Optional[Tuple[float, ...]] = None
    profile_values: Optional[Tuple[float, ...]] = None

    @staticmethod
    def from_table(ages: Sequence[float], values: Sequence[float]) -> "ImmunityKernel":
        return ImmunityKernel(
            profile_ages=tuple(float(a) for a in ages),
            profile_values=tuple(float(v) for v in values),
        )

    @property
    def is_tabulated(self) -> bool:
        return self.profile_ages is not None

    @property
    def saturation_age(self) -> float:
        """Age past which the kernel is numerically constant."""
        if self.is_tabulated:
            return float(self.profile_ages[-1])
        return self.tau_hat + _SATURATION_EFOLDS / self.gamma_w

    @property
    def saturation_value(self) -> float:
        return float(self.value(self.saturation_age))

    def value(self, tau):
        """Kernel value at immunity age tau (scalar or array), rejecting tau < 0."""
        t0 = np.asarray(tau, dtype=float)
        t = np.atleast_1d(t0)
        if np.any(t < 0.0):
            raise ParamError("immunity age must be nonnegative")
        if self.is_tabulated:
            out = np.interp(t, self.profile_ages, self.profile_values)
        else:
            out = np.full_like(t, 1.0 - self.eta)
            late = t >= self.tau_hat
            if np.any(late):
                # exponent evaluated only on the late branch to avoid overflow
                out[late] = 1.0 - self.eta * np.exp(-self.gamma_w * (t[late] - self.tau_hat))
        return out if t0.ndim else float(out[0])

    def cumulative(self, tau):
        """Exact integral of the kernel from 0 to tau (scalar or array)."""
        t0 = np.asarray(tau, dtype=float)
        t = np.atleast_1d(t0)
        if np.any(t < 0.0):
            raise ParamError("immunity age must be nonnegative")
        if self.is_tabulated:
            out = self._cumulative_table(t)
        else:
            eta, gw, th = self.eta, self.gamma_w, self.tau_hat
            out = (1.0 - eta) * t
            late = t >= th
            if np.any(late):
                dt = t[late] - th
                out[late] = (1.0 - eta) * th + dt - (eta / gw) * (1.0 - np.exp(-gw * dt))
        return out if t0.ndim else float(out[0])

    def _cumulative_table(self, t: np.ndarray) -> np.ndarray:
        ages = np.asarray(self.profile_ages)
        vals = np.asarray(self.profile_values)
        # node-to-node integrals of the linear interpolant (trapezoid is exact)
        seg = 0.5 * (vals[1:] + vals[:-1]) * np.diff(ages)
        cum_nodes = np.concatenate(([0.0], np.cumsum(seg)))
        idx = np.clip(np.searchsorted(ages, t, side="right") - 1, 0, len(ages) - 1)
        out = np.empty_like(t)
        inside = idx < len(ages) - 1
        if np.any(inside):
            i = idx[inside]
            ti = t[inside]
            vt = np.interp(ti, ages, vals)
            out[inside] = cum_nodes[i] + 0.5 * (vals[i] + vt) * (ti - ages[i])
        beyond = ~inside
        if np.any(beyond):
            out[beyond] = cum_nodes[-1] + vals[-1] * (t[beyond] - ages[-1])
        return out


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set.  Rates are per day, Lambda is persons per day."""

    Lambda: float = 20000.0   # recruitment into the susceptible pool
    beta_s: float = 0.1       # transmission coefficient, naive susceptibles
    bar_beta: float = 0.0     # reinfection coefficient, immune pool
    theta: float = 0.55       # infectivity weight of exposed carriers
    epsilon: float = 0.55     # infectivity weight of asymptomatic carriers
    u: float = 1.0 / 27375.0  # background mortality (75 years)
    mu: float = 0.02          # disease-induced mortality of symptomatics
    alpha: float = 1e-6       # vaccination rate of susceptibles
    sigma: float = 1.0 / 5.2  # progression out of the exposed class
    rho: float = 0.4          # symptomatic fraction at progression
    gamma_A: float = 1.0 / 14.0  # recovery rate, asymptomatic
    gamma_I: float = 1.0 / 7.0   # recovery rate, symptomatic
    kernel: ImmunityKernel = ImmunityKernel()

    # --- per-exposed equilibrium ratios -------------------------------------
    # At any stationary point A and I are proportional to E; these ratios and
    # the infectivity aggregate below recur throughout the threshold algebra.

    @property
    def k_A(self) -> float:
        """Asymptomatic-to-exposed ratio at stationarity."""
        return (1.0 - self.rho) * self.sigma / (self.gamma_A + self.u)

    @property
    def k_I(self) -> float:
        """Symptomatic-to-exposed ratio at stationarity."""
        return self.rho * self.sigma / (self.gamma_I + self.mu + self.u)

    @property
    def c_gamma(self) -> float:
        """Recovery inflow into the immune pool per unit of E."""
        return self.gamma_A * self.k_A + self.gamma_I * self.k_I

    @property
    def K_sum(self) -> float:
        """Infectivity-weighted carriers per unit of E: theta + epsilon*k_A + k_I."""
        return self.theta + self.epsilon * self.k_A + self.k_I

    def with_(self, **kw) -> "ModelParams":
        """Copy with selected fields replaced (validation not re-run)."""
        return replace(self, **kw)


@dataclass(frozen=True)
class DiseaseFreeEquilibrium:
    """Infection-free stationary state: only S and the immune profile are populated."""

    S0: float          # susceptible pool
    r0_at_zero: float  # immune density at immunity age 0 (alpha * S0)
    N0: float          # total population (Lambda / u)
    u: float           # mortality, kept for the profile accessor

    def r0_profile(self, tau):
        """Immune density at immunity age tau: exponential survival of the inflow."""
        t = np.asarray(tau, dtype=float)
        out = self.r0_at_zero * np.exp(-self.u * t)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class BifSummary:
    """Threshold crossing summary: where the endemic branch leaves the trivial one."""

    r0_value: float      # basic reproduction number at the configured bar_beta
    beta_star: float     # reinfection coupling at which the branch crosses (signed)
    a_coeff: float       # branch curvature coefficient at the crossing
    criticality: str     # "Backward", "Forward", or "Degenerate"


def _positive(name: str, value: float) -> None:
    if not (value > 0.0) or not math.isfinite(value):
        raise ParamError(f"{name} must be positive")


def validate_params(p: ModelParams) -> ModelParams:
    """Check every invariant, raising ParamError naming the first violation.

    Returns the params unchanged on success so calls can be chained.
    """
    _positive("Lambda", p.Lambda)
    _positive("beta_s", p.beta_s)
    if not (p.bar_beta >= 0.0) or not math.isfinite(p.bar_beta):
        raise ParamError("bar_beta must be nonnegative")
    if not (0.0 < p.theta <= 1.0):
        raise ParamError("theta out of range")
    if not (0.0 < p.epsilon <= 1.0):
        raise ParamError("epsilon out of range")
    _positive("u", p.u)
    _positive("mu", p.mu)
    if not (p.alpha >= 0.0) or not math.isfinite(p.alpha):
        raise ParamError("alpha must be nonnegative")
    _positive("sigma", p.sigma)
    if not (0.0 < p.rho < 1.0):
        raise ParamError("rho out of range")
    _positive("gamma_A", p.gamma_A)
    _positive("gamma_I", p.gamma_I)
    _validate_kernel(p.kernel)
    return p


def _validate_kernel(k: ImmunityKernel) -> None:
    if k.is_tabulated:
        ages = np.asarray(k.profile_ages, dtype=float)
        vals = np.asarray(k.profile_values, dtype=float)
        if len(ages) != len(vals) or len(ages) < 2:
            raise ParamError("kernel table needs matching ages and values, at least two nodes")
        if ages[0] != 0.0 or np.any(np.diff(ages) <= 0.0):
            raise ParamError("kernel ages must start at 0 and increase")
        bad = np.nonzero(vals <= 0.0)[0]
        if bad.size:
            if ages[bad[0]] == 0.0:
                raise ParamError("kernel not strictly positive at tau=0")
            raise ParamError(f"kernel not strictly positive at tau={ages[bad[0]]:g}")
        if np.any(vals > 1.0):
            raise ParamError(f"kernel exceeds 1 at tau={ages[np.argmax(vals > 1.0)]:g}")
        if np.any(np.diff(vals) < -1e-12):
            raise ParamError("kernel not non-decreasing")
        return
    if not (k.eta >= 0.0):
        raise ParamError("eta out of range")
    _positive("gamma_w", k.gamma_w)
    if not (k.tau_hat >= 0.0) or not math.isfinite(k.tau_hat):
        raise ParamError("tau_hat must be nonnegative")
    if 1.0 - k.eta <= 0.0:
        raise ParamError("kernel not strictly positive at tau=0")
    # closed form is non-decreasing by construction; spot-check a sampling
    # grid anyway so a future kernel variant cannot silently break the shape
    grid = np.linspace(0.0, k.saturation_age, 257)
    if np.any(np.diff(k.value(grid)) < -1e-12):
        raise ParamError("kernel not non-decreasing")
