"""Endemic-branch continuation in the reinfection coupling.

Because R0 is affine in bar_beta, a requested R0 window maps directly onto
a coupling window.  The branch is assembled by sweeping the coupling,
collecting every equilibrium at each step, and ordering the union by the
force of infection, which is a global coordinate along the branch (each
equilibrium knows its own coupling, so folds in the (R0, state) plane are
just interior extrema of R0 along that ordering).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .core import crossing_coupling, r0_affine
from .equilibrium import Equilibrium, _assemble, _residual_vec, find_equilibria, verify_equilibrium
from .errors import ContinuationError, ParamError
from .params import ModelParams
from .quadrature import DEFAULT_QUAD, QuadConfig

__all__ = [
    "BranchPoint",
    "FoldPoint",
    "Branch",
    "trace_branch",
    "detect_folds",
    "label_stability",
]


@dataclass(frozen=True)
class BranchPoint:
    bar_beta: float
    r0_value: float
    eq: Equilibrium
    stability: str = "Unknown"


@dataclass(frozen=True)
class FoldPoint:
    r0_value: float
    lam: float
    eq: Equilibrium


@dataclass(frozen=True)
class Branch:
    points: Tuple[BranchPoint, ...]
    folds: Tuple[FoldPoint, ...] = field(default_factory=tuple)
    transcritical_point: Tuple[float, float] = (float("nan"), 1.0)


def trace_branch(p: ModelParams, r0_lo: float, r0_hi: float,
                 n_steps: Optional[int] = None,
                 cfg: QuadConfig = DEFAULT_QUAD,
                 n_grid: int = 2000) -> Branch:
    """Collect all endemic equilibria with R0 in [r0_lo, r0_hi].

    The window is mapped to couplings through the affine R0 relation and
    clamped below at zero coupling (R0 values unreachable with nonnegative
    coupling contribute nothing).  Points are ordered by force of infection;
    if two points coincide in lam but disagree in coupling the assembly is
    ambiguous and an error names the offending coupling.
    """
    if not (r0_lo < r0_hi):
        raise ParamError("r0_lo must be below r0_hi")
    intercept, slope = r0_affine(p, cfg)
    if slope <= 0.0:
        raise ContinuationError("branch tracing needs R0 to depend on bar_beta")
    bb_lo = (r0_lo - intercept) / slope
    bb_hi = (r0_hi - intercept) / slope
    bb_lo = max(bb_lo, 0.0)
    if n_steps is None:
        n_steps = max(2, math.ceil(400.0 * (r0_hi - r0_lo)))
    if bb_hi < bb_lo:
        return Branch(points=(), transcritical_point=(crossing_coupling(p, cfg), 1.0))

    points: List[BranchPoint] = []
    for bb in np.linspace(bb_lo, bb_hi, n_steps + 1):
        bb = float(bb)
        r0v = intercept + slope * bb
        for eq in find_equilibria(p, bb, cfg, n_grid=n_grid):
            points.append(BranchPoint(bar_beta=bb, r0_value=r0v, eq=eq))

    points.sort(key=lambda bp: bp.eq.lam)
    for a, b in zip(points, points[1:]):
        if abs(b.eq.lam - a.eq.lam) < 1e-12 * b.eq.lam and a.bar_beta != b.bar_beta:
            raise ContinuationError(
                f"branch assembly ambiguous at bar_beta={b.bar_beta:.12g}"
            )
    return Branch(
        points=tuple(points),
        transcritical_point=(crossing_coupling(p, cfg), 1.0),
    )


def _coupling_at(lam: float, p: ModelParams, bb_guess: Tuple[float, float],
                 cfg: QuadConfig) -> float:
    """Coupling at which `lam` is an equilibrium, by bisection on the balance."""

    def f(bb: float) -> float:
        return float(_residual_vec(np.atleast_1d(lam), p, bb, cfg)[0])

    lo, hi = sorted(bb_guess)
    span = max(hi - lo, 1e-6 * max(hi, 1.0), 1e-12)
    lo, hi = max(lo - 0.5 * span, 0.0), hi + 0.5 * span
    flo, fhi = f(lo), f(hi)
    grow = 0
    while flo * fhi > 0.0:
        grow += 1
        if grow > 60:
            raise ContinuationError(
                f"fold refinement did not converge (no coupling bracket at lam={lam:.6g})"
            )
        lo, hi = max(lo - span, 0.0), hi + span
        span *= 1.6
        flo, fhi = f(lo), f(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < 1e-14 * max(mid, 1e-30):
            return mid
        fm = f(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0.0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def detect_folds(branch: Branch, p: ModelParams,
                 cfg: QuadConfig = DEFAULT_QUAD) -> Branch:
    """Locate turning points of R0 along the lam-ordered branch.

    Every interior sign change of the R0 increments brackets one fold,
    which is then refined by golden-section search on lam (the coupling at
    each trial lam recovered by bisection) until successive R0 estimates
    move by less than 1e-6.
    """
    pts = branch.points
    if len(pts) < 3:
        return replace(branch, folds=())
    intercept, slope = r0_affine(p, cfg)
    lam = np.array([bp.eq.lam for bp in pts])
    r0v = np.array([bp.r0_value for bp in pts])
    d = np.diff(r0v)

    # a fold shows up as a sign change between consecutive nonzero R0
    # increments; runs of zero increments (the two sides of the fold caught
    # at the same sweep level) sit inside the bracket, not between brackets
    nz = np.nonzero(d)[0]
    folds: List[FoldPoint] = []
    for k, j in zip(nz, nz[1:]):
        if d[k] * d[j] > 0.0:
            continue
        sign = 1.0 if (d[k] < 0.0 < d[j]) else -1.0  # +1: R0 minimum
        lo, hi = lam[k], lam[j + 1]
        bb_band = (pts[k].bar_beta, pts[j + 1].bar_beta)

        def obj(x: float) -> float:
            bb = _coupling_at(x, p, bb_band, cfg)
            return sign * (intercept + slope * bb)

        lam_f, obj_f = _golden(obj, float(lo), float(hi), abs_tol=1e-6)
        bb_f = _coupling_at(lam_f, p, bb_band, cfg)
        eq_f = _assemble(lam_f, p, bb_f, cfg)
        if verify_equilibrium(eq_f, p, bb_f, cfg) >= 1e-8:
            raise ContinuationError(f"fold candidate failed verification at lam={lam_f:.6g}")
        if folds and abs(lam_f - folds[-1].lam) < 1e-6 * lam_f:
            continue
        folds.append(FoldPoint(r0_value=sign * obj_f, lam=lam_f, eq=eq_f))
    return replace(branch, folds=tuple(folds))


def _golden(fun, lo: float, hi: float, abs_tol: float,
            max_iter: int = 200) -> Tuple[float, float]:
    """Golden-section minimisation; stops when the function stops moving."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    dd = a + invphi * (b - a)
    fc, fd = fun(c), fun(dd)
    best = min(fc, fd)
    for _ in range(max_iter):
        if fc < fd:
            b, dd, fd = dd, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, dd, fd
            dd = a + invphi * (b - a)
            fd = fun(dd)
        new_best = min(fc, fd)
        if abs(best - new_best) < abs_tol and (b - a) < 1e-3 * max(abs(a), abs(b)):
            best = new_best
            break
        best = new_best
    x = c if fc <= fd else dd
    return x, min(fc, fd)


def label_stability(branch: Branch, p: ModelParams,
                    cfg: QuadConfig = DEFAULT_QUAD,
                    sim_cfg=None) -> Branch:
    """Return a copy of the branch with each point probed for stability.

    Runs a time-domain perturbation probe per point, so this is by far the
    most expensive branch operation; points whose probe is inconclusive
    keep the label Unknown.
    """
    from .simulate import stability_probe  # deferred: simulator is heavy

    labelled = []
    for bp in branch.points:
        verdict = stability_probe(bp.eq, p, bp.bar_beta, cfg=cfg, sim_cfg=sim_cfg)
        labelled.append(replace(bp, stability=verdict))
    return replace(branch, points=tuple(labelled))
