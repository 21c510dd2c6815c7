"""Flat key = value run configuration.

One key per line, `#` starts a comment, nothing nests.  Every model
parameter is required so a config is a complete, self-describing record of
a run; solver and output knobs are optional with library defaults.  Unknown
keys are rejected rather than ignored, which catches typos that would
otherwise silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

from .errors import ConfigError
from .params import ImmunityKernel, ModelParams, validate_params
from .quadrature import QuadConfig
from .simulate import SimConfig

__all__ = ["RunConfig", "load_config", "serialize_config", "with_overrides"]

_REQUIRED = (
    "Lambda", "beta_s", "bar_beta", "theta", "epsilon", "u", "mu",
    "alpha", "sigma", "rho", "gamma_A", "gamma_I",
    "eta", "gamma_w", "tau_hat",
)

_OPTIONAL_FLOAT = (
    "rel_tol", "tau_cut", "r0_lo", "r0_hi",
    "dt", "t_end", "init_S", "init_E", "init_A", "init_I",
)
_OPTIONAL_INT = ("panel_order", "panel_count", "n_steps", "output_stride")
_OPTIONAL_BOOL = ("label_stability",)
_OPTIONAL_LIST = ("bistab_I0",)

_KNOWN = set(_REQUIRED) | set(_OPTIONAL_FLOAT) | set(_OPTIONAL_INT) \
    | set(_OPTIONAL_BOOL) | set(_OPTIONAL_LIST)


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs, already validated."""

    params: ModelParams
    quad: QuadConfig
    sim: SimConfig
    r0_lo: Optional[float] = None
    r0_hi: Optional[float] = None
    n_steps: Optional[int] = None
    init_S: Optional[float] = None
    init_E: float = 0.0
    init_A: float = 0.0
    init_I: float = 0.0
    bistab_I0: Tuple[float, ...] = ()
    label_stability: bool = False


def _parse_lines(text: str) -> Dict[str, Tuple[str, int]]:
    entries: Dict[str, Tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"parse error at line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"parse error at line {lineno}: empty key or value")
        if key not in _KNOWN:
            raise ConfigError(f"unknown key {key} at line {lineno}")
        if key in entries:
            raise ConfigError(f"duplicate key {key} at line {lineno}")
        entries[key] = (value, lineno)
    return entries


def _as_float(entries, key: str) -> float:
    value, lineno = entries[key]
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"parse error at line {lineno}: invalid number for {key}") from None


def _as_int(entries, key: str) -> int:
    value, lineno = entries[key]
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"parse error at line {lineno}: invalid integer for {key}") from None


def _as_bool(entries, key: str) -> bool:
    value, lineno = entries[key]
    low = value.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"parse error at line {lineno}: invalid boolean for {key}")


def _as_float_list(entries, key: str) -> Tuple[float, ...]:
    value, lineno = entries[key]
    try:
        return tuple(float(tok) for tok in value.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"parse error at line {lineno}: invalid number list for {key}") from None


def load_config(path: str) -> RunConfig:
    """Parse and validate a run configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    entries = _parse_lines(text)

    for key in _REQUIRED:
        if key not in entries:
            raise ConfigError(f"missing required key {key}")

    kernel = ImmunityKernel(
        eta=_as_float(entries, "eta"),
        gamma_w=_as_float(entries, "gamma_w"),
        tau_hat=_as_float(entries, "tau_hat"),
    )
    params = validate_params(ModelParams(
        Lambda=_as_float(entries, "Lambda"),
        beta_s=_as_float(entries, "beta_s"),
        bar_beta=_as_float(entries, "bar_beta"),
        theta=_as_float(entries, "theta"),
        epsilon=_as_float(entries, "epsilon"),
        u=_as_float(entries, "u"),
        mu=_as_float(entries, "mu"),
        alpha=_as_float(entries, "alpha"),
        sigma=_as_float(entries, "sigma"),
        rho=_as_float(entries, "rho"),
        gamma_A=_as_float(entries, "gamma_A"),
        gamma_I=_as_float(entries, "gamma_I"),
        kernel=kernel,
    ))

    quad_kw = {}
    if "rel_tol" in entries:
        quad_kw["rel_tol"] = _as_float(entries, "rel_tol")
    if "tau_cut" in entries:
        quad_kw["tau_cut"] = _as_float(entries, "tau_cut")
    if "panel_order" in entries:
        quad_kw["panel_order"] = _as_int(entries, "panel_order")
    if "panel_count" in entries:
        quad_kw["panel_count"] = _as_int(entries, "panel_count")
    quad = QuadConfig(**quad_kw)

    sim_kw = {}
    if "dt" in entries:
        sim_kw["dt"] = _as_float(entries, "dt")
    if "t_end" in entries:
        sim_kw["t_end"] = _as_float(entries, "t_end")
    if "tau_cut" in entries:
        sim_kw["tau_cut"] = _as_float(entries, "tau_cut")
    if "output_stride" in entries:
        sim_kw["output_stride"] = _as_int(entries, "output_stride")
    sim = SimConfig(**sim_kw)

    return RunConfig(
        params=params,
        quad=quad,
        sim=sim,
        r0_lo=_as_float(entries, "r0_lo") if "r0_lo" in entries else None,
        r0_hi=_as_float(entries, "r0_hi") if "r0_hi" in entries else None,
        n_steps=_as_int(entries, "n_steps") if "n_steps" in entries else None,
        init_S=_as_float(entries, "init_S") if "init_S" in entries else None,
        init_E=_as_float(entries, "init_E") if "init_E" in entries else 0.0,
        init_A=_as_float(entries, "init_A") if "init_A" in entries else 0.0,
        init_I=_as_float(entries, "init_I") if "init_I" in entries else 0.0,
        bistab_I0=_as_float_list(entries, "bistab_I0") if "bistab_I0" in entries else (),
        label_stability=_as_bool(entries, "label_stability") if "label_stability" in entries else False,
    )


def with_overrides(rc: RunConfig, beta_s: Optional[float] = None,
                   bar_beta: Optional[float] = None) -> RunConfig:
    """Command-line overrides win over the file values."""
    params = rc.params
    if beta_s is not None:
        params = params.with_(beta_s=beta_s)
    if bar_beta is not None:
        params = params.with_(bar_beta=bar_beta)
    if params is rc.params:
        return rc
    return replace(rc, params=validate_params(params))


def serialize_config(rc: RunConfig) -> str:
    """Render a RunConfig back to the flat file format (stable key order)."""
    p, k = rc.params, rc.params.kernel
    lines = [
        f"Lambda = {p.Lambda!r}", f"beta_s = {p.beta_s!r}", f"bar_beta = {p.bar_beta!r}",
        f"theta = {p.theta!r}", f"epsilon = {p.epsilon!r}", f"u = {p.u!r}",
        f"mu = {p.mu!r}", f"alpha = {p.alpha!r}", f"sigma = {p.sigma!r}",
        f"rho = {p.rho!r}", f"gamma_A = {p.gamma_A!r}", f"gamma_I = {p.gamma_I!r}",
        f"eta = {k.eta!r}", f"gamma_w = {k.gamma_w!r}", f"tau_hat = {k.tau_hat!r}",
        f"rel_tol = {rc.quad.rel_tol!r}",
        f"panel_order = {rc.quad.panel_order}", f"panel_count = {rc.quad.panel_count}",
        f"dt = {rc.sim.dt!r}", f"t_end = {rc.sim.t_end!r}",
        f"output_stride = {rc.sim.output_stride}",
    ]
    if rc.quad.tau_cut is not None:
        lines.append(f"tau_cut = {rc.quad.tau_cut!r}")
    for key in ("r0_lo", "r0_hi", "n_steps", "init_S"):
        val = getattr(rc, key)
        if val is not None:
            lines.append(f"{key} = {val!r}")
    for key in ("init_E", "init_A", "init_I"):
        val = getattr(rc, key)
        if val:
            lines.append(f"{key} = {val!r}")
    if rc.bistab_I0:
        lines.append("bistab_I0 = " + ", ".join(repr(v) for v in rc.bistab_I0))
    if rc.label_stability:
        lines.append("label_stability = true")
    return "\n".join(lines) + "\n"
