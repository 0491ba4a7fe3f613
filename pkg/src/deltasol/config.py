"""Experiment configuration: INI-style key = value files with sections.

Experiments carry ~20 parameters, so configs are archivable files rather
than flag soup.  Parsing is strict: unknown values or malformed fields fail
with the section/field name in the message, and the physical checks (window
membership, coupling nonvanishing) are re-verified at load time by the
commands that need them.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .evolution import EvolutionConfig
from .nonlinearity import Nonlinearity

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]

OUTPUT_ROOT_ENV = "DELTASOL_OUTPUT_ROOT"


class ConfigError(ValueError):
    """Configuration file failed to parse or validate; message names the field."""


@dataclass
class GaussianBump:
    center: float
    width: float
    amplitude: float


@dataclass
class ExperimentConfig:
    coeffs: tuple[float, ...]
    branch_index: int = 0
    omega: Optional[float] = None
    amplitude: Optional[float] = None
    theta0: float = 0.0
    dx: float = 0.05
    half_width: float = 200.0
    dt: float = 0.01
    T: float = 200.0
    z0: complex = 0.0
    f0: Optional[GaussianBump] = None
    boundary: str = "dirichlet"
    absorb_width: float = 50.0
    absorb_strength: float = 0.2
    picard_tol: float = 1e-12
    picard_max: int = 50
    charge_guard: Optional[float] = 1e-4
    fit_t0: float = 5.0
    fit_t1: Optional[float] = None
    track_stride: float = 0.5
    beta: float = 2.0
    cauchy_t1: Optional[float] = None
    cauchy_t2: Optional[float] = None
    nu_scan_points: int = 300
    c_min: float = 0.5
    c_max: float = 1.5
    c_points: int = 41
    dispersive_variant: str = "both"
    bump_center: float = 0.0
    bump_width: float = 4.0
    bump_amplitude: float = 1.0
    seed: int = 0
    output_dir: str = "runs/out"
    snapshot_count: int = 0

    def nonlinearity(self) -> Nonlinearity:
        return Nonlinearity(self.coeffs)

    def evolution(self) -> EvolutionConfig:
        return EvolutionConfig(
            dx=self.dx, dt=self.dt, half_width=self.half_width, T=self.T,
            picard_tol=self.picard_tol, picard_max=self.picard_max,
            boundary=self.boundary, absorb_width=self.absorb_width,
            absorb_strength=self.absorb_strength, charge_guard=self.charge_guard,
        )

    def resolve_output_dir(self) -> Path:
        root = os.environ.get(OUTPUT_ROOT_ENV)
        path = Path(self.output_dir)
        if root and not path.is_absolute():
            path = Path(root) / path
        return path

    def echo(self) -> dict:
        """Round-trippable plain representation for the manifest."""
        out = {
            "nonlinearity": {"coeffs": list(self.coeffs), "branch_index": self.branch_index},
            "soliton": {"omega": self.omega, "amplitude": self.amplitude, "theta0": self.theta0},
            "grid": {"dx": self.dx, "half_width": self.half_width},
            "time": {"dt": self.dt, "T": self.T},
            "perturbation": {"z0_real": self.z0.real, "z0_imag": self.z0.imag,
                             "f0": None if self.f0 is None else
                             [self.f0.center, self.f0.width, self.f0.amplitude]},
            "boundary": {"kind": self.boundary, "absorb_width": self.absorb_width,
                         "absorb_strength": self.absorb_strength},
            "guards": {"picard_tol": self.picard_tol, "picard_max": self.picard_max,
                       "charge_guard": self.charge_guard},
            "fit": {"t0": self.fit_t0, "t1": self.fit_t1,
                    "track_stride": self.track_stride, "beta": self.beta,
                    "cauchy_t1": self.cauchy_t1, "cauchy_t2": self.cauchy_t2},
            "spectrum": {"nu_scan_points": self.nu_scan_points},
            "fgr": {"c_min": self.c_min, "c_max": self.c_max, "c_points": self.c_points},
            "dispersive": {"variant": self.dispersive_variant, "bump_center": self.bump_center,
                           "bump_width": self.bump_width, "bump_amplitude": self.bump_amplitude},
            "seed": {"value": self.seed},
            "output": {"dir": self.output_dir, "snapshot_count": self.snapshot_count},
        }
        return out


def to_ini(cfg: ExperimentConfig) -> str:
    """Serialize back to the file format; load_config(to_ini(c)) == c."""
    lines = []
    for section, fields in cfg.echo().items():
        body = []
        for key, value in fields.items():
            if value is None:
                continue
            if section == "nonlinearity" and key == "coeffs":
                body.append(f"coeffs = {' '.join(repr(float(v)) for v in value)}")
            elif section == "perturbation" and key == "f0":
                body.append(f"f0 = gaussian {value[0]!r} {value[1]!r} {value[2]!r}")
            elif isinstance(value, float):
                body.append(f"{key} = {value!r}")
            else:
                body.append(f"{key} = {value}")
        if section == "guards" and cfg.charge_guard is None:
            body.append("charge_guard = none")
        if body:
            lines.append(f"[{section}]")
            lines.extend(body)
            lines.append("")
    return "\n".join(lines)


def _get(parser, section, key, cast, default, errors):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        if cast is bool:
            return parser.getboolean(section, key)
        return cast(raw)
    except Exception:
        errors.append(f"[{section}] {key} = {raw!r}")
        return default


def _opt_float(raw: str):
    if raw.strip().lower() in ("none", "off"):
        return None
    return float(raw)


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    errors: list[str] = []

    if not parser.has_option("nonlinearity", "coeffs"):
        raise ConfigError("[nonlinearity] coeffs is required")
    try:
        coeffs = tuple(float(tok) for tok in parser.get("nonlinearity", "coeffs").split())
    except ValueError:
        raise ConfigError(f"[nonlinearity] coeffs = {parser.get('nonlinearity', 'coeffs')!r}")
    if not coeffs:
        raise ConfigError("[nonlinearity] coeffs must list at least one coefficient")

    cfg = ExperimentConfig(
        coeffs=coeffs,
        branch_index=_get(parser, "nonlinearity", "branch_index", int, 0, errors),
        omega=_get(parser, "soliton", "omega", float, None, errors),
        amplitude=_get(parser, "soliton", "amplitude", float, None, errors),
        theta0=_get(parser, "soliton", "theta0", float, 0.0, errors),
        dx=_get(parser, "grid", "dx", float, 0.05, errors),
        half_width=_get(parser, "grid", "half_width", float, 200.0, errors),
        dt=_get(parser, "time", "dt", float, 0.01, errors),
        T=_get(parser, "time", "T", float, 200.0, errors),
        z0=complex(_get(parser, "perturbation", "z0_real", float, 0.0, errors),
                   _get(parser, "perturbation", "z0_imag", float, 0.0, errors)),
        boundary=_get(parser, "boundary", "kind", str, "dirichlet", errors),
        absorb_width=_get(parser, "boundary", "absorb_width", float, 50.0, errors),
        absorb_strength=_get(parser, "boundary", "absorb_strength", float, 0.2, errors),
        picard_tol=_get(parser, "guards", "picard_tol", float, 1e-12, errors),
        picard_max=_get(parser, "guards", "picard_max", int, 50, errors),
        charge_guard=_get(parser, "guards", "charge_guard", _opt_float, 1e-4, errors),
        fit_t0=_get(parser, "fit", "t0", float, 5.0, errors),
        fit_t1=_get(parser, "fit", "t1", _opt_float, None, errors),
        track_stride=_get(parser, "fit", "track_stride", float, 0.5, errors),
        beta=_get(parser, "fit", "beta", float, 2.0, errors),
        cauchy_t1=_get(parser, "fit", "cauchy_t1", _opt_float, None, errors),
        cauchy_t2=_get(parser, "fit", "cauchy_t2", _opt_float, None, errors),
        nu_scan_points=_get(parser, "spectrum", "nu_scan_points", int, 300, errors),
        c_min=_get(parser, "fgr", "c_min", float, 0.5, errors),
        c_max=_get(parser, "fgr", "c_max", float, 1.5, errors),
        c_points=_get(parser, "fgr", "c_points", int, 41, errors),
        dispersive_variant=_get(parser, "dispersive", "variant", str, "both", errors),
        bump_center=_get(parser, "dispersive", "bump_center", float, 0.0, errors),
        bump_width=_get(parser, "dispersive", "bump_width", float, 4.0, errors),
        bump_amplitude=_get(parser, "dispersive", "bump_amplitude", float, 1.0, errors),
        seed=_get(parser, "seed", "value", int, 0, errors),
        output_dir=_get(parser, "output", "dir", str, "runs/out", errors),
        snapshot_count=_get(parser, "output", "snapshot_count", int, 0, errors),
    )

    if parser.has_option("perturbation", "f0"):
        raw = parser.get("perturbation", "f0").split()
        if raw and raw[0].lower() == "none":
            cfg.f0 = None
        elif raw and raw[0].lower() == "gaussian" and len(raw) == 4:
            try:
                cfg.f0 = GaussianBump(center=float(raw[1]), width=float(raw[2]),
                                      amplitude=float(raw[3]))
            except ValueError:
                errors.append(f"[perturbation] f0 = {' '.join(raw)!r}")
        else:
            errors.append(f"[perturbation] f0 = {' '.join(raw)!r}")

    if errors:
        raise ConfigError("malformed fields: " + "; ".join(errors))
    if cfg.omega is None and cfg.amplitude is None:
        raise ConfigError("[soliton] needs omega or amplitude")
    if cfg.dx <= 0 or cfg.dt <= 0 or cfg.T <= 0 or cfg.half_width <= 0:
        raise ConfigError("[grid]/[time] values must be positive")
    if cfg.boundary not in ("dirichlet", "absorbing"):
        raise ConfigError(f"[boundary] kind = {cfg.boundary!r}")
    if cfg.dispersive_variant not in ("plain", "resolvent_shifted", "both"):
        raise ConfigError(f"[dispersive] variant = {cfg.dispersive_variant!r}")
    return cfg


def resolve_soliton(cfg: ExperimentConfig):
    """Branch-resolved soliton parameters from the config."""
    from .solitary import SolitonParams, amplitudes_for_frequency

    nl = cfg.nonlinearity()
    if cfg.amplitude is not None:
        p = SolitonParams.from_amplitude(nl, cfg.amplitude, cfg.theta0)
        if cfg.omega is not None and abs(p.omega - cfg.omega) > 1e-9:
            raise ConfigError(f"[soliton] omega {cfg.omega} inconsistent with amplitude "
                              f"{cfg.amplitude} (implies omega = {p.omega})")
        return p
    roots = amplitudes_for_frequency(nl, cfg.omega)
    if not roots:
        raise ConfigError(f"[soliton] no solitary wave at omega = {cfg.omega}")
    if not 0 <= cfg.branch_index < len(roots):
        raise ConfigError(f"[nonlinearity] branch_index {cfg.branch_index} out of range "
                          f"(found {len(roots)} branches)")
    return SolitonParams(C=roots[cfg.branch_index], omega=cfg.omega, theta=cfg.theta0)
