"""Solitary-wave family C e^{i omega t - sqrt(omega)|x|} and its parameter map.

The amplitude and frequency are linked by the defining relation
sqrt(omega) = a(C^2)/2 > 0; for a polynomial a the admissible amplitudes at
fixed omega are the positive roots of a(s) - 2 sqrt(omega) in s = C^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nonlinearity import FieldState, Grid, Nonlinearity

__all__ = [
    "SolitonParams",
    "amplitudes_for_frequency",
    "soliton_field",
    "soliton_profile",
    "charge_derivative",
    "dC_domega",
    "domega_profile",
    "domega2_profile",
]

_REL_TOL = 1e-12


@dataclass(frozen=True)
class SolitonParams:
    """One solitary wave e^{j theta} (C e^{-sqrt(omega)|x|}, 0)."""

    C: float
    omega: float
    theta: float = 0.0

    def validate(self, nl: Nonlinearity) -> None:
        if self.C <= 0 or self.omega <= 0:
            raise ValueError("soliton requires C > 0 and omega > 0")
        a = nl.eval_a(self.C**2)
        if a <= 0:
            raise ValueError(f"a(C^2) = {a} must be positive")
        if abs(np.sqrt(self.omega) - 0.5 * a) > _REL_TOL * max(1.0, abs(a)):
            raise ValueError(
                f"defining relation violated: sqrt(omega) = {np.sqrt(self.omega)} vs a(C^2)/2 = {0.5 * a}"
            )

    @classmethod
    def from_amplitude(cls, nl: Nonlinearity, C: float, theta: float = 0.0) -> "SolitonParams":
        a = nl.eval_a(C**2)
        if C <= 0 or a <= 0:
            raise ValueError("amplitude must be positive with a(C^2) > 0")
        return cls(C=float(C), omega=(0.5 * a) ** 2, theta=float(theta))


def amplitudes_for_frequency(nl: Nonlinearity, omega: float) -> list[float]:
    """All positive amplitudes C with a(C^2) = 2 sqrt(omega), sorted ascending."""
    if omega <= 0:
        return []
    target = 2.0 * np.sqrt(omega)
    coeffs = np.array(nl.coeffs, dtype=float)
    poly = coeffs.copy()
    poly[0] -= target
    if not np.any(poly[1:]):
        return []  # constant a: either no root or a degenerate continuum, none isolated
    roots = np.polynomial.polynomial.polyroots(poly)
    out = []
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    for r in roots:
        if abs(r.imag) > 1e-9 * max(1.0, abs(r)):
            continue
        s = _polish_root(poly, float(r.real))
        if s is None or s <= 0:
            continue
        if abs(nl.eval_a(s) - target) > 1e-10 * scale:
            continue
        out.append(np.sqrt(s))
    out = sorted(out)
    # drop numerically duplicated roots
    dedup: list[float] = []
    for c in out:
        if not dedup or abs(c - dedup[-1]) > 1e-9 * max(1.0, c):
            dedup.append(float(c))
    return dedup


def _polish_root(poly: np.ndarray, s0: float, iters: int = 60):
    """Newton refinement of a real root of the polynomial (coeff order low->high)."""
    der = np.polynomial.polynomial.polyder(poly)
    s = s0
    for _ in range(iters):
        f = np.polynomial.polynomial.polyval(s, poly)
        fp = np.polynomial.polynomial.polyval(s, der)
        if fp == 0:
            return s if abs(f) < 1e-12 else None
        step = f / fp
        s -= step
        if abs(step) < 1e-13 * max(1.0, abs(s)):
            break
    return s


def soliton_profile(p: SolitonParams, x: np.ndarray) -> np.ndarray:
    """psi_omega(x) = C e^{-sqrt(omega)|x|}."""
    return p.C * np.exp(-np.sqrt(p.omega) * np.abs(x))


def soliton_field(p: SolitonParams, grid: Grid) -> FieldState:
    """Sample e^{j theta}(psi_omega, 0) on the grid."""
    prof = soliton_profile(p, grid.x)
    vals = np.stack([prof * np.cos(p.theta), prof * np.sin(p.theta)], axis=1).astype(complex)
    return FieldState(grid, vals)


def dC_domega(nl: Nonlinearity, p: SolitonParams) -> float:
    """dC/domega = 1/(2 sqrt(omega) a'(C^2) C) along the branch through p."""
    ap = nl.eval_a(p.C**2, 1)
    if ap == 0:
        raise ZeroDivisionError("a'(C^2) = 0: the branch C(omega) is not locally unique")
    return 1.0 / (2.0 * np.sqrt(p.omega) * ap * p.C)


def charge_derivative(nl: Nonlinearity, p: SolitonParams) -> float:
    """d/domega of the soliton charge C(omega)^2 / sqrt(omega).

    Evaluates 1/(omega a'(C^2)) - C^2/(2 omega^(3/2)); positive exactly when
    0 < a' < a/C^2 (the charge-monotonicity stability criterion).
    """
    ap = nl.eval_a(p.C**2, 1)
    if ap == 0:
        raise ZeroDivisionError("a'(C^2) = 0: charge derivative undefined on this branch")
    return 1.0 / (p.omega * ap) - p.C**2 / (2.0 * p.omega**1.5)


def domega_profile(nl: Nonlinearity, p: SolitonParams, x: np.ndarray) -> np.ndarray:
    """Analytic d/domega of psi_omega (never numeric: it feeds projector denominators)."""
    r = np.sqrt(p.omega)
    ax = np.abs(x)
    e = np.exp(-r * ax)
    return (dC_domega(nl, p) - p.C * ax / (2.0 * r)) * e


def domega2_profile(nl: Nonlinearity, p: SolitonParams, x: np.ndarray) -> np.ndarray:
    """Analytic second omega-derivative of psi_omega (Newton Jacobian of the frame map)."""
    r = np.sqrt(p.omega)
    ax = np.abs(x)
    e = np.exp(-r * ax)
    s = p.C**2
    ap = nl.eval_a(s, 1)
    app = nl.eval_a(s, 2)
    cp = dC_domega(nl, p)
    # h = 2 sqrt(omega) a' C, C' = 1/h, C'' = -h'/h^2
    h = 2.0 * r * ap * p.C
    hp = ap * p.C / r + 2.0 * r * cp * (2.0 * app * s + ap)
    cpp = -hp / h**2
    term = cpp - cp * ax / r + p.C * (ax**2 / (4.0 * p.omega) + ax / (4.0 * p.omega**1.5))
    return term * e
