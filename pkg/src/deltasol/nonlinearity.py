"""Point nonlinearity a(s), its potential, and the conserved functionals.

The model couples the free 1D Schrodinger equation to an oscillator pinned
at the origin: the force F(psi) = a(|psi|^2) psi acts through a delta
potential at x = 0.  Everything downstream (solitary waves, spectra,
evolution) is driven by the polynomial a and the two quadratures defined
here, the charge Q = ∫|psi|^2 and the energy H = 1/2 ∫|psi'|^2 + U(psi(0)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Nonlinearity",
    "Grid",
    "FieldState",
    "inner",
    "apply_j",
    "symplectic_form",
    "charge",
    "hamiltonian",
    "weighted_norm",
]


@dataclass(frozen=True)
class Nonlinearity:
    """Polynomial oscillator strength a(s) = sum_k coeffs[k] s^k."""

    coeffs: tuple[float, ...]

    def __init__(self, coeffs) -> None:
        object.__setattr__(self, "coeffs", tuple(float(c) for c in coeffs))

    def eval_a(self, s, order: int = 0):
        """Value of a^(order)(s) by exact polynomial differentiation, order in 0..3."""
        if order not in (0, 1, 2, 3):
            raise ValueError(f"derivative order must be in 0..3, got {order}")
        c = np.polynomial.polynomial.polyder(self.coeffs, m=order) if order else self.coeffs
        out = np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), np.asarray(c, dtype=float))
        return out if np.ndim(s) else float(out)

    def potential_u(self, s):
        """u(s) = -(1/2) ∫_0^s a, the antiderivative with u(0) = 0 (so -∇U = F)."""
        anti = np.polynomial.polynomial.polyint(self.coeffs)
        val = np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), anti)
        out = -0.5 * val
        return out if np.ndim(s) else float(out)

    def mean_a(self, s0: float, s1: float) -> float:
        """Exact divided difference of ∫a between s0 and s1 (-> a(s0) as s1 -> s0).

        This is the discrete-gradient coefficient: using it at the interaction
        node makes the Crank-Nicolson step conserve the discrete energy exactly.
        """
        total = 0.0
        for k, c in enumerate(self.coeffs):
            # divided difference of s^{k+1}/(k+1): sum_{i=0..k} s0^i s1^{k-i} / (k+1)
            total += c * sum(s0**i * s1**(k - i) for i in range(k + 1)) / (k + 1)
        return float(total)

    def force(self, psi: np.ndarray) -> np.ndarray:
        """F(psi) = a(|psi|^2) psi for a real 2-vector psi."""
        psi = np.asarray(psi, dtype=float)
        return self.eval_a(psi @ psi) * psi

    def admissibility_margin(self, radius: float = 10.0, samples: int = 2001) -> float:
        """min over |z| <= radius of U(z) + B|z|^2 with B = 1 (reported, not enforced)."""
        s = np.linspace(0.0, radius**2, samples)
        u = self.potential_u(s)
        return float(np.min(u + s))

    def globally_admissible(self) -> bool:
        """Whether U(z) >= A - B|z|^2 can hold for all z, read off the leading term.

        u(s) ~ -c_k s^{k+1}/(2(k+1)) at infinity: bounded below by -B s exactly
        when the leading coefficient is negative (degree >= 1) or the family is
        linear-or-constant in s.
        """
        coeffs = np.trim_zeros(np.asarray(self.coeffs), "b")
        if len(coeffs) <= 1:
            return True  # constant a: u linear in s, any B > a/2 works
        return coeffs[-1] < 0


def potential_U(nl: Nonlinearity, psi) -> float:
    """U(psi) = u(|psi|^2) for a (possibly complex-scalar) 2-vector psi."""
    psi = np.asarray(psi)
    return float(nl.potential_u(float(np.sum(np.abs(psi) ** 2))))


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [-L, L] with an odd node count so x = 0 is a node."""

    dx: float
    n: int

    def __post_init__(self):
        if self.n % 2 == 0:
            raise ValueError("node count must be odd so that x = 0 is a node")
        if self.dx <= 0:
            raise ValueError("dx must be positive")

    @classmethod
    def from_extent(cls, dx: float, half_width: float) -> "Grid":
        half = max(1, round(half_width / dx))
        return cls(dx=dx, n=2 * half + 1)

    @property
    def half_width(self) -> float:
        return self.dx * (self.n - 1) / 2

    @property
    def center(self) -> int:
        return (self.n - 1) // 2

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n) - self.center) * self.dx

    def trapz_weights(self) -> np.ndarray:
        w = np.full(self.n, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass
class FieldState:
    """Complex pair (psi1, psi2) sampled on a grid; physical states have both real."""

    grid: Grid
    values: np.ndarray = field(default=None)  # shape (n, 2), complex

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros((self.grid.n, 2), dtype=complex)
        else:
            self.values = np.asarray(self.values, dtype=complex)
            if self.values.shape != (self.grid.n, 2):
                raise ValueError(f"values shape {self.values.shape} does not match grid ({self.grid.n}, 2)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def copy(self) -> "FieldState":
        return FieldState(self.grid, self.values.copy())

    @classmethod
    def from_scalar(cls, grid: Grid, phi: np.ndarray) -> "FieldState":
        """Build the real 2-vector state of a complex scalar wavefunction phi."""
        phi = np.asarray(phi, dtype=complex)
        return cls(grid, np.stack([phi.real, phi.imag], axis=1).astype(complex))

    def to_scalar(self) -> np.ndarray:
        """psi1 + i psi2; the complex wavefunction when the state is physical (real pair)."""
        return self.values[:, 0] + 1j * self.values[:, 1]

    @property
    def at_origin(self) -> np.ndarray:
        return self.values[self.grid.center]

    def rotated(self, theta: float) -> "FieldState":
        """e^{j theta} applied pointwise, j the symplectic unit (i in scalar form)."""
        c, s = np.cos(theta), np.sin(theta)
        v = self.values
        return FieldState(self.grid, np.stack([c * v[:, 0] - s * v[:, 1], s * v[:, 0] + c * v[:, 1]], axis=1))


def apply_j(values: np.ndarray) -> np.ndarray:
    """j (psi1, psi2) = (-psi2, psi1)."""
    return np.stack([-values[..., 1], values[..., 0]], axis=-1)


def inner(f: FieldState, g: FieldState) -> complex:
    """Hermitian L2 pairing ⟨f, g⟩ = ∫ (f, conj(g)) dx by trapezoid quadrature."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    w = f.grid.trapz_weights()
    return complex(np.sum(w[:, None] * f.values * np.conj(g.values)))


def symplectic_form(psi: FieldState, eta: FieldState) -> complex:
    """Omega(psi, eta) = ⟨psi, j eta⟩."""
    if psi.grid != eta.grid:
        raise ValueError("fields live on different grids")
    return inner(psi, FieldState(eta.grid, apply_j(eta.values)))


def charge(f: FieldState) -> float:
    """Q = ∫ |psi1|^2 + |psi2|^2 dx."""
    w = f.grid.trapz_weights()
    return float(np.sum(w * np.sum(np.abs(f.values) ** 2, axis=1)))


def hamiltonian(f: FieldState, nl: Nonlinearity) -> float:
    """H = 1/2 ∫ |psi'|^2 dx + U(psi(0)).

    The gradient quadrature uses cell-midpoint differences (psi_{m+1}-psi_m)/dx,
    which is the exact energy invariant of the discrete-gradient Crank-Nicolson
    flow and is second-order even across the kink at x = 0.
    """
    v = f.values
    dx = f.grid.dx
    diffs = (v[1:] - v[:-1]) / dx
    kinetic = 0.5 * float(np.sum(np.abs(diffs) ** 2) * dx)
    # ghost cells of the Dirichlet box (walls one node beyond the grid ends)
    kinetic += 0.5 * float(np.sum(np.abs(v[0]) ** 2 + np.abs(v[-1]) ** 2)) / dx
    return kinetic + potential_U(nl, f.at_origin)


def weighted_norm(f: FieldState, beta: float, kind: str) -> float:
    """Weighted norms of the dispersive estimates.

    kind="Linf_minus_beta": sup of (1+|x|)^(-beta) |f(x)|;
    kind="L1_beta": ∫ (1+|x|)^(beta) |f(x)| dx.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    mag = np.sqrt(np.sum(np.abs(f.values) ** 2, axis=1))
    x = f.grid.x
    if kind == "Linf_minus_beta":
        return float(np.max((1.0 + np.abs(x)) ** (-beta) * mag))
    if kind == "L1_beta":
        return float(np.sum(f.grid.trapz_weights() * (1.0 + np.abs(x)) ** beta * mag))
    raise ValueError(f"unknown norm kind: {kind}")
