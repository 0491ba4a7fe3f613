"""Exact spectral data of the linearization at a solitary wave.

The linearized flow is generated by C = j^{-1}B with
B = -d^2/dx^2 + omega - delta(x)[a + 2a'C^2 P1].  Its resolvent kernel,
eigenvalues, and eigenfunctions are all closed-form in the two branched
frequencies k_pm(lambda) = sqrt(-omega -/+ i lambda).  Branch bookkeeping is
explicit: every evaluation carries the side of the spectral cut it sits on,
and the normative convention k_plus(2 i mu + 0) < 0 is what fixes the sign
of the radiation damping downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.signal import lfilter

from .nonlinearity import FieldState, Grid, Nonlinearity, apply_j, inner
from .solitary import SolitonParams, domega_profile, soliton_field

__all__ = [
    "BranchedFrequency",
    "Linearization",
    "BranchConventionError",
    "PoleProximityError",
    "k_pm",
    "determinant_D",
    "mu_formula",
    "window_endpoints",
    "discrete_eigenvalue",
    "spectral_condition",
    "EigenMode",
    "eigenfunction_u",
    "continuous_eigenfunctions",
    "tau_plus_at_origin",
    "resolvent_kernel",
    "resolvent_apply",
    "resolvent_jump",
    "SpectralBasis",
    "apply_C_grid",
    "eigen_residual",
]

V_PLUS = np.array([1.0, 1.0j])
V_MINUS = np.array([1.0, -1.0j])

_CUT_TOL = 1e-12


class BranchConventionError(RuntimeError):
    """Closed-form and numeric spectral data disagree: a branch choice is wrong."""


class PoleProximityError(RuntimeError):
    """Resolvent requested too close to a pole of D."""


@dataclass(frozen=True)
class BranchedFrequency:
    """Spectral parameter plus the side of the cut used for limits on C+- .

    side="plus" is the lambda+0 limit (approach from Re lambda > 0), the
    paper-normative one; it makes k_plus real and negative on C+.
    """

    lam: complex
    side: str = "plus"

    def __post_init__(self):
        if self.side not in ("plus", "minus"):
            raise ValueError("side must be 'plus' or 'minus'")


def _branched_sqrt(zeta: complex, approach_from_below: bool) -> complex:
    """sqrt with cut on [0, inf) and Im >= 0 off the cut.

    On the cut the one-sided limit is +sqrt when approached from above
    (arg -> 0) and -sqrt when approached from below (arg -> 2 pi).
    """
    if abs(zeta.imag) <= _CUT_TOL * max(1.0, abs(zeta)) and zeta.real >= 0.0:
        root = np.sqrt(zeta.real)
        return -root if approach_from_below else root
    w = np.sqrt(complex(zeta))
    if w.imag < 0:
        w = -w
    return w


def k_pm(omega: float, bf: BranchedFrequency, which: str) -> complex:
    """k_pm(lambda) = sqrt(-omega -/+ i lambda) with Im > 0 off the respective cut.

    The lambda+0 limit onto C+ maps zeta = -omega - i lambda to the lower
    edge of [0, inf), hence k_plus(i nu + 0) = -sqrt(nu - omega) < 0; onto
    C- it maps zeta = -omega + i lambda to the upper edge, so
    k_minus(-i nu + 0) = +sqrt(nu - omega).
    """
    lam = complex(bf.lam)
    if which == "plus":
        zeta = -omega - 1j * lam
        below = bf.side == "plus"
    elif which == "minus":
        zeta = -omega + 1j * lam
        below = bf.side == "minus"
    else:
        raise ValueError("which must be 'plus' or 'minus'")
    return _branched_sqrt(zeta, approach_from_below=below)


def mu_formula(a: float, beta: float) -> float:
    """Closed-form discrete frequency mu = (beta/2) sqrt(a^2 - beta^2)."""
    return 0.5 * beta * np.sqrt(a * a - beta * beta)


def window_endpoints(a: float, C: float) -> tuple[float, float]:
    """The a'(C^2) window on which the internal mode satisfies 2 mu > omega."""
    lo = a / (np.sqrt(2.0) * C * C)
    hi = a * np.sqrt(2.0) * (1.0 + np.sqrt(3.0)) / (4.0 * C * C)
    return lo, hi


@dataclass(frozen=True)
class Linearization:
    """Parameters of the linearization at a solitary wave.

    alpha = a + a'C^2 and beta = a'C^2 enter the determinant
    D = 2 i alpha (k+ + k-) - 4 k+ k- + alpha^2 - beta^2; mu is present only
    when +-i mu are genuine roots of D on the spectral gap, which happens for
    beta in (a/sqrt(2), a).
    """

    omega: float
    C: float
    a: float
    aprime: float
    a2: float
    a3: float
    alpha: float
    beta: float
    mu: Optional[float]

    @classmethod
    def from_soliton(cls, nl: Nonlinearity, p: SolitonParams) -> "Linearization":
        p.validate(nl)
        s = p.C**2
        a = nl.eval_a(s)
        ap = nl.eval_a(s, 1)
        beta = ap * s
        alpha = a + beta
        mu = None
        if a / np.sqrt(2.0) < beta < a:
            mu = mu_formula(a, beta)
        lin = cls(
            omega=p.omega, C=p.C, a=a, aprime=ap, a2=nl.eval_a(s, 2), a3=nl.eval_a(s, 3),
            alpha=alpha, beta=beta, mu=mu,
        )
        if mu is not None:
            resid = abs(determinant_D(lin, BranchedFrequency(1j * mu)))
            if resid > 1e-10 * (alpha**2 + beta**2):
                raise BranchConventionError(f"|D(i mu)| = {resid} not a root; branch bug")
        return lin

    @property
    def b(self) -> float:
        return 2.0 * self.beta

    @property
    def decay_rates(self) -> tuple[float, float]:
        """(p, q) = (sqrt(omega - mu), sqrt(omega + mu)) of the internal mode."""
        if self.mu is None:
            raise ValueError("no discrete eigenvalue for these parameters")
        return np.sqrt(self.omega - self.mu), np.sqrt(self.omega + self.mu)

    @property
    def rho(self) -> float:
        """Eigenfunction coefficient rho = -(alpha + 2 i k_minus(i mu))/beta."""
        _, q = self.decay_rates
        return -(self.alpha - 2.0 * q) / self.beta

    @property
    def delta_analytic(self) -> float:
        """delta = ⟨u, ju⟩ / i = 2 (rho^2/p - 1/q) by exact exponential integrals."""
        p, q = self.decay_rates
        return 2.0 * (self.rho**2 / p - 1.0 / q)


def determinant_D(lin: Linearization, bf: BranchedFrequency) -> complex:
    """D(lambda) = 2 i alpha (k+ + k-) - 4 k+ k- + alpha^2 - beta^2."""
    kp = k_pm(lin.omega, bf, "plus")
    km = k_pm(lin.omega, bf, "minus")
    return 2j * lin.alpha * (kp + km) - 4.0 * kp * km + lin.alpha**2 - lin.beta**2


def _determinant_on_gap(lin: Linearization, s: float) -> float:
    """D(i s) for 0 <= s < omega, where both k_pm are purely imaginary (real value)."""
    pt = np.sqrt(lin.omega - s)
    qt = np.sqrt(lin.omega + s)
    return float(-2.0 * lin.alpha * (pt + qt) + 4.0 * pt * qt + lin.alpha**2 - lin.beta**2)


def discrete_eigenvalue(lin: Linearization) -> Optional[complex]:
    """i mu from Eq.-gaga cross-validated against a root search of D on (0, i omega).

    Returns None when no discrete eigenvalue exists: beta outside (0, a) or
    beta <= a/sqrt(2) (there the closed-form value is not a root of D).
    """
    if not (0.0 < lin.beta < lin.a) or lin.beta <= lin.a / np.sqrt(2.0):
        return None
    mu_cf = mu_formula(lin.a, lin.beta)
    # bracket away from the double root of D at lambda = 0
    lo = 0.5 * mu_cf
    hi = mu_cf + 0.5 * (lin.omega - mu_cf)
    f_lo, f_hi = _determinant_on_gap(lin, lo), _determinant_on_gap(lin, hi)
    if not (f_lo < 0.0 < f_hi):
        grid_s = np.linspace(1e-6 * lin.omega, lin.omega * (1 - 1e-9), 4097)
        vals = np.array([_determinant_on_gap(lin, s) for s in grid_s])
        sign_change = np.nonzero((vals[:-1] < 0) & (vals[1:] >= 0))[0]
        if len(sign_change) == 0:
            raise BranchConventionError("no sign change of D on the spectral gap where a root is expected")
        lo, hi = grid_s[sign_change[0]], grid_s[sign_change[0] + 1]
    mu_num = brentq(lambda s: _determinant_on_gap(lin, s), lo, hi, xtol=1e-14, rtol=8.9e-16)
    if abs(mu_num - mu_cf) > 1e-9 * max(1.0, lin.omega):
        raise BranchConventionError(f"closed-form mu = {mu_cf} vs root search {mu_num}")
    return 1j * mu_cf


def spectral_condition(lin: Linearization) -> str:
    """Classify a' against the spectral window (2 mu > omega)."""
    if lin.beta <= 0.0 or lin.beta >= lin.a:
        return "no_eigenvalue"
    lo, hi = window_endpoints(lin.a, lin.C)
    ap = lin.aprime
    if ap <= lo:
        return "below_window"
    if ap < hi:
        return "in_window"
    return "above_window"


@dataclass(frozen=True)
class EigenMode:
    """Internal mode u (eigenvalue +i mu), its conjugate partner, and rho."""

    u: FieldState
    ustar: FieldState
    rho: float


def eigenfunction_u(lin: Linearization, grid: Grid) -> EigenMode:
    """Sample u = rho e^{i k+ |x|} v+ + e^{i k- |x|} v- at lambda = i mu.

    u1 is real and u2 purely imaginary; u* = (u1, -u2) is the -i mu
    eigenfunction.  The same rho reappears in the closed-form radiation
    coupling, which is why this normalization is pinned package-wide.
    """
    if lin.mu is None:
        raise ValueError("no discrete eigenvalue for these parameters")
    p, q = lin.decay_rates
    if abs(lin.alpha - 2.0 * q) < 1e-14 * lin.alpha:
        raise BranchConventionError("alpha + 2 i k_minus = 0 should be impossible at an eigenvalue")
    rho = lin.rho
    ax = np.abs(grid.x)
    ep = np.exp(-p * ax)
    eq = np.exp(-q * ax)
    vals = rho * ep[:, None] * V_PLUS[None, :] + eq[:, None] * V_MINUS[None, :]
    u = FieldState(grid, vals)
    ustar = FieldState(grid, np.stack([vals[:, 0], -vals[:, 1]], axis=1))
    return EigenMode(u=u, ustar=ustar, rho=rho)


def continuous_eigenfunctions(lin: Linearization, nu: float, grid: Grid) -> tuple[FieldState, FieldState]:
    """Even/odd generalized eigenfunctions (tau, s) at lambda = i nu + 0, |nu| > omega."""
    if abs(nu) <= lin.omega:
        raise ValueError("continuous spectrum requires |nu| > omega")
    bf = BranchedFrequency(1j * nu, "plus")
    kp = k_pm(lin.omega, bf, "plus")
    km = k_pm(lin.omega, bf, "minus")
    D = determinant_D(lin, bf)
    ax = np.abs(grid.x)
    if nu > 0:
        k_osc, k_dec, v_osc, v_dec = kp, km, V_PLUS, V_MINUS
    else:
        k_osc, k_dec, v_osc, v_dec = km, kp, V_MINUS, V_PLUS
    tau_vals = (
        (np.conj(D) * np.exp(1j * k_osc * ax) - D * np.exp(-1j * k_osc * ax))[:, None] * v_osc[None, :]
        + (4.0 * lin.beta * 1j * k_osc * np.exp(1j * k_dec * ax))[:, None] * v_dec[None, :]
    )
    s_vals = np.sin(k_osc * grid.x)[:, None] * v_osc[None, :]
    return FieldState(grid, tau_vals), FieldState(grid, s_vals)


def tau_plus_at_origin(lin: Linearization, nu: float) -> np.ndarray:
    """tau_plus(i nu + 0) at x = 0 in the factored form sigma (kappa v+ + v-)."""
    bf = BranchedFrequency(1j * nu, "plus")
    kp = k_pm(lin.omega, bf, "plus")
    km = k_pm(lin.omega, bf, "minus")
    sigma = 4.0 * lin.beta * 1j * kp
    kappa = -(lin.alpha + 2j * km) / lin.beta
    return sigma * (kappa * V_PLUS + V_MINUS)


def _pole_guard(lin: Linearization, bf: BranchedFrequency) -> complex:
    D = determinant_D(lin, bf)
    scale = lin.alpha**2 + lin.beta**2
    if abs(D) < 1e-8 * scale:
        raise PoleProximityError(f"|D| = {abs(D)} below pole guard at lambda = {bf.lam}")
    return D


def resolvent_kernel(lin: Linearization, bf: BranchedFrequency, x: float, y: float,
                     route: str = "gamma_p") -> np.ndarray:
    """2x2 kernel of (C - lambda)^{-1}, either as Gamma + P or as sum A_k tau_k."""
    D = _pole_guard(lin, bf)
    kp = k_pm(lin.omega, bf, "plus")
    km = k_pm(lin.omega, bf, "minus")
    exy_p = np.exp(1j * kp * abs(x - y))
    exy_m = np.exp(1j * km * abs(x - y))
    sxy_p = np.exp(1j * kp * (abs(x) + abs(y)))
    sxy_m = np.exp(1j * km * (abs(x) + abs(y)))
    if route == "gamma_p":
        Ep = exy_p - sxy_p
        Em = exy_m - sxy_m
        g_minus = Ep / (4.0 * kp) - Em / (4.0 * km)
        g_plus = Ep / (4.0 * kp) + Em / (4.0 * km)
        gamma = np.array([[g_minus, -1j * g_plus], [1j * g_plus, g_minus]])
        m3 = np.array([[np.exp(1j * kp * abs(x)), np.exp(1j * km * abs(x))],
                       [1j * np.exp(1j * kp * abs(x)), -1j * np.exp(1j * km * abs(x))]])
        m4 = np.array([[1j * lin.alpha - 2.0 * km, 1j * lin.beta],
                       [-1j * lin.beta, -1j * lin.alpha + 2.0 * kp]])
        m5 = np.array([[np.exp(1j * kp * abs(y)), -1j * np.exp(1j * kp * abs(y))],
                       [np.exp(1j * km * abs(y)), 1j * np.exp(1j * km * abs(y))]])
        return gamma + (m3 @ m4 @ m5) / (2.0 * D)
    if route == "decomposition":
        A1 = (exy_p - sxy_p) / (4.0 * kp)
        A2 = (1j * lin.alpha - 2.0 * km) / (2.0 * D) * sxy_p
        A3 = 1j * lin.beta / (2.0 * D) * np.exp(1j * kp * abs(x)) * np.exp(1j * km * abs(y))
        A4 = -1j * lin.beta / (2.0 * D) * np.exp(1j * km * abs(x)) * np.exp(1j * kp * abs(y))
        A5 = (-1j * lin.alpha + 2.0 * kp) / (2.0 * D) * sxy_m
        A6 = -(exy_m - sxy_m) / (4.0 * km)
        t12 = np.array([[1, -1j], [1j, 1]])
        t3 = np.array([[1, 1j], [1j, -1]])
        t4 = np.array([[1, -1j], [-1j, -1]])
        t56 = np.array([[1, 1j], [-1j, 1]])
        return (A1 + A2) * t12 + A3 * t3 + A4 * t4 + (A5 + A6) * t56
    raise ValueError(f"unknown route: {route}")


def _exp_convolve(k: complex, weighted: np.ndarray, dx: float) -> np.ndarray:
    """sum_j w_j g_j e^{i k |x_m - x_j|} for all m, by stable forward/backward recursions."""
    r = np.exp(1j * k * dx)
    fwd = lfilter([1.0], [1.0, -r], weighted)
    bwd = lfilter([1.0], [1.0, -r], weighted[::-1])[::-1]
    return fwd + bwd - weighted


def resolvent_apply(lin: Linearization, bf: BranchedFrequency, g: FieldState) -> FieldState:
    """(C - lambda)^{-1} g on the grid through the closed-form kernel, O(n)."""
    D = _pole_guard(lin, bf)
    kp = k_pm(lin.omega, bf, "plus")
    km = k_pm(lin.omega, bf, "minus")
    grid = g.grid
    w = grid.trapz_weights()
    ax = np.abs(grid.x)
    gp = g.values[:, 0] - 1j * g.values[:, 1]
    gm = g.values[:, 0] + 1j * g.values[:, 1]
    ep = np.exp(1j * kp * ax)
    em = np.exp(1j * km * ax)
    Ip = np.sum(w * ep * gp)
    Im_ = np.sum(w * em * gm)
    u_p = _exp_convolve(kp, w * gp, grid.dx) - ep * Ip
    u_m = _exp_convolve(km, w * gm, grid.dx) - em * Im_
    out1 = u_p / (4.0 * kp) - u_m / (4.0 * km)
    out2 = 1j * u_p / (4.0 * kp) + 1j * u_m / (4.0 * km)
    Jp = (1j * lin.alpha - 2.0 * km) * Ip + 1j * lin.beta * Im_
    Jm = -1j * lin.beta * Ip + (-1j * lin.alpha + 2.0 * kp) * Im_
    out1 = out1 + (ep * Jp + em * Jm) / (2.0 * D)
    out2 = out2 + 1j * (ep * Jp - em * Jm) / (2.0 * D)
    return FieldState(grid, np.stack([out1, out2], axis=1))


def resolvent_jump(lin: Linearization, nu: float, x: float, y: float) -> np.ndarray:
    """Rank-2 representation of R(lambda+0) - R(lambda-0) on the cuts.

    Equals -(tau ⊗ conj(tau))/(8 i k D conj(D)) j - (s ⊗ conj(s))/(2 i k) j
    with every branched quantity taken on the lambda+0 side.
    """
    if abs(nu) <= lin.omega:
        raise ValueError("jump defined on the cuts |nu| > omega only")
    bf = BranchedFrequency(1j * nu, "plus")
    kp = k_pm(lin.omega, bf, "plus")
    km = k_pm(lin.omega, bf, "minus")
    D = determinant_D(lin, bf)
    k_osc = kp if nu > 0 else km

    def tau_at(z):
        azx = abs(z)
        if nu > 0:
            osc = (np.conj(D) * np.exp(1j * kp * azx) - D * np.exp(-1j * kp * azx)) * V_PLUS
            dec = 4.0 * lin.beta * 1j * kp * np.exp(1j * km * azx) * V_MINUS
        else:
            osc = (np.conj(D) * np.exp(1j * km * azx) - D * np.exp(-1j * km * azx)) * V_MINUS
            dec = 4.0 * lin.beta * 1j * km * np.exp(1j * kp * azx) * V_PLUS
        return osc + dec

    def s_at(z):
        return np.sin(k_osc * z) * (V_PLUS if nu > 0 else V_MINUS)

    j_mat = np.array([[0.0, -1.0], [1.0, 0.0]])
    tau_x, tau_y = tau_at(x), tau_at(y)
    s_x, s_y = s_at(x), s_at(y)
    term_tau = -np.outer(tau_x, np.conj(tau_y)) / (8j * k_osc * D * np.conj(D))
    term_s = -np.outer(s_x, np.conj(s_y)) / (2j * k_osc)
    return (term_tau + term_s) @ j_mat


class SymplecticFrame:
    """Symplectic decomposition X0 ⊕ X1 ⊕ Xc realized on a grid.

    Built from explicit basis fields: the null-space pair (Psi, d_omega Psi)
    and optionally the internal-mode pair (u, u*).  The mode pair is
    Gram-Schmidt-corrected against X0 so that the three projectors are
    mutually annihilating and idempotent to machine precision on the grid.
    """

    def __init__(self, psi: FieldState, dpsi: FieldState,
                 u: Optional[FieldState] = None, ustar: Optional[FieldState] = None):
        self.grid = psi.grid
        self.psi = psi
        self.jpsi = FieldState(self.grid, apply_j(psi.values))
        self.dpsi = dpsi
        self.delta_pair = inner(self.psi, self.dpsi)  # ⟨Psi, d_omega Psi⟩ > 0 in the stable regime
        if abs(self.delta_pair) < 1e-12:
            raise ZeroDivisionError("degenerate ⟨Psi, d_omega Psi⟩: charge monotonicity violated")
        if u is not None:
            u1 = self._p0_complement(u)
            us1 = self._p0_complement(ustar)
            us2 = FieldState(self.grid, us1.values
                             - (self._omega_pair(us1, u1) / self._omega_pair(u1, u1)) * u1.values)
            self.u_basis = u1
            self.ustar_basis = us2
            self.norm_u = self._omega_pair(u1, u1)
            self.norm_ustar = self._omega_pair(us2, us2)
            self.has_mode = True
        else:
            self.has_mode = False

    def _omega_pair(self, f: FieldState, g: FieldState) -> complex:
        return inner(f, FieldState(self.grid, apply_j(g.values)))

    def _p0_complement(self, f: FieldState) -> FieldState:
        return FieldState(self.grid, f.values - self._p0_values(f))

    def _p0_values(self, f: FieldState) -> np.ndarray:
        c_j = inner(f, FieldState(self.grid, apply_j(self.dpsi.values)))
        c_d = inner(f, self.psi)
        return (c_j * self.jpsi.values + c_d * self.dpsi.values) / self.delta_pair

    def project(self, f: FieldState, which: str) -> FieldState:
        """Symplectic projection onto X0 ('P0'), X1 ('P1'), or Xc ('Pc')."""
        if which == "P0":
            return FieldState(self.grid, self._p0_values(f))
        if which == "P1":
            if not self.has_mode:
                raise ValueError("no discrete subspace without an internal mode")
            cu = self._omega_pair(f, self.u_basis) / self.norm_u
            cs = self._omega_pair(f, self.ustar_basis) / self.norm_ustar
            return FieldState(self.grid, cu * self.u_basis.values + cs * self.ustar_basis.values)
        if which == "Pc":
            vals = f.values - self._p0_values(f)
            if self.has_mode:
                cu = self._omega_pair(f, self.u_basis) / self.norm_u
                cs = self._omega_pair(f, self.ustar_basis) / self.norm_ustar
                vals = vals - cu * self.u_basis.values - cs * self.ustar_basis.values
            return FieldState(self.grid, vals)
        raise ValueError(f"unknown projector: {which}")

    def mode_coefficient(self, f: FieldState) -> complex:
        """z = ⟨f, j u⟩ / ⟨u, j u⟩ with the grid-corrected mode."""
        if not self.has_mode:
            raise ValueError("no discrete mode")
        return self._omega_pair(f, self.u_basis) / self.norm_u


class SpectralBasis(SymplecticFrame):
    """SymplecticFrame built from the continuum closed forms sampled on the grid."""

    def __init__(self, nl: Nonlinearity, params: SolitonParams, grid: Grid):
        self.nl = nl
        self.params = params
        self.lin = Linearization.from_soliton(nl, params)
        psi = soliton_field(SolitonParams(params.C, params.omega, 0.0), grid)
        dprof = domega_profile(nl, params, grid.x)
        dpsi = FieldState(grid, np.stack([dprof, np.zeros_like(dprof)], axis=1).astype(complex))
        if self.lin.mu is not None:
            mode = eigenfunction_u(self.lin, grid)
            self.mode = mode
            super().__init__(psi, dpsi, mode.u, mode.ustar)
        else:
            self.mode = None
            super().__init__(psi, dpsi)


def project(f: FieldState, nl: Nonlinearity, params: SolitonParams, which: str) -> FieldState:
    return SpectralBasis(nl, params, f.grid).project(f, which)


def apply_C_grid(lin: Linearization, f: FieldState) -> FieldState:
    """Discrete C = j^{-1} B with the delta lumped as weight 1/dx at the origin node."""
    v = f.values
    grid = f.grid
    dx2 = grid.dx**2
    lap = np.zeros_like(v)
    lap[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dx2
    lap[0] = (v[1] - 2.0 * v[0]) / dx2
    lap[-1] = (v[-2] - 2.0 * v[-1]) / dx2
    d1 = -lap[:, 0] + lin.omega * v[:, 0]
    d2 = -lap[:, 1] + lin.omega * v[:, 1]
    c = grid.center
    d1[c] -= (lin.a + lin.b) / grid.dx * v[c, 0]
    d2[c] -= lin.a / grid.dx * v[c, 1]
    return FieldState(grid, np.stack([d2, -d1], axis=1))


def eigen_residual(lin: Linearization, grid: Grid) -> float:
    """dx-weighted l1 residual ||(C - i mu) u||_1 / ||u||_1 on the grid."""
    mode = eigenfunction_u(lin, grid)
    r = apply_C_grid(lin, mode.u).values - 1j * lin.mu * mode.u.values
    w = grid.trapz_weights()
    num = float(np.sum(w * np.sqrt(np.sum(np.abs(r) ** 2, axis=1))))
    den = float(np.sum(w * np.sqrt(np.sum(np.abs(mode.u.values) ** 2, axis=1))))
    return num / den
