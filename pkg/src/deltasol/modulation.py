"""Modulation frame (omega, theta, z, f) and the predicted decay laws.

A state close to the soliton family is written as
psi = e^{j theta} (Psi_omega + z u + conj(z) u* + f) with f symplectically
orthogonal to the null space and the discrete mode.  The frame conditions
are the two scalar equations ⟨chi, Psi⟩ = ⟨chi, j d_omega Psi⟩ = 0 solved by
a damped Newton iteration; z then falls out of one symplectic pairing.

All grid-side frame objects are built from the exact discrete soliton
family (see gridfamily): the dynamics lives on the discrete manifold, and
referencing the sampled continuum profiles instead would floor f at the
O(dx^2) manifold mismatch and excite the spurious split of the zero Jordan
block.  The continuum closed forms stay on the prediction side of every
comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares
from scipy.sparse.linalg import eigs

from .evolution import (EvolutionConfig, Trajectory, evolve_linearized, free_flow,
                        linearized_generator)
from .gridfamily import DiscreteSolitonFamily
from .nonlinearity import FieldState, Grid, Nonlinearity, apply_j, inner, weighted_norm
from .solitary import SolitonParams
from .spectral import (BranchedFrequency, Linearization, SymplecticFrame, eigenfunction_u,
                       mu_formula, resolvent_apply, spectral_condition)

__all__ = [
    "ExtractionError",
    "GridBasis",
    "ModulationTrack",
    "FitResult",
    "prepare_initial_data",
    "extract_frame",
    "ModulationTracker",
    "track",
    "fit_ricatti",
    "fit_decay_laws",
    "dispersive_decay_check",
    "scattering_residual",
]


class ExtractionError(RuntimeError):
    """Newton iteration for the modulation frame failed to converge."""


def _amplitude_near(nl: Nonlinearity, omega: float, c_prev: float) -> float:
    """Track the continuum amplitude branch a(C^2) = 2 sqrt(omega) from c_prev."""
    target = 2.0 * np.sqrt(omega)
    c = c_prev
    for _ in range(60):
        fval = nl.eval_a(c * c) - target
        fp = 2.0 * c * nl.eval_a(c * c, 1)
        if fp == 0:
            raise ExtractionError("a'(C^2) = 0 while tracking the amplitude branch")
        step = fval / fp
        c -= step
        if abs(step) < 1e-14 * max(1.0, abs(c)):
            return float(c)
    raise ExtractionError("amplitude branch tracking did not converge")


class GridBasis(SymplecticFrame):
    """Symplectic frame of the discrete soliton family at one omega.

    The null-space pair comes from the family's closed forms; the internal
    mode is either the continuum eigenfunction sampled on the grid
    (mode_source="sampled", cheap, used in tracking) or the numerically exact
    discrete eigenvector (mode_source="eigs", used for long linearized runs
    where O(dx^2) mode leakage would floor the decay).
    """

    def __init__(self, nl: Nonlinearity, omega: float, grid: Grid,
                 c_guess: Optional[float] = None, mode_source: str = "sampled"):
        self.nl = nl
        self.omega = omega
        self.family = DiscreteSolitonFamily(nl, grid)
        self.C = self.family.amplitude(omega, c_guess)
        psi = self.family.field(omega, self.C)
        dprof = self.family.dprofile(omega, self.C)
        dpsi = FieldState(grid, np.stack([dprof, np.zeros_like(dprof)], axis=1).astype(complex))
        c_cont = _amplitude_near(nl, omega, self.C)
        self.lin = Linearization.from_soliton(nl, SolitonParams(c_cont, omega, 0.0))
        if self.lin.mu is not None:
            if mode_source == "sampled":
                mode = eigenfunction_u(self.lin, grid)
                u, ustar = mode.u, mode.ustar
            elif mode_source == "eigs":
                u, ustar = self._discrete_mode(grid)
            else:
                raise ValueError(f"unknown mode_source: {mode_source}")
            super().__init__(psi, dpsi, u, ustar)
        else:
            super().__init__(psi, dpsi)

    def _discrete_mode(self, grid: Grid):
        a, ab = self.family.delta_couplings(self.omega, self.C)
        gen = linearized_generator(grid, self.omega, a, ab).astype(complex)
        target = mu_formula(self.lin.a, self.lin.beta)
        vals, vecs = eigs(gen, k=1, sigma=1j * target, which="LM", tol=1e-12)
        v = vecs[:, 0]
        n = grid.n
        u1, u2 = v[:n], v[n:]
        phase = u1[grid.center]
        u1, u2 = u1 / phase, u2 / phase  # first component real at the origin
        # enforce the (real, imaginary) component structure exactly
        u1 = u1.real.astype(complex)
        u2 = 1j * u2.imag
        scale = self.lin.rho + 1.0  # match the continuum normalization at x = 0
        u_vals = scale * np.stack([u1, u2], axis=1)
        ustar_vals = np.stack([u_vals[:, 0], -u_vals[:, 1]], axis=1)
        return FieldState(grid, u_vals), FieldState(grid, ustar_vals)

    def delta_couplings(self) -> tuple[float, float]:
        return self.family.delta_couplings(self.omega, self.C)


@dataclass
class ModulationTrack:
    t: np.ndarray
    omega: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    z: np.ndarray
    f_inf_mbeta: np.ndarray
    f_l2: np.ndarray
    beta: float
    events: list = field(default_factory=list)

    @property
    def y(self) -> np.ndarray:
        return np.abs(self.z) ** 2


@dataclass
class FitResult:
    model: str
    params: dict  # name -> (value, one-sigma confidence)
    window: tuple[float, float]
    rms_residual: float
    extras: dict = field(default_factory=dict)


def prepare_initial_data(p: SolitonParams, z0: complex, f0: Optional[FieldState],
                         nl: Nonlinearity, grid: Grid) -> FieldState:
    """Assemble e^{j theta0}[Psi + z0 u + conj(z0) u* + Pc f0] on the grid.

    f0 is projected onto the continuous subspace first, so the stored datum
    satisfies the frame conditions exactly (round-trips through
    extract_frame at solver precision).
    """
    basis = GridBasis(nl, p.omega, grid)
    vals = basis.psi.values.copy()
    if z0 != 0:
        if not basis.has_mode:
            raise ValueError("z0 != 0 requires an internal mode")
        vals = vals + z0 * basis.u_basis.values + np.conj(z0) * basis.ustar_basis.values
    if f0 is not None:
        vals = vals + basis.project(f0, "Pc").values
    return FieldState(grid, vals).rotated(p.theta)


def extract_frame(psi: FieldState, nl: Nonlinearity, guess: tuple[float, float],
                  c_guess: Optional[float] = None, beta: float = 2.0,
                  tol: float = 1e-12, max_iter: int = 60, multi_start: bool = True):
    """Solve the frame conditions for (omega, theta); return (omega, theta, z, f).

    chi = e^{-j theta} psi - Psi_omega must satisfy ⟨chi, Psi⟩ = 0 and
    ⟨chi, j d_omega Psi⟩ = 0 with the discrete-family Psi; the Jacobian is
    analytic through the family's closed-form omega-derivatives.  The caller
    supplies a warm-start guess; on divergence a fan of neighboring starts is
    tried (strong kicks swing the frame quickly) before raising ExtractionError.
    """
    if multi_start:
        starts = [(0.0, 0.0)]
        for domega in (0.05, -0.05, 0.12, -0.12, 0.25):
            for dtheta in (0.0, 0.4, -0.4, 0.9, -0.9):
                starts.append((domega, dtheta))
        last_exc = None
        for domega, dtheta in starts:
            try:
                return extract_frame(psi, nl, (guess[0] + domega, guess[1] + dtheta),
                                     c_guess=c_guess, beta=beta, tol=tol,
                                     max_iter=max_iter, multi_start=False)
            except (ExtractionError, ValueError, RuntimeError, ZeroDivisionError) as exc:
                last_exc = exc
        raise ExtractionError(f"frame Newton failed from all starts: {last_exc}")
    omega, theta = float(guess[0]), float(guess[1])
    grid = psi.grid
    family = DiscreteSolitonFamily(nl, grid)
    scale = max(1.0, float(np.max(np.abs(psi.values))))
    w = grid.trapz_weights()[:, None]

    def assemble(om, th, c_start):
        c = family.amplitude(om, c_start)
        prof = family.profile(om, c)
        psi_s = np.stack([prof, np.zeros_like(prof)], axis=1).astype(complex)
        dprof = family.dprofile(om, c)
        dpsi = np.stack([dprof, np.zeros_like(dprof)], axis=1).astype(complex)
        chi_vals = psi.rotated(-th).values - psi_s
        return c, psi_s, dpsi, chi_vals

    def residual(chi_vals, psi_s, dpsi):
        r1 = float(np.real(np.sum(w * chi_vals * np.conj(psi_s))))
        r2 = float(np.real(np.sum(w * chi_vals * np.conj(apply_j(dpsi)))))
        return np.array([r1, r2])

    c = c_guess if c_guess is not None else None
    c, psi_s, dpsi, chi_vals = assemble(omega, theta, c)
    res = residual(chi_vals, psi_s, dpsi)
    for _ in range(max_iter):
        if np.linalg.norm(res) <= tol * scale:
            break
        delta_pair = float(np.real(np.sum(w * psi_s * np.conj(dpsi))))
        d2prof = family.d2profile(omega, c)
        d2psi = np.stack([d2prof, np.zeros_like(d2prof)], axis=1).astype(complex)
        jchi = apply_j(chi_vals)
        dr1_dom = float(np.real(np.sum(w * chi_vals * np.conj(dpsi)))) - delta_pair
        dr1_dth = -float(np.real(np.sum(w * jchi * np.conj(psi_s))))
        dr2_dom = float(np.real(np.sum(w * chi_vals * np.conj(apply_j(d2psi)))))
        dr2_dth = -float(np.real(np.sum(w * chi_vals * np.conj(dpsi)))) - delta_pair
        jac = np.array([[dr1_dom, dr1_dth], [dr2_dom, dr2_dth]])
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise ExtractionError(f"degenerate frame Jacobian: {exc}") from exc
        lam = 1.0
        for _ in range(10):
            om_try, th_try = omega + lam * step[0], theta + lam * step[1]
            if om_try <= 0:
                lam *= 0.5
                continue
            try:
                c_t, psi_t, dpsi_t, chi_t = assemble(om_try, th_try, c)
            except (ExtractionError, ValueError, RuntimeError):
                lam *= 0.5
                continue
            res_t = residual(chi_t, psi_t, dpsi_t)
            if np.linalg.norm(res_t) < np.linalg.norm(res) or lam < 1e-3:
                omega, theta, c, psi_s, dpsi, chi_vals, res = (
                    om_try, th_try, c_t, psi_t, dpsi_t, chi_t, res_t)
                break
            lam *= 0.5
        else:
            raise ExtractionError("Newton step damping exhausted")
    else:
        raise ExtractionError(f"frame Newton did not reach tolerance: |r| = {np.linalg.norm(res)}")

    basis = GridBasis(nl, omega, grid, c_guess=c)
    chi = FieldState(grid, chi_vals)
    if basis.has_mode:
        z = basis.mode_coefficient(chi)
        f_vals = chi_vals - z * basis.u_basis.values - np.conj(z) * basis.ustar_basis.values
    else:
        z = 0.0 + 0.0j
        f_vals = chi_vals
    return omega, theta, complex(z), FieldState(grid, f_vals)


class ModulationTracker:
    """Streaming frame extraction with warm starts along a trajectory."""

    def __init__(self, nl: Nonlinearity, guess: tuple[float, float], beta: float = 2.0):
        self.nl = nl
        self.beta = beta
        self._guess = (float(guess[0]), float(guess[1]))
        self._c_prev: Optional[float] = None
        self._rows: list = []
        self.events: list = []
        self._truncated = False

    def observe(self, t: float, state: FieldState) -> None:
        if self._truncated:
            return
        guess_omega, guess_theta = self._guess
        if self._rows:
            guess_theta = guess_theta + guess_omega * (t - self._rows[-1][0])
        try:
            omega, theta, z, f = extract_frame(
                state, self.nl, (guess_omega, guess_theta), c_guess=self._c_prev, beta=self.beta)
        except ExtractionError as exc:
            self.events.append(f"track truncated at t={t}: {exc}")
            self._truncated = True
            return
        self._guess = (omega, theta)
        self._c_prev = DiscreteSolitonFamily(self.nl, state.grid).amplitude(omega, self._c_prev)
        f_l2 = float(np.sqrt(np.sum(f.grid.trapz_weights() * np.sum(np.abs(f.values) ** 2, axis=1))))
        self._rows.append((t, omega, theta,
                           weighted_norm(f, self.beta, "Linf_minus_beta"), f_l2, z))

    def finalize(self) -> ModulationTrack:
        if not self._rows:
            raise ExtractionError("empty track")
        arr = self._rows
        t = np.array([r[0] for r in arr])
        omega = np.array([r[1] for r in arr])
        theta = np.unwrap(np.array([r[2] for r in arr]))
        z = np.array([r[5] for r in arr])
        f_inf = np.array([r[3] for r in arr])
        f_l2 = np.array([r[4] for r in arr])
        integral = np.concatenate([[0.0], np.cumsum(0.5 * (omega[1:] + omega[:-1]) * np.diff(t))])
        gamma = theta - integral
        return ModulationTrack(t=t, omega=omega, theta=theta, gamma=gamma, z=z,
                               f_inf_mbeta=f_inf, f_l2=f_l2, beta=self.beta, events=self.events)


def track(traj: Trajectory, nl: Nonlinearity, guess: tuple[float, float],
          beta: float = 2.0) -> ModulationTrack:
    """Frame extraction over the stored snapshots of a trajectory."""
    tracker = ModulationTracker(nl, guess, beta)
    for t, state in traj.snapshots:
        tracker.observe(t, state)
    return tracker.finalize()


def _window_mask(t: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    mask = (t >= window[0]) & (t <= window[1])
    if np.count_nonzero(mask) < 8:
        raise ValueError(f"fit window {window} selects fewer than 8 samples")
    return mask


def _linfit_loglog(t: np.ndarray, yvals: np.ndarray, window: tuple[float, float],
                   model: str) -> FitResult:
    mask = _window_mask(t, window) & (yvals > 0)
    lt = np.log(t[mask])
    ly = np.log(yvals[mask])
    A = np.stack([lt, np.ones_like(lt)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = max(len(ly) - 2, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(A.T @ A)
    return FitResult(model=model,
                     params={"slope": (float(coef[0]), float(np.sqrt(cov[0, 0]))),
                             "intercept": (float(coef[1]), float(np.sqrt(cov[1, 1])))},
                     window=window, rms_residual=float(np.sqrt(np.mean(resid**2))))


def fit_ricatti(trk: ModulationTrack, window: tuple[float, float],
                re_iK: Optional[float] = None, z0_guard: float = 0.3,
                block: Optional[float] = None) -> FitResult:
    """Fit of y = |z|^2 to the decay y(0)/(1 + lambda t) on the window.

    The mode energy wobbles at twice the mode frequency with relative
    amplitude O(|z|), so y is first averaged over blocks of a few wobble
    periods; for the decay law 1/y is linear in t with the universal slope
    d(1/y)/dt = 2 Im K, and lambda_fit = slope * y(0).  When re_iK is
    supplied, lambda_pred = 2 |Im K| y(0) is attached for comparison.
    """
    if np.abs(trk.z[0]) > z0_guard:
        raise ValueError(f"|z0| = {abs(trk.z[0])} outside the smallness guard {z0_guard}")
    t = trk.t
    y = trk.y
    mask = _window_mask(t, window) & (y > 0)
    tw, yw = t[mask], y[mask]
    if block is None:
        block = min(26.0, max(3.0 * (tw[1] - tw[0]), (window[1] - window[0]) / 12.0))
    tb, yb = [], []
    lo = tw[0]
    while lo < tw[-1]:
        m = (tw >= lo) & (tw < lo + block)
        if np.count_nonzero(m) >= 1:
            tb.append(float(np.mean(tw[m])))
            yb.append(float(np.mean(yw[m])))
        lo += block
    tb = np.array(tb)
    yb = np.array(yb)
    if len(tb) < 4:
        raise ValueError("fit window too short for block averaging")
    A = np.stack([tb, np.ones_like(tb)], axis=1)
    target = 1.0 / yb
    coef, *_ = np.linalg.lstsq(A, target, rcond=None)
    resid = target - A @ coef
    dof = max(len(tb) - 2, 1)
    cov = (float(resid @ resid) / dof) * np.linalg.inv(A.T @ A)
    slope, slope_err = float(coef[0]), float(np.sqrt(cov[0, 0]))
    y0 = float(y[0] if t[0] < window[0] else yb[0])
    lam_fit = slope * y0
    extras = {"inv_y_slope": slope, "block": block, "y0_fit": float(1.0 / coef[1]) if coef[1] else np.nan}
    env = np.maximum.accumulate(yb[::-1])[::-1]
    extras["monotone_envelope"] = bool(np.all(yb <= env[0] * 1.01))
    if re_iK is not None:
        lam_pred = 2.0 * abs(re_iK) * y0
        extras["lambda_pred"] = lam_pred
        extras["lambda_ratio"] = lam_fit / lam_pred if lam_pred else np.inf
        extras["slope_pred"] = 2.0 * abs(re_iK)
    rms = float(np.sqrt(np.mean((resid / target) ** 2)))
    return FitResult(model="ricatti_y", window=window,
                     params={"y0": (y0, 0.0), "lambda": (lam_fit, abs(slope_err * y0))},
                     rms_residual=rms, extras=extras)


def _fft_peak(t: np.ndarray, series: np.ndarray) -> float:
    """Dominant angular frequency of a detrended uniformly sampled series."""
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-6):
        raise ValueError("FFT peak detection needs uniform sampling")
    y = series - np.mean(series)
    y = y * np.hanning(len(y))
    spec = np.abs(np.fft.rfft(y))
    freqs = 2 * np.pi * np.fft.rfftfreq(len(y), d=dt)
    k = int(np.argmax(spec[1:]) + 1)
    if 1 <= k < len(spec) - 1:
        # quadratic interpolation around the peak bin
        s0, s1, s2 = spec[k - 1], spec[k], spec[k + 1]
        denom = s0 - 2 * s1 + s2
        shift = 0.5 * (s0 - s2) / denom if denom != 0 else 0.0
        return float(freqs[k] + shift * (freqs[1] - freqs[0]))
    return float(freqs[k])


def fit_decay_laws(trk: ModulationTrack, lin: Linearization,
                   window: tuple[float, float]) -> list[FitResult]:
    """Slope fits for |z| and the weighted f-norm, omega oscillation frequency
    and envelope, and the logarithmic phase correction gamma."""
    out = []
    out.append(_linfit_loglog(trk.t, np.abs(trk.z), window, "z_loglog"))
    out.append(_linfit_loglog(trk.t, trk.f_inf_mbeta, window, "f_inf_loglog"))

    mask = _window_mask(trk.t, window)
    freq = _fft_peak(trk.t[mask], trk.omega[mask])
    two_mu = 2.0 * lin.mu if lin.mu is not None else np.nan
    out.append(FitResult(model="omega_oscillation",
                         params={"freq": (freq, float(trk.t[mask][1] - trk.t[mask][0]))},
                         window=window, rms_residual=0.0,
                         extras={"two_mu": two_mu, "rel_err": abs(freq - two_mu) / two_mu}))

    omega_inf = float(np.mean(trk.omega[trk.t >= trk.t[-1] * 0.9]))
    dev = np.abs(trk.omega - omega_inf)
    period = 2 * np.pi / two_mu if np.isfinite(two_mu) else 10.0
    env_t, env_v = _block_maxima(trk.t, dev, 1.5 * period)
    env_mask = (env_t >= window[0]) & (env_t <= window[1]) & (env_v > 0)
    if np.count_nonzero(env_mask) >= 6:
        out.append(_linfit_loglog(env_t[env_mask], env_v[env_mask],
                                  (float(env_t[env_mask][0]), float(env_t[env_mask][-1])),
                                  "omega_envelope_loglog"))

    tg = trk.t[mask]
    gg = trk.gamma[mask]

    def gmodel(p):
        g_inf, cc, k = p
        return g_inf + cc * np.log1p(np.maximum(k, 0) * tg) - gg

    span = max(abs(gg[-1] - gg[0]), 1e-9)
    sol = least_squares(gmodel, x0=np.array([gg[0], np.sign(gg[-1] - gg[0]) * span, 1e-2]),
                        method="lm", max_nfev=4000)
    resid = sol.fun
    out.append(FitResult(model="gamma_log",
                         params={"gamma_inf": (float(sol.x[0]), np.nan),
                                 "c": (float(sol.x[1]), np.nan),
                                 "k": (float(sol.x[2]), np.nan)},
                         window=window, rms_residual=float(np.sqrt(np.mean(resid**2))),
                         extras={"max_residual": float(np.max(np.abs(resid)))}))
    return out


def _block_maxima(t: np.ndarray, v: np.ndarray, block: float):
    edges = np.arange(t[0], t[-1] + block, block)
    ts, vs = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (t >= lo) & (t < hi)
        if np.any(m):
            ts.append(0.5 * (lo + hi))
            vs.append(float(np.max(v[m])))
    return np.array(ts), np.array(vs)


def dispersive_decay_check(nl: Nonlinearity, params: SolitonParams, h0: FieldState,
                           cfg: EvolutionConfig, variant: str = "plain",
                           beta: float = 2.0, window: Optional[tuple[float, float]] = None,
                           stride: Optional[int] = None,
                           resolvent_offset: Optional[float] = None) -> FitResult:
    """Decay exponent of the weighted norm of the linearized flow.

    variant="plain": evolve Pc h0; variant="resolvent_shifted": additionally
    apply (C - 2 i mu - 0)^{-1} through the closed-form kernel;
    variant="keep_mode": negative control, only the generalized null space is
    removed so the surviving discrete mode oscillates without decay.

    The -0 limit onto the cut is realized at finite volume as a real offset
    of a few box level spacings (the exact on-cut kernel would dump an O(1)
    non-decaying coefficient on the single quantized level nearest 2 mu);
    the offset vanishes in the infinite-box limit.
    """
    if beta < 2:
        raise ValueError("the dispersive estimates need beta >= 2")
    basis = GridBasis(nl, params.omega, h0.grid, mode_source="eigs")
    lin = basis.lin
    if variant == "plain":
        h = basis.project(h0, "Pc")
    elif variant == "resolvent_shifted":
        if resolvent_offset is None:
            k2 = np.sqrt(2 * lin.mu - lin.omega)
            resolvent_offset = 5.0 * 2.0 * k2 * np.pi / h0.grid.half_width
        shifted = resolvent_apply(lin, BranchedFrequency(2j * lin.mu + resolvent_offset, "plus"),
                                  basis.project(h0, "Pc"))
        h = basis.project(shifted, "Pc")
    elif variant == "keep_mode":
        h = FieldState(h0.grid, h0.values - basis.project(h0, "P0").values)
    else:
        raise ValueError(f"unknown variant: {variant}")
    if window is None:
        window = (5.0, min(cfg.T, h0.grid.half_width / 2.0))
    if stride is None:
        stride = max(1, int(round(0.25 / cfg.dt)))
    times, norms = [], []

    def ob(t, state):
        times.append(t)
        norms.append(weighted_norm(state, beta, "Linf_minus_beta"))

    evolve_linearized(h, lin, cfg, observers=((stride, ob),),
                      delta_couplings=basis.delta_couplings())
    t = np.array(times)
    nv = np.array(norms)
    mask = _window_mask(t, window)
    lt = np.log1p(t[mask])
    ln = np.log(nv[mask])
    A = np.stack([lt, np.ones_like(lt)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ln, rcond=None)
    resid = ln - A @ coef
    dof = max(len(ln) - 2, 1)
    cov = (float(resid @ resid) / dof) * np.linalg.inv(A.T @ A)
    return FitResult(model=f"dispersive_{variant}",
                     params={"slope": (float(coef[0]), float(np.sqrt(cov[0, 0])))},
                     window=window, rms_residual=float(np.sqrt(np.mean(resid**2))),
                     extras={"beta": beta, "norm_initial": float(nv[0]),
                             "norm_final": float(nv[-1]),
                             "series_t": t.tolist(), "series_norm": nv.tolist()})


def scattering_residual(traj: Trajectory, trk: ModulationTrack, nl: Nonlinearity,
                        window: Optional[tuple[float, float]] = None,
                        cauchy_times: tuple[float, float] = (40.0, 80.0)) -> FitResult:
    """Free-flow scattering state and the decay of what the dressed soliton misses.

    Phi_est(t) = W(-t)[psi(t) - e^{j theta}(Psi + z u + conj(z) u*)] = W(-t) e^{j theta} f(t);
    checks the Cauchy property of Phi_est and fits the L2+sup decay of
    psi - dressed - W(t) Phi_est(t_max).
    """
    grid = traj.snapshots[0][1].grid
    snap_times = np.array([t for t, _ in traj.snapshots])

    def f_dressed(idx: int) -> FieldState:
        t, state = traj.snapshots[idx]
        k = int(np.argmin(np.abs(trk.t - t)))
        if abs(trk.t[k] - t) > 1e-9 + 1e-6 * max(1.0, t):
            raise ValueError("trajectory snapshot has no matching track row")
        omega, theta, z = trk.omega[k], trk.theta[k], trk.z[k]
        basis = GridBasis(nl, omega, grid)
        vals = basis.psi.values.copy()
        if basis.has_mode:
            vals = vals + z * basis.u_basis.values + np.conj(z) * basis.ustar_basis.values
        dressed = FieldState(grid, vals).rotated(theta)
        return FieldState(grid, state.values - dressed.values)

    def phi_est(idx: int) -> FieldState:
        return free_flow(f_dressed(idx), -snap_times[idx])

    def l2(state: FieldState) -> float:
        return float(np.sqrt(np.sum(state.grid.trapz_weights() * np.sum(np.abs(state.values)**2, axis=1))))

    def sup(state: FieldState) -> float:
        return float(np.max(np.sqrt(np.sum(np.abs(state.values)**2, axis=1))))

    i1 = int(np.argmin(np.abs(snap_times - cauchy_times[0])))
    i2 = int(np.argmin(np.abs(snap_times - cauchy_times[1])))
    p1, p2 = phi_est(i1), phi_est(i2)
    diff = FieldState(grid, p2.values - p1.values)
    cauchy = {"t1": float(snap_times[i1]), "t2": float(snap_times[i2]),
              "diff_l2": l2(diff), "ref_l2": l2(p1),
              "diff_sup": sup(diff), "ref_sup": sup(p1)}
    # contraction sequence: increments of Phi_est over equal spans must shrink
    step = cauchy_times[1] - cauchy_times[0]
    seq_times = []
    tmark = cauchy_times[1]
    while tmark - step >= snap_times[0] and len(seq_times) < 4:
        seq_times.append(tmark)
        tmark -= step
    seq_times = sorted(seq_times)
    increments = []
    prev = None
    for tm in [seq_times[0] - step] + seq_times:
        idx = int(np.argmin(np.abs(snap_times - tm)))
        cur = phi_est(idx)
        if prev is not None:
            d = FieldState(grid, cur.values - prev.values)
            increments.append({"t": float(snap_times[idx]), "l2": l2(d), "sup": sup(d),
                               "combined": l2(d) + sup(d)})
        prev = cur
    cauchy["increments"] = increments

    i_max = len(snap_times) - 1
    phi_ref = phi_est(i_max)
    if window is None:
        window = (5.0, snap_times[i_max] * 0.6)
    ts, rs = [], []
    for idx, t in enumerate(snap_times):
        if window[0] <= t <= window[1]:
            fd = f_dressed(idx)
            tail = FieldState(grid, fd.values - free_flow(phi_ref, t).values)
            ts.append(t)
            rs.append(l2(tail) + sup(tail))
    ts, rs = np.array(ts), np.array(rs)
    A = np.stack([np.log1p(ts), np.ones_like(ts)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(rs), rcond=None)
    resid = np.log(rs) - A @ coef
    return FitResult(model="scattering_residual",
                     params={"slope": (float(coef[0]), np.nan)},
                     window=window, rms_residual=float(np.sqrt(np.mean(resid**2))),
                     extras={"cauchy": cauchy, "phi_l2": l2(phi_ref), "phi_sup": sup(phi_ref),
                             "series_t": ts.tolist(), "series_residual": rs.tolist()})
