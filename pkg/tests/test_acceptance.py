"""Acceptance suite: every criterion at its stated tolerance, one line each.

Run with `pytest tests/test_acceptance.py -s` to see the PASS/FAIL lines as
they complete.  The heavy dynamics fixtures (long kicked runs, big-box
linearized runs) are shared across criteria; the full module takes on the
order of fifteen minutes on a desk machine.
"""

import json

import numpy as np
import pytest

from conftest import make_point, random_in_window
from deltasol.cli import main as cli_main
from deltasol.evolution import EvolutionConfig, evolve
from deltasol.fgr import c_of_nu, damping_coefficient, fgr_inner_product, rho_of_nu
from deltasol.modulation import (ModulationTracker, dispersive_decay_check, fit_decay_laws,
                                 fit_ricatti, prepare_initial_data, scattering_residual)
from deltasol.nonlinearity import FieldState, Grid, Nonlinearity, charge, hamiltonian
from deltasol.solitary import SolitonParams
from deltasol.spectral import (BranchedFrequency, Linearization, determinant_D,
                               eigen_residual, mu_formula, window_endpoints)

NL = Nonlinearity([0.2, 0.8])
SOLITON = SolitonParams(1.0, 0.25, 0.0)
LIN = Linearization.from_soliton(NL, SOLITON)
RE_IK = damping_coefficient(LIN, delta_mode="analytic").re_iK


def report(num, label, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num} [{status}] {label}: {detail}")
    assert ok, f"criterion {num}: {label}: {detail}"


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def flagship_long():
    """z0 = 0.1 kick, absorbing boundary, T = 12000: saturates the decay laws."""
    cfg = EvolutionConfig(dx=0.1, dt=0.02, half_width=300.0, T=12000.0,
                          boundary="absorbing", absorb_width=60.0, absorb_strength=0.2,
                          charge_guard=None)
    g = cfg.make_grid()
    psi0 = prepare_initial_data(SOLITON, 0.1, None, NL, g)
    tracker = ModulationTracker(NL, (SOLITON.omega, SOLITON.theta))
    evolve(psi0, NL, cfg, observers=((50, tracker.observe),), snapshot_stride=10**9,
           conserved_stride=10**9)
    return tracker.finalize()


@pytest.fixture(scope="module")
def flagship_companion():
    """z0 = 0.05 companion for the amplitude-scaling law."""
    cfg = EvolutionConfig(dx=0.1, dt=0.02, half_width=300.0, T=1500.0,
                          boundary="absorbing", absorb_width=60.0, absorb_strength=0.2,
                          charge_guard=None)
    g = cfg.make_grid()
    psi0 = prepare_initial_data(SOLITON, 0.05, None, NL, g)
    tracker = ModulationTracker(NL, (SOLITON.omega, SOLITON.theta))
    evolve(psi0, NL, cfg, observers=((50, tracker.observe),), snapshot_stride=10**9,
           conserved_stride=10**9)
    return tracker.finalize()


# ---------------------------------------------------------------- criteria

def test_criterion_1_spectral_closed_forms(rng):
    worst = 0.0
    for _ in range(100):
        a_val = rng.uniform(0.3, 2.5)
        C = rng.uniform(0.4, 2.0)
        nu = rng.uniform(1.0 / np.sqrt(2.0) + 0.01, 0.99)
        _, _, lin_r = make_point(a_val, nu, C)
        d = determinant_D(lin_r, BranchedFrequency(1j * mu_formula(lin_r.a, lin_r.beta)))
        worst = max(worst, abs(d) / (lin_r.alpha**2 + lin_r.beta**2))
    end_err = 0.0
    for a_val in (0.5, 1.0, 2.3):
        omega = a_val**2 / 4
        end_err = max(end_err, abs(mu_formula(a_val, a_val / np.sqrt(2.0)) - omega) / omega)
        hi = a_val * np.sqrt(2.0) * (1 + np.sqrt(3.0)) / 4
        end_err = max(end_err, abs(2 * mu_formula(a_val, hi) - omega) / omega)
    report(1, "spectral closed forms", worst <= 1e-10 and end_err <= 1e-12,
           f"max |D(i mu)|/scale = {worst:.2e}, window-endpoint identity error = {end_err:.2e}")


def test_criterion_2_eigen_residual_order():
    res = [eigen_residual(LIN, Grid.from_extent(dx, 250.0)) for dx in (0.2, 0.1, 0.05)]
    r1, r2 = res[0] / res[1], res[1] / res[2]
    ok = 3.2 <= r1 <= 4.8 and 3.2 <= r2 <= 4.8
    report(2, "eigenfunction residual second order", ok,
           f"residuals {[f'{r:.2e}' for r in res]}, halving ratios {r1:.2f}, {r2:.2f}")


def test_criterion_3_fgr_routes(rng):
    worstacc = 0.0
    for nu in np.linspace(0.72, 0.95, 10):
        for a2 in np.linspace(-0.6, 0.6, 5):
            _, _, lin_r = make_point(1.1, float(nu), 0.9, float(a2))
            direct, closed = fgr_inner_product(lin_r, return_both=True)
            worstacc = max(worstacc, abs(direct - closed) / max(abs(closed), 1e-300))
    rho_err = max(abs(rho_of_nu(lin_r.beta / lin_r.a) - lin_r.rho)
                  for _, _, lin_r in random_in_window(rng, 40, with_a2=False))
    # zero sets coincide: bisect the signed margin in C and evaluate the coupling there
    from scipy.optimize import brentq
    nu_star = 0.8
    a2c = c_of_nu(nu_star) * 0.8
    nl0, _, _ = make_point(1.0, nu_star, 1.0, a2c)
    nl_t = Nonlinearity([nl0.coeffs[0], nl0.coeffs[1], nl0.coeffs[2] - 0.025])

    def margin(cc):
        lin_c = Linearization.from_soliton(nl_t, SolitonParams.from_amplitude(nl_t, cc))
        return lin_c.a2 - c_of_nu(lin_c.beta / lin_c.a) * lin_c.aprime / lin_c.C**2

    c_root = brentq(margin, 0.9, 1.1, xtol=1e-10)
    lin_root = Linearization.from_soliton(nl_t, SolitonParams.from_amplitude(nl_t, c_root))
    fgr_at_root = abs(fgr_inner_product(lin_root))
    ok = worstacc <= 1e-9 and rho_err <= 1e-12 and fgr_at_root < 1e-8
    report(3, "FGR route equivalence", ok,
           f"route rel diff = {worstacc:.2e}, rho mismatch = {rho_err:.2e}, "
           f"|coupling| at bisected zero = {fgr_at_root:.2e}")


def test_criterion_4_damping_sign(rng):
    neg = 0
    total = 0
    for nl_r, p_r, lin_r in random_in_window(rng, 1000):
        rep = damping_coefficient(lin_r, delta_mode="analytic")
        if abs(rep.fgr_lhs) > 1e-12:
            total += 1
            if rep.re_iK < 0:
                neg += 1
    rep = damping_coefficient(LIN, delta_mode="analytic")
    c = 3.7
    re_ik_scaled = (2.0 / (c**2 * rep.delta)) * abs(c**2 * rep.fgr_lhs) ** 2 / (
        16.0 * rep.k_plus_2imu * abs(rep.D_2imu) ** 2)
    z0 = 0.1
    lam = 2 * abs(rep.re_iK) * z0**2
    lam_scaled = 2 * abs(re_ik_scaled) * abs(z0 / c) ** 2
    inv = abs(lam_scaled - lam) / lam
    ok = neg == total and total >= 990 and inv < 1e-9
    report(4, "damping sign and rescaling invariance", ok,
           f"Re(iK) < 0 at {neg}/{total} in-window FGR-holding points; "
           f"u -> c u invariance rel change = {inv:.2e}")


def test_criterion_5_conservation():
    cfg = EvolutionConfig(dx=0.05, dt=0.01, half_width=40.0, T=50.0)
    g = cfg.make_grid()
    traj = evolve(FieldState(g, prepare_initial_data(SOLITON, 0.0, None, NL, g).values),
                  NL, cfg, conserved_stride=50, snapshot_stride=10**9)
    cons = traj.conserved
    qd = float(np.max(np.abs(cons[:, 1] - cons[0, 1])) / cons[0, 1])
    hd = float(np.max(np.abs(cons[:, 2] - cons[0, 2])) / abs(cons[0, 2]))
    ok = qd <= 1e-6 and hd <= 1e-5
    report(5, "conservation on the soliton run", ok,
           f"relative charge drift = {qd:.2e} (<= 1e-6), hamiltonian drift = {hd:.2e} (<= 1e-5)")


def test_criterion_6_dispersive_decay():
    nl9 = Nonlinearity([0.1, 0.9])
    p9 = SolitonParams.from_amplitude(nl9, 1.0)
    cfg = EvolutionConfig(dx=0.2, dt=0.05, half_width=3200.0, T=1000.0)
    g = cfg.make_grid()
    prof = (1 - (g.x / 4.0) ** 2) * np.exp(-(g.x / 4.0) ** 2 / 2)
    h0 = FieldState.from_scalar(g, prof * (1 + 0.5j))
    window = (200.0, 980.0)
    plain = dispersive_decay_check(nl9, p9, h0, cfg, variant="plain", window=window, stride=20)
    shifted = dispersive_decay_check(nl9, p9, h0, cfg, variant="resolvent_shifted",
                                     window=window, stride=20)
    cfg_c = EvolutionConfig(dx=0.1, dt=0.025, half_width=400.0, T=250.0)
    g_c = cfg_c.make_grid()
    prof_c = (1 - (g_c.x / 4.0) ** 2) * np.exp(-(g_c.x / 4.0) ** 2 / 2)
    control = dispersive_decay_check(nl9, p9, FieldState.from_scalar(g_c, prof_c * (1 + 0.5j)),
                                     cfg_c, variant="keep_mode", window=(20.0, 240.0))
    s_p = plain.params["slope"][0]
    s_r = shifted.params["slope"][0]
    s_c = control.params["slope"][0]
    ok = abs(s_p + 1.5) <= 0.2 and abs(s_r + 1.5) <= 0.25 and s_c > -0.1
    report(6, "linearized dispersive decay", ok,
           f"plain slope = {s_p:.3f} (-1.5±0.2), shifted = {s_r:.3f} (-1.5±0.25), "
           f"mode-keeping control = {s_c:.3f} (> -0.1, non-decaying)")


def test_criterion_7a_mode_amplitude_law(flagship_long):
    trk = flagship_long
    mask = (trk.t >= 2500.0) & (trk.t <= 11800.0)
    A = np.stack([np.log(trk.t[mask]), np.ones(mask.sum())], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(np.abs(trk.z[mask])), rcond=None)
    slope = float(coef[0])
    report("7a", "mode amplitude t^{-1/2} law", abs(slope + 0.5) <= 0.1,
           f"log-log slope of |z| on [2500, 11800] = {slope:.3f} (-0.5±0.1)")


def test_criterion_7b_ricatti_slope(flagship_long):
    fit = fit_ricatti(flagship_long, (5.0, 1500.0), re_iK=RE_IK)
    ratio = fit.extras["lambda_ratio"]
    report("7b", "Ricatti slope vs prediction", abs(ratio - 1.0) <= 0.3,
           f"lambda_fit = {fit.params['lambda'][0]:.3e}, lambda_pred = "
           f"{fit.extras['lambda_pred']:.3e}, ratio = {ratio:.3f} (within 30%)")


def test_criterion_7c_amplitude_scaling(flagship_long, flagship_companion):
    fit1 = fit_ricatti(flagship_long, (5.0, 1500.0), re_iK=RE_IK)
    fit2 = fit_ricatti(flagship_companion, (5.0, 1500.0), re_iK=RE_IK)
    ratio = fit1.params["lambda"][0] / fit2.params["lambda"][0]
    report("7c", "lambda scales with y(0)", abs(ratio - 4.0) <= 1.0,
           f"lambda(z0=0.1)/lambda(z0=0.05) = {ratio:.2f} (4±1)")


def test_criterion_7d_omega_oscillation(flagship_long):
    trk = flagship_long
    mask = (trk.t >= 8000.0) & (trk.t <= 12000.0)
    t, om = trk.t[mask], trk.omega[mask]
    y = (om - np.mean(om)) * np.hanning(len(om))
    spec = np.abs(np.fft.rfft(y))
    freqs = 2 * np.pi * np.fft.rfftfreq(len(y), d=t[1] - t[0])
    k = int(np.argmax(spec[1:]) + 1)
    s0, s1, s2 = spec[k - 1], spec[k], spec[k + 1]
    shift = 0.5 * (s0 - s2) / (s0 - 2 * s1 + s2) if (s0 - 2 * s1 + s2) != 0 else 0.0
    peak = float(freqs[k] + shift * (freqs[1] - freqs[0]))
    # target: 2 mu(omega_+) with omega_+ the converged frame frequency (the
    # oscillation rides the doubled mode frequency of the limiting soliton)
    omega_plus = float(np.mean(om))
    from deltasol.solitary import amplitudes_for_frequency
    c_plus = min(amplitudes_for_frequency(NL, omega_plus), key=lambda r: abs(r - 1.0))
    lin_plus = Linearization.from_soliton(NL, SolitonParams(c_plus, omega_plus, 0.0))
    target = 2 * lin_plus.mu
    rel = abs(peak - target) / target
    report("7d", "omega oscillates at the doubled mode frequency", rel <= 0.05,
           f"peak = {peak:.4f}, 2 mu(omega_+={omega_plus:.4f}) = {target:.4f}, "
           f"rel err = {rel:.3f} (<= 0.05)")


def test_criterion_7e_radiation_norm_law(flagship_long):
    trk = flagship_long
    mask = (trk.t >= 2000.0) & (trk.t <= 11800.0) & (trk.f_inf_mbeta > 0)
    A = np.stack([np.log(trk.t[mask]), np.ones(mask.sum())], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(trk.f_inf_mbeta[mask]), rcond=None)
    slope = float(coef[0])
    report("7e", "weighted radiation-norm t^{-1} law", abs(slope + 1.0) <= 0.25,
           f"log-log slope of ||f|| on [2000, 11800] = {slope:.3f} (-1.0±0.25)")


def test_criterion_8_scattering():
    cfg = EvolutionConfig(dx=0.05, dt=0.0125, half_width=400.0, T=800.0)
    g = cfg.make_grid()
    psi0 = prepare_initial_data(SOLITON, 0.1, None, NL, g)
    tracker = ModulationTracker(NL, (SOLITON.omega, SOLITON.theta))
    traj = evolve(psi0, NL, cfg, observers=((40, tracker.observe),), snapshot_stride=960,
                  conserved_stride=10**9)
    trk = tracker.finalize()
    fit = scattering_residual(traj, trk, NL, window=(20.0, 500.0),
                              cauchy_times=(600.0, 780.0))
    incs = [inc["combined"] for inc in fit.extras["cauchy"]["increments"]]
    slope = fit.params["slope"][0]
    # Cauchy contraction: successive equal-span increments of Phi_est shrink
    # monotonically inside the reflection horizon (the full convergence clock
    # lambda*t ~ 3 sits beyond any L = 400 box; see the residual slope for the
    # O(t^-nu) law itself)
    decreasing = all(a > b for a, b in zip(incs[:-1], incs[1:]))
    ok = decreasing and incs[-1] <= 0.75 * incs[0] and slope <= -0.1
    report(8, "scattering asymptotics", ok,
           f"Phi_est increments {[f'{v:.3f}' for v in incs]} strictly decreasing, "
           f"last/first = {incs[-1]/incs[0]:.2f} (<= 0.75), residual slope = {slope:.3f} (<= -0.1)")


def test_criterion_9_determinism(tmp_path):
    cfg_text = (tmp_path / "flag.ini")
    import shutil
    base = open("configs/flagship.ini").read().replace("runs/flagship", str(tmp_path / "out"))
    cfg_text.write_text(base)
    assert cli_main(["evolve", str(cfg_text)]) == 0
    blobs = {name: (tmp_path / "out" / name).read_bytes()
             for name in ("track.csv", "conserved.csv", "y_series.csv")}
    assert cli_main(["evolve", str(cfg_text)]) == 0
    same = all((tmp_path / "out" / name).read_bytes() == blob for name, blob in blobs.items())
    report(9, "byte-identical CSVs on repeated flagship evolve", same,
           f"{list(blobs)} identical across two runs" if same else "CSV bytes differ")
