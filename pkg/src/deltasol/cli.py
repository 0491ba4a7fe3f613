"""Batch front end: experiment configs in, deterministic artifacts out.

Subcommands: spectrum, fgr, evolve, dispersive.  Exit codes: 0 ok,
2 config error, 3 numerical guard trip.  Output locations honor the
DELTASOL_OUTPUT_ROOT environment variable for relative output dirs.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import fgr as fgr_mod
from .config import ConfigError, ExperimentConfig, load_config, resolve_soliton, to_ini
from .evolution import GuardTrip, evolve
from .modulation import (ExtractionError, FitResult, GridBasis, ModulationTracker,
                         dispersive_decay_check, fit_decay_laws, fit_ricatti,
                         prepare_initial_data, scattering_residual)
from .nonlinearity import FieldState, Grid
from .reports import fmt, render_png, write_csv, write_json, write_plot_script, write_text
from .solitary import SolitonParams
from .spectral import (BranchConventionError, BranchedFrequency, Linearization,
                       determinant_D, eigenfunction_u, spectral_condition, window_endpoints)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3


def _fit_payload(fit: FitResult) -> dict:
    return {
        "model": fit.model,
        "params": {k: {"value": v[0], "stderr": v[1]} for k, v in fit.params.items()},
        "window": list(fit.window),
        "rms_residual": fit.rms_residual,
        "extras": {k: v for k, v in fit.extras.items()
                   if not isinstance(v, (list, tuple)) or len(v) <= 8},
    }


def cmd_spectrum(cfg: ExperimentConfig) -> int:
    out = cfg.resolve_output_dir()
    nl = cfg.nonlinearity()
    params = resolve_soliton(cfg)
    lin = Linearization.from_soliton(nl, params)
    cls = spectral_condition(lin)
    lo, hi = window_endpoints(lin.a, lin.C)

    payload = {
        "omega": lin.omega, "C": lin.C, "a": lin.a, "aprime": lin.aprime,
        "alpha": lin.alpha, "beta": lin.beta,
        "classification": cls,
        "window_aprime": {"low": lo, "high": hi},
        "mu": lin.mu,
        "admissibility": {"globally_admissible": nl.globally_admissible(),
                          "bounded_region_margin": nl.admissibility_margin()},
    }
    if lin.mu is not None:
        mode = eigenfunction_u(lin, Grid.from_extent(cfg.dx, cfg.half_width))
        payload.update({
            "rho": lin.rho,
            "delta": lin.delta_analytic,
            "u_origin": {"u1": float(mode.u.values[mode.u.grid.center, 0].real),
                         "u2_imag": float(mode.u.values[mode.u.grid.center, 1].imag)},
            "two_mu_in_continuum": bool(2 * lin.mu > lin.omega),
        })
        if cls == "in_window":
            rep = fgr_mod.damping_coefficient(lin, delta_mode="analytic")
            payload["fgr_lhs"] = {"re": rep.fgr_lhs.real, "im": rep.fgr_lhs.imag}
            payload["re_iK"] = rep.re_iK

    nus = np.linspace(1e-3 * lin.omega, 3.0 * lin.omega, cfg.nu_scan_points)
    dvals = [determinant_D(lin, BranchedFrequency(1j * nu, "plus")) for nu in nus]
    roots = []
    for a, b, da, db in zip(nus[:-1], nus[1:], dvals[:-1], dvals[1:]):
        if b < lin.omega and da.real * db.real < 0:
            roots.append(0.5 * (a + b))
    payload["d_scan_gap_roots"] = roots

    write_json(out / "spectrum.json", payload)
    write_csv(out / "d_scan.csv", ["nu", "re_D_plus", "im_D_plus"],
              [nus, [d.real for d in dvals], [d.imag for d in dvals]])
    write_plot_script(out / "d_scan.gp", "d_scan.csv", "determinant on the imaginary axis",
                      "nu", "D(i nu + 0)", [(1, 2, "Re D"), (1, 3, "Im D")])
    render_png(out / "d_scan.png",
               [(nus, np.array([d.real for d in dvals]), "Re D"),
                (nus, np.array([d.imag for d in dvals]), "Im D")],
               "determinant on the imaginary axis", "nu", "D(i nu + 0)")
    write_text(out / "run.log", f"spectrum completed (wall clock {time.strftime('%Y-%m-%d %H:%M:%S')})\n")
    return EXIT_OK


def cmd_fgr(cfg: ExperimentConfig) -> int:
    out = cfg.resolve_output_dir()
    nl = cfg.nonlinearity()
    c_values = np.linspace(cfg.c_min, cfg.c_max, cfg.c_points)
    reports, crossings = fgr_mod.fgr_scan(nl, c_values)
    in_window = [r for r in reports if r.classification == "in_window"]
    if not in_window:
        print("warning: no in-window points in the scanned amplitude range", file=sys.stderr)

    def col(name, default=np.nan):
        return [getattr(r, name) if getattr(r, name) is not None else default for r in reports]

    write_csv(out / "fgr_atlas.csv",
              ["C", "omega", "classification", "nu", "kappa", "rho", "c_nu",
               "margin", "holds", "re_iK", "fgr_abs"],
              [col("C"), col("omega"), [r.classification for r in reports], col("nu"),
               col("kappa"), col("rho"), col("c_nu"), col("margin"),
               ["" if r.holds is None else ("true" if r.holds else "false") for r in reports],
               col("re_iK"),
               [abs(r.fgr_lhs) if r.fgr_lhs is not None else np.nan for r in reports]])
    write_json(out / "zero_crossings.json",
               {"crossings_in_C": crossings, "n_in_window": len(in_window)})
    write_plot_script(out / "fgr_atlas.gp", "fgr_atlas.csv", "radiation-coupling margin",
                      "C", "|margin|", [(1, 8, "margin")])
    mask = [r.margin is not None for r in reports]
    if any(mask):
        xs = np.array([r.C for r in reports if r.margin is not None])
        ys = np.array([r.margin for r in reports if r.margin is not None])
        render_png(out / "fgr_atlas.png", [(xs, ys, "margin")],
                   "radiation-coupling margin", "C", "|a'' - c(nu) a'/C^2|")
    write_text(out / "run.log", f"fgr scan completed (wall clock {time.strftime('%Y-%m-%d %H:%M:%S')})\n")
    return EXIT_OK


def cmd_evolve(cfg: ExperimentConfig) -> int:
    out = cfg.resolve_output_dir()
    nl = cfg.nonlinearity()
    params = resolve_soliton(cfg)
    lin = Linearization.from_soliton(nl, params)
    cls = spectral_condition(lin)
    manifest: dict = {"config": cfg.echo(), "classification": cls, "errors": [], "events": []}
    perturbed = cfg.z0 != 0

    if perturbed and cls != "in_window":
        manifest["errors"].append(f"perturbed run requires in-window parameters, got {cls}")
        write_json(out / "manifest.json", manifest)
        return EXIT_GUARD
    if perturbed:
        rep = fgr_mod.damping_coefficient(lin, delta_mode="analytic")
        manifest["prediction"] = {"re_iK": rep.re_iK, "delta": rep.delta,
                                  "fgr_abs": abs(rep.fgr_lhs),
                                  "k_plus_2imu": rep.k_plus_2imu}

    write_text(out / "config_echo.ini", to_ini(cfg))
    evo = cfg.evolution()
    grid = evo.make_grid()
    f0_state = None
    if cfg.f0 is not None:
        prof = cfg.f0.amplitude * np.exp(-((grid.x - cfg.f0.center) / cfg.f0.width) ** 2)
        f0_state = FieldState.from_scalar(grid, prof.astype(complex))
    psi0 = prepare_initial_data(params, cfg.z0, f0_state, nl, grid)

    tracker = ModulationTracker(nl, (params.omega, params.theta), beta=cfg.beta)
    track_stride = max(1, int(round(cfg.track_stride / cfg.dt)))
    n_steps = int(round(cfg.T / cfg.dt))
    # full snapshots land on track rows so the scattering fit can pair them
    snapshot_stride = track_stride * max(1, n_steps // track_stride // 40)
    try:
        traj = evolve(psi0, nl, evo, snapshot_stride=snapshot_stride,
                      conserved_stride=max(1, track_stride), observers=((track_stride, tracker.observe),))
    except GuardTrip as exc:
        manifest["errors"].append(str(exc))
        write_json(out / "manifest.json", manifest)
        return EXIT_GUARD
    manifest["events"].extend(traj.events)

    cons = traj.conserved
    q0, h0 = cons[0, 1], cons[0, 2]
    manifest["conservation"] = {
        "charge_initial": q0, "hamiltonian_initial": h0,
        "max_rel_charge_drift": float(np.max(np.abs(cons[:, 1] - q0)) / abs(q0)) if q0 else 0.0,
        "max_rel_hamiltonian_drift": float(np.max(np.abs(cons[:, 2] - h0)) / abs(h0)) if h0 else 0.0,
    }
    write_csv(out / "conserved.csv", ["t", "Q", "H"],
              [cons[:, 0], cons[:, 1], cons[:, 2]])

    try:
        trk = tracker.finalize()
    except ExtractionError as exc:
        manifest["errors"].append(str(exc))
        write_json(out / "manifest.json", manifest)
        return EXIT_GUARD
    manifest["events"].extend(trk.events)
    write_csv(out / "track.csv",
              ["t", "omega", "theta", "gamma", "re_z", "im_z", "f_inf_mbeta", "f_L2"],
              [trk.t, trk.omega, trk.theta, trk.gamma, trk.z.real, trk.z.imag,
               trk.f_inf_mbeta, trk.f_l2])

    fits = []
    if perturbed:
        t1 = cfg.fit_t1 if cfg.fit_t1 is not None else min(cfg.T, trk.t[-1])
        window = (cfg.fit_t0, t1)
        if trk.events:
            window = (window[0], min(window[1], trk.t[-1]))
            manifest["events"].append(f"fit window truncated to {window}")
        try:
            fit = fit_ricatti(trk, window, re_iK=manifest["prediction"]["re_iK"])
            fits.append(fit)
        except ValueError as exc:
            manifest["errors"].append(f"ricatti fit: {exc}")
        try:
            fits.extend(fit_decay_laws(trk, lin, window))
        except ValueError as exc:
            manifest["errors"].append(f"decay-law fits: {exc}")
        if len(traj.snapshots) >= 8 and trk.t[-1] >= 2 * cfg.fit_t0:
            ct = (cfg.cauchy_t1 if cfg.cauchy_t1 is not None else 0.25 * trk.t[-1],
                  cfg.cauchy_t2 if cfg.cauchy_t2 is not None else 0.5 * trk.t[-1])
            try:
                fits.append(scattering_residual(traj, trk, nl, cauchy_times=ct))
            except (ValueError, ExtractionError) as exc:
                manifest["errors"].append(f"scattering residual: {exc}")
    manifest["fits"] = [_fit_payload(f) for f in fits]

    y = trk.y
    write_plot_script(out / "y_decay.gp", "track.csv", "internal-mode energy",
                      "t", "|z|^2", [(1, 5, "|z|^2 (re_z col as placeholder)")])
    write_csv(out / "y_series.csv", ["t", "y", "abs_z"], [trk.t, y, np.abs(trk.z)])
    render_png(out / "y_decay.png", [(trk.t, y, "|z|^2")], "internal-mode energy", "t", "y")
    mask = trk.t > 0
    render_png(out / "z_loglog.png", [(trk.t[mask], np.abs(trk.z)[mask], "|z|")],
               "mode amplitude", "t", "|z|", logx=True, logy=True)
    write_plot_script(out / "z_loglog.gp", "y_series.csv", "mode amplitude", "t", "|z|",
                      [(1, 3, "|z|")], logx=True, logy=True)
    render_png(out / "omega.png", [(trk.t, trk.omega, "omega")], "frame frequency", "t", "omega")
    write_plot_script(out / "omega.gp", "track.csv", "frame frequency", "t", "omega",
                      [(1, 2, "omega")])
    render_png(out / "gamma.png", [(trk.t, trk.gamma, "gamma")], "phase correction", "t", "gamma")
    write_plot_script(out / "gamma.gp", "track.csv", "phase correction", "t", "gamma",
                      [(1, 4, "gamma")])
    fmask = trk.f_inf_mbeta > 0
    render_png(out / "fnorm.png", [(trk.t[fmask], trk.f_inf_mbeta[fmask], "weighted f")],
               "radiation-norm decay", "t", "||f|| weighted", logx=True, logy=True)
    write_plot_script(out / "fnorm.gp", "track.csv", "radiation-norm decay", "t",
                      "||f|| weighted", [(1, 7, "f_inf")], logx=True, logy=True)

    if cfg.snapshot_count > 0:
        picks = np.linspace(0, len(traj.snapshots) - 1, min(cfg.snapshot_count, len(traj.snapshots)))
        for idx in sorted({int(round(i)) for i in picks}):
            t_s, state = traj.snapshots[idx]
            v = state.values
            write_csv(out / "snapshots" / f"snap_{t_s:011.4f}.csv",
                      ["x", "re_psi1", "im_psi1", "re_psi2", "im_psi2"],
                      [state.grid.x, v[:, 0].real, v[:, 0].imag, v[:, 1].real, v[:, 1].imag])
    write_json(out / "manifest.json", manifest)
    write_text(out / "run.log", f"evolve completed (wall clock {time.strftime('%Y-%m-%d %H:%M:%S')})\n")
    return EXIT_GUARD if manifest["errors"] else EXIT_OK


def cmd_dispersive(cfg: ExperimentConfig) -> int:
    out = cfg.resolve_output_dir()
    nl = cfg.nonlinearity()
    params = resolve_soliton(cfg)
    lin = Linearization.from_soliton(nl, params)
    if spectral_condition(lin) != "in_window":
        print("dispersive check needs in-window parameters", file=sys.stderr)
        return EXIT_GUARD
    evo = cfg.evolution()
    grid = evo.make_grid()
    xs = (grid.x - cfg.bump_center) / cfg.bump_width
    # even zero-mean packet: suppresses the near-threshold box pedestal
    prof = cfg.bump_amplitude * (1.0 - xs**2) * np.exp(-0.5 * xs**2)
    h0 = FieldState.from_scalar(grid, prof * (1.0 + 0.5j))

    variants = ["plain", "resolvent_shifted"] if cfg.dispersive_variant == "both" \
        else [cfg.dispersive_variant]
    variants.append("keep_mode")
    window = (cfg.fit_t0, cfg.fit_t1 if cfg.fit_t1 is not None else min(cfg.T, cfg.half_width / 2))
    rows = {}
    results = {}
    for variant in variants:
        fit = dispersive_decay_check(nl, params, h0, evo, variant=variant,
                                     beta=cfg.beta, window=window)
        results[variant] = fit
        rows[variant] = (np.array(fit.extras["series_t"]), np.array(fit.extras["series_norm"]))

    t_axis = rows[variants[0]][0]
    write_csv(out / "dispersive.csv", ["t"] + [f"norm_{v}" for v in variants],
              [t_axis] + [rows[v][1] for v in variants])
    payload = {v: _fit_payload(results[v]) for v in variants}
    for v in ("plain", "resolvent_shifted"):
        if v in results:
            payload[v]["decaying"] = bool(results[v].params["slope"][0] < -0.5)
    if "keep_mode" in results:
        payload["keep_mode"]["decaying"] = bool(results["keep_mode"].params["slope"][0] < -0.1)
    write_json(out / "dispersive.json", payload)
    write_plot_script(out / "dispersive.gp", "dispersive.csv", "weighted-norm decay",
                      "t", "norm", [(1, 2 + i, v) for i, v in enumerate(variants)],
                      logx=True, logy=True)
    curves = [(rows[v][0][rows[v][0] > 0], rows[v][1][rows[v][0] > 0], v) for v in variants]
    render_png(out / "dispersive.png", curves, "weighted-norm decay", "1+t", "norm",
               logx=True, logy=True)
    write_text(out / "run.log", f"dispersive completed (wall clock {time.strftime('%Y-%m-%d %H:%M:%S')})\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="deltasol",
                                     description="soliton laboratory for the delta-coupled NLS")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("spectrum", cmd_spectrum), ("fgr", cmd_fgr),
                     ("evolve", cmd_evolve), ("dispersive", cmd_dispersive)):
        sp = sub.add_parser(name)
        sp.add_argument("config", type=Path)
        sp.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.fn(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GuardTrip, BranchConventionError, ExtractionError) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
