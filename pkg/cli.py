"""
Command-line entry point: qcrsim <command> [flags]

Every command loads the device config, runs one protocol, writes CSV output
plus a JSON run manifest next to it, and exits with
    0 ok, 2 config or unreadable input, 3 numerical or unexpected failure,
    4 fit did not converge.
The manifest is written on every exit path, with the error on failure.
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

import qcr
from dynamics import build_dissipators, build_model, dressed_transitions, evolve
from hilbert import SpaceDims, basis_state, thermal_state
from params import GHZ, MHZ, derive, load_params
from protocols import (
    KAPPA_SWEEP_COLUMNS,
    SWEEP_COLUMNS,
    fidelity_estimate,
    fit_iv,
    kappa_sweep,
    reset_sweep,
    ringdown,
    rpm_estimate,
    simulate_reset,
    synth_iv,
    t1_fit,
)
from pulses import idle_schedule
from utils import (
    __version__,
    configure_logging,
    default_config_path,
    read_csv_columns,
    sha256_file,
    write_csv,
)
from validation import ConfigError, FitError, QcrSimError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_FIT = 4

OUT_DIR = "out"


# ---- Run manifest ----

@dataclass
class RunManifest:
    command: str
    argv: list
    config_path: str = ""
    config_digest: str = ""
    parameters: dict = field(default_factory=dict)
    version: str = __version__
    wall_time_s: float = 0.0
    outputs: dict = field(default_factory=dict)  # path -> sha256
    summary: dict = field(default_factory=dict)
    status: str = "running"
    error: str = ""

    def add_output(self, path: str):
        self.outputs[path] = sha256_file(path)

    def write(self, path: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w') as f:
            json.dump(self.__dict__, f, indent=2, sort_keys=True, default=_json_default)
        return path


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def _manifest_path(out: str) -> str:
    root, _ = os.path.splitext(out)
    return root + ".manifest.json"


def _grid(lo: float, hi: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise ConfigError(f"Grid needs at least one step, got {steps}")
    return np.array([lo]) if steps == 1 else np.linspace(lo, hi, steps)


def _omega_rule(text: str):
    """'optimal' or an ef-drive Rabi rate in MHz."""
    if text == "optimal":
        return "optimal"
    try:
        return float(text) * MHZ
    except ValueError:
        raise ConfigError(f"--omega must be 'optimal' or a number in MHz, got {text!r}")


def _load(args, manifest: RunManifest):
    manifest.config_path = args.config
    params = load_params(args.config)
    manifest.config_digest = sha256_file(args.config)
    manifest.parameters = params.to_dict()
    return params


# ---- Commands ----

def cmd_kappa_sweep(args, manifest: RunManifest) -> int:
    p = _load(args, manifest)
    ratios = _grid(args.bias_min, args.bias_max, args.bias_steps)
    taus = np.array(args.taus_ns) * 1e-9
    rows, warnings = kappa_sweep(ratios, p, taus=taus, jobs=args.jobs)
    out = write_csv(args.out, KAPPA_SWEEP_COLUMNS, (
        (r.ratio, r.gamma_down, r.gamma_up, r.delta_gamma, r.kappa_eff_theory, r.kappa_eff_ringdown)
        for r in rows
    ))
    manifest.add_output(out)
    manifest.summary = {'points': len(rows), 'heating_points': len(warnings)}
    return EXIT_OK


def cmd_reset_sweep(args, manifest: RunManifest) -> int:
    p = _load(args, manifest)
    ratios = _grid(args.bias_min, args.bias_max, args.bias_steps)
    taus = _grid(args.tau_min, args.tau_max, args.tau_steps) * 1e-9
    grid, warnings = reset_sweep(
        ratios, taus, p,
        g_rabi=args.g_rabi_mhz * MHZ,
        omega_rule=_omega_rule(args.omega),
        n_fock=args.n_fock,
        jobs=args.jobs,
    )
    out = write_csv(args.out, SWEEP_COLUMNS, grid.rows())
    manifest.add_output(out)
    contour = write_csv(os.path.splitext(args.out)[0] + "_contour.csv",
                        ["eVb_over_2Delta", "tau_99_ns"],
                        ((r, t * 1e9) for r, t in grid.contour()))
    manifest.add_output(contour)
    manifest.summary = {'cells': int(grid.failed.size), 'failed_cells': int(grid.failed.sum()),
                        **grid.meta}
    if not grid.complete:
        print(f"{int(grid.failed.sum())} of {grid.failed.size} cells failed; see the log",
              file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_reset(args, manifest: RunManifest) -> int:
    p = _load(args, manifest)
    dims = SpaceDims(args.n_fock or p.n_fock)
    rho0 = {
        "thermal": lambda: thermal_state(dims, p.P_e_thermal),
        "e": lambda: basis_state(dims, "e", 0),
        "g": lambda: basis_state(dims, "g", 0),
    }[args.initial]()
    result = simulate_reset(
        qcr.bias_from_ratio(args.bias, p.Delta), args.tau_ns * 1e-9, p,
        g_rabi=args.g_rabi_mhz * MHZ,
        omega_rule=_omega_rule(args.omega),
        rho0=rho0,
        frame=args.frame,
        n_fock=dims.n_fock,
        samples=args.samples,
    )
    out = result.trace.write_csv(args.out)
    manifest.add_output(out)
    manifest.summary = {
        'residual': result.residual, 'P_e': result.P_e, 'P_f': result.P_f,
        'leakage': result.leakage, 'unreset': result.unreset,
        'omega_rabi_MHz': result.omega_rabi / MHZ, 'kappa_eff_per_s': result.kappa_eff,
    }
    print(f"residual excitation {result.residual:.6g} (P_e {result.P_e:.6g}, P_f {result.P_f:.6g}, "
          f"leakage {result.leakage:.6g})")
    return EXIT_OK


def cmd_iv(args, manifest: RunManifest) -> int:
    p = _load(args, manifest)
    jp = qcr.junction_params(p)
    if args.synth:
        vmax_mv, steps = float(args.synth[0]), int(args.synth[1])
        V = _grid(-vmax_mv, vmax_mv, steps) * 1e-3
        I = synth_iv(jp, V, noise=args.noise, seed=args.seed)
        out = write_csv(args.out, ["V_volts", "I_amps"], zip(V, I))
        manifest.add_output(out)
        manifest.summary = {'samples': int(V.size)}
        return EXIT_OK

    try:
        data = read_csv_columns(args.fit)
    except (OSError, ValueError, TypeError) as e:
        raise ConfigError(f"Cannot read I-V data {args.fit}: {e}") from e
    if "V_volts" not in data or "I_amps" not in data:
        raise ConfigError(f"{args.fit} needs columns V_volts and I_amps")
    fit = fit_iv(data["V_volts"], data["I_amps"], E_N=jp.E_N)
    units = {"R_T": ("R_T_kOhm", 1e-3), "Delta": ("Delta_ueV", 1e6 / qcr.E_CHARGE),
             "T_N": ("T_N_mK", 1e3), "gamma_D": ("gamma_D", 1.0)}
    rows = [(units[name][0], value * units[name][1], fit.stderr[name] * units[name][1])
            for name, value in fit.params.items()]
    out = write_csv(args.out, ["parameter", "value", "stderr_proxy"], rows)
    manifest.add_output(out)
    manifest.summary = {'residual_norm': fit.report.residual_norm, 'unidentified': list(fit.unidentified)}
    return EXIT_OK


def cmd_ringdown(args, manifest: RunManifest) -> int:
    p = _load(args, manifest)
    V_b = qcr.bias_from_ratio(args.bias, p.Delta)
    result = ringdown(V_b, np.array(args.taus_ns) * 1e-9, p,
                      delays=np.array(args.delays_ns) * 1e-9, noise=args.noise, seed=args.seed)
    out = write_csv(args.out, ["delay_ns", "tau_ns", "ratio"], (
        (d * 1e9, t * 1e9, result.ratios[i, j])
        for i, d in enumerate(result.delays) for j, t in enumerate(result.taus)
    ))
    manifest.add_output(out)
    manifest.summary = {
        'delta_gamma_per_s': result.delta_gamma,
        'delta_gamma_stderr': result.delta_gamma_stderr,
        'kappa_r_per_s': result.kappa_r,
        'delta_gamma_rise_fall_per_s': result.delta_gamma_rf,
        'kappa_eff_per_s': result.kappa_eff,
    }
    print(f"delta_gamma = {result.delta_gamma:.6g} 1/s, kappa_r = {result.kappa_r:.6g} 1/s")
    return EXIT_OK


def cmd_rpm(args, manifest: RunManifest) -> int:
    estimate = rpm_estimate(args.a1, args.a2, args.b1, args.b2)
    out = write_csv(args.out, ["P_e", "raw", "out_of_range"],
                    [(estimate.P_e, estimate.raw, int(estimate.out_of_range))])
    manifest.add_output(out)
    manifest.summary = {'P_e': estimate.P_e}
    print(f"P_e = {estimate.P_e:.6g}")
    return EXIT_OK


def cmd_t1(args, manifest: RunManifest) -> int:
    p = _load(args, manifest)
    dims = SpaceDims(args.n_fock or p.n_fock)
    model = build_model(p, include_coupling=False, n_fock=dims.n_fock)
    diss = build_dissipators(p, dims=dims)
    duration = args.duration_us * 1e-6
    trace = evolve(basis_state(dims, "e", 0), model, diss, idle_schedule(duration),
                   np.linspace(0.0, duration, args.samples))
    fit = t1_fit(trace)
    out = trace.write_csv(args.out)
    manifest.add_output(out)
    manifest.summary = {'T1_us': fit.T1 * 1e6, 'P_inf': fit.P_inf, 'degenerate': fit.degenerate}
    print(f"T1 = {fit.T1 * 1e6:.6g} us, P_inf = {fit.P_inf:.6g}")
    return EXIT_OK if not fit.degenerate else EXIT_FIT


def cmd_spectrum(args, manifest: RunManifest) -> int:
    p = _load(args, manifest)
    dressed = dressed_transitions(build_model(p, frame="literal"))
    rows = [
        ("ge_dressed_GHz", dressed.omega_ge / GHZ),
        ("ef_dressed_GHz", dressed.omega_ef / GHZ),
        ("f0g1_dressed_GHz", dressed.omega_f0g1 / GHZ),
        ("resonator_dressed_GHz", dressed.omega_r / GHZ),
        ("f0g1_bare_GHz", derive(p).omega_f0g1_bare / GHZ),
    ]
    if p.omega_f0g1_measured is not None:
        rows.append(("f0g1_measured_GHz", p.omega_f0g1_measured / GHZ))
    out = write_csv(args.out, ["quantity", "value"], rows)
    manifest.add_output(out)
    manifest.summary = dict(rows)
    return EXIT_OK


def cmd_fidelity(args, manifest: RunManifest) -> int:
    p = _load(args, manifest)
    if args.kappa_eff is not None:
        kappa = args.kappa_eff
    else:
        V_b = qcr.bias_from_ratio(args.bias, p.Delta)
        kappa = qcr.kappa_eff(V_b, p.omega_r_eff, qcr.junction_params(p), p.kappa_r)
    P_g = fidelity_estimate(p, kappa)
    out = write_csv(args.out, ["kappa_eff_per_s", "P_g"], [(kappa, P_g)])
    manifest.add_output(out)
    manifest.summary = {'kappa_eff_per_s': kappa, 'P_g': P_g}
    print(f"P_g = {100.0 * P_g:.4f} %")
    return EXIT_OK


# ---- Parser ----

def _default_out(name: str) -> str:
    return os.path.join(OUT_DIR, name)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help="device config (default: $QCRSIM_CONFIG or config/device.cfg)")
    common.add_argument('--jobs', type=int, default=1, help="worker processes for sweeps")
    common.add_argument('-v', '--verbose', action='count', default=0)

    parser = argparse.ArgumentParser(prog="qcrsim", description="QCR-assisted qubit reset simulator")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('kappa-sweep', parents=[common], help="kappa_eff vs bias (theory and ringdown)")
    p.add_argument('--bias-min', type=float, default=0.0, help="eV_b / 2 Delta")
    p.add_argument('--bias-max', type=float, default=2.2)
    p.add_argument('--bias-steps', type=int, default=45)
    p.add_argument('--taus-ns', type=float, nargs='+', default=[50.0, 100.0, 150.0, 200.0])
    p.add_argument('--out', default=_default_out("kappa_sweep.csv"))
    p.set_defaults(func=cmd_kappa_sweep)

    p = sub.add_parser('reset-sweep', parents=[common], help="residual excitation on a bias x duration grid")
    p.add_argument('--bias-min', type=float, default=0.8)
    p.add_argument('--bias-max', type=float, default=1.2)
    p.add_argument('--bias-steps', type=int, default=9)
    p.add_argument('--tau-min', type=float, default=0.0, help="ns")
    p.add_argument('--tau-max', type=float, default=300.0, help="ns")
    p.add_argument('--tau-steps', type=int, default=31)
    p.add_argument('--g-rabi-mhz', type=float, default=28.4)
    p.add_argument('--omega', default="optimal", help="'optimal' or the ef Rabi rate in MHz")
    p.add_argument('--n-fock', type=int, default=None)
    p.add_argument('--out', default=_default_out("reset_sweep.csv"))
    p.set_defaults(func=cmd_reset_sweep)

    p = sub.add_parser('reset', parents=[common], help="one reset run, population trace")
    p.add_argument('--bias', type=float, default=1.03, help="eV_b / 2 Delta")
    p.add_argument('--tau-ns', type=float, default=180.0)
    p.add_argument('--g-rabi-mhz', type=float, default=28.4)
    p.add_argument('--omega', default="optimal")
    p.add_argument('--initial', choices=["thermal", "e", "g"], default="thermal")
    p.add_argument('--frame', choices=["rotating", "literal"], default="rotating")
    p.add_argument('--samples', type=int, default=201)
    p.add_argument('--n-fock', type=int, default=None)
    p.add_argument('--out', default=_default_out("reset_trace.csv"))
    p.set_defaults(func=cmd_reset)

    p = sub.add_parser('iv', parents=[common], help="synthesize or fit a SINIS I-V curve")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument('--synth', nargs=2, metavar=("VMAX_MV", "STEPS"))
    mode.add_argument('--fit', metavar="DATA_CSV")
    p.add_argument('--noise', type=float, default=0.0, help="relative current noise for --synth")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', default=None)
    p.set_defaults(func=cmd_iv)

    p = sub.add_parser('ringdown', parents=[common], help="ringdown ratios and fitted delta_gamma")
    p.add_argument('--bias', type=float, default=1.03)
    p.add_argument('--taus-ns', type=float, nargs='+', default=[50.0, 100.0, 150.0, 200.0])
    p.add_argument('--delays-ns', type=float, nargs='+', default=[200.0, 300.0])
    p.add_argument('--noise', type=float, default=0.0)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', default=_default_out("ringdown.csv"))
    p.set_defaults(func=cmd_ringdown)

    p = sub.add_parser('rpm', parents=[common], help="P_e from four RPM amplitudes")
    for name in ("a1", "a2", "b1", "b2"):
        p.add_argument(f'--{name}', type=float, required=True)
    p.add_argument('--out', default=_default_out("rpm.csv"))
    p.set_defaults(func=cmd_rpm)

    p = sub.add_parser('t1', parents=[common], help="simulated T1 decay and fit")
    p.add_argument('--duration-us', type=float, default=30.0)
    p.add_argument('--samples', type=int, default=61)
    p.add_argument('--n-fock', type=int, default=None)
    p.add_argument('--out', default=_default_out("t1_trace.csv"))
    p.set_defaults(func=cmd_t1)

    p = sub.add_parser('spectrum', parents=[common], help="dressed transition frequencies")
    p.add_argument('--out', default=_default_out("spectrum.csv"))
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser('fidelity', parents=[common], help="steady ground-state occupation estimate")
    p.add_argument('--bias', type=float, default=1.03)
    p.add_argument('--kappa-eff', type=float, default=None, help="1/s; overrides --bias")
    p.add_argument('--out', default=_default_out("fidelity.csv"))
    p.set_defaults(func=cmd_fidelity)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    if args.config is None:
        args.config = default_config_path()
    if getattr(args, 'out', None) is None:
        args.out = _default_out("iv_fit.csv" if getattr(args, 'fit', None) else "iv.csv")

    manifest = RunManifest(command=args.command, argv=argv)
    start = time.perf_counter()
    try:
        code = args.func(args, manifest)
        manifest.status = "ok" if code == EXIT_OK else "partial"
    except FitError as e:
        code = EXIT_FIT
        manifest.status, manifest.error = "failed", str(e)
        print(f"Fit Error: {e.user_message}", file=sys.stderr)
    except ConfigError as e:
        code = EXIT_CONFIG
        manifest.status, manifest.error = "failed", str(e)
        print(f"Config Error: {e.user_message}", file=sys.stderr)
    except QcrSimError as e:
        code = EXIT_NUMERIC
        manifest.status, manifest.error = "failed", str(e)
        print(f"Numerical Error: {e.user_message}", file=sys.stderr)
    except OSError as e:
        code = EXIT_CONFIG
        manifest.status, manifest.error = "failed", str(e)
        print(f"I/O Error: {e}", file=sys.stderr)
    except Exception as e:
        code = EXIT_NUMERIC
        manifest.status, manifest.error = "failed", f"{type(e).__name__}: {e}"
        logger.exception("%s failed", args.command)
        print(f"Error: {type(e).__name__}: {e}", file=sys.stderr)
    finally:
        manifest.wall_time_s = time.perf_counter() - start
    manifest.write(_manifest_path(args.out))
    return code


if __name__ == '__main__':
    sys.exit(main())
