"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 parse/validation error,
3 numeric failure (non-convergence, truncation leakage, failed calibration).
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import circuit as cc
from .dpc import DpcError, parse_circuit, serialize_circuit
from .dynamics import asymptotic_state, evolve, spectrum
from .emit import ResultTable, amplitude_table, emit_table, render_heatmap, trajectory_table
from .quantum import (TruncationWarning, coherent_density, coherent_ket, erasure_scenario,
                      fidelity_to_pure, fock_oracle_evolve)
from .stationary import find_localized_states, kernel_basis
from .waveguide import (CalibrationError, WaveguideDevice, chain_intensities, default_dispersion,
                        DispersionModel, propagate_z, wavelength_scan)

EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _complex(text: str) -> complex:
    parts = text.split(",")
    if len(parts) > 2:
        raise argparse.ArgumentTypeError(f"expected re or re,im, got {text!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected re or re,im, got {text!r}") from None
    return complex(vals[0], vals[1] if len(vals) == 2 else 0.0)


def _add_circuit_args(p: argparse.ArgumentParser):
    p.add_argument("circuit", nargs="?", help=".dpc file (omit when using --builder)")
    p.add_argument("--builder", choices=["chain", "two_arm", "double_chain", "square", "honeycomb"])
    p.add_argument("--n", type=int, help="modes (chain), per arm (two_arm) or columns (double_chain)")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--loss", action="append", default=[], metavar="LABEL:RATE", help="extra single-mode loss")
    p.add_argument("--init", action="append", default=[], metavar="LABEL=RE[,IM]", help="initial amplitude")


def _add_output_args(p: argparse.ArgumentParser, formats=("csv", "json")):
    p.add_argument("--out", help="write here instead of stdout")
    p.add_argument("--format", choices=formats, default=formats[0])


def _load(args):
    if args.circuit and args.builder:
        raise UsageError("give either a .dpc file or --builder, not both")
    config = {}
    if args.circuit:
        try:
            text = Path(args.circuit).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(str(exc)) from None
        res = parse_circuit(text)
        circ, init, config = res.circuit, res.initial, res.document.config
    elif args.builder:
        circ = _build(args)
        init = np.zeros(circ.n_modes, dtype=complex)
    else:
        raise UsageError("a .dpc file or --builder is required")
    for spec in args.loss:
        label, _, rate = spec.rpartition(":")
        try:
            circ = cc.add_mode_loss(circ, label, float(rate))
        except (KeyError, ValueError) as exc:
            raise UsageError(f"bad --loss {spec!r}: {exc}") from None
    for spec in args.init:
        label, sep, val = spec.partition("=")
        if not sep:
            raise UsageError(f"bad --init {spec!r}")
        try:
            init[circ.index(label)] = _complex(val)
        except (KeyError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad --init {spec!r}: {exc}") from None
    cc.check(circ)
    return circ, init, config


def _build(args):
    def need(*names):
        missing = [n for n in names if getattr(args, n) is None]
        if missing:
            raise UsageError(f"--builder {args.builder} needs " + ", ".join("--" + m for m in missing))

    try:
        if args.builder == "chain":
            need("n")
            return cc.build_chain(args.n, args.rate)
        if args.builder == "two_arm":
            need("n")
            return cc.build_two_arm(args.n, args.rate)
        if args.builder == "double_chain":
            need("n")
            return cc.build_double_chain(args.n, args.rate)
        need("rows", "cols")
        if args.builder == "square":
            return cc.build_square_lattice(args.rows, args.cols, args.rate)
        return cc.build_honeycomb(args.rows, args.cols, args.rate)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write(args, text: str):
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _need_init(init):
    if not np.any(init):
        raise UsageError("no initial amplitudes (use 'init' lines or --init)")


def cmd_simulate(args):
    circ, init, _ = _load(args)
    _need_init(init)
    times = np.linspace(0.0, args.t_max, args.steps + 1)
    _write(args, emit_table(trajectory_table(evolve(circ, init, times)), args.format))


def cmd_asymptotic(args):
    circ, init, _ = _load(args)
    _need_init(init)
    _write(args, emit_table(amplitude_table(circ.labels, asymptotic_state(circ, init)), args.format))


def cmd_spectrum(args):
    circ, _, _ = _load(args)
    res = spectrum(circ)
    zero = np.arange(res.eigenvalues.size) < res.kernel_dimension
    table = ResultTable(["index", "eigenvalue", "kernel"],
                        [[i, float(e), bool(z)] for i, (e, z) in enumerate(zip(res.eigenvalues, zero))])
    print(f"kernel_dimension={res.kernel_dimension} gap={res.gap}", file=sys.stderr)
    _write(args, emit_table(table, args.format))


def cmd_kernel(args):
    circ, _, _ = _load(args)
    basis = kernel_basis(circ)
    cols = ["label"] + [f"{p}_v{k + 1}" for k in range(len(basis)) for p in ("re", "im")]
    rows = []
    for i, label in enumerate(circ.labels):
        row = [label]
        for v in basis:
            row += [float(v[i].real), float(v[i].imag)]
        rows.append(row)
    _write(args, emit_table(ResultTable(cols, rows), args.format))


def cmd_localized(args):
    circ, _, _ = _load(args)
    try:
        states = find_localized_states(circ, args.max_support)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = []
    for k, st in enumerate(states, start=1):
        for label in st.support:
            z = st.amplitudes[circ.index(label)]
            rows.append([k, st.support_size, label, float(z.real), float(z.imag)])
    _write(args, emit_table(ResultTable(["state", "support_size", "label", "re", "im"], rows), args.format))


DEVICE_DEFAULTS = {"n_chain": 2, "n_res": 20, "z_max": 30.0, "kappa1": 0.1, "kappa2": 0.2,
                   "lam_min": 700.0, "lam_max": 790.0, "ratio": 0.5}


def _device_params(args) -> dict:
    """Built-in defaults, then ``set`` lines of ``--config``, then explicit flags."""
    params = dict(DEVICE_DEFAULTS)
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(str(exc)) from None
        for key, val in parse_circuit(text).document.config.items():
            if key in params:
                try:
                    params[key] = type(params[key])(val)
                except ValueError:
                    raise UsageError(f"config {key}={val!r} is not a valid {type(params[key]).__name__}") from None
    for key in params:
        if getattr(args, key, None) is not None:
            params[key] = getattr(args, key)
    return params


def _device(params):
    return WaveguideDevice(params["n_chain"], params["kappa1"], params["kappa2"],
                           n_res=params["n_res"], z_max=params["z_max"])


def cmd_waveguide(args):
    try:
        dev = _device(_device_params(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    field = np.zeros(dev.n_chain, dtype=complex)
    excite = args.excite if args.excite is not None else ((dev.n_chain - 1) // 2 if dev.n_chain % 2 else 0)
    if not 0 <= excite < dev.n_chain:
        raise UsageError("--excite out of range")
    field[excite] = 1.0
    z = np.linspace(0.0, dev.z_max, args.steps + 1)
    I = chain_intensities(dev, propagate_z(dev, field, z), normalize=False)
    table = ResultTable(["z_mm"] + [f"I{j + 1}" for j in range(dev.n_chain)],
                        [[float(zz), *map(float, row)] for zz, row in zip(z, I)])
    _write(args, emit_table(table, args.format))


def cmd_scan(args):
    p = _device_params(args)
    lam = (p["lam_min"], p["lam_max"])
    disp = default_dispersion(p["z_max"], p["ratio"], lam)
    if args.dispersion:
        disp = DispersionModel(*args.dispersion, lam_range=lam)
    try:
        dev = _device(p)
        res = wavelength_scan(dev, disp, n_points=args.points, excite=args.excite)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write(args, emit_table(ResultTable(res.columns(), res.rows()), args.format))


def cmd_erase(args):
    signal = []
    for spec in args.signal or ["1:0"]:
        p, _, beta = spec.partition(":")
        try:
            signal.append((float(p), _complex(beta)))
        except (ValueError, argparse.ArgumentTypeError):
            raise UsageError(f"bad --signal {spec!r}, expected P:RE[,IM]") from None
    if abs(sum(p for p, _ in signal) - 1.0) > 1e-12:
        raise UsageError("signal weights must sum to 1")
    rep = erasure_scenario(args.N, args.alpha, signal, args.rate)
    rows = []
    for k, a in enumerate(rep.alpha_bar, start=1):
        rows += [[f"alpha_bar_{k}_re", float(a.real)], [f"alpha_bar_{k}_im", float(a.imag)]]
    for name in ("delta_e", "delta_e_closed_form", "delta_e_trajectory", "delta_e0", "delta_e0_large_n",
                 "fidelity_to_phi", "reservoir_condition_residual"):
        rows.append([name, float(getattr(rep, name))])
    _write(args, emit_table(ResultTable(["quantity", "value"], rows), args.format))


def cmd_oracle(args):
    circ, init, _ = _load(args)
    if circ.n_modes > 3:
        raise UsageError("the Fock oracle handles at most three modes")
    rho0 = coherent_density(init, args.cutoff)
    with warnings.catch_warnings():
        warnings.simplefilter("error", TruncationWarning)
        try:
            rho = fock_oracle_evolve(circ, rho0, args.t)
        except TruncationWarning as exc:
            print(f"numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    pred = evolve(circ, init, [args.t]).final
    ket, _ = coherent_ket(pred, args.cutoff)
    rows = [["fidelity_to_amplitude_prediction", fidelity_to_pure(rho, ket)],
            ["trace", rho.trace()],
            ["mean_photon_number", rho.mean_photon_number()],
            ["leakage", rho.leakage]]
    for label, a in zip(circ.labels, pred):
        rows += [[f"alpha_{label}_re", float(a.real)], [f"alpha_{label}_im", float(a.imag)]]
    _write(args, emit_table(ResultTable(["quantity", "value"], rows), args.format))


def cmd_render(args):
    circ, init, _ = _load(args)
    if args.what == "asymptotic":
        _need_init(init)
        vals = asymptotic_state(circ, init)
    else:
        vals = init
    try:
        pos = circ.positions()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write(args, render_heatmap(vals, pos, args.palette))


def cmd_export(args):
    circ, init, config = _load(args)
    _write(args, serialize_circuit(circ, init if np.any(init) else None, config))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dcnet", description="Dissipatively coupled mode networks: dynamics, "
                "stationary states, waveguide realization.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="propagate initial amplitudes")
    _add_circuit_args(s)
    s.add_argument("--t-max", type=float, default=10.0, help="final effective time gamma*t")
    s.add_argument("--steps", type=int, default=100)
    _add_output_args(s)
    s.set_defaults(func=cmd_simulate)

    for name, func, help_ in [("asymptotic", cmd_asymptotic, "long-time state (kernel projection)"),
                              ("spectrum", cmd_spectrum, "drift-matrix eigenvalues"),
                              ("kernel", cmd_kernel, "orthonormal stationary basis"),
                              ("export", cmd_export, "write the circuit as canonical .dpc")]:
        s = sub.add_parser(name, help=help_)
        _add_circuit_args(s)
        if name == "export":
            s.add_argument("--out")
        else:
            _add_output_args(s)
        s.set_defaults(func=func)

    s = sub.add_parser("localized", help="compactly supported stationary states")
    _add_circuit_args(s)
    s.add_argument("--max-support", type=int, default=4)
    _add_output_args(s)
    s.set_defaults(func=cmd_localized)

    def device_args(q):
        q.add_argument("--config", help=".dpc file whose 'set' lines supply device parameters")
        q.add_argument("--n-chain", type=int)
        q.add_argument("--n-res", type=int)
        q.add_argument("--z-max", type=float)
        q.add_argument("--excite", type=int, help="0-based chain guide to excite")

    s = sub.add_parser("waveguide", help="tight-binding propagation of the waveguide device")
    device_args(s)
    s.add_argument("--kappa1", type=float)
    s.add_argument("--kappa2", type=float)
    s.add_argument("--steps", type=int, default=60)
    _add_output_args(s)
    s.set_defaults(func=cmd_waveguide)

    s = sub.add_parser("scan", help="output intensities versus wavelength")
    device_args(s)
    s.add_argument("--lam-min", type=float)
    s.add_argument("--lam-max", type=float)
    s.add_argument("--points", type=int, default=10)
    s.add_argument("--ratio", type=float, help="kappa1/kappa2 of the default dispersion")
    s.add_argument("--dispersion", type=float, nargs=4, metavar=("K1_0", "K1_SLOPE", "K2_0", "K2_SLOPE"),
                   help="linear coefficients, kappa = K_0 + K_SLOPE * lambda_nm")
    _add_output_args(s)
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("erase", help="signal-mode erasure by a chain reservoir")
    s.add_argument("--N", type=int, default=2, help="reservoir chain has N+1 modes")
    s.add_argument("--alpha", type=_complex, default=1.0)
    s.add_argument("--signal", action="append", metavar="P:RE[,IM]")
    s.add_argument("--rate", type=float, default=1.0)
    _add_output_args(s)
    s.set_defaults(func=cmd_erase)

    s = sub.add_parser("oracle", help="full master equation in a truncated Fock basis (<= 3 modes)")
    _add_circuit_args(s)
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--cutoff", type=int, default=6)
    _add_output_args(s)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("render", help="SVG heatmap of |amplitude|")
    _add_circuit_args(s)
    s.add_argument("--what", choices=["asymptotic", "initial"], default="asymptotic")
    s.add_argument("--palette", default="blues")
    s.add_argument("--out")
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = args.func(args)
    except UsageError as exc:
        print(f"dcnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DpcError, cc.InvalidCircuit) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_PARSE
    except (CalibrationError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
