"""Command-line entry points.

Subcommands: run, sweep-etar, compare-modelh, check-energy, mollify,
convergence.  Exit codes: 0 success, 1 bad usage or configuration,
2 runtime solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError, MaggError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="maggsim",
        description=(
            "Pseudo-spectral simulator for a micropolar two-phase mixture "
            "on the periodic torus"
        ),
    )
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="integrate one configuration")
    p_run.add_argument("--config", required=True, help="JSON configuration path")
    p_run.add_argument("--out", required=True, help="output directory")

    p_sweep = sub.add_parser(
        "sweep-etar", help="nonpolar-limit sweep against an AGG reference"
    )
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument(
        "--values", required=True,
        help="comma-separated decreasing rotational viscosities, e.g. 1e-1,1e-2",
    )
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--workers", type=int, default=1)

    p_mh = sub.add_parser(
        "compare-modelh", help="matched-density sweep against a Model H reference"
    )
    p_mh.add_argument("--config", required=True)
    p_mh.add_argument(
        "--mismatch", required=True,
        help="comma-separated decreasing density contrasts, e.g. 0.2,0.1",
    )
    p_mh.add_argument("--out", required=True)
    p_mh.add_argument("--workers", type=int, default=1)

    p_en = sub.add_parser(
        "check-energy", help="energy-law residual order across step sizes"
    )
    p_en.add_argument("--config", required=True)
    p_en.add_argument(
        "--dts", required=True,
        help="comma-separated decreasing step sizes, e.g. 2e-3,1e-3,5e-4",
    )
    p_en.add_argument("--out", default=None, help="optional report directory")

    p_mol = sub.add_parser(
        "mollify", help="truncate and mollify the configured initial phase field"
    )
    p_mol.add_argument("--config", required=True)
    p_mol.add_argument("--k", required=True, type=float, help="truncation level")
    p_mol.add_argument("--out", default=None, help="optional output directory")

    p_cv = sub.add_parser(
        "convergence", help="spatial self-convergence across grid sizes"
    )
    p_cv.add_argument("--config", required=True)
    p_cv.add_argument(
        "--grids", required=True,
        help="comma-separated grid sizes, e.g. 32,64,128",
    )
    p_cv.add_argument("--out", default=None)

    return parser


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _cmd_run(args) -> int:
    from .io import load_config
    from .simulation import run

    config = load_config(args.config)
    result = run(config, out_dir=args.out)
    last = result.ledger.rows[-1]
    print(f"finished at t={last.t:.6g}  E_total={last.e_total:.12g}  "
          f"mass={last.mass:.12g}")
    print(f"outputs in {args.out}")
    return 0


def _cmd_sweep_etar(args) -> int:
    from .diagnostics import etar_sweep
    from .io import load_config, write_sweep_report
    from .plots import plot_rate_fit

    config = load_config(args.config)
    values = _floats(args.values)
    report = etar_sweep(config, values, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    write_sweep_report(report, os.path.join(args.out, "sweep_report.json"))
    plot_rate_fit(
        report.parameter_values, report.errors, report.fitted_slope,
        report.fit_r2, "rotational viscosity",
        os.path.join(args.out, "rate_fit.png"),
    )
    print(f"fitted slope {report.fitted_slope:.4f}  R^2 {report.fit_r2:.6f}")
    print(f"outputs in {args.out}")
    return 0


def _cmd_compare_modelh(args) -> int:
    from .diagnostics import modelh_sweep
    from .io import load_config, write_sweep_report
    from .plots import plot_rate_fit

    config = load_config(args.config)
    values = _floats(args.mismatch)
    report = modelh_sweep(config, values, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    write_sweep_report(report, os.path.join(args.out, "sweep_report.json"))
    plot_rate_fit(
        report.parameter_values, report.errors, report.fitted_slope,
        report.fit_r2, "density contrast",
        os.path.join(args.out, "rate_fit.png"),
    )
    print(f"fitted slope {report.fitted_slope:.4f}  R^2 {report.fit_r2:.6f}")
    print(f"outputs in {args.out}")
    return 0


def _cmd_check_energy(args) -> int:
    from .diagnostics import energy_order
    from .io import load_config
    from .plots import plot_residual_vs_dt

    config = load_config(args.config)
    dts = _floats(args.dts)
    report = energy_order(config, dts)
    if report.skipped:
        print("residuals at roundoff (equilibrium data); order fit skipped")
    else:
        for dt, res in zip(report.dt_values, report.max_residuals):
            print(f"dt={dt:.6g}  max|residual|={res:.6e}")
        ratio_text = ", ".join(f"{r:.3f}" for r in report.ratios)
        print(f"halving ratios: {ratio_text}")
        print(f"fitted order {report.fitted_order:.4f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        payload = {
            "dt_values": list(report.dt_values),
            "max_residuals": list(report.max_residuals),
            "ratios": list(report.ratios),
            "fitted_order": report.fitted_order,
            "skipped": report.skipped,
        }
        with open(os.path.join(args.out, "energy_order.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if not report.skipped:
            plot_residual_vs_dt(
                report.dt_values, report.max_residuals,
                os.path.join(args.out, "residual_vs_dt.png"),
            )
        print(f"outputs in {args.out}")
    return 0


def _cmd_mollify(args) -> int:
    from .cahn_hilliard import mollify_initial_phi
    from .io import load_config, write_snapshot
    from .model import make_state
    from .simulation import build_initial_state
    from .spectral import Field, VecField

    config = load_config(args.config)
    state = build_initial_state(config)
    phi_k, report = mollify_initial_phi(state.phi, args.k, config.params)
    print(f"k={report.k_level:.6g}  iterations={report.iterations}  "
          f"residual={report.residual:.3e}")
    print(f"separation margin {report.separation:.6g}  "
          f"mean drift {report.mean_drift:.3e}")
    if args.out:
        from .plots import plot_mollifier

        os.makedirs(args.out, exist_ok=True)
        grid = phi_k.grid
        mollified = make_state(
            VecField(Field.zeros(grid), Field.zeros(grid)),
            Field.zeros(grid), phi_k, config.params,
        )
        write_snapshot(mollified, os.path.join(args.out, "mollified.bin"))
        plot_mollifier(state.phi, phi_k, os.path.join(args.out, "mollifier.png"))
        with open(os.path.join(args.out, "mollifier.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(
                {
                    "k_level": report.k_level,
                    "iterations": report.iterations,
                    "residual": report.residual,
                    "separation": report.separation,
                    "mean_drift": report.mean_drift,
                },
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")
        print(f"outputs in {args.out}")
    return 0


def _cmd_convergence(args) -> int:
    from .diagnostics import spatial_convergence
    from .io import load_config

    config = load_config(args.config)
    grids = _ints(args.grids)
    report = spatial_convergence(config, grids)
    for n, err in zip(report.grid_sizes, report.errors):
        print(f"n={n}  gap to n={report.reference_n}: {err:.6e}")
    if args.out:
        from .plots import plot_convergence

        os.makedirs(args.out, exist_ok=True)
        payload = {
            "grid_sizes": list(report.grid_sizes),
            "errors": list(report.errors),
            "reference_n": report.reference_n,
        }
        with open(os.path.join(args.out, "convergence.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        plot_convergence(
            report.grid_sizes[:-1], report.errors, report.reference_n,
            os.path.join(args.out, "convergence.png"),
        )
        print(f"outputs in {args.out}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep-etar": _cmd_sweep_etar,
    "compare-modelh": _cmd_compare_modelh,
    "check-energy": _cmd_check_energy,
    "mollify": _cmd_mollify,
    "convergence": _cmd_convergence,
}


def cli_dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MaggError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
