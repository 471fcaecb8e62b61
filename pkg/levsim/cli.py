"""
Command line front end.

Every subcommand writes its data file(s) plus a ``<out>.manifest.json``
from which ``levsim rerun`` repeats the job. Failures print one JSON line
``{"error": ..., "message": ...}`` on stderr; the exit status is 0 on
success, 1 for runtime failures and 2 for usage or config errors.
"""

import argparse
import json
import logging
import sys
import time

from pathlib import Path

import numpy as np

from . import __version__
from . import dynamics, langevin, sensing, spectrum
from .config import config_from_mapping, derive_parameters, load_config
from .context import settings
from .errors import ConfigError, LevsimError, UnknownFigure, UnknownSubcommand
from .manifest import RunManifest, manifest_path, write_csv
from .repro import FIGURES, default_omega_grid, load_preset, repro

__all__ = ["dispatch", "main", "build_parser", "SUBCOMMANDS"]

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    "eigen",
    "simulate",
    "phonon",
    "langevin",
    "g2",
    "force-psd",
    "minima",
    "repro",
    "rerun",
)
USAGE_ERRORS = (ConfigError, UnknownSubcommand, UnknownFigure)
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as :class:`ConfigError` instead of exiting."""

    def error(self, message):
        raise ConfigError(message)


def _common_options():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config document")
    common.add_argument("--out", help="output file (directory for repro)")
    common.add_argument(
        "--strict",
        action="store_true",
        help="fail runs whose phonon numbers had to be clamped at zero",
    )
    common.add_argument(
        "--threads",
        type=int,
        help="worker threads (default: $LEVSIM_THREADS, then 1)",
    )
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v info, -vv debug"
    )
    return common


def _integration_options(parser, t_end=1.0, dt=1e-4):
    parser.add_argument("--t-end", type=float, default=t_end, help="seconds")
    parser.add_argument("--dt", type=float, default=dt, help="seconds")


def _ensemble_options(parser):
    _integration_options(parser, t_end=10.0, dt=None)
    parser.add_argument("--n-traj", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--record-stride", type=int, default=1)


def _grid_options(parser):
    parser.add_argument("--omega-min", type=float, help="rad/s (default 0.5 omega_x)")
    parser.add_argument(
        "--omega-max", type=float, help="rad/s (default 1.5 (omega_y + omega_r))"
    )
    parser.add_argument("--points", type=int, default=20000)


def build_parser():
    parser = _Parser(prog="levsim", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="subcommand", required=True)
    common = _common_options()

    def command(name, help):
        return commands.add_parser(name, parents=[common], help=help)

    eigen = command("eigen", "eigenvalues and PT phase against the coupling")
    eigen.add_argument("--beta-min", type=float, default=0.0, help="rad/s")
    eigen.add_argument("--beta-max", type=float, help="rad/s (default 4 gamma)")
    eigen.add_argument("--points", type=int, default=1000)

    simulate = command("simulate", "rotating-frame amplitudes (RK4)")
    _integration_options(simulate)
    simulate.add_argument(
        "--position",
        action="store_true",
        help="also write the lab-frame coordinate of --mode",
    )
    simulate.add_argument("--mode", choices=("x", "y"), default="x")
    simulate.add_argument(
        "--samples-per-period", type=int, default=dynamics.SAMPLES_PER_PERIOD
    )
    simulate.add_argument(
        "--window", type=float, nargs=2, metavar=("T0", "T1"), help="seconds"
    )

    phonon = command("phonon", "amplitudes and phonon numbers (RK4)")
    _integration_options(phonon)
    phonon.add_argument(
        "--intensity", choices=dynamics.INTENSITIES, default="phonon"
    )

    ensemble = command("langevin", "Langevin ensemble statistics")
    _ensemble_options(ensemble)

    g2 = command("g2", "second-order coherence from a Langevin ensemble")
    _ensemble_options(g2)
    g2.add_argument("--mode", choices=("x", "y"), default="x")
    g2.add_argument("--warmup-frac", type=float, default=0.2)
    g2.add_argument("--tau-max", type=float, default=1.0, help="seconds")
    g2.add_argument("--tau-points", type=int, default=51)

    psd = command("force-psd", "force noise PSD of one mode")
    psd.add_argument("--mode", choices=("x", "y"), default="x")
    _grid_options(psd)
    psd.add_argument(
        "--literal",
        action="store_true",
        help="evaluate S_s0/|chi(omega/omega_j)|^2 as written",
    )

    minima = command("minima", "force sensitivity minima")
    minima.add_argument("--mode", choices=("x", "y", "both"), default="both")
    _grid_options(minima)
    minima.add_argument(
        "--min-prominence", type=float, default=sensing.MIN_PROMINENCE
    )

    figure = command("repro", "regenerate the data of a figure")
    figure.add_argument("figure", help=", ".join(FIGURES))

    rerun = command("rerun", "repeat a job from its manifest")
    rerun.add_argument("manifest")
    return parser


def _out(args, default):
    return Path(args.out) if args.out else Path(default)


def _grid(args, config):
    default = default_omega_grid(config, args.points)
    lo = default[0] if args.omega_min is None else args.omega_min
    hi = default[-1] if args.omega_max is None else args.omega_max
    return np.linspace(lo, hi, args.points)


def _eigen(args, config):
    beta_max = args.beta_max
    if beta_max is None:
        params = derive_parameters(config)
        # Gamma_j = 2 gamma_j, so this is four times the larger amplitude rate
        beta_max = 2.0 * max(abs(params.Gamma_x), abs(params.Gamma_y)) or 1.0
    table = spectrum.sweep_coupling(
        config, np.linspace(args.beta_min, beta_max, args.points)
    )
    records = table.records()
    columns = {name: [record[name] for record in records] for name in table.COLUMNS}
    return [write_csv(_out(args, "eigen.csv"), columns)], {}


def _simulate(args, config):
    trajectory = dynamics.integrate_amplitudes(None, config, args.t_end, args.dt)
    out = _out(args, "simulate.csv")
    outputs = [write_csv(out, trajectory.records())]
    if args.position:
        t, q = dynamics.reconstruct_position(
            trajectory,
            derive_parameters(config),
            args.mode,
            samples_per_period=args.samples_per_period,
            window=args.window,
        )
        position = out.with_name(f"{out.stem}.position_{args.mode}.csv")
        outputs.append(write_csv(position, {"t": t, f"Q_{args.mode}": q}))
    return outputs, {}


def _phonon(args, config):
    trajectory = dynamics.integrate_coupled(
        None, None, config, args.t_end, args.dt, intensity=args.intensity
    )
    return [write_csv(_out(args, "phonon.csv"), trajectory.records())], {}


def _ensemble(args, config):
    return langevin.ensemble_run(
        config,
        args.n_traj,
        args.t_end,
        dt=args.dt,
        master_seed=args.seed,
        record_stride=args.record_stride,
    )


def _langevin(args, config):
    ensemble = _ensemble(args, config)
    path = write_csv(_out(args, "langevin.csv"), ensemble.records())
    return [path], ensemble.seed_record


def _g2(args, config):
    ensemble = _ensemble(args, config)
    result = langevin.estimate_g2(
        ensemble,
        args.mode,
        np.linspace(0.0, args.tau_max, args.tau_points),
        warmup_frac=args.warmup_frac,
    )
    return [write_csv(_out(args, "g2.csv"), result.records())], ensemble.seed_record


def _force_psd(args, config):
    curve = sensing.force_psd(
        _grid(args, config), config, args.mode, literal=args.literal
    )
    return [write_csv(_out(args, "force-psd.csv"), curve.records())], {}


def _minima(args, config):
    modes = ("x", "y") if args.mode == "both" else (args.mode,)
    grid = _grid(args, config)
    rows = {"mode": [], "omega_min": [], "sensitivity": []}
    for mode in modes:
        for found in sensing.find_sensitivity_minima(
            config, mode, grid, min_prominence=args.min_prominence
        ):
            rows["mode"].append(mode)
            rows["omega_min"].append(found.omega)
            rows["sensitivity"].append(found.sqrt_psd)
    return [write_csv(_out(args, "minima.csv"), rows)], {}


def _repro(args, config):
    out = _out(args, Path("repro") / args.figure)
    _, run, _ = load_preset(args.figure)
    seeds = {"master_seed": run["seed"]} if "seed" in run else {}
    return repro(args.figure, out, threads=args.threads), seeds


HANDLERS = {
    "eigen": _eigen,
    "simulate": _simulate,
    "phonon": _phonon,
    "langevin": _langevin,
    "g2": _g2,
    "force-psd": _force_psd,
    "minima": _minima,
    "repro": _repro,
}


def _run_job(args, argv, config=None):
    if config is None and args.subcommand != "repro":
        if not args.config:
            raise ConfigError(f"{args.subcommand}: --config is required")
        config = load_config(args.config)
    start = time.perf_counter()
    outputs, seeds = HANDLERS[args.subcommand](args, config)
    manifest = RunManifest(
        subcommand=args.subcommand,
        argv=list(argv),
        version=__version__,
        config=None if config is None else config.to_document(),
        seeds=dict(seeds),
        outputs=[str(path) for path in outputs],
        duration=time.perf_counter() - start,
    )
    anchor = outputs[0].parent if args.subcommand == "repro" else outputs[0]
    manifest.write(manifest_path(anchor))
    return outputs


def _rerun(args, parser):
    manifest = RunManifest.load(args.manifest)
    argv = list(manifest.argv)
    if args.out:
        argv += ["--out", args.out]
    job = parser.parse_args(argv)
    if job.subcommand == "rerun":
        raise ConfigError("a rerun manifest cannot point at another rerun")
    config = None if manifest.config is None else config_from_mapping(manifest.config)
    # the recorded run's switches win over the defaults of the rerun line
    settings.strict = job.strict or args.strict
    if job.threads is not None and args.threads is None:
        settings.threads = job.threads
    logger.info("re-running %s recorded by levsim %s", job.subcommand, manifest.version)
    return _run_job(job, argv, config)


def _configure_logging(verbosity):
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbosity, 2)]
    logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


def _report(error):
    line = json.dumps({"error": type(error).__name__, "message": str(error)})
    print(line, file=sys.stderr)


def dispatch(argv=None):
    """Run one command line; returns the process exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and not argv[0].startswith("-") and argv[0] not in SUBCOMMANDS:
            choices = ", ".join(SUBCOMMANDS)
            raise UnknownSubcommand(
                f"unknown subcommand {argv[0]!r}; choose one of {choices}"
            )
        parser = build_parser()
        args = parser.parse_args(argv)
        _configure_logging(args.verbose)
        with settings:
            settings.strict = args.strict
            if args.threads is not None:
                settings.threads = args.threads
            if args.subcommand == "rerun":
                _rerun(args, parser)
            else:
                _run_job(args, argv)
    except USAGE_ERRORS as error:
        _report(error)
        return 2
    except LevsimError as error:
        _report(error)
        return 1
    except Exception as error:
        logger.debug("unexpected failure", exc_info=True)
        _report(error)
        return 1
    return 0


def main():
    sys.exit(dispatch())
