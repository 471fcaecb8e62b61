"""
Figure reproductions from the bundled presets.

Each preset in ``levsim/presets`` is a config document plus a ``run``
section naming the pipeline and its panels. :func:`repro` runs it, writes
one CSV per panel and a gnuplot script stub next to them.
"""

import dataclasses
import json
import logging

from importlib import resources
from pathlib import Path

import numpy as np

from . import dynamics, langevin, sensing, spectrum
from .config import config_from_mapping, derive_parameters
from .errors import IoError, UnknownFigure
from .manifest import write_csv

__all__ = ["FIGURES", "load_preset", "repro", "default_omega_grid"]

logger = logging.getLogger(__name__)

FIGURES = tuple(f"fig{number}" for number in range(2, 10))


def load_preset(figure_id):
    """Return ``(config, run_section, document)`` of a bundled preset."""
    if figure_id not in FIGURES:
        raise UnknownFigure(
            f"{figure_id!r} has no computable data; choose one of {', '.join(FIGURES)}"
        )
    source = resources.files("levsim").joinpath("presets", f"{figure_id}.json")
    document = json.loads(source.read_text(encoding="utf-8"))
    return config_from_mapping(document), document.get("run", {}), document


def default_omega_grid(config, points=20000):
    """[0.5 ω_x, 1.5 (ω_y + ω_r)] in rad/s."""
    params = derive_parameters(config)
    top = max(config.omega_x, config.omega_y) + abs(params.omega_r)
    return np.linspace(0.5 * min(config.omega_x, config.omega_y), 1.5 * top, points)


def _variants(config, run):
    """Configs per distinct coupling of the panels, in panel order."""
    configs = {}
    for panel in run["panels"]:
        delta = panel["delta"]
        if delta not in configs:
            configs[delta] = dataclasses.replace(config, delta=delta)
    return configs


def _eigen(figure_id, config, run, out_dir, threads):
    grid = np.linspace(run["beta_min"], run["beta_max"], run["points"])
    table = spectrum.sweep_coupling(config, grid, threads)
    path = write_csv(
        out_dir / f"{figure_id}.csv",
        {name: [record[name] for record in table.records()] for name in table.COLUMNS},
    )
    script = [
        f"plot '{path.name}' using 1:2 with lines title 'Re lambda+',"
        f" '' using 1:4 with lines title 'Re lambda-'",
        f"plot '{path.name}' using 1:3 with lines title 'Im lambda+',"
        f" '' using 1:5 with lines title 'Im lambda-'",
    ]
    return [path], script


def _amplitudes(figure_id, config, run, out_dir, threads):
    stride = run.get("output_stride", 1)
    runs = {
        delta: dynamics.integrate_amplitudes(None, variant, run["t_end"], run["dt"])
        for delta, variant in _variants(config, run).items()
    }
    paths, script = [], []
    for panel in run["panels"]:
        trajectory, mode = runs[panel["delta"]], panel["mode"]
        amplitude = trajectory.amplitude(mode)[::stride]
        path = write_csv(
            out_dir / f"{figure_id}{panel['panel']}.csv",
            {
                "t": trajectory.t[::stride],
                "re_a": amplitude.real,
                "im_a": amplitude.imag,
                "envelope": dynamics.envelope(trajectory, mode)[::stride],
            },
        )
        paths.append(path)
        script.append(
            f"plot '{path.name}' using 1:4 with lines title '+Q0|a_{mode}|',"
            f" '' using 1:(-$4) with lines title '-Q0|a_{mode}|'"
        )
    return paths, script


def _phonons(figure_id, config, run, out_dir, threads):
    stride = run.get("output_stride", 1)
    runs = {
        delta: dynamics.integrate_coupled(None, None, variant, run["t_end"], run["dt"])
        for delta, variant in _variants(config, run).items()
    }
    paths, script = [], []
    for panel in run["panels"]:
        trajectory, mode = runs[panel["delta"]], panel["mode"]
        phonons = trajectory.phonons(mode)
        initial = phonons[0] if phonons[0] > 0 else 1.0
        path = write_csv(
            out_dir / f"{figure_id}{panel['panel']}.csv",
            {
                "t": trajectory.t[::stride],
                "N": phonons[::stride],
                "N_over_N0": phonons[::stride] / initial,
                "amplitude_sq": np.abs(trajectory.amplitude(mode))[::stride] ** 2,
            },
        )
        paths.append(path)
        script.append(f"plot '{path.name}' using 1:2 with lines title 'N_{mode}'")
    return paths, script


def _g2(figure_id, config, run, out_dir, threads):
    tau = np.linspace(0.0, run["tau_max"], run["tau_points"])
    ensembles = {
        delta: langevin.ensemble_run(
            variant,
            run["n_traj"],
            run["t_end"],
            master_seed=run["seed"],
            record_stride=run.get("record_stride", 1),
            threads=threads,
        )
        for delta, variant in _variants(config, run).items()
    }
    paths, script = [], []
    for panel in run["panels"]:
        result = langevin.estimate_g2(
            ensembles[panel["delta"]],
            panel["mode"],
            tau,
            warmup_frac=run.get("warmup_frac", 0.2),
        )
        path = write_csv(out_dir / f"{figure_id}{panel['panel']}.csv", result.records())
        paths.append(path)
        script.append(
            f"plot '{path.name}' using 1:2:3 with yerrorlines"
            f" title 'g2_{panel['mode']}(tau)'"
        )
    return paths, script


def _force_psd(figure_id, config, run, out_dir, threads):
    paths, script, minima_rows = [], [], []
    for panel in run["panels"]:
        variant = dataclasses.replace(config, delta=panel["delta"])
        grid = default_omega_grid(variant, run.get("points", 20000))
        mode = panel["mode"]
        curve = sensing.force_psd(grid, variant, mode)
        path = write_csv(out_dir / f"{figure_id}{panel['panel']}.csv", curve.records())
        paths.append(path)
        script.append(
            f"plot '{path.name}' using 1:8 with lines title 'S_s{mode}/S_s0'"
        )
        for found in sensing.find_sensitivity_minima(variant, mode, grid):
            minima_rows.append(
                (panel["panel"], mode, panel["delta"], found.omega, found.sqrt_psd)
            )
    names = ("panel", "mode", "delta", "omega_min", "sensitivity")
    paths.append(
        write_csv(
            out_dir / f"{figure_id}_minima.csv",
            {name: [row[i] for row in minima_rows] for i, name in enumerate(names)},
        )
    )
    return paths, script


PIPELINES = {
    "eigen": _eigen,
    "amplitudes": _amplitudes,
    "phonons": _phonons,
    "g2": _g2,
    "force-psd": _force_psd,
}


def _write_script(path, figure_id, description, plots):
    lines = [
        f"# {figure_id}: {description}",
        "set datafile separator ','",
        "set key autotitle columnhead",
    ]
    if len(plots) > 1:
        lines.append(f"set multiplot layout {(len(plots) + 1) // 2},2")
    lines.extend(plots)
    if len(plots) > 1:
        lines.append("unset multiplot")
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as error:
        raise IoError(f"cannot write {path}: {error.strerror or error}")
    return path


def repro(figure_id, out_dir, threads=None):
    """Regenerate the data of one figure into ``out_dir``; returns the paths."""
    config, run, document = load_preset(figure_id)
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as error:
        raise IoError(f"cannot create {out_dir}: {error.strerror or error}")
    logger.info("reproducing %s with the %s pipeline", figure_id, run["pipeline"])
    paths, plots = PIPELINES[run["pipeline"]](figure_id, config, run, out_dir, threads)
    paths.append(
        _write_script(
            out_dir / f"{figure_id}.gp", figure_id, document.get("description", ""), plots
        )
    )
    return paths
