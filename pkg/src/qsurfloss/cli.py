"""Command-line interface.

Subcommands::

    sweep      participation versus gap/finger width -> CSV
    fit-loss   loss-tangent fits on a device table -> JSON report
    fit-t1     single-exponential T1 fit of a decay trace
    purcell    Purcell-limit estimate from dispersive parameters
    report     full pipeline driven by a JSON config

All CSV output is comma separated with a header row; JSON reports are
schema versioned and deterministic for identical inputs.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import click

from . import __version__
from .dataio import bundled_device_table, group_for_fit, load_device_table
from .errors import QSurfLossError
from .lossmodel import FITTERS, LossModel
from .participation import InterfaceRegion, InterfaceSpec, psm_width_sweep, write_sweep_csv
from .pipeline import PipelineConfig, run_pipeline, write_report_json
from .qubitfit import (
    PurcellParams,
    fit_exponential,
    load_decay_trace,
    purcell_limit,
    t1_report_dict,
)

GROUP_MODES = {"per-die": "per_die_design", "per-device": "per_device"}


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Interface participation and dielectric-loss analysis for
    superconducting-qubit capacitors."""


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@main.command()
@click.option("--width-min", type=float, default=1.0, show_default=True,
              help="Smallest gap/finger width, um.")
@click.option("--width-max", type=float, default=20.0, show_default=True,
              help="Largest gap/finger width, um.")
@click.option("--points", type=int, default=20, show_default=True,
              help="Number of sweep points.")
@click.option("--t-sm-nm", type=float, default=1.0, show_default=True,
              help="Substrate-metal layer thickness, nm.")
@click.option("--eps-sm", type=float, default=10.15, show_default=True,
              help="Relative permittivity of the layer (and substrate).")
@click.option("--cutoff-um", type=float, default=None,
              help="Fixed edge cutoff in um; default scales with the width.")
@click.option("--fingers", type=int, default=7, show_default=True,
              help="Fingers in the unit-cell array (odd, >= 5).")
@click.option("--elements", type=int, default=256, show_default=True,
              help="Boundary elements per strip.")
@click.option("--out", type=click.Path(dir_okay=False), default="psm_width_sweep.csv",
              show_default=True, help="Output CSV path.")
def sweep(width_min, width_max, points, t_sm_nm, eps_sm, cutoff_um, fingers,
          elements, out) -> None:
    """Compute the participation-versus-width curve of an interdigital cell."""
    import numpy as np

    spec = InterfaceSpec(InterfaceRegion.SM, thickness_nm=t_sm_nm, eps_rel=eps_sm)
    widths = (
        [width_min]
        if points == 1
        else list(np.linspace(width_min, width_max, points))
    )
    try:
        result = psm_width_sweep(
            widths,
            spec=spec,
            n_fingers=fingers,
            discretization=elements,
            cutoff_um=cutoff_um,
        )
    except QSurfLossError as exc:
        _fail(exc)
    write_sweep_csv(result, out)
    n_failed = sum(1 for p in result if p.error)
    click.echo(f"wrote {out} ({len(result)} widths, {n_failed} failed)")
    if n_failed:
        sys.exit(1)


@main.command("fit-loss")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Device table CSV; bundled dataset when omitted.")
@click.option("--model", type=click.Choice(["sm+q0", "sm+j"]), default="sm+j",
              show_default=True)
@click.option("--weights", type=click.Choice(["none", "invvar"]), default="invvar",
              show_default=True)
@click.option("--group", type=click.Choice(sorted(GROUP_MODES)), default="per-die",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the full fit report JSON here.")
def fit_loss(input_path, model, weights, group, out) -> None:
    """Fit the loss model to a device table and print the parameters."""
    try:
        records = (
            load_device_table(input_path) if input_path else bundled_device_table()
        )
        points = group_for_fit(records, mode=GROUP_MODES[group])
        points.sort(key=lambda p: (p.p_sm, p.p_j, p.group_id))
        fit = FITTERS[LossModel(model)](points, weighting=weights)
    except QSurfLossError as exc:
        _fail(exc)

    click.echo(f"model {model} on {len(points)} points ({group}, weights={weights})")
    click.echo(
        f"  tan_d_sm = {fit.tan_d_sm:.3e} "
        f"(+/- {fit.stderr['tan_d_sm']:.1e}, {fit.relative_stderr('tan_d_sm'):.1%})"
    )
    if fit.model is LossModel.SM_PLUS_J:
        click.echo(
            f"  tan_d_j  = {fit.tan_d_j:.3e} "
            f"(+/- {fit.stderr['tan_d_j']:.1e}, {fit.relative_stderr('tan_d_j'):.1%})"
        )
    if fit.model is LossModel.SM_PLUS_Q0:
        click.echo(f"  Q0       = {fit.q0:.3e}")
    if out:
        report = fit.to_json_dict()
        report["grouping"] = GROUP_MODES[group]
        write_report_json(report, out)
        click.echo(f"wrote {out}")


@main.command("fit-t1")
@click.option("--trace", type=click.Path(exists=True, dir_okay=False), required=True,
              help="CSV with columns delay_us, population.")
@click.option("--meta", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Optional JSON sidecar with trace metadata.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the fit result as JSON.")
def fit_t1(trace, meta, out) -> None:
    """Fit a single-exponential decay to a measured trace."""
    try:
        data = load_decay_trace(trace, meta_path=meta)
        estimate = fit_exponential(data)
    except QSurfLossError as exc:
        _fail(exc)
    click.echo(
        f"T1 = {estimate.t1_us:.1f} us (fit error {estimate.fit_err_us:.1f} us), "
        f"amplitude {estimate.amplitude:.3f}, offset {estimate.offset:.3f}"
    )
    if out:
        write_report_json(t1_report_dict(estimate, data), out)
        click.echo(f"wrote {out}")


@main.command()
@click.option("--g", "g_mhz", type=float, default=None,
              help="Qubit-cavity coupling, cyclic MHz.")
@click.option("--chi", "chi_mhz", type=float, default=None,
              help="Dispersive shift, cyclic MHz (alternative to --g).")
@click.option("--delta", "delta_ghz", type=float, default=None,
              help="Qubit-cavity detuning, cyclic GHz (inferred from --g "
                   "and --chi when omitted).")
@click.option("--kappa", "kappa_khz", type=float, required=True,
              help="Cavity linewidth, cyclic kHz.")
def purcell(g_mhz, chi_mhz, delta_ghz, kappa_khz) -> None:
    """Estimate the readout-cavity Purcell limit.

    Provide any two of --g, --chi and --delta; the third follows from the
    dispersive relation.
    """
    try:
        params = PurcellParams.from_cyclic(
            kappa_khz=kappa_khz, delta_ghz=delta_ghz, g_mhz=g_mhz,
            chi_mhz=chi_mhz
        )
        limit = purcell_limit(params)
    except QSurfLossError as exc:
        _fail(exc)
    g_eff = params.g_effective / (2 * math.pi * 1e6)
    click.echo(f"g = {g_eff:.4g} MHz (cyclic)")
    if limit == float("inf"):
        click.echo("T_Purcell = unbounded")
    else:
        click.echo(f"T_Purcell = {limit * 1e3:.4g} ms")


@main.command()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Pipeline configuration JSON.")
def report(config) -> None:
    """Run the full pipeline from a JSON config and write the report bundle."""
    try:
        cfg = PipelineConfig.from_json(config)
        result = run_pipeline(cfg)
    except QSurfLossError as exc:
        _fail(exc)
    out_dir = Path(cfg.output_dir)
    for entry in result["outputs"]:
        click.echo(f"wrote {out_dir / entry['path']} [{entry['status']}]")
    if result["status"] != "ok":
        for err in result["errors"]:
            click.echo(f"stage {err['stage']} failed: {err['error']}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
