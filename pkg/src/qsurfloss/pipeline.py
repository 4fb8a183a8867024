"""End-to-end orchestration: load, group, fit, predict, emit report files.

A pipeline run writes a schema-versioned JSON report plus plot-ready CSVs
into the configured output directory:

* ``q_vs_psm.csv``            measured and modeled Q against p_sm
* ``q_vs_normalized_pr.csv``  the same data against the normalized PR
* ``q_model_surface.csv``     modeled Q on a (p_sm, p_j) grid
* ``psm_width_sweep.csv``     participation sweep (when requested)

Reports are byte-for-byte deterministic for identical inputs: floats are
rounded to 9 significant digits and keys are sorted.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import bundled_device_table, group_for_fit, load_device_table
from .errors import DegenerateFitError, InvalidInputError, QSurfLossError
from .lossmodel import (
    FITTERS,
    LossFitResult,
    LossModel,
    Weighting,
    model_inverse_q,
    normalized_pr,
)
from .participation import (
    InterfaceRegion,
    InterfaceSpec,
    cutoff_sensitivity,
    psm_width_sweep,
    write_sweep_csv,
)
from .solver import solve_cross_section
from .geometry import interdigital_unit_cell

REPORT_SCHEMA_VERSION = 1


@dataclass
class SweepConfig:
    """Width-sweep stage settings (defaults reproduce the standard curve)."""

    width_min_um: float = 1.0
    width_max_um: float = 20.0
    points: int = 20
    t_sm_nm: float = 1.0
    eps_sm_rel: float = 10.15
    cutoff_um: float | None = None  # None: width-proportional cutoff
    n_fingers: int = 7
    elements_per_strip: int = 256

    def widths(self) -> list[float]:
        if self.points < 1 or self.width_max_um <= self.width_min_um:
            raise InvalidInputError("bad sweep range")
        if self.points == 1:
            return [self.width_min_um]
        return list(
            np.linspace(self.width_min_um, self.width_max_um, self.points)
        )


@dataclass
class PipelineConfig:
    """Settings for one report run; see ``from_json`` for the file format."""

    dataset: str | None = None  # None: bundled device table
    models: tuple[str, ...] = ("sm+j", "sm+q0")
    weighting: str = "invvar"
    grouping: str = "per_die_design"
    output_dir: str = "."
    sweep: SweepConfig | None = None
    surface_grid_points: int = 25

    def validate(self) -> None:
        for m in self.models:
            LossModel(m)
        Weighting(self.weighting)
        if self.grouping not in ("per_die_design", "per_device"):
            raise InvalidInputError(f"unknown grouping {self.grouping!r}")
        if self.dataset is not None and not Path(self.dataset).exists():
            raise InvalidInputError(f"dataset not found: {self.dataset}")

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        sweep = None
        if raw.get("sweep"):
            sweep = SweepConfig(**raw["sweep"])
        cfg = cls(
            dataset=raw.get("dataset"),
            models=tuple(raw.get("models", ("sm+j", "sm+q0"))),
            weighting=raw.get("weighting", "invvar"),
            grouping=raw.get("grouping", "per_die_design"),
            output_dir=raw.get("output_dir", "."),
            sweep=sweep,
            surface_grid_points=int(raw.get("surface_grid_points", 25)),
        )
        cfg.validate()
        return cfg


def _nine_digits(obj):
    """Recursively round floats to 9 significant digits for stable output."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}") if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _nine_digits(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nine_digits(v) for v in obj]
    return obj


def write_report_json(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_nine_digits(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_q_vs_psm(points, fits: dict[str, LossFitResult], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        headers = ["group_id", "p_sm", "q_measured", "q_std"]
        headers += [f"q_model[{name}]" for name in fits]
        writer.writerow(headers)
        for p in points:
            row = [p.group_id, f"{p.p_sm:.9g}", f"{p.q_mean:.9g}",
                   "" if not p.q_std else f"{p.q_std:.9g}"]
            for fit in fits.values():
                inv_q = model_inverse_q(fit, p.p_sm, p.p_j)
                row.append(f"{1.0 / inv_q:.9g}" if inv_q > 0 else "")
            writer.writerow(row)


def _write_q_vs_npr(points, fit: LossFitResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group_id", "normalized_pr", "q_measured", "q_std",
                         "q_model"])
        for p in points:
            npr = normalized_pr(p.p_sm, p.p_j, fit.tan_d_sm, fit.tan_d_j)
            inv_q = fit.tan_d_sm * npr
            writer.writerow([
                p.group_id,
                f"{npr:.9g}",
                f"{p.q_mean:.9g}",
                "" if not p.q_std else f"{p.q_std:.9g}",
                f"{1.0 / inv_q:.9g}",
            ])


def _write_model_surface(points, fit: LossFitResult, path, n: int) -> None:
    p_sm_vals = np.geomspace(
        min(p.p_sm for p in points), max(p.p_sm for p in points), n
    )
    p_j_vals = np.geomspace(
        min(p.p_j for p in points), max(p.p_j for p in points), n
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p_sm", "p_j", "q_model"])
        for psm in p_sm_vals:
            for pj in p_j_vals:
                inv_q = model_inverse_q(fit, float(psm), float(pj))
                writer.writerow([f"{psm:.9g}", f"{pj:.9g}", f"{1.0 / inv_q:.9g}"])


def _cutoff_sensitivity_block(sweep_cfg: SweepConfig, spec: InterfaceSpec) -> dict:
    """p_sm at the standard cutoff triple for one representative width.

    The edge cutoff regularizes the strip-edge field singularity, so every
    sweep report carries the sensitivity of p_sm to that choice.
    """
    width = min(max(10.0, sweep_cfg.width_min_um), sweep_cfg.width_max_um)
    geom = interdigital_unit_cell(
        width,
        sweep_cfg.n_fingers,
        discretization=sweep_cfg.elements_per_strip,
    )
    sol = solve_cross_section(geom)
    values = cutoff_sensitivity(sol, spec)
    return {
        "width_um": width,
        "values": [{"cutoff_um": c, "p_sm": p} for c, p in values],
    }


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute the configured stages and write the report bundle.

    Returns the report dictionary (also written as ``report.json``).  Fit
    degenerations do not abort the run; they are recorded under ``errors``
    and flip ``status`` to ``"partial"`` so callers can exit nonzero.

    Raises
    ------
    InvalidInputError
        If the configuration is invalid or the dataset is empty (nothing is
        written in that case).
    """
    config.validate()
    out_dir = Path(config.output_dir)

    manifest: list[dict] = []
    errors: list[dict] = []
    report: dict = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "grouping": config.grouping,
        "weighting": config.weighting,
        "fits": {},
        "errors": errors,
        "outputs": manifest,
    }

    points = None
    if config.models:
        if config.dataset is None:
            records = bundled_device_table()
            report["dataset"] = "bundled"
        else:
            records = load_device_table(config.dataset)
            report["dataset"] = str(config.dataset)
        if not records:
            raise InvalidInputError("dataset contains no device records")
        report["n_devices"] = len(records)
        points = group_for_fit(records, mode=config.grouping)
        points.sort(key=lambda p: (p.p_sm, p.p_j, p.group_id))
        report["n_fit_points"] = len(points)

    out_dir.mkdir(parents=True, exist_ok=True)

    fits: dict[str, LossFitResult] = {}
    if points is not None:
        for model_name in config.models:
            model = LossModel(model_name)
            try:
                fit = FITTERS[model](points, weighting=config.weighting)
            except DegenerateFitError as exc:
                errors.append({"stage": f"fit[{model.value}]", "error": str(exc)})
                continue
            fits[model.value] = fit
            entry = fit.to_json_dict()
            entry["points"] = [
                {
                    "group_id": p.group_id,
                    "p_sm": p.p_sm,
                    "p_j": p.p_j,
                    "q_mean": p.q_mean,
                    "q_std": p.q_std,
                    "n_devices": p.n_devices,
                }
                for p in points
            ]
            report["fits"][model.value] = entry

        if fits:
            path = out_dir / "q_vs_psm.csv"
            _write_q_vs_psm(points, fits, path)
            manifest.append({"path": path.name, "kind": "q_vs_psm",
                             "status": "written"})
        if LossModel.SM_PLUS_J.value in fits:
            fit = fits[LossModel.SM_PLUS_J.value]
            path = out_dir / "q_vs_normalized_pr.csv"
            _write_q_vs_npr(points, fit, path)
            manifest.append({"path": path.name, "kind": "q_vs_normalized_pr",
                             "status": "written"})
            path = out_dir / "q_model_surface.csv"
            _write_model_surface(points, fit, path, config.surface_grid_points)
            manifest.append({"path": path.name, "kind": "q_model_surface",
                             "status": "written"})

    if config.sweep is not None:
        sweep_cfg = config.sweep
        spec = InterfaceSpec(
            InterfaceRegion.SM,
            thickness_nm=sweep_cfg.t_sm_nm,
            eps_rel=sweep_cfg.eps_sm_rel,
        )
        try:
            sweep_points = psm_width_sweep(
                sweep_cfg.widths(),
                spec=spec,
                n_fingers=sweep_cfg.n_fingers,
                discretization=sweep_cfg.elements_per_strip,
                cutoff_um=sweep_cfg.cutoff_um,
            )
        except QSurfLossError as exc:
            errors.append({"stage": "sweep", "error": str(exc)})
        else:
            path = out_dir / "psm_width_sweep.csv"
            write_sweep_csv(sweep_points, path)
            status = (
                "partial"
                if any(p.error for p in sweep_points)
                else "written"
            )
            manifest.append({"path": path.name, "kind": "psm_width_sweep",
                             "status": status})
            report["sweep"] = {
                "n_fingers": sweep_cfg.n_fingers,
                "t_sm_nm": sweep_cfg.t_sm_nm,
                "eps_sm_rel": sweep_cfg.eps_sm_rel,
                "points": [
                    {
                        "width_um": p.width_um,
                        "p_sm": p.p_sm,
                        "p_sa": p.p_sa,
                        "p_ma": p.p_ma,
                        "cutoff_um": p.cutoff_um,
                        "error": p.error,
                    }
                    for p in sweep_points
                ],
                "cutoff_sensitivity": _cutoff_sensitivity_block(sweep_cfg, spec),
            }

    report["status"] = "partial" if errors else "ok"
    manifest.append({"path": "report.json", "kind": "report",
                     "status": "written"})
    write_report_json(report, out_dir / "report.json")
    return report
