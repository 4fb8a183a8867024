"""Device-table ingestion, validation and grouping for the loss fits.

The table format mirrors the measurement summary: frequencies cyclic
(GHz/MHz), lifetimes in us, Purcell limits in ms, quality factors in units
of 1e6 and participation ratios in units of 1e-4.  Records store Q and the
participations in absolute units; the file keeps the publication-style
scaling for fidelity.  Standard deviations are optional (multi-round
statistics are not available for every device).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from .errors import RecordValidationError, TableFormatError
from .lossmodel import LossDataPoint

GEOMETRIES = ("interdigital_2d", "dumbbell_2d", "dumbbell_3d")

COLUMNS = (
    "device_id",
    "geometry",
    "omega_q_ghz",
    "omega_c_ghz",
    "g_mhz",
    "t1_mean_us",
    "t1_std_us",
    "t_purcell_ms",
    "q_mean_1e6",
    "q_std_1e6",
    "p_sm_1e4",
    "p_j_1e4",
)

TWO_PI = 2.0 * math.pi


@dataclass
class DeviceRecord:
    """One measured transmon device."""

    device_id: str
    geometry: str
    omega_q_ghz: float
    omega_c_ghz: float
    g_mhz: float
    t1_mean_us: float
    t1_std_us: float | None
    t_purcell_ms: float
    q_mean: float
    q_std: float | None
    p_sm: float
    p_j: float

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        def fail(field_name: str, message: str):
            raise RecordValidationError(
                f"device {self.device_id}: field '{field_name}' {message}"
            )

        if self.geometry not in GEOMETRIES:
            fail("geometry", f"must be one of {GEOMETRIES}, got {self.geometry!r}")
        if "-" not in self.device_id:
            fail("device_id", "must look like '<die>-<index>'")
        for name in ("omega_q_ghz", "omega_c_ghz", "g_mhz"):
            if getattr(self, name) <= 0:
                fail(name, "must be > 0")
        if self.omega_c_ghz <= self.omega_q_ghz:
            fail("omega_c_ghz", "must exceed omega_q_ghz (dispersive readout)")
        if self.t1_mean_us <= 0:
            fail("t1_mean_us", "must be > 0")
        if self.t1_std_us is not None and self.t1_std_us < 0:
            fail("t1_std_us", "must be >= 0 when present")
        if self.t_purcell_ms * 1e3 <= self.t1_mean_us:
            fail("t_purcell_ms", "must exceed the measured T1")
        if self.q_mean <= 0:
            fail("q_mean", "must be > 0")
        if self.q_std is not None and self.q_std < 0:
            fail("q_std", "must be >= 0 when present")
        if self.p_sm <= 0 or self.p_j <= 0:
            fail("p_sm/p_j", "must be > 0")

    @property
    def die_id(self) -> str:
        """Die label parsed from the device id prefix before the hyphen."""
        return self.device_id.split("-", 1)[0]

    @property
    def omega_q_rad(self) -> float:
        return TWO_PI * self.omega_q_ghz * 1e9

    @property
    def omega_c_rad(self) -> float:
        return TWO_PI * self.omega_c_ghz * 1e9

    @property
    def g_rad(self) -> float:
        return TWO_PI * self.g_mhz * 1e6

    @property
    def delta_rad(self) -> float:
        """Qubit-cavity detuning, rad/s (positive for cavity above qubit)."""
        return self.omega_c_rad - self.omega_q_rad


def _parse_optional(value: str) -> float | None:
    value = value.strip()
    return None if value == "" else float(value)


def _record_from_row(row: dict) -> DeviceRecord:
    return DeviceRecord(
        device_id=row["device_id"].strip(),
        geometry=row["geometry"].strip(),
        omega_q_ghz=float(row["omega_q_ghz"]),
        omega_c_ghz=float(row["omega_c_ghz"]),
        g_mhz=float(row["g_mhz"]),
        t1_mean_us=float(row["t1_mean_us"]),
        t1_std_us=_parse_optional(row["t1_std_us"]),
        t_purcell_ms=float(row["t_purcell_ms"]),
        q_mean=float(row["q_mean_1e6"]) * 1e6,
        q_std=(lambda v: None if v is None else v * 1e6)(
            _parse_optional(row["q_std_1e6"])
        ),
        p_sm=float(row["p_sm_1e4"]) * 1e-4,
        p_j=float(row["p_j_1e4"]) * 1e-4,
    )


def load_device_table(path) -> list[DeviceRecord]:
    """Parse and validate a device table CSV.

    Raises :class:`TableFormatError` for a wrong header or an unparseable
    row (with its row number) and :class:`RecordValidationError` when a row
    violates a field invariant.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _load_records(fh, str(path))


def _load_records(fh, source: str) -> list[DeviceRecord]:
    reader = csv.DictReader(fh)
    if reader.fieldnames is None or tuple(reader.fieldnames) != COLUMNS:
        raise TableFormatError(
            f"{source}: header must be {','.join(COLUMNS)}, "
            f"got {reader.fieldnames}"
        )
    records = []
    for i, row in enumerate(reader, start=2):
        try:
            records.append(_record_from_row(row))
        except (TypeError, ValueError, KeyError) as exc:
            if isinstance(exc, RecordValidationError):
                raise
            raise TableFormatError(f"{source}: malformed row {i}: {exc}") from exc
    return records


def bundled_device_table() -> list[DeviceRecord]:
    """The TiN-on-sapphire transmon dataset shipped with the package.

    32 devices across 9 dies and 13 capacitor designs.  Every record is
    internally consistent: recomputing Q from (T1, T_Purcell, omega_q)
    reproduces the tabulated Q within 5% (publication rounding).  One
    further measured device was dropped during curation because its
    lifetime and quality-factor entries disagree by ~60% under that
    identity, so one design appears without its interdigital sibling on
    die D5.
    """
    ref = resources.files("qsurfloss.data").joinpath("devices.csv")
    with ref.open("r", encoding="utf-8") as fh:
        return _load_records(fh, "bundled devices.csv")


def save_device_table(records: Iterable[DeviceRecord], path) -> None:
    """Write records back to the CSV format accepted by the loader."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for r in records:
            writer.writerow([
                r.device_id,
                r.geometry,
                f"{r.omega_q_ghz:.10g}",
                f"{r.omega_c_ghz:.10g}",
                f"{r.g_mhz:.10g}",
                f"{r.t1_mean_us:.10g}",
                "" if r.t1_std_us is None else f"{r.t1_std_us:.10g}",
                f"{r.t_purcell_ms:.10g}",
                f"{r.q_mean / 1e6:.10g}",
                "" if r.q_std is None else f"{r.q_std / 1e6:.10g}",
                f"{r.p_sm / 1e-4:.10g}",
                f"{r.p_j / 1e-4:.10g}",
            ])


def group_for_fit(
    records: Sequence[DeviceRecord], mode: str = "per_die_design"
) -> list[LossDataPoint]:
    """Aggregate device records into loss-fit points.

    ``per_die_design`` groups by (die, geometry, p_sm, p_j) — one point per
    die and capacitor design, with the mean Q across the group's devices and
    the population standard deviation.  A single-device group falls back to
    that device's own round-statistics spread when published, else 0.
    ``per_device`` passes every record through unchanged.
    """
    if not records:
        raise TableFormatError("no records to group")
    if mode == "per_device":
        return [
            LossDataPoint(
                p_sm=r.p_sm,
                p_j=r.p_j,
                q_mean=r.q_mean,
                q_std=r.q_std,
                group_id=r.device_id,
                n_devices=1,
            )
            for r in records
        ]
    if mode != "per_die_design":
        raise TableFormatError(f"unknown grouping mode {mode!r}")

    groups: dict[tuple, list[DeviceRecord]] = {}
    for r in records:
        groups.setdefault((r.die_id, r.geometry, r.p_sm, r.p_j), []).append(r)

    points = []
    for (die, geometry, p_sm, p_j), members in groups.items():
        qs = [m.q_mean for m in members]
        n = len(qs)
        mean = sum(qs) / n
        if n > 1:
            std = math.sqrt(sum((q - mean) ** 2 for q in qs) / n)
        else:
            std = members[0].q_std if members[0].q_std is not None else 0.0
        points.append(
            LossDataPoint(
                p_sm=p_sm,
                p_j=p_j,
                q_mean=mean,
                q_std=std,
                group_id=f"{die}:{geometry}:psm={p_sm / 1e-4:g}e-4",
                n_devices=n,
            )
        )
    return points
