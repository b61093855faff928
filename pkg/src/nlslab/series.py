"""Sampled diagnostics of a run and their CSV form."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .radial import NormSet

CSV_COLUMNS = (
    "t", "mass", "energy", "kinetic", "l4", "linf", "action",
    "term_bulk", "term_boundary", "term_quartic_err", "term_gradient_err",
    "flux", "interaction", "xi0", "virial",
    # space norms needed by the windowed space-time norms
    "lp3", "lp5", "lp10",
)


class SeriesFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ActionTerms:
    bulk: float
    boundary: float
    angular: float
    quartic_err: float
    gradient_err: float

    @property
    def total(self) -> float:
        return self.bulk + self.boundary + self.angular + self.quartic_err + self.gradient_err

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DiagnosticRow:
    t: float
    norms: NormSet
    action: float
    action_terms: ActionTerms
    flux: float
    interaction: float
    xi0: float
    virial: float
    lp3: float
    lp5: float
    lp10: float

    def lp_power(self, p: int) -> float:
        table = {3: self.lp3, 4: self.norms.l4_fourth, 5: self.lp5, 10: self.lp10}
        if p not in table:
            raise ValueError(f"no sampled L^{p} norm (available: 3, 4, 5, 10)")
        return table[p]

    def to_record(self) -> dict[str, float]:
        n, a = self.norms, self.action_terms
        return {
            "t": self.t, "mass": n.mass, "energy": n.energy, "kinetic": n.kinetic,
            "l4": n.l4_fourth, "linf": n.sup_abs, "action": self.action,
            "term_bulk": a.bulk, "term_boundary": a.boundary,
            "term_quartic_err": a.quartic_err, "term_gradient_err": a.gradient_err,
            "flux": self.flux, "interaction": self.interaction, "xi0": self.xi0,
            "virial": self.virial, "lp3": self.lp3, "lp5": self.lp5, "lp10": self.lp10,
        }

    @classmethod
    def from_record(cls, rec: dict[str, float]) -> "DiagnosticRow":
        kinetic, l4 = rec["kinetic"], rec["l4"]
        return cls(
            t=rec["t"],
            norms=NormSet(rec["mass"], kinetic, l4, rec["energy"], rec["linf"]),
            action=rec["action"],
            action_terms=ActionTerms(rec["term_bulk"], rec["term_boundary"], 0.0,
                                     rec["term_quartic_err"], rec["term_gradient_err"]),
            flux=rec["flux"], interaction=rec["interaction"], xi0=rec["xi0"],
            virial=rec["virial"], lp3=rec["lp3"], lp5=rec["lp5"], lp10=rec["lp10"],
        )


@dataclass
class TimeSeries:
    rows: list[DiagnosticRow] = field(default_factory=list)
    termination: str = "completed"  # or "blowup"
    euclidean: bool = True
    r0: float = 0.0
    message: str = ""
    final_state: object = None
    states: list | None = None  # sampled SimStates, kept on request

    @property
    def times(self) -> list[float]:
        return [row.t for row in self.rows]

    @property
    def blew_up(self) -> bool:
        return self.termination == "blowup"

    def meta(self) -> dict:
        return {"termination": self.termination, "euclidean": self.euclidean,
                "r0": self.r0, "message": self.message, "rows": len(self.rows)}


def _fmt(x: float) -> str:
    return repr(float(x) + 0.0)  # no "-0.0"


def series_to_csv(series: TimeSeries) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in series.rows:
        rec = row.to_record()
        buf.write(",".join(_fmt(rec[c]) for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def write_series(series: TimeSeries, path: Path) -> Path:
    """Write <path> (CSV) and <path>.meta.json."""
    path = Path(path)
    path.write_text(series_to_csv(series))
    meta_path(path).write_text(json.dumps(series.meta(), indent=2, sort_keys=True) + "\n")
    return path


def meta_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def read_series(path: Path) -> TimeSeries:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SeriesFormatError(f"cannot read series {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SeriesFormatError(f"{path}: empty series file") from None
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise SeriesFormatError(f"{path}: header lacks columns {missing}")
    idx = {c: header.index(c) for c in CSV_COLUMNS}
    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if not cells:
            continue
        if len(cells) != len(header):
            raise SeriesFormatError(f"{path}: row {lineno} has {len(cells)} fields, expected {len(header)}")
        try:
            rec = {c: float(cells[i]) for c, i in idx.items()}
        except ValueError as exc:
            raise SeriesFormatError(f"{path}: row {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in rec.values()):
            raise SeriesFormatError(f"{path}: row {lineno} has non-finite entries")
        rows.append(DiagnosticRow.from_record(rec))
    series = TimeSeries(rows=rows)
    mp = meta_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text())
        series.termination = meta.get("termination", "completed")
        series.euclidean = bool(meta.get("euclidean", True))
        series.r0 = float(meta.get("r0", 0.0))
        series.message = meta.get("message", "")
    return series
