"""Kinematics analysis of committed trials.

Derives the paper-grade metrics from a trial's 1 kHz log: the adjusted
syringe trajectory (plunger motion isolated from needle advance), probing
movements detected as peaks on it, per-trial probe count/depth/rate,
per-layer normalized probe counts, per-layer needle velocities, and the
injection-site error.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from .engine import TICK_RATE_HZ, TrialRecord
from .tissue import (
    DepthOutOfModelError,
    PatientModel,
    Tissue,
    build_patient_model,
    classify_outcome,
    layer_at,
)

__all__ = [
    "AnalysisError",
    "AdjustedTrajectory",
    "ProbeDetectionParams",
    "ProbeEvent",
    "ProbeMetrics",
    "adjust_lor",
    "detect_probes",
    "probe_metrics",
    "layer_velocities",
    "error_size",
    "metrics_row",
    "metrics_table",
    "write_metrics_csv",
    "read_metrics_csv",
    "METRICS_COLUMNS",
]


class AnalysisError(ValueError):
    """Record cannot be analysed (e.g. the needle never reached the skin)."""


@dataclass(frozen=True)
class AdjustedTrajectory:
    """Syringe plunger motion relative to the needle, zero-point calibrated.

    Defined exactly on the samples where the needle is inside the tissue
    (depth > 0); ``depth`` keeps the needle depth at those samples for layer
    attribution.
    """

    t: np.ndarray
    p_adj: np.ndarray
    depth: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def adjust_lor(record: TrialRecord) -> AdjustedTrajectory:
    """Subtract needle motion and the calibrated rest offset from the syringe.

    The offset is the syringe-device position captured when the needle first
    reached the skin, so both devices share a zero point; subtracting the
    needle position then isolates plunger probing from needle advance.
    """
    if record.lor_zero_offset is None:
        raise AnalysisError("record has no zero-point calibration (needle never reached skin)")
    t = np.array([s.t for s in record.samples])
    p_touhy = np.array([s.p_touhy for s in record.samples])
    p_lor = np.array([s.p_lor_raw for s in record.samples])
    mask = p_touhy > 0.0
    p_adj = (p_lor[mask] - record.lor_zero_offset) - p_touhy[mask]
    return AdjustedTrajectory(t=t[mask], p_adj=p_adj, depth=p_touhy[mask])


@dataclass(frozen=True)
class ProbeDetectionParams:
    """Peak-detection knobs: device-noise-scale ripples stay ignored."""

    min_prominence: float = 0.5  # mm
    min_separation: float = 0.05  # s


@dataclass(frozen=True)
class ProbeEvent:
    """One probing movement: its peak time, height, and enclosing layer."""

    t_peak: float  # s
    depth: float  # mm, peak height of the adjusted trajectory
    layer: Tissue | None  # needle's layer at the peak; None if past the dura


def _contiguous_segments(t: np.ndarray) -> list[slice]:
    if len(t) == 0:
        return []
    gap = 1.5 / TICK_RATE_HZ
    breaks = np.flatnonzero(np.diff(t) > gap) + 1
    edges = [0, *breaks.tolist(), len(t)]
    return [slice(a, b) for a, b in zip(edges, edges[1:])]


def detect_probes(
    traj: AdjustedTrajectory,
    model: PatientModel | None = None,
    params: ProbeDetectionParams = ProbeDetectionParams(),
) -> list[ProbeEvent]:
    """Find probing movements as local maxima of the adjusted trajectory.

    A probe must rise at least ``min_prominence`` above its surroundings and
    above the calibrated rest level; candidate peaks closer together than
    ``min_separation`` are merged, keeping the taller one.  Peak height is
    measured from the zero baseline.
    """
    candidates: list[tuple[float, float, float]] = []  # (t, height, depth)
    for seg in _contiguous_segments(traj.t):
        x = traj.p_adj[seg]
        if len(x) < 3:
            continue
        idx, _ = find_peaks(x, prominence=params.min_prominence)
        for i in idx:
            if x[i] >= params.min_prominence:
                candidates.append((traj.t[seg][i], x[i], traj.depth[seg][i]))
    # greedy suppression: keep taller peaks, drop neighbours within the
    # minimum separation (time-based, so it spans segment boundaries)
    kept: list[tuple[float, float, float]] = []
    for cand in sorted(candidates, key=lambda c: -c[1]):
        if all(abs(cand[0] - k[0]) >= params.min_separation for k in kept):
            kept.append(cand)
    kept.sort(key=lambda c: c[0])

    events = []
    for t_peak, height, needle_depth in kept:
        layer = None
        if model is not None:
            try:
                layer = layer_at(model, needle_depth).tissue
            except DepthOutOfModelError:
                layer = None
        events.append(ProbeEvent(t_peak=t_peak, depth=height, layer=layer))
    return events


@dataclass(frozen=True)
class ProbeMetrics:
    """Per-trial probing summary.

    ``mean_rate`` is the mean of inverse consecutive-peak gaps; undefined
    (None) with fewer than two probes.  Densities normalize each layer's
    probe count by its mass-scaled thickness in mm.
    """

    count: int
    mean_depth: float | None
    mean_rate: float | None
    per_layer_density: dict[Tissue, float] = field(default_factory=dict)


def probe_metrics(
    events: list[ProbeEvent], record: TrialRecord, model: PatientModel
) -> ProbeMetrics:
    count = len(events)
    mean_depth = float(np.mean([e.depth for e in events])) if count else None
    mean_rate = None
    if count >= 2:
        gaps = np.diff([e.t_peak for e in events])
        mean_rate = float(np.mean(1.0 / gaps))
    density = {}
    for tissue in model.tissues():
        n_in_layer = sum(1 for e in events if e.layer is tissue)
        density[tissue] = n_in_layer / model.probing_thickness(tissue)
    return ProbeMetrics(count, mean_depth, mean_rate, density)


def layer_velocities(
    record: TrialRecord, model: PatientModel, smooth_window: int = 21
) -> dict[Tissue, float]:
    """Mean needle speed (mm/s) per layer entered during the trial.

    Raw 1 kHz differencing is noise-dominated, so the depth track is
    moving-average prefiltered before central differences.  Samples are
    attributed to layers by their unsmoothed depth; layers never entered are
    absent from the result.
    """
    t = np.array([s.t for s in record.samples])
    p = np.array([s.p_touhy for s in record.samples])
    if len(p) < 2:
        return {}
    smoothed = uniform_filter1d(p, size=smooth_window, mode="nearest")
    v = np.gradient(smoothed, t)
    out = {}
    for tissue in model.tissues():
        start, end = model.tissue_span(tissue)
        mask = (p >= start) & (p < end)
        if mask.any():
            out[tissue] = float(np.mean(np.abs(v[mask])))
    return out


def error_size(record: TrialRecord, model: PatientModel) -> tuple[float, float]:
    """Signed and absolute distance (mm) of the commit point from the window."""
    outcome = classify_outcome(model, max(record.final_depth, 0.0))
    return outcome.signed_error, abs(outcome.signed_error)


# ---------------------------------------------------------------------------
# batch metrics table

_LAYER_ORDER = (
    Tissue.SKIN,
    Tissue.FAT,
    Tissue.SUPRASPINOUS_LIGAMENT,
    Tissue.INTERSPINOUS_LIGAMENT,
    Tissue.LIGAMENTUM_FLAVUM,
    Tissue.EPIDURAL_SPACE,
)

METRICS_COLUMNS = (
    ["participant", "trial_index", "kind", "body_mass_kg", "outcome", "signed_error_mm",
     "abs_error_mm", "final_depth_mm", "probe_count", "probe_mean_depth_mm",
     "probe_mean_rate_hz"]
    + [f"probes_per_mm_{t.value}" for t in _LAYER_ORDER]
    + [f"mean_speed_mm_s_{t.value}" for t in _LAYER_ORDER]
)


def metrics_row(
    record: TrialRecord,
    model: PatientModel | None = None,
    params: ProbeDetectionParams = ProbeDetectionParams(),
) -> dict:
    """All derived metrics for one trial, as one flat table row."""
    if model is None:
        model = build_patient_model(record.body_mass)
    traj = adjust_lor(record)
    events = detect_probes(traj, model=model, params=params)
    probes = probe_metrics(events, record, model)
    speeds = layer_velocities(record, model)
    signed, absolute = error_size(record, model)
    row = {
        "participant": record.participant or "",
        "trial_index": record.trial_index,
        "kind": record.kind.value,
        "body_mass_kg": record.body_mass,
        "outcome": record.outcome.kind.value,
        "signed_error_mm": signed,
        "abs_error_mm": absolute,
        "final_depth_mm": record.final_depth,
        "probe_count": probes.count,
        "probe_mean_depth_mm": probes.mean_depth,
        "probe_mean_rate_hz": probes.mean_rate,
    }
    for tissue in _LAYER_ORDER:
        row[f"probes_per_mm_{tissue.value}"] = probes.per_layer_density[tissue]
    for tissue in _LAYER_ORDER:
        row[f"mean_speed_mm_s_{tissue.value}"] = speeds.get(tissue)
    return row


def metrics_table(
    records, params: ProbeDetectionParams = ProbeDetectionParams()
) -> list[dict]:
    models: dict[float, PatientModel] = {}
    rows = []
    for record in records:
        model = models.setdefault(record.body_mass, build_patient_model(record.body_mass))
        rows.append(metrics_row(record, model=model, params=params))
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(rows: list[dict], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow([_cell(row.get(col)) for col in METRICS_COLUMNS])


def read_metrics_csv(path: str | Path) -> list[dict]:
    """Parse a metrics CSV back to typed rows (None for blank cells)."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row: dict = {}
            for key, value in raw.items():
                if value == "" and key not in ("participant",):
                    row[key] = None
                elif key in ("participant", "kind", "outcome"):
                    row[key] = value
                elif key in ("trial_index", "probe_count"):
                    row[key] = int(value)
                else:
                    row[key] = float(value)
            rows.append(row)
    return rows
