"""Epidural-region tissue stack and needle resistance model.

The epidural region is modelled as a stack of tissue layers, each rendered
as a nonlinear spring: a cubic polynomial mapping local penetration depth to
a resistive force.  Most layers have two force regimes, before puncture (BP,
elastic deformation) and after puncture (AP, cutting plus shaft friction).
The epidural space itself renders zero force, so that entering it produces
the loss-of-resistance sensation the procedure relies on.

Layer geometry scales with patient body mass through a single thickness
ratio derived from waist geometry; force magnitudes are mass-invariant
(a heavier patient has thicker, proportionally softer layers).
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

__all__ = [
    "Tissue",
    "Stage",
    "ForceRegion",
    "PatientModel",
    "PunctureState",
    "OutcomeKind",
    "Outcome",
    "DepthOutOfModelError",
    "AVERAGE_WAIST_AREA_CM2",
    "AVERAGE_WAIST_RADIUS_CM",
    "AVERAGE_BODY_MASS_KG",
    "MASS_BOUNDS_KG",
    "DEFAULT_FORCE_TABLE",
    "thickness_ratio_for_mass",
    "build_patient_model",
    "layer_at",
    "touhy_force",
    "lor_force",
    "classify_outcome",
    "load_force_table",
    "dump_force_table",
]


class Tissue(enum.Enum):
    """Layers of the epidural region, ordered by depth."""

    SKIN = "skin"
    FAT = "fat"
    SUPRASPINOUS_LIGAMENT = "supraspinous_ligament"
    INTERSPINOUS_LIGAMENT = "interspinous_ligament"
    LIGAMENTUM_FLAVUM = "ligamentum_flavum"
    EPIDURAL_SPACE = "epidural_space"


class Stage(enum.Enum):
    """Force regime of a region: before puncture, after puncture, or neither."""

    BP = "BP"
    AP = "AP"
    NONE = "-"


class DepthOutOfModelError(ValueError):
    """Raised when a depth lies beyond the modelled region (past the dura)."""


@dataclass(frozen=True)
class ForceRegion:
    """One depth band with its cubic force coefficients.

    ``start``/``end`` are cumulative needle depths in mm (half-open band
    ``[start, end)``), already scaled for the patient.  Coefficients are the
    unscaled table values; mass enters at evaluation time.
    """

    tissue: Tissue
    stage: Stage
    a0: float  # N
    a1: float  # N/mm
    a2: float  # N/mm^2
    a3: float  # N/mm^3
    start: float  # mm
    end: float  # mm

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ValueError(
                f"degenerate depth band [{self.start}, {self.end}) for {self.tissue.value}"
            )

    @property
    def width(self) -> float:
        return self.end - self.start

    def contains(self, depth: float) -> bool:
        return self.start <= depth < self.end


# Force table for a Touhy needle and an average (71 kg) patient.
# Columns: tissue, stage, a0 [N], a1 [N/mm], a2 [N/mm^2], a3 [N/mm^3],
# band start [mm], band end [mm].  Bands tile [0, 56.98) with no gaps.
_DEFAULT_TABLE_TEXT = """\
# tissue                 stage   a0      a1       a2       a3      start   end
skin                     BP      0.0075  0.0037   -0.0015  0.0008  0.0     13.92
fat                      AP      1.9212  0.1437   -0.1682  0.0     13.92   17.15
supraspinous_ligament    BP      0.628   0.2637   0.0343   0.0     17.15   19.37
supraspinous_ligament    AP      1.3855  -0.7174  0.0923   0.0     19.37   20.0
interspinous_ligament    BP      1.4021  0.3054   0.0      0.0     20.0    23.18
interspinous_ligament    AP      2.3761  0.0      0.0      0.0     23.18   41.18
ligamentum_flavum        BP      2.3761  0.4783   -0.0186  0.0     41.18   44.79
ligamentum_flavum        AP      3.861   -0.0539  -0.0375  0.0     44.79   48.38
epidural_space           -       0.0     0.0      0.0      0.0     48.38   56.98
"""

# Waist geometry constants behind the thickness scaling (female averages).
AVERAGE_WAIST_AREA_CM2 = 574.94
AVERAGE_WAIST_RADIUS_CM = 13.53
AVERAGE_BODY_MASS_KG = 71.0

# Validation bounds for patient mass; outside any plausible patient and
# outside the fitted regime of the force table.
MASS_BOUNDS_KG = (30.0, 200.0)


def _parse_table_rows(text: str, source: str) -> list[ForceRegion]:
    regions = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ValueError(f"{source}:{lineno}: expected 8 columns, got {len(parts)}")
        try:
            tissue = Tissue(parts[0])
            stage = Stage(parts[1])
            nums = [float(p) for p in parts[2:]]
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from None
        regions.append(
            ForceRegion(tissue, stage, nums[0], nums[1], nums[2], nums[3], nums[4], nums[5])
        )
    if not regions:
        raise ValueError(f"{source}: no force regions found")
    regions.sort(key=lambda r: r.start)
    for prev, cur in zip(regions, regions[1:]):
        if not math.isclose(prev.end, cur.start, abs_tol=1e-9):
            raise ValueError(
                f"{source}: bands must tile without gaps or overlaps "
                f"({prev.tissue.value} ends at {prev.end}, {cur.tissue.value} starts at {cur.start})"
            )
    if regions[0].start != 0.0:
        raise ValueError(f"{source}: first band must start at depth 0")
    return regions


def load_force_table(path: str | Path) -> list[ForceRegion]:
    """Read a plain-text force table (same column layout as the built-in one)."""
    path = Path(path)
    return _parse_table_rows(path.read_text(), str(path))


def dump_force_table(regions: list[ForceRegion]) -> str:
    """Render regions back to the plain-text table format."""
    lines = ["# tissue stage a0 a1 a2 a3 start end"]
    for r in regions:
        lines.append(
            f"{r.tissue.value} {r.stage.value} {r.a0!r} {r.a1!r} {r.a2!r} {r.a3!r} "
            f"{r.start!r} {r.end!r}"
        )
    return "\n".join(lines) + "\n"


DEFAULT_FORCE_TABLE: list[ForceRegion] = _parse_table_rows(_DEFAULT_TABLE_TEXT, "<builtin>")


def thickness_ratio_for_mass(body_mass: float) -> float:
    """Tissue thickness ratio (actual/average) for a patient body mass in kg.

    Derived from waist geometry: the waist area scales linearly with mass,
    its radius with the square root, and tissue thickness with the cube of
    the radius ratio.  Strictly increasing in mass, ~1.0 at 71 kg.
    """
    radius = math.sqrt(AVERAGE_WAIST_AREA_CM2 * (body_mass / AVERAGE_BODY_MASS_KG) / math.pi)
    return (radius / AVERAGE_WAIST_RADIUS_CM) ** 3


@dataclass(frozen=True)
class PatientModel:
    """Mass-scaled tissue stack: regions tile [0, total_depth) by depth.

    Immutable after construction; force evaluation is pure, so a model can
    be shared freely across trials and threads.
    """

    body_mass: float
    thickness_ratio: float
    regions: tuple[ForceRegion, ...]
    epidural_window: tuple[float, float]
    dura_wall_force: float

    @property
    def total_depth(self) -> float:
        return self.regions[-1].end

    @cached_property
    def _region_ends(self) -> list[float]:
        return [r.end for r in self.regions]

    @cached_property
    def _stages_by_tissue(self) -> dict[Tissue, dict[Stage, ForceRegion]]:
        out: dict[Tissue, dict[Stage, ForceRegion]] = {}
        for r in self.regions:
            out.setdefault(r.tissue, {})[r.stage] = r
        return out

    @cached_property
    def bp_boundaries(self) -> tuple[tuple[Tissue, float], ...]:
        """(tissue, BP band end depth) pairs, shallow to deep."""
        return tuple((r.tissue, r.end) for r in self.regions if r.stage is Stage.BP)

    def regions_of(self, tissue: Tissue) -> tuple[ForceRegion, ...]:
        return tuple(r for r in self.regions if r.tissue is tissue)

    def tissue_span(self, tissue: Tissue) -> tuple[float, float]:
        """Full depth extent of a tissue (all its stages), in mm."""
        rs = self.regions_of(tissue)
        if not rs:
            raise ValueError(f"model has no regions for {tissue.value}")
        return rs[0].start, rs[-1].end

    def probing_thickness(self, tissue: Tissue) -> float:
        """Layer thickness used to normalise probe counts, in mm.

        The BP band width where the tissue has one (the bulk of the layer
        body in this table), otherwise the single band width.
        """
        rs = self.regions_of(tissue)
        for r in rs:
            if r.stage is Stage.BP:
                return r.width
        return rs[0].width

    def tissues(self) -> tuple[Tissue, ...]:
        seen: dict[Tissue, None] = {}
        for r in self.regions:
            seen.setdefault(r.tissue, None)
        return tuple(seen)


def build_patient_model(
    body_mass: float, table: list[ForceRegion] | None = None
) -> PatientModel:
    """Construct the tissue stack for a patient body mass in kg.

    Depth band boundaries are multiplied by the mass thickness ratio;
    polynomial coefficients are stored unscaled and local depth is divided
    by the same ratio at evaluation time, so each region's peak force is
    mass-invariant.
    """
    lo, hi = MASS_BOUNDS_KG
    if not (lo <= body_mass <= hi):
        raise ValueError(
            f"body_mass {body_mass} kg outside supported range [{lo}, {hi}] kg"
        )
    base = DEFAULT_FORCE_TABLE if table is None else sorted(table, key=lambda r: r.start)
    ratio = thickness_ratio_for_mass(body_mass)
    scaled = tuple(
        ForceRegion(r.tissue, r.stage, r.a0, r.a1, r.a2, r.a3, r.start * ratio, r.end * ratio)
        for r in base
    )
    window = None
    for r in scaled:
        if r.tissue is Tissue.EPIDURAL_SPACE:
            window = (r.start, r.end)
            if (r.a0, r.a1, r.a2, r.a3) != (0.0, 0.0, 0.0, 0.0):
                raise ValueError("epidural space region must have zero force coefficients")
    if window is None:
        raise ValueError("force table has no epidural space region")
    # Beyond the epidural space the dura is rendered as a stiff constant wall
    # at the deepest ligament's exit force (no coefficients are available for
    # dura proper).
    wall = 0.0
    for r in base:
        if r.tissue is Tissue.LIGAMENTUM_FLAVUM:
            wall = _eval_poly(r, r.width)
    return PatientModel(
        body_mass=float(body_mass),
        thickness_ratio=ratio,
        regions=scaled,
        epidural_window=window,
        dura_wall_force=wall,
    )


@dataclass
class PunctureState:
    """Which tissues' BP bands have been fully traversed this trial.

    Flags are monotone: once a tissue is marked punctured it stays punctured,
    even through retraction (the tissue has been cut).
    """

    punctured: set[Tissue] = field(default_factory=set)

    def is_punctured(self, tissue: Tissue) -> bool:
        return tissue in self.punctured

    def mark(self, tissue: Tissue) -> None:
        self.punctured.add(tissue)

    def update_for_depth(self, model: PatientModel, depth: float) -> None:
        """Mark every tissue whose BP band ends at or above ``depth``."""
        for tissue, bp_end in model.bp_boundaries:
            if depth >= bp_end:
                self.punctured.add(tissue)

    def as_sorted_names(self) -> list[str]:
        return sorted(t.value for t in self.punctured)

    def copy(self) -> "PunctureState":
        return PunctureState(set(self.punctured))


class OutcomeKind(enum.Enum):
    FAILED_EPIDURAL = "failed_epidural"
    SUCCESS = "success"
    DURAL_PUNCTURE = "dural_puncture"


@dataclass(frozen=True)
class Outcome:
    """Trial result with signed distance from the epidural window in mm.

    Zero error on success, negative on an undershoot (failed epidural),
    positive on an overshoot (dural puncture).
    """

    kind: OutcomeKind
    signed_error: float


def layer_at(model: PatientModel, depth: float) -> ForceRegion:
    """The unique region whose half-open depth band contains ``depth``."""
    if depth < 0.0:
        raise ValueError(f"depth {depth} mm is above the skin surface")
    if depth >= model.total_depth:
        raise DepthOutOfModelError(
            f"depth {depth:.3f} mm beyond modelled region (ends at {model.total_depth:.3f} mm)"
        )
    return model.regions[bisect.bisect_right(model._region_ends, depth)]


def _eval_poly(region: ForceRegion, u: float) -> float:
    return region.a0 + u * (region.a1 + u * (region.a2 + u * region.a3))


def touhy_force(model: PatientModel, depth: float, state: PunctureState) -> float:
    """Resistive force on the Touhy needle at a cumulative depth in mm.

    Selects the BP region of the tissue at ``depth`` while that tissue is
    unpunctured, its AP region afterwards (single-stage tissues always use
    their only region).  The polynomial is evaluated at the local depth past
    the selected region's start, divided by the thickness ratio so stiffness
    scales inversely with layer thickness.  Clamped at zero: a resistive
    force cannot pull the needle in.  Beyond the modelled region the dura is
    a constant stiff wall.
    """
    if depth < 0.0:
        raise ValueError(f"depth {depth} mm is above the skin surface")
    if depth >= model.total_depth:
        return model.dura_wall_force
    current = layer_at(model, depth)
    region = current
    stages = model._stages_by_tissue[current.tissue]
    if len(stages) == 2:
        wanted = Stage.AP if current.tissue in state.punctured else Stage.BP
        region = stages[wanted]
    u = (depth - region.start) / model.thickness_ratio
    return max(_eval_poly(region, u), 0.0)


def lor_force(model: PatientModel, depth: float, state: PunctureState) -> float:
    """Force on the loss-of-resistance syringe: twice the needle force."""
    return 2.0 * touhy_force(model, depth, state)


def classify_outcome(model: PatientModel, final_depth: float) -> Outcome:
    """Classify a final needle depth against the patient's epidural window.

    The window is half-open: a commit exactly on the shallow boundary counts
    as success, exactly on the deep boundary as a dural puncture.
    """
    if final_depth < 0.0:
        raise ValueError(f"final depth {final_depth} mm is above the skin surface")
    start, end = model.epidural_window
    if final_depth < start:
        return Outcome(OutcomeKind.FAILED_EPIDURAL, final_depth - start)
    if final_depth < end:
        return Outcome(OutcomeKind.SUCCESS, 0.0)
    return Outcome(OutcomeKind.DURAL_PUNCTURE, final_depth - end)
