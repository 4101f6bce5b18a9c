"""Bimanual epidural needle-insertion training simulator.

Software-only counterpart of a two-device haptic trainer: a mass-scaled
tissue resistance model, a 1 kHz trial engine fed by two position streams,
probing-strategy analysis of the recorded kinematics, and the
nonparametric statistics used to assess training validity.
"""

from .agent import AgentProfile, PROFILES, run_session, run_synthetic_agent
from .analysis import (
    AdjustedTrajectory,
    ProbeDetectionParams,
    ProbeEvent,
    ProbeMetrics,
    adjust_lor,
    detect_probes,
    error_size,
    layer_velocities,
    metrics_table,
    probe_metrics,
)
from .engine import (
    Sample,
    Session,
    SessionConfig,
    Trial,
    TrialKind,
    TrialRecord,
    generate_schedule,
    replay,
)
from .records import load_record, record_from_jsonl, record_to_jsonl, save_record
from .report import StudyReport, build_study_report, study_report
from .stats import (
    ParticipantProfile,
    Position,
    StatResult,
    assign_level,
    bonferroni,
    bootstrap_ci,
    kruskal_wallis,
    vas_report,
    wilcoxon_rank_sum,
    wilcoxon_signed_rank,
)
from .tissue import (
    ForceRegion,
    Outcome,
    OutcomeKind,
    PatientModel,
    PunctureState,
    Stage,
    Tissue,
    build_patient_model,
    classify_outcome,
    layer_at,
    load_force_table,
    lor_force,
    thickness_ratio_for_mass,
    touhy_force,
)

__version__ = "0.1.0"
