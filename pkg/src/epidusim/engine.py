"""Real-time trial engine: sessions, trials, and the 1 kHz sample log.

A trial consumes timestamped position updates from the two devices (Touhy
needle and loss-of-resistance syringe) at whatever rate the client produces
them, and logs samples on its own fixed 1 kHz clock, zero-order-holding
positions between updates so the analysis-grade log is uniform.  Forces,
puncture flags, and the syringe zero-point calibration are all derived from
the emitted grid samples, which makes a trial bit-exactly reproducible from
its own log.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .tissue import (
    Outcome,
    PatientModel,
    PunctureState,
    build_patient_model,
    classify_outcome,
    touhy_force,
)

__all__ = [
    "TICK_RATE_HZ",
    "TrialKind",
    "SessionConfig",
    "ScheduledTrial",
    "Sample",
    "TrialRecord",
    "Trial",
    "Session",
    "TrialStateError",
    "NonMonotonicSampleError",
    "generate_schedule",
    "replay",
]

# The haptic loop rate; fixed at exactly 1000 Hz.
TICK_RATE_HZ = 1000


class TrialKind(enum.Enum):
    FAMILIARIZATION = "familiarization"
    TEST = "test"


class TrialStateError(RuntimeError):
    """Operation not valid in the trial's or session's current state."""


class NonMonotonicSampleError(ValueError):
    """Position update timestamped earlier than a previous one."""


@dataclass(frozen=True)
class SessionConfig:
    """Session protocol: familiarization trials, then blocks of test masses.

    Defaults mirror the training protocol: three familiarization trials at
    the average 71 kg patient with result feedback, then four blocks each
    containing one trial per test mass in randomized order.
    """

    n_familiarization: int = 3
    familiarization_mass: float = 71.0
    test_masses: tuple[float, ...] = (55.0, 85.0, 115.0)
    blocks: int = 4
    rng_seed: int = 0
    feedback_in_familiarization: bool = True

    def __post_init__(self) -> None:
        if self.n_familiarization < 0:
            raise ValueError("n_familiarization must be >= 0")
        if self.blocks < 0:
            raise ValueError("blocks must be >= 0")
        if not self.test_masses:
            raise ValueError("test_masses must not be empty")
        object.__setattr__(self, "test_masses", tuple(float(m) for m in self.test_masses))

    @property
    def n_trials(self) -> int:
        return self.n_familiarization + self.blocks * len(self.test_masses)


@dataclass(frozen=True)
class ScheduledTrial:
    kind: TrialKind
    body_mass: float


def generate_schedule(config: SessionConfig) -> list[ScheduledTrial]:
    """Deterministic trial order for a session.

    Familiarization trials first, then ``blocks`` blocks, each a seeded
    random permutation of the test masses, so every mass appears exactly
    once per block and ``blocks`` times overall.
    """
    schedule = [
        ScheduledTrial(TrialKind.FAMILIARIZATION, config.familiarization_mass)
        for _ in range(config.n_familiarization)
    ]
    rng = np.random.default_rng(config.rng_seed)
    for _ in range(config.blocks):
        order = rng.permutation(len(config.test_masses))
        schedule.extend(
            ScheduledTrial(TrialKind.TEST, config.test_masses[i]) for i in order
        )
    return schedule


@dataclass(slots=True)
class Sample:
    """One 1 kHz log entry: time, both device positions, both forces."""

    t: float  # s since trial start
    p_touhy: float  # mm, needle depth along the insertion axis
    p_lor_raw: float  # mm, uncalibrated syringe-device position
    f_touhy: float  # N
    f_lor: float  # N


@dataclass(frozen=True)
class TrialRecord:
    """Immutable committed trial: config, 1 kHz log, and outcome."""

    trial_index: int
    kind: TrialKind
    body_mass: float
    samples: tuple[Sample, ...]
    lor_zero_offset: float
    puncture_state_final: frozenset
    outcome: Outcome
    participant: str | None = None

    @property
    def final_depth(self) -> float:
        return self.samples[-1].p_touhy


class Trial:
    """An active trial accumulating the 1 kHz sample log.

    Single-writer: one producer feeds ``ingest``; the committed record is
    immutable and safe to share.
    """

    def __init__(
        self,
        model: PatientModel,
        trial_index: int = 0,
        kind: TrialKind = TrialKind.TEST,
        participant: str | None = None,
    ):
        self.model = model
        self.trial_index = trial_index
        self.kind = kind
        self.participant = participant
        self._samples: list[Sample] = []
        self._state = PunctureState()
        self._held: tuple[float, float] | None = None
        self._last_t: float | None = None
        self._next_tick = 0
        self._lor_zero_offset: float | None = None
        self._committed = False

    @property
    def active(self) -> bool:
        return not self._committed

    @property
    def n_samples(self) -> int:
        return len(self._samples)

    def ingest(self, t: float, p_touhy: float, p_lor_raw: float) -> tuple[float, float]:
        """Feed one position update; returns the instantaneous force pair.

        The update is held until the engine clock reaches it; log samples
        tick at exactly 1 kHz regardless of the update rate.  The returned
        forces are the immediate response for display (at most one tick
        ahead of the log).
        """
        if self._committed:
            raise TrialStateError("trial already committed")
        if self._last_t is not None and t < self._last_t:
            raise NonMonotonicSampleError(
                f"update at t={t} s is earlier than previous t={self._last_t} s"
            )
        self._flush_ticks(t, inclusive=False)
        self._held = (p_touhy, p_lor_raw)
        self._last_t = t
        return self._preview_forces(p_touhy)

    def commit(self) -> TrialRecord:
        """Finalize: flush the log through the last update and classify.

        The final depth is the needle position at the last update; the
        outcome is classified against the patient's epidural window.
        """
        if self._committed:
            raise TrialStateError("trial already committed")
        if self._held is None:
            raise TrialStateError("cannot commit a trial with no samples")
        self._flush_ticks(self._last_t, inclusive=True)
        self._committed = True
        final_depth = self._samples[-1].p_touhy
        outcome = classify_outcome(self.model, max(final_depth, 0.0))
        if self._lor_zero_offset is None:
            raise TrialStateError("needle never reached the skin surface")
        return TrialRecord(
            trial_index=self.trial_index,
            kind=self.kind,
            body_mass=self.model.body_mass,
            samples=tuple(self._samples),
            lor_zero_offset=self._lor_zero_offset,
            puncture_state_final=frozenset(self._state.punctured),
            outcome=outcome,
            participant=self.participant,
        )

    def _flush_ticks(self, limit: float, inclusive: bool) -> None:
        if self._held is None:
            return
        p, q = self._held
        while True:
            t_k = self._next_tick / TICK_RATE_HZ
            if t_k > limit or (t_k == limit and not inclusive):
                break
            self._emit(t_k, p, q)
            self._next_tick += 1

    def _emit(self, t_k: float, p: float, q: float) -> None:
        if p >= 0.0:
            self._state.update_for_depth(self.model, p)
            if self._lor_zero_offset is None:
                self._lor_zero_offset = q
            f = touhy_force(self.model, p, self._state)
        else:
            f = 0.0
        self._samples.append(Sample(t_k, p, q, f, 2.0 * f))

    def _preview_forces(self, p: float) -> tuple[float, float]:
        if p < 0.0:
            return 0.0, 0.0
        state = self._state
        for tissue, bp_end in self.model.bp_boundaries:
            if p >= bp_end and tissue not in state.punctured:
                state = self._state.copy()
                state.update_for_depth(self.model, p)
                break
        f = touhy_force(self.model, p, state)
        return f, 2.0 * f


def replay(record: TrialRecord, table=None) -> TrialRecord:
    """Re-simulate a record's position stream through a fresh trial.

    Because the engine derives everything from its own grid samples, feeding
    a committed log back in reproduces forces, puncture flags, and outcome
    bit-exactly.
    """
    model = build_patient_model(record.body_mass, table=table)
    trial = Trial(
        model,
        trial_index=record.trial_index,
        kind=record.kind,
        participant=record.participant,
    )
    for s in record.samples:
        trial.ingest(s.t, s.p_touhy, s.p_lor_raw)
    return trial.commit()


class Session:
    """One operator's session: a fixed schedule of trials, run in order.

    Sessions are independent; within a session there is at most one active
    trial.  Completed records are immutable and may be read concurrently.
    """

    def __init__(self, config: SessionConfig, participant: str | None = None, table=None):
        self.config = config
        self.participant = participant
        self.schedule = generate_schedule(config)
        self._table = table
        self._models: dict[float, PatientModel] = {}
        self._records: list[TrialRecord] = []
        self._active: Trial | None = None

    @property
    def records(self) -> list[TrialRecord]:
        return list(self._records)

    @property
    def trial_index(self) -> int:
        return len(self._records)

    @property
    def active_trial(self) -> Trial | None:
        return self._active

    @property
    def complete(self) -> bool:
        return len(self._records) >= len(self.schedule)

    def model_for(self, body_mass: float) -> PatientModel:
        if body_mass not in self._models:
            self._models[body_mass] = build_patient_model(body_mass, table=self._table)
        return self._models[body_mass]

    def start_trial(self) -> Trial:
        if self._active is not None:
            raise TrialStateError("a trial is already active")
        if self.complete:
            raise TrialStateError("session schedule exhausted")
        scheduled = self.schedule[self.trial_index]
        self._active = Trial(
            self.model_for(scheduled.body_mass),
            trial_index=self.trial_index,
            kind=scheduled.kind,
            participant=self.participant,
        )
        return self._active

    def commit_trial(self) -> TrialRecord:
        if self._active is None:
            raise TrialStateError("no active trial")
        record = self._active.commit()
        self._records.append(record)
        self._active = None
        return record

    def abort_trial(self) -> None:
        """Discard the active trial without a record (e.g. client dropped)."""
        self._active = None

    def feedback_allowed(self, kind: TrialKind) -> bool:
        return kind is TrialKind.FAMILIARIZATION and self.config.feedback_in_familiarization

    def summary(self) -> list[dict]:
        """Per-trial outcomes, revealed at session end."""
        return [
            {
                "trial_index": r.trial_index,
                "kind": r.kind.value,
                "body_mass_kg": r.body_mass,
                "outcome": r.outcome.kind.value,
                "signed_error_mm": r.outcome.signed_error,
                "final_depth_mm": r.final_depth,
            }
            for r in self._records
        ]
