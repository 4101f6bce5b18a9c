"""Synthetic operators for exercising the engine and analysis pipeline.

An agent advances the needle monotonically with jitter, probes the syringe
plunger as sinusoidal bursts, and watches the rendered syringe force: when
it drops sharply (loss of resistance), the agent keeps moving for its
reaction delay and then halts.  Profiles are constructed so that the fast,
shallow-probing, quick-reacting expert lands in the epidural window while
the slow-reacting novice overshoots on light patients; this validates the
pipeline end to end, not any claim about humans.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .engine import Session, SessionConfig, TICK_RATE_HZ, Trial, TrialRecord
from .tissue import PatientModel

__all__ = [
    "AgentProfile",
    "PROFILES",
    "run_synthetic_agent",
    "drive_trial",
    "run_session",
]

# Rest distance between the two devices (syringe length); cancelled by the
# zero-point calibration, so the exact value is immaterial.
LOR_REST_OFFSET_MM = 120.0

# Sliding window over which the agent compares the current syringe force to
# its recent maximum.  Must be short enough that gradual declines inside a
# layer (the fat exit slope is the steepest, ~1.9 N/mm on the syringe) stay
# below the drop thresholds at the profiles' advance speeds.
_DROP_WINDOW_S = 0.08


@dataclass(frozen=True)
class AgentProfile:
    """Control style of a synthetic operator.

    ``noise`` scales the advance jitter (mm per sqrt(s)); increments are
    clamped at zero so the advance stays monotone.  ``probe_rate`` may be
    zero for an operator who never probes.
    """

    advance_speed: float  # mm/s
    probe_rate: float  # Hz, probing bursts per second
    probe_depth: float  # mm, plunger excursion amplitude
    stop_force_drop: float  # N, syringe-force drop that triggers halting
    reaction_delay_ms: float  # ms between detecting the drop and halting
    noise: float  # mm/sqrt(s), advance jitter scale

    def __post_init__(self) -> None:
        if self.advance_speed <= 0:
            raise ValueError("advance_speed must be positive")
        if self.stop_force_drop <= 0:
            raise ValueError("stop_force_drop must be positive")
        for name in ("probe_rate", "probe_depth", "reaction_delay_ms", "noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


PROFILES = {
    "novice": AgentProfile(
        advance_speed=8.0,
        probe_rate=0.8,
        probe_depth=5.0,
        stop_force_drop=2.5,
        reaction_delay_ms=900.0,
        noise=0.1,
    ),
    "intermediate": AgentProfile(
        advance_speed=6.0,
        probe_rate=1.5,
        probe_depth=3.5,
        stop_force_drop=2.0,
        reaction_delay_ms=450.0,
        noise=0.05,
    ),
    "expert": AgentProfile(
        advance_speed=4.0,
        probe_rate=2.5,
        probe_depth=2.0,
        stop_force_drop=1.5,
        reaction_delay_ms=150.0,
        noise=0.02,
    ),
}


def drive_trial(
    profile: AgentProfile,
    trial: Trial,
    seed,
    record_stream: list | None = None,
) -> None:
    """Run the closed loop on an active trial until the agent halts.

    Feeds 1 kHz position updates, watches the returned syringe force for the
    loss-of-resistance drop, and stops ``reaction_delay_ms`` after detecting
    it.  Does not commit; the caller owns the trial.
    """
    rng = np.random.default_rng(seed)
    model = trial.model
    dt = 1.0 / TICK_RATE_HZ
    jitter = profile.noise * math.sqrt(dt)
    two_pi_rate = 2.0 * math.pi * profile.probe_rate

    p = 0.0
    stop_at: float | None = None
    window: deque[tuple[float, float]] = deque()
    # hard stops: well past the dura, or (pathologically) a long stall
    max_depth = model.total_depth + 6.0
    max_t = 3.0 * model.total_depth / profile.advance_speed + 10.0

    tick = 0
    while True:
        t = tick / TICK_RATE_HZ
        if tick > 0 and (stop_at is None or t < stop_at):
            step = profile.advance_speed * dt
            if jitter > 0.0:
                step += jitter * rng.standard_normal()
            p += max(step, 0.0)
        probe = 0.0
        if two_pi_rate > 0.0:
            probe = profile.probe_depth * max(math.sin(two_pi_rate * t), 0.0)
        q = LOR_REST_OFFSET_MM + p + probe
        _, f_lor = trial.ingest(t, p, q)

        window.append((t, f_lor))
        while window and window[0][0] < t - _DROP_WINDOW_S:
            window.popleft()
        if stop_at is None:
            recent_max = max(f for _, f in window)
            if recent_max - f_lor >= profile.stop_force_drop:
                stop_at = t + profile.reaction_delay_ms / 1000.0
        if record_stream is not None:
            record_stream.append((t, p, q))
        if stop_at is not None and t >= stop_at:
            break
        if p >= max_depth or t >= max_t:
            break
        tick += 1


def run_synthetic_agent(
    profile: AgentProfile, model: PatientModel, seed
) -> list[tuple[float, float, float]]:
    """Generate a dual position stream for one trial on the given patient.

    Returns ``(t_s, p_touhy_mm, p_lor_raw_mm)`` tuples at 1 kHz; the stream
    ends once the agent has halted after its loss-of-resistance reaction.
    """
    trial = Trial(model)
    stream: list[tuple[float, float, float]] = []
    drive_trial(profile, trial, seed, record_stream=stream)
    return stream


def run_session(
    profile: AgentProfile,
    config: SessionConfig,
    seed,
    participant: str | None = None,
    table=None,
) -> list[TrialRecord]:
    """Run a complete scheduled session with one synthetic operator."""
    session = Session(config, participant=participant, table=table)
    trial_seeds = np.random.SeedSequence(seed).spawn(len(session.schedule))
    records = []
    for trial_seed in trial_seeds:
        trial = session.start_trial()
        drive_trial(profile, trial, trial_seed)
        records.append(session.commit_trial())
    return records
