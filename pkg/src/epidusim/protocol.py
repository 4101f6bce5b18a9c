"""Wire protocol for the live session service.

JSON text frames over a bidirectional websocket-style transport; every
message carries a protocol version ``v`` and a ``type`` tag.  See
PROTOCOL.md for the full schema.  Trial results reveal the outcome only
when feedback is permitted (familiarization trials); test trials get a bare
acknowledgment, and outcomes are revealed together in the session summary.
"""

from __future__ import annotations

import json

__all__ = [
    "PROTOCOL_VERSION",
    "ProtocolError",
    "CLIENT_TYPES",
    "decode",
    "encode",
    "session_started",
    "trial_started",
    "force_update",
    "trial_result",
    "session_summary",
    "error",
]

PROTOCOL_VERSION = 1

CLIENT_TYPES = ("start_session", "start_trial", "position_update", "commit", "end_session")

# error codes carried by Error messages
E_INVALID = "invalid_message"
E_STATE = "bad_state"
E_VALIDATION = "validation"
E_INTERNAL = "internal"


class ProtocolError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def encode(message: dict) -> str:
    return json.dumps(message, sort_keys=True, separators=(",", ":"), allow_nan=False)


def decode(text: str | bytes) -> dict:
    """Parse and structurally validate one client frame."""
    try:
        msg = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(E_INVALID, f"frame is not valid JSON: {exc}") from None
    if not isinstance(msg, dict):
        raise ProtocolError(E_INVALID, "frame must be a JSON object")
    if msg.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(E_INVALID, f"unsupported protocol version {msg.get('v')!r}")
    mtype = msg.get("type")
    if mtype not in CLIENT_TYPES:
        raise ProtocolError(E_INVALID, f"unknown message type {mtype!r}")
    if mtype == "position_update":
        for key in ("t_s", "p_touhy_mm", "p_lor_raw_mm"):
            value = msg.get(key)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ProtocolError(E_INVALID, f"position_update needs numeric {key}")
    return msg


def _msg(mtype: str, **fields) -> dict:
    return {"v": PROTOCOL_VERSION, "type": mtype, **fields}


def session_started(n_trials: int) -> dict:
    return _msg("session_started", n_trials=n_trials)


def trial_started(trial_index: int, kind: str, body_mass_kg: float) -> dict:
    return _msg(
        "trial_started", trial_index=trial_index, kind=kind, body_mass_kg=body_mass_kg
    )


def force_update(t_s: float, f_touhy_n: float, f_lor_n: float, depth_mm: float) -> dict:
    return _msg(
        "force_update", t_s=t_s, f_touhy_n=f_touhy_n, f_lor_n=f_lor_n, depth_mm=depth_mm
    )


def trial_result(
    trial_index: int,
    kind: str,
    feedback_allowed: bool,
    outcome: dict | None,
    strategy_summary: dict,
    feedback_plot: dict | None = None,
) -> dict:
    msg = _msg(
        "trial_result",
        trial_index=trial_index,
        kind=kind,
        feedback_allowed=feedback_allowed,
        outcome=outcome,
        strategy_summary=strategy_summary,
    )
    if feedback_plot is not None:
        msg["feedback_plot"] = feedback_plot
    return msg


def session_summary(trials: list[dict]) -> dict:
    return _msg("session_summary", trials=trials)


def error(code: str, message: str) -> dict:
    return _msg("error", code=code, message=message)
