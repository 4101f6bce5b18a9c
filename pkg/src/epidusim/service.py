"""Live session service: one training session per websocket connection.

The protocol state machine lives in ``SessionDriver`` and is transport
agnostic: it consumes decoded client messages and returns reply messages.
The websocket layer decodes frames, feeds the driver, and ships replies;
it also serves the static trainer console bundle on plain HTTP requests.

Connections are isolated: an error in one session never touches another,
and a failed or dropped trial leaves no partial record (persistence is
atomic write-then-rename).
"""

from __future__ import annotations

import asyncio
import logging
import mimetypes
import uuid
from http import HTTPStatus
from pathlib import Path

import numpy as np

from . import protocol
from .analysis import adjust_lor, detect_probes, layer_velocities, probe_metrics
from .engine import NonMonotonicSampleError, Session, SessionConfig, TrialRecord, TrialStateError
from .records import save_record
from .tissue import MASS_BOUNDS_KG, PatientModel

log = logging.getLogger("epidusim.service")

__all__ = ["SessionDriver", "SessionService", "strategy_summary", "run_server"]

# cap the downsampled depth trace shipped with familiarization feedback
_FEEDBACK_TRACE_POINTS = 600


def strategy_summary(record: TrialRecord, model: PatientModel) -> dict:
    """Post-trial probing/velocity digest shown to the trainee."""
    events = detect_probes(adjust_lor(record), model=model)
    probes = probe_metrics(events, record, model)
    speeds = layer_velocities(record, model)
    return {
        "probe_count": probes.count,
        "probe_mean_depth_mm": probes.mean_depth,
        "probe_mean_rate_hz": probes.mean_rate,
        "layer_mean_speed_mm_s": {t.value: v for t, v in speeds.items()},
    }


def _feedback_plot(record: TrialRecord, model: PatientModel) -> dict:
    """Layer-annotated depth trace for the familiarization feedback screen."""
    n = len(record.samples)
    idx = np.unique(np.linspace(0, n - 1, min(n, _FEEDBACK_TRACE_POINTS)).astype(int))
    return {
        "trace": {
            "t_s": [record.samples[i].t for i in idx],
            "depth_mm": [record.samples[i].p_touhy for i in idx],
        },
        "layers": [
            {"tissue": r.tissue.value, "stage": r.stage.value, "start_mm": r.start, "end_mm": r.end}
            for r in model.regions
        ],
        "epidural_window_mm": list(model.epidural_window),
    }


def _parse_config(raw: dict | None) -> SessionConfig:
    raw = raw or {}
    allowed = {
        "n_familiarization", "familiarization_mass", "test_masses", "blocks",
        "rng_seed", "feedback_in_familiarization",
    }
    unknown = set(raw) - allowed
    if unknown:
        raise protocol.ProtocolError(
            protocol.E_VALIDATION, f"unknown config fields: {sorted(unknown)}"
        )
    try:
        config = SessionConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise protocol.ProtocolError(protocol.E_VALIDATION, str(exc)) from None
    lo, hi = MASS_BOUNDS_KG
    masses = (*config.test_masses, config.familiarization_mass)
    if any(not lo <= m <= hi for m in masses):
        raise protocol.ProtocolError(
            protocol.E_VALIDATION, f"body masses must lie in [{lo}, {hi}] kg"
        )
    return config


class SessionDriver:
    """Protocol state machine for one connection's session."""

    def __init__(self, record_dir: str | Path | None = None, table=None):
        self._record_dir = Path(record_dir) if record_dir else None
        self._table = table
        self._session: Session | None = None
        self._session_tag = uuid.uuid4().hex[:8]
        self._ended = False

    def handle(self, msg: dict) -> list[dict]:
        """Process one decoded client message; returns the replies to send."""
        try:
            return self._dispatch(msg)
        except protocol.ProtocolError as exc:
            return [protocol.error(exc.code, str(exc))]
        except NonMonotonicSampleError as exc:
            return [protocol.error(protocol.E_VALIDATION, str(exc))]
        except TrialStateError as exc:
            return [protocol.error(protocol.E_STATE, str(exc))]
        except Exception:  # connection isolation: never propagate
            log.exception("internal error handling %s", msg.get("type"))
            return [protocol.error(protocol.E_INTERNAL, "internal error")]

    def on_disconnect(self) -> None:
        """Abort any active trial; a dropped connection leaves no record."""
        if self._session is not None:
            self._session.abort_trial()

    def _dispatch(self, msg: dict) -> list[dict]:
        mtype = msg["type"]
        if mtype == "start_session":
            return self._start_session(msg)
        if self._session is None:
            raise protocol.ProtocolError(protocol.E_STATE, "no session started")
        if self._ended:
            raise protocol.ProtocolError(protocol.E_STATE, "session already ended")
        if mtype == "start_trial":
            return self._start_trial()
        if mtype == "position_update":
            return self._position_update(msg)
        if mtype == "commit":
            return self._commit()
        if mtype == "end_session":
            self._ended = True
            self._session.abort_trial()
            return [protocol.session_summary(self._session.summary())]
        raise protocol.ProtocolError(protocol.E_INVALID, f"unhandled type {mtype!r}")

    def _start_session(self, msg: dict) -> list[dict]:
        if self._session is not None:
            raise protocol.ProtocolError(protocol.E_STATE, "session already started")
        config = _parse_config(msg.get("config"))
        participant = msg.get("participant")
        if participant is not None and not isinstance(participant, str):
            raise protocol.ProtocolError(protocol.E_VALIDATION, "participant must be a string")
        self._session = Session(config, participant=participant, table=self._table)
        return [protocol.session_started(n_trials=len(self._session.schedule))]

    def _start_trial(self) -> list[dict]:
        trial = self._session.start_trial()
        return [
            protocol.trial_started(
                trial_index=trial.trial_index,
                kind=trial.kind.value,
                body_mass_kg=trial.model.body_mass,
            )
        ]

    def _position_update(self, msg: dict) -> list[dict]:
        trial = self._session.active_trial
        if trial is None:
            raise protocol.ProtocolError(protocol.E_STATE, "no active trial")
        f_touhy, f_lor = trial.ingest(msg["t_s"], msg["p_touhy_mm"], msg["p_lor_raw_mm"])
        return [
            protocol.force_update(
                t_s=msg["t_s"], f_touhy_n=f_touhy, f_lor_n=f_lor, depth_mm=msg["p_touhy_mm"]
            )
        ]

    def _commit(self) -> list[dict]:
        trial = self._session.active_trial
        if trial is None:
            raise protocol.ProtocolError(protocol.E_STATE, "no active trial")
        model = trial.model
        record = self._session.commit_trial()
        if self._record_dir is not None:
            name = f"{record.participant or 'anonymous'}_{self._session_tag}_trial{record.trial_index:03d}.jsonl"
            save_record(record, self._record_dir / name)
        feedback = self._session.feedback_allowed(record.kind)
        outcome = None
        plot = None
        if feedback:
            outcome = {
                "kind": record.outcome.kind.value,
                "signed_error_mm": record.outcome.signed_error,
            }
            plot = _feedback_plot(record, model)
        return [
            protocol.trial_result(
                trial_index=record.trial_index,
                kind=record.kind.value,
                feedback_allowed=feedback,
                outcome=outcome,
                strategy_summary=strategy_summary(record, model),
                feedback_plot=plot,
            )
        ]


class SessionService:
    """Websocket front for SessionDriver plus static bundle hosting."""

    def __init__(
        self,
        record_dir: str | Path | None = None,
        static_dir: str | Path | None = None,
        table=None,
    ):
        self._record_dir = record_dir
        self._static_dir = Path(static_dir).resolve() if static_dir else None
        self._table = table

    async def handler(self, connection) -> None:
        driver = SessionDriver(record_dir=self._record_dir, table=self._table)
        try:
            async for frame in connection:
                try:
                    msg = protocol.decode(frame)
                except protocol.ProtocolError as exc:
                    await connection.send(protocol.encode(protocol.error(exc.code, str(exc))))
                    continue
                for reply in driver.handle(msg):
                    await connection.send(protocol.encode(reply))
        finally:
            driver.on_disconnect()

    def process_request(self, connection, request):
        """Serve the trainer console on plain HTTP; pass websockets through."""
        if request.headers.get("Upgrade", "").lower() == "websocket":
            return None
        if self._static_dir is None:
            return connection.respond(HTTPStatus.NOT_FOUND, "no static bundle configured\n")
        raw_path = request.path.split("?", 1)[0]
        candidate = (self._static_dir / raw_path.lstrip("/")).resolve()
        if candidate.is_dir():
            candidate = candidate / "index.html"
        if not candidate.is_relative_to(self._static_dir) or not candidate.is_file():
            return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")
        from websockets.datastructures import Headers
        from websockets.http11 import Response

        body = candidate.read_bytes()
        ctype = mimetypes.guess_type(candidate.name)[0] or "application/octet-stream"
        headers = Headers(
            [("Content-Type", ctype), ("Content-Length", str(len(body)))]
        )
        return Response(HTTPStatus.OK, "OK", headers, body)

    async def serve(self, host: str = "127.0.0.1", port: int = 8765):
        import websockets.asyncio.server

        return websockets.asyncio.server.serve(
            self.handler, host, port, process_request=self.process_request
        )


async def _run_forever(service: SessionService, host: str, port: int) -> None:
    async with await service.serve(host, port) as server:
        bound_port = server.sockets[0].getsockname()[1]
        print(f"listening on ws://{host}:{bound_port}", flush=True)
        await server.serve_forever()


def run_server(
    host: str = "127.0.0.1",
    port: int = 8765,
    record_dir: str | Path | None = None,
    static_dir: str | Path | None = None,
) -> None:
    """Blocking entry point used by the CLI ``serve`` command."""
    service = SessionService(record_dir=record_dir, static_dir=static_dir)
    try:
        asyncio.run(_run_forever(service, host, port))
    except KeyboardInterrupt:
        pass
