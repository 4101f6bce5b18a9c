"""Trial record files: line-delimited JSON, one object per sample.

Layout: a header object on the first line (trial metadata and outcome),
then one object per 1 kHz sample with fields ``t_s``, ``p_touhy_mm``,
``p_lor_raw_mm``, ``f_touhy_n``, ``f_lor_n``.  Serialization is
deterministic (sorted keys, shortest round-trip float repr), so equal
records produce byte-identical files.  Writes are atomic: the file is
written next to its destination and renamed, so a record is either fully
persisted or absent.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .engine import Sample, TrialKind, TrialRecord
from .tissue import Outcome, OutcomeKind, Tissue

__all__ = [
    "record_to_jsonl",
    "record_from_jsonl",
    "save_record",
    "load_record",
    "load_records",
    "record_filename",
]

FORMAT_VERSION = 1


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def record_to_jsonl(record: TrialRecord) -> str:
    header = {
        "type": "trial_header",
        "v": FORMAT_VERSION,
        "trial_index": record.trial_index,
        "kind": record.kind.value,
        "body_mass_kg": record.body_mass,
        "participant": record.participant,
        "lor_zero_offset_mm": record.lor_zero_offset,
        "final_depth_mm": record.final_depth,
        "punctured": sorted(t.value for t in record.puncture_state_final),
        "outcome": {
            "kind": record.outcome.kind.value,
            "signed_error_mm": record.outcome.signed_error,
        },
        "n_samples": len(record.samples),
    }
    lines = [_dumps(header)]
    lines.extend(
        _dumps(
            {
                "t_s": s.t,
                "p_touhy_mm": s.p_touhy,
                "p_lor_raw_mm": s.p_lor_raw,
                "f_touhy_n": s.f_touhy,
                "f_lor_n": s.f_lor,
            }
        )
        for s in record.samples
    )
    return "\n".join(lines) + "\n"


def record_from_jsonl(text: str, source: str = "<string>") -> TrialRecord:
    lines = text.splitlines()
    if not lines:
        raise ValueError(f"{source}: empty record file")
    header = json.loads(lines[0])
    if header.get("type") != "trial_header":
        raise ValueError(f"{source}: first line is not a trial header")
    if header.get("v") != FORMAT_VERSION:
        raise ValueError(f"{source}: unsupported record version {header.get('v')}")
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        row = json.loads(line)
        samples.append(
            Sample(
                t=row["t_s"],
                p_touhy=row["p_touhy_mm"],
                p_lor_raw=row["p_lor_raw_mm"],
                f_touhy=row["f_touhy_n"],
                f_lor=row["f_lor_n"],
            )
        )
    if len(samples) != header["n_samples"]:
        raise ValueError(
            f"{source}: header declares {header['n_samples']} samples, found {len(samples)}"
        )
    return TrialRecord(
        trial_index=header["trial_index"],
        kind=TrialKind(header["kind"]),
        body_mass=header["body_mass_kg"],
        samples=tuple(samples),
        lor_zero_offset=header["lor_zero_offset_mm"],
        puncture_state_final=frozenset(Tissue(name) for name in header["punctured"]),
        outcome=Outcome(
            OutcomeKind(header["outcome"]["kind"]),
            header["outcome"]["signed_error_mm"],
        ),
        participant=header["participant"],
    )


def save_record(record: TrialRecord, path: str | Path) -> Path:
    """Atomically persist a record (write to a sibling temp file, rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(record_to_jsonl(record))
    os.replace(tmp, path)
    return path


def load_record(path: str | Path) -> TrialRecord:
    path = Path(path)
    return record_from_jsonl(path.read_text(), str(path))


def load_records(paths) -> list[TrialRecord]:
    return [load_record(p) for p in sorted(Path(p) for p in paths)]


def record_filename(record: TrialRecord) -> str:
    who = record.participant or "anonymous"
    return f"{who}_trial{record.trial_index:03d}.jsonl"
