"""EEGB recording files and the cohort manifest.

EEGB layout, little-endian throughout::

    magic "EEGB" (4) | version u16 | n_channels u16 | n_samples u32 |
    sample_rate f32 | condition u8 (0 rest, 1 meditation) | reserved 3 |
    data f32, channel-major (all samples of channel 0 first)
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .core import CohortDataset, Condition, Recording, SubjectData
from .errors import FormatError

EEGB_MAGIC = b"EEGB"
EEGB_VERSION = 1
_HEADER = struct.Struct("<4sHHIfB3s")
HEADER_SIZE = _HEADER.size  # 20 bytes


def encode_eegb(rec: Recording) -> bytes:
    c, n = rec.data.shape
    if c > 0xFFFF or n > 0xFFFFFFFF:
        raise FormatError(f"recording of shape {rec.data.shape} does not fit the EEGB header")
    header = _HEADER.pack(EEGB_MAGIC, EEGB_VERSION, c, n, float(rec.sample_rate_hz), int(rec.condition), b"\0\0\0")
    return header + np.ascontiguousarray(rec.data, dtype="<f4").tobytes()


def decode_eegb(blob: bytes, subject_id: str = "") -> Recording:
    if len(blob) < HEADER_SIZE:
        raise FormatError("EEGB file shorter than its header")
    magic, version, c, n, fs, cond, _ = _HEADER.unpack_from(blob)
    if magic != EEGB_MAGIC:
        raise FormatError(f"bad EEGB magic {magic!r}")
    if version != EEGB_VERSION:
        raise FormatError(f"unsupported EEGB version {version}")
    if cond not in (0, 1):
        raise FormatError(f"bad condition byte {cond}")
    expected = HEADER_SIZE + 4 * c * n
    if len(blob) != expected:
        raise FormatError(f"EEGB size {len(blob)} does not match header ({expected} expected)")
    data = np.frombuffer(blob, dtype="<f4", offset=HEADER_SIZE).reshape(c, n)
    return Recording(subject_id, Condition(cond), float(fs), data.astype(np.float32))


def write_eegb(path, rec: Recording) -> str:
    """Write and return the sha256 of the file contents."""
    blob = encode_eegb(rec)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def read_eegb(path, subject_id: str = "") -> Recording:
    return decode_eegb(Path(path).read_bytes(), subject_id)


def condition_name(cond) -> str:
    return "meditation" if Condition(cond) == Condition.MEDITATION else "rest"


def parse_condition(name) -> Condition:
    key = str(name).lower()
    if key == "meditation":
        return Condition.MEDITATION
    if key == "rest":
        return Condition.REST
    raise FormatError(f"unknown condition {name!r}")


def validate_manifest(entries, data_dir) -> list[dict]:
    """Check structure, files and hashes; raises FormatError on the first problem."""
    if not isinstance(entries, list) or not entries:
        raise FormatError("manifest must be a non-empty JSON array")
    seen = set()
    for i, e in enumerate(entries):
        if not isinstance(e, dict):
            raise FormatError(f"manifest entry {i} is not an object")
        missing = {"subject_id", "condition", "file", "sha256"} - set(e)
        if missing:
            raise FormatError(f"manifest entry {i} lacks {sorted(missing)}")
        cond = parse_condition(e["condition"])
        key = (str(e["subject_id"]), cond)
        if key in seen:
            raise FormatError(f"duplicate manifest entry for {key}")
        seen.add(key)
        path = Path(data_dir) / e["file"]
        if not path.is_file():
            raise FormatError(f"missing data file {e['file']}")
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        if digest != e["sha256"]:
            raise FormatError(f"sha256 mismatch for {e['file']}")
    subjects = {sid for sid, _ in seen}
    for sid in subjects:
        if (sid, Condition.MEDITATION) not in seen or (sid, Condition.REST) not in seen:
            raise FormatError(f"subject {sid} needs both a meditation and a rest recording")
    return entries


def load_manifest(data_dir) -> list[dict]:
    path = Path(data_dir) / "manifest.json"
    try:
        entries = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"no manifest.json in {data_dir}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest.json is not valid JSON: {exc}") from exc
    return validate_manifest(entries, data_dir)


def load_cohort(data_dir, band=None) -> CohortDataset:
    """Read every recording listed in the manifest; subjects keep manifest order."""
    entries = load_manifest(data_dir)
    order: list[str] = []
    recs: dict[str, list[Recording]] = {}
    for e in entries:
        sid = str(e["subject_id"])
        rec = read_eegb(Path(data_dir) / e["file"], sid)
        if rec.condition != parse_condition(e["condition"]):
            raise FormatError(f"{e['file']}: header condition disagrees with manifest")
        if sid not in recs:
            order.append(sid)
            recs[sid] = []
        recs[sid].append(rec)
    subjects = tuple(SubjectData(sid, tuple(recs[sid])) for sid in order)
    return CohortDataset(subjects, band)


def write_cohort(cohort: CohortDataset, out_dir) -> list[dict]:
    """One EEGB file per subject and condition plus manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for subj in cohort.subjects:
        for rec in sorted(subj.recordings, key=lambda r: -int(r.condition)):
            name = f"{subj.subject_id}_{condition_name(rec.condition)}.eegb"
            digest = write_eegb(out / name, rec)
            entries.append({"subject_id": subj.subject_id, "condition": condition_name(rec.condition),
                            "file": name, "sha256": digest})
    (out / "manifest.json").write_text(json.dumps(entries, indent=2) + "\n")
    return entries
