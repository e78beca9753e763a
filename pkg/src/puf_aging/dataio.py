"""Bit-exact persistence for readouts, enrollment profiles and manifests.

Readout files (``.srpf``) are a fixed little-endian header followed by the
readouts, each packed bit ``i`` -> byte ``i // 8``, bit ``i % 8``::

    offset size field
    0      4    magic b"SRPF"
    4      2    version (1)
    6      16   device id, UTF-8, NUL padded
    22     4    temperature, millikelvin
    26     2    voltage, millivolts
    28     1    role (0 pre-aging, 1 post-aging)
    29     8    effective age, centihours
    37     2    readout count
    39     4    cell count
    43     ...  payload, readout_count * ceil(cell_count / 8) bytes

Temperature, age and device id are stored at the resolution above; values
finer than that do not round-trip.
"""
from __future__ import annotations

import datetime as _dt
import json
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from .asr import HELD_OUT, SELECTION, AsrRecord, EnrollmentProfile, SelectionConfig
from .bitcore import ReadoutSet, ResponseVector, Role

MAGIC = b"SRPF"
VERSION = 1
HEADER = struct.Struct("<4sH16sIHBQHI")
DEVICE_ID_BYTES = 16


class ReadoutFormatError(ValueError):
    """Base class for malformed readout files."""


class NotAReadoutFileError(ReadoutFormatError):
    pass


class UnsupportedVersionError(ReadoutFormatError):
    pass


class PayloadLengthError(ReadoutFormatError):
    def __init__(self, path, expected: int, actual: int):
        super().__init__(f"{path}: payload is {actual} bytes, expected {expected}")
        self.expected = expected
        self.actual = actual


class ProfileSchemaError(ValueError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


class ChecksumError(ValueError):
    pass


@dataclass(frozen=True)
class ReadoutFileHeader:
    device_id: str
    temperature_mk: int
    voltage_mv: int
    role: Role
    effective_age_centihours: int
    readout_count: int
    cell_count: int
    version: int = VERSION

    @property
    def bytes_per_readout(self) -> int:
        return (self.cell_count + 7) // 8

    @property
    def payload_length(self) -> int:
        return self.readout_count * self.bytes_per_readout

    def pack(self) -> bytes:
        return HEADER.pack(MAGIC, self.version, encode_device_id(self.device_id), self.temperature_mk,
                           self.voltage_mv, int(self.role), self.effective_age_centihours,
                           self.readout_count, self.cell_count)


def encode_device_id(device_id: str | bytes) -> bytes:
    raw = device_id.encode("utf-8") if isinstance(device_id, str) else bytes(device_id)
    if len(raw) > DEVICE_ID_BYTES:
        raise ValueError(f"device id {device_id!r} exceeds {DEVICE_ID_BYTES} bytes")
    if b"\0" in raw:
        raise ValueError("device id may not contain NUL bytes")
    return raw.ljust(DEVICE_ID_BYTES, b"\0")


def decode_device_id(raw: bytes) -> str:
    return raw.rstrip(b"\0").decode("utf-8")


def header_for(rs: ReadoutSet, device_id: str) -> ReadoutFileHeader:
    return ReadoutFileHeader(
        device_id=device_id,
        temperature_mk=int(round(rs.temperature * 1000)),
        voltage_mv=int(rs.voltage),
        role=rs.role,
        effective_age_centihours=int(round(rs.effective_age * 100)),
        readout_count=len(rs),
        cell_count=rs.cell_count,
    )


def encode_readouts(rs: ReadoutSet, device_id: str) -> bytes:
    if not len(rs):
        raise ValueError("cannot write an empty readout set")
    return header_for(rs, device_id).pack() + b"".join(r.packed for r in rs)


def decode_readouts(data: bytes, path: Any = "<bytes>") -> tuple[ReadoutSet, str]:
    if len(data) < HEADER.size or data[:4] != MAGIC:
        raise NotAReadoutFileError(f"{path}: not a readout file")
    magic, version, dev, t_mk, v_mv, role, age_ch, count, cells = HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version}")
    try:
        role = Role(role)
    except ValueError:
        raise ReadoutFormatError(f"{path}: unknown role code {role}") from None
    per = (cells + 7) // 8
    payload = data[HEADER.size:]
    if len(payload) != count * per:
        raise PayloadLengthError(path, count * per, len(payload))
    vecs = []
    for i in range(count):
        chunk = payload[i * per:(i + 1) * per]
        if cells % 8 and chunk[-1] >> (cells % 8):
            raise ReadoutFormatError(f"{path}: readout {i} has non-zero padding bits")
        vecs.append(ResponseVector(chunk, cells, role))
    rs = ReadoutSet(tuple(vecs), t_mk / 1000, v_mv, age_ch / 100, role)
    return rs, decode_device_id(dev)


def write_readouts(rs: ReadoutSet, device_id: str, path: str | os.PathLike) -> None:
    data = encode_readouts(rs, device_id)
    try:
        Path(path).write_bytes(data)
    except OSError as e:
        raise OSError(f"cannot write readouts to {path}: {e}") from e


def read_readouts(path: str | os.PathLike) -> tuple[ReadoutSet, str]:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise OSError(f"cannot read readouts from {path}: {e}") from e
    return decode_readouts(data, path)


# -- checksums ----------------------------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_M64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _M64
    return h


def payload_checksum(path: str | os.PathLike) -> int:
    data = Path(path).read_bytes()
    return fnv1a64(data[HEADER.size:])


# -- enrollment profiles --------------------------------------------------------

def _ts(t: _dt.datetime) -> str:
    return t.isoformat()


def profile_to_dict(profile: EnrollmentProfile) -> dict:
    sel = profile.selection
    return {
        "device_id": profile.device_id,
        "selection": {"N": sel.n_reevals, "rt_k": sel.rt, "ht_k": sel.ht},
        "p_intra_est": profile.p_intra_est,
        "p_inter_est": profile.p_inter_est,
        "p_intra_source": profile.p_intra_source,
        "asrs": [[a.address, a.reference_bit] for a in profile.asrs],
        "created_at": _ts(profile.created_at),
    }


def dumps_profile(profile: EnrollmentProfile) -> str:
    # json emits floats via repr, the shortest round-tripping form
    return json.dumps(profile_to_dict(profile), ensure_ascii=False, separators=(", ", ": ")) + "\n"


def _need(d: dict, key: str, path: str):
    if not isinstance(d, dict):
        raise ProfileSchemaError(path or "$", "expected an object")
    if key not in d:
        raise ProfileSchemaError(f"{path}.{key}" if path else key, "missing")
    return d[key]


def _number(v, path: str, *, integer=False, nullable=False):
    if v is None and nullable:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ProfileSchemaError(path, f"expected a number, got {type(v).__name__}")
    if integer and not isinstance(v, int):
        raise ProfileSchemaError(path, "expected an integer")
    if isinstance(v, float) and not math.isfinite(v):
        raise ProfileSchemaError(path, "must be finite")
    return v


def profile_from_dict(d: dict) -> EnrollmentProfile:
    device_id = _need(d, "device_id", "")
    if not isinstance(device_id, str):
        raise ProfileSchemaError("device_id", "expected a string")
    sel = _need(d, "selection", "")
    try:
        selection = SelectionConfig(
            _number(_need(sel, "N", "selection"), "selection.N", integer=True),
            float(_number(_need(sel, "rt_k", "selection"), "selection.rt_k")),
            float(_number(_need(sel, "ht_k", "selection"), "selection.ht_k")),
        )
    except ValueError as e:
        if isinstance(e, ProfileSchemaError):
            raise
        raise ProfileSchemaError("selection", str(e)) from None
    p_intra = float(_number(_need(d, "p_intra_est", ""), "p_intra_est"))
    p_inter = _number(_need(d, "p_inter_est", ""), "p_inter_est", nullable=True)
    for name, p in (("p_intra_est", p_intra), ("p_inter_est", p_inter)):
        if p is not None and not 0 <= p <= 1:
            raise ProfileSchemaError(name, "must lie in [0, 1]")
    source = d.get("p_intra_source", HELD_OUT)
    if source not in (HELD_OUT, SELECTION):
        raise ProfileSchemaError("p_intra_source", f"unknown value {source!r}")
    raw = _need(d, "asrs", "")
    if not isinstance(raw, list):
        raise ProfileSchemaError("asrs", "expected an array")
    asrs = []
    seen = set()
    prev = -1
    for i, item in enumerate(raw):
        if not (isinstance(item, list) and len(item) == 2):
            raise ProfileSchemaError(f"asrs[{i}]", "expected [address, reference_bit]")
        addr = _number(item[0], f"asrs[{i}][0]", integer=True)
        bit = _number(item[1], f"asrs[{i}][1]", integer=True)
        if addr < 0:
            raise ProfileSchemaError(f"asrs[{i}][0]", "address must be non-negative")
        if bit not in (0, 1):
            raise ProfileSchemaError(f"asrs[{i}][1]", "reference bit must be 0 or 1")
        if addr in seen:
            raise ProfileSchemaError(f"asrs[{i}][0]", f"duplicate address {addr}")
        if addr < prev:
            raise ProfileSchemaError(f"asrs[{i}][0]", "addresses must be in increasing order")
        seen.add(addr)
        prev = addr
        asrs.append(AsrRecord(addr, bit))
    created = _need(d, "created_at", "")
    try:
        created_at = _dt.datetime.fromisoformat(created)
    except (TypeError, ValueError):
        raise ProfileSchemaError("created_at", f"not an ISO-8601 timestamp: {created!r}") from None
    return EnrollmentProfile(device_id, selection, tuple(asrs), p_intra,
                             None if p_inter is None else float(p_inter), created_at, source)


def loads_profile(text: str) -> EnrollmentProfile:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProfileSchemaError("$", f"invalid JSON: {e}") from None
    return profile_from_dict(d)


def write_profile(profile: EnrollmentProfile, path: str | os.PathLike) -> None:
    Path(path).write_bytes(dumps_profile(profile).encode("utf-8"))


def read_profile(path: str | os.PathLike) -> EnrollmentProfile:
    return loads_profile(Path(path).read_text(encoding="utf-8"))


# -- manifests ----------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: str
    role: Role
    temperature: float
    device_id: str
    checksum: int


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]

    def find(self, name: str) -> ManifestEntry:
        for e in self.entries:
            if e.path == name:
                return e
        raise KeyError(name)


def manifest_entry(path: str | os.PathLike, root: str | os.PathLike) -> ManifestEntry:
    """Describe an existing readout file; ``path`` is stored relative to ``root``."""
    rs, dev = read_readouts(path)
    rel = os.path.relpath(path, root).replace(os.sep, "/")
    return ManifestEntry(rel, rs.role, rs.temperature, dev, payload_checksum(path))


def write_manifest(manifest: Manifest, path: str | os.PathLike) -> None:
    doc = {
        "version": 1,
        "entries": [
            {"path": e.path, "role": e.role.name.lower().replace("_", "-"), "temperature_k": e.temperature,
             "device_id": e.device_id, "checksum": f"{e.checksum:016x}"}
            for e in manifest.entries
        ],
    }
    Path(path).write_bytes((json.dumps(doc, indent=2) + "\n").encode("utf-8"))


def read_manifest(path: str | os.PathLike, verify: bool = True) -> Manifest:
    """Load a manifest; with ``verify`` every listed file's checksum is checked."""
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    roles = {"pre-aging": Role.PRE_AGING, "post-aging": Role.POST_AGING}
    entries = []
    for e in doc["entries"]:
        entry = ManifestEntry(e["path"], roles[e["role"]], float(e["temperature_k"]),
                              e["device_id"], int(e["checksum"], 16))
        if verify:
            actual = payload_checksum(path.parent / entry.path)
            if actual != entry.checksum:
                raise ChecksumError(f"{entry.path}: checksum {actual:016x} != manifest {entry.checksum:016x}")
        entries.append(entry)
    return Manifest(tuple(entries))
