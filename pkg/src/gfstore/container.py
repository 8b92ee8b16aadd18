"""Self-describing container for a whole record.

Layout: magic "GFS1", format version, a JSON manifest (stream metadata,
curation rules, provenance, dictionary, access log, CRC-32 of the data
section), then the data section: per-level arrays of samples whose
optional statistics are stored as length-prefixed blocks.  Length
prefixes make unknown blocks skippable, so containers written by richer
builds stay readable.  All numbers are little-endian; reals are IEEE-754
64-bit, counts 64-bit unsigned, so round trips are bit-exact.
"""

from __future__ import annotations

import dataclasses
import io
import json
import struct
import zlib

import numpy as np

from . import curation, dictionary, stats
from .errors import (
    BadMagic,
    ChecksumMismatch,
    InvariantViolation,
    VersionUnsupported,
)
from .record import SummaryRecord

MAGIC = b"GFS1"
FORMAT_VERSION = 1

_BLOCK_MEAN = 1
_BLOCK_VARIANCE = 2
_BLOCK_MIN = 3
_BLOCK_MAX = 4
_BLOCK_COVARIANCE = 5
_BLOCK_HULL = 6
_BLOCK_HISTOGRAM = 7
_BLOCK_HIST_EDGES = 8
_BLOCK_SWV = 9
_BLOCK_FAMILY_HINT = 10
_BLOCK_NOTES = 11
_BLOCK_DICT_ID = 12


def _floats(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()

def _read_floats(buf: bytes, count: int) -> np.ndarray:
    return np.frombuffer(buf, dtype="<f8", count=count).copy()


def _write_block(out: io.BytesIO, btype: int, payload: bytes) -> None:
    out.write(struct.pack("<IQ", btype, len(payload)))
    out.write(payload)


def _encode_sample(s: stats.SummarySample) -> bytes:
    d = s.channels
    blocks: list[tuple[int, bytes]] = [(_BLOCK_MEAN, _floats(s.mean))]
    if s.variance is not None:
        blocks.append((_BLOCK_VARIANCE, _floats(s.variance)))
    if s.min_v is not None:
        blocks.append((_BLOCK_MIN, _floats(s.min_v)))
    if s.max_v is not None:
        blocks.append((_BLOCK_MAX, _floats(s.max_v)))
    if s.covariance is not None:
        iu = np.triu_indices(d)
        blocks.append((_BLOCK_COVARIANCE, _floats(s.covariance[iu])))
    if s.hull is not None:
        blocks.append((_BLOCK_HULL, struct.pack("<Q", s.hull.shape[0]) + _floats(s.hull)))
    if s.histogram is not None:
        payload = struct.pack("<Q", len(s.histogram))
        for k in sorted(s.histogram):
            payload += struct.pack("<qQ", k, s.histogram[k])
        blocks.append((_BLOCK_HISTOGRAM, payload))
    if s.hist_edges is not None:
        blocks.append(
            (_BLOCK_HIST_EDGES, struct.pack("<Q", s.hist_edges.shape[0]) + _floats(s.hist_edges))
        )
    if s.swv is not None:
        blocks.append((_BLOCK_SWV, struct.pack("<Q", s.swv.shape[0]) + _floats(s.swv)))
    if s.family_hint is not None:
        blocks.append((_BLOCK_FAMILY_HINT, s.family_hint.encode("utf-8")))
    if s.notes:
        payload = struct.pack("<Q", len(s.notes))
        for note in s.notes:
            raw = note.encode("utf-8")
            payload += struct.pack("<Q", len(raw)) + raw
        blocks.append((_BLOCK_NOTES, payload))
    if s.dict_id is not None:
        blocks.append((_BLOCK_DICT_ID, s.dict_id.encode("utf-8")))

    out = io.BytesIO()
    out.write(struct.pack("<qqQqdII", s.t_start, s.t_end, s.n, s.sid, s.weight, d, len(blocks)))
    for btype, payload in blocks:
        _write_block(out, btype, payload)
    return out.getvalue()


def _decode_sample(buf: memoryview, offset: int, notes_sink: list) -> tuple[stats.SummarySample, int]:
    head = struct.calcsize("<qqQqdII")
    t0, t1, n, sid, weight, d, n_blocks = struct.unpack_from("<qqQqdII", buf, offset)
    offset += head
    s = stats.SummarySample(
        t_start=t0, t_end=t1, n=n, mean=np.zeros(d), variance=None, min_v=None, max_v=None,
        weight=weight, sid=sid,
    )
    for _ in range(n_blocks):
        btype, length = struct.unpack_from("<IQ", buf, offset)
        offset += struct.calcsize("<IQ")
        payload = bytes(buf[offset : offset + length])
        offset += length
        if btype == _BLOCK_MEAN:
            s.mean = _read_floats(payload, d)
        elif btype == _BLOCK_VARIANCE:
            s.variance = _read_floats(payload, d)
        elif btype == _BLOCK_MIN:
            s.min_v = _read_floats(payload, d)
        elif btype == _BLOCK_MAX:
            s.max_v = _read_floats(payload, d)
        elif btype == _BLOCK_COVARIANCE:
            tri = _read_floats(payload, d * (d + 1) // 2)
            cov = np.zeros((d, d))
            iu = np.triu_indices(d)
            cov[iu] = tri
            cov[(iu[1], iu[0])] = tri
            s.covariance = cov
        elif btype == _BLOCK_HULL:
            (m,) = struct.unpack_from("<Q", payload)
            s.hull = _read_floats(payload[8:], 2 * m).reshape(m, 2)
        elif btype == _BLOCK_HISTOGRAM:
            (k,) = struct.unpack_from("<Q", payload)
            hist = {}
            pos = 8
            for _ in range(k):
                key, cnt = struct.unpack_from("<qQ", payload, pos)
                pos += 16
                hist[key] = cnt
            s.histogram = hist
        elif btype == _BLOCK_HIST_EDGES:
            (k,) = struct.unpack_from("<Q", payload)
            s.hist_edges = _read_floats(payload[8:], k)
        elif btype == _BLOCK_SWV:
            (depth,) = struct.unpack_from("<Q", payload)
            s.swv = _read_floats(payload[8:], depth * d).reshape(depth, d)
        elif btype == _BLOCK_FAMILY_HINT:
            s.family_hint = payload.decode("utf-8")
        elif btype == _BLOCK_NOTES:
            (k,) = struct.unpack_from("<Q", payload)
            notes = []
            pos = 8
            for _ in range(k):
                (ln,) = struct.unpack_from("<Q", payload, pos)
                pos += 8
                notes.append(payload[pos : pos + ln].decode("utf-8"))
                pos += ln
            s.notes = tuple(notes)
        elif btype == _BLOCK_DICT_ID:
            s.dict_id = payload.decode("utf-8")
        else:
            notes_sink.append(f"skipped unknown statistic block type {btype} ({length} bytes)")
    return s, offset


def _encode_data(rec: SummaryRecord) -> bytes:
    out = io.BytesIO()
    out.write(struct.pack("<Q", len(rec.levels)))
    for level in rec.levels:
        out.write(struct.pack("<Q", len(level)))
        for s in level:
            out.write(_encode_sample(s))
    return out.getvalue()


def _manifest(rec: SummaryRecord, data: bytes) -> dict:
    opts = dataclasses.asdict(rec.opts)
    if opts["histogram_edges"] is not None:
        opts["histogram_edges"] = list(opts["histogram_edges"])
    rules = dataclasses.asdict(rec.rules)
    if rules["drop_priority"] is not None:
        rules["drop_priority"] = list(rules["drop_priority"])
    return {
        "format_version": FORMAT_VERSION,
        "data_len": len(data),
        "data_crc32": zlib.crc32(data) & 0xFFFFFFFF,
        "channels": rec.channels,
        "labels": list(rec.labels),
        "statistics": opts,
        "rules": rules,
        "provenance": rec.provenance,
        "dictionary": None if rec.dictionary is None else rec.dictionary.to_dict(),
        "access_log": rec.access_log.to_dict(),
        "counters": {
            "now": rec.now,
            "next_sid": rec._next_sid,
            "merge_count": rec.merge_count,
        },
    }


def write(rec: SummaryRecord) -> bytes:
    """Serialize the whole record; read(write(rec)) == rec bit-exactly."""
    data = _encode_data(rec)
    manifest = json.dumps(_manifest(rec, data), sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", FORMAT_VERSION))
    out.write(struct.pack("<Q", len(manifest)))
    out.write(manifest)
    out.write(struct.pack("<Q", len(data)))
    out.write(data)
    return out.getvalue()


def read(blob: bytes) -> SummaryRecord:
    """Parse a container, verifying checksum and structural invariants."""
    if blob[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"format version {version} not supported")
    (mlen,) = struct.unpack_from("<Q", blob, 8)
    manifest = json.loads(blob[16 : 16 + mlen].decode("utf-8"))
    pos = 16 + mlen
    (dlen,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    data = blob[pos : pos + dlen]
    if len(data) != dlen or dlen != manifest["data_len"]:
        raise ChecksumMismatch("data section truncated")
    if (zlib.crc32(data) & 0xFFFFFFFF) != manifest["data_crc32"]:
        raise ChecksumMismatch("data section does not match manifest CRC-32")

    opts_d = dict(manifest["statistics"])
    if opts_d.get("histogram_edges") is not None:
        opts_d["histogram_edges"] = tuple(opts_d["histogram_edges"])
    opts = stats.StatisticSet(**opts_d)
    rules_d = dict(manifest["rules"])
    if rules_d.get("drop_priority") is not None:
        rules_d["drop_priority"] = tuple(rules_d["drop_priority"])
    rules = curation.CurationRules(**rules_d)

    rec = SummaryRecord(
        channels=manifest["channels"],
        opts=opts,
        rules=rules,
        labels=tuple(manifest["labels"]),
    )
    rec.provenance = list(manifest["provenance"])
    rec.access_log = curation.AccessLog.from_dict(manifest["access_log"])
    if manifest["dictionary"] is not None:
        rec.dictionary = dictionary.Dictionary.from_dict(manifest["dictionary"])
    rec.now = manifest["counters"]["now"]
    rec._next_sid = manifest["counters"]["next_sid"]
    rec.merge_count = manifest["counters"]["merge_count"]

    view = memoryview(data)
    offset = 0
    (n_levels,) = struct.unpack_from("<Q", view, offset)
    offset += 8
    skip_notes: list[str] = []
    levels: list[list[stats.SummarySample]] = []
    for _ in range(n_levels):
        (count,) = struct.unpack_from("<Q", view, offset)
        offset += 8
        level = []
        for _ in range(count):
            s, offset = _decode_sample(view, offset, skip_notes)
            level.append(s)
        levels.append(level)
    rec.levels = levels if levels else [[]]
    rec._slots = sum(len(level) for level in rec.levels)
    for note in skip_notes:
        rec.provenance.append({"op": "read", "note": note})
    try:
        rec.validate()
    except InvariantViolation:
        raise
    return rec


def save(rec: SummaryRecord, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write(rec))


def load(path) -> SummaryRecord:
    with open(path, "rb") as fh:
        return read(fh.read())


def inspect_summary(rec: SummaryRecord) -> dict:
    """Human-oriented accounting: spans, slot usage, per-sample storage cost."""
    levels = []
    for row in rec.span_report():
        samples = rec.levels[row.level]
        floats = ints = 0
        for s in samples:
            f, i = stats.scalar_cost(s)
            floats += f
            ints += i
        levels.append(
            {
                "level": row.level,
                "scale": row.scale,
                "count": row.count,
                "t_start": row.t_start,
                "t_end": row.t_end,
                "n_total": row.n_total,
                "floats": floats,
                "ints": ints,
                "floats_per_sample": floats / row.count,
                "ints_per_sample": ints / row.count,
            }
        )
    return {
        "channels": rec.channels,
        "labels": list(rec.labels),
        "now": rec.now,
        "slots": rec.slots(),
        "budget": rec.budget,
        "merge_count": rec.merge_count,
        "scalar_footprint": rec.scalar_footprint(),
        "levels": levels,
        "statistics": rec._statistic_ids(),
        "rules": dataclasses.asdict(rec.rules),
        "provenance_events": len(rec.provenance),
    }
