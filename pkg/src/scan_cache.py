"""
Whole-scan cache files.

Layout (little-endian):
    header   magic "RDL1", version u16, study sha256 (32 bytes), bound u64,
             record count u64, valuation columns u16, label columns u16
    columns  (l u32, point u16) per valuation column, then per label column
    records  p u64, status u8 (0 included, else exclusion code),
             one u8 valuation per valuation column (0xFF when excluded),
             one u16 label per label column (0xFFFF for none)
"""

import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from src.errors import CacheError, CorruptCacheError, ExclusionReason, StaleCacheError

logger = logging.getLogger(__name__)

MAGIC = b"RDL1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sH32sQQHH")
COLUMN = struct.Struct("<IH")
NO_VALUATION = 0xFF
NO_LABEL = 0xFFFF


@dataclass(frozen=True)
class CacheHeader:
    version: int
    study_hash: bytes
    bound: int
    count: int
    valuation_columns: Tuple[Tuple[int, int], ...]
    label_columns: Tuple[Tuple[int, int], ...]

    @property
    def size(self) -> int:
        return HEADER.size + COLUMN.size * (len(self.valuation_columns) + len(self.label_columns))


def study_hash(study) -> bytes:
    """sha256 over the canonical JSON of what a scan depends on (targets and seed excluded)."""
    canonical = json.dumps(study.fingerprint(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).digest()


def record_dtype(valuation_columns: int, label_columns: int) -> np.dtype:
    fields = [("p", "<u8"), ("status", "u1")]
    fields += [(f"v{i}", "u1") for i in range(valuation_columns)]
    fields += [(f"l{i}", "<u2") for i in range(label_columns)]
    return np.dtype(fields)


def _encode(records: Sequence, layout) -> np.ndarray:
    nv, nl = len(layout.valuation_columns), len(layout.label_columns)
    table = np.zeros(len(records), dtype=record_dtype(nv, nl))
    for row, record in enumerate(records):
        table["p"][row] = record.p
        if record.included:
            table["status"][row] = 0
            for i, v in enumerate(record.valuations):
                if v >= NO_VALUATION:
                    raise CacheError(f"valuation {v} at p={record.p} does not fit the cache format")
                table[f"v{i}"][row] = v
            for i, label in enumerate(record.labels):
                table[f"l{i}"][row] = NO_LABEL if label is None else label
        else:
            table["status"][row] = record.reason.code
            for i in range(nv):
                table[f"v{i}"][row] = NO_VALUATION
            for i in range(nl):
                table[f"l{i}"][row] = NO_LABEL
    return table


def cache_write(records: Sequence, path: Union[str, Path], study, bound: int) -> Path:
    path = Path(path)
    layout = study.layout
    header = HEADER.pack(MAGIC, FORMAT_VERSION, study_hash(study), bound, len(records),
                         len(layout.valuation_columns), len(layout.label_columns))
    columns = b"".join(COLUMN.pack(ell, i) for ell, i in layout.valuation_columns + layout.label_columns)
    table = _encode(records, layout)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(header)
        f.write(columns)
        f.write(table.tobytes())
    tmp.replace(path)
    logger.info("Wrote %d records to cache %s", len(records), path)
    return path


def _parse_header(data: bytes) -> CacheHeader:
    if len(data) < HEADER.size:
        raise CorruptCacheError("cache shorter than its header")
    magic, version, digest, bound, count, nv, nl = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CorruptCacheError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise StaleCacheError(f"cache format version {version}, expected {FORMAT_VERSION}")
    offset = HEADER.size
    if len(data) < offset + COLUMN.size * (nv + nl):
        raise CorruptCacheError("cache truncated in the column table")
    columns = []
    for _ in range(nv + nl):
        columns.append(COLUMN.unpack_from(data, offset))
        offset += COLUMN.size
    return CacheHeader(version, digest, bound, count, tuple(columns[:nv]), tuple(columns[nv:]))


def read_header(path: Union[str, Path]) -> CacheHeader:
    return _parse_header(Path(path).read_bytes())


def cache_read(path: Union[str, Path], study) -> List:
    """Records from a cache written for this study; StaleCacheError when the study changed."""
    from src.lab import ScanRecord

    data = Path(path).read_bytes()
    header = _parse_header(data)
    if header.study_hash != study_hash(study):
        raise StaleCacheError(f"cache {path} was written for a different study")
    layout = study.layout
    if header.valuation_columns != layout.valuation_columns or header.label_columns != layout.label_columns:
        raise StaleCacheError(f"cache {path} has a different column layout")

    nv, nl = len(header.valuation_columns), len(header.label_columns)
    dtype = record_dtype(nv, nl)
    body = data[header.size:]
    if len(body) != header.count * dtype.itemsize:
        raise CorruptCacheError(f"cache {path} holds {len(body)} record bytes, expected {header.count * dtype.itemsize}")
    table = np.frombuffer(body, dtype=dtype)

    records = []
    for row in table:
        status = int(row["status"])
        if status:
            try:
                reason = ExclusionReason.from_code(status)
            except ValueError as e:
                raise CorruptCacheError(str(e)) from None
            records.append(ScanRecord(int(row["p"]), reason, (), (), layout))
            continue
        valuations = tuple(int(row[f"v{i}"]) for i in range(nv))
        labels = tuple(None if int(row[f"l{i}"]) == NO_LABEL else int(row[f"l{i}"]) for i in range(nl))
        records.append(ScanRecord(int(row["p"]), None, valuations, labels, layout))
    logger.debug("Read %d records from cache %s", len(records), path)
    return records
