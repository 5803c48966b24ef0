"""Bit-exact file formats and dataset ingestion.

Probability maps use the PMAP container: magic bytes ``PMAP``, unsigned
32-bit little-endian height and width, then height*width IEEE-754
binary32 little-endian values in row-major order. Masks use binary PGM
(P5, maxval 255) with pixel value >= 128 meaning defect. Manifests are
JSON documents with paths relative to the manifest's directory.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .grids import CalibrationRecord, DefectMask, ProbabilityMap

__all__ = [
    "FormatError",
    "BadMagicError",
    "TruncatedError",
    "HeaderError",
    "ValueRangeError",
    "NonFiniteValueError",
    "read_probability_map",
    "write_probability_map",
    "read_mask",
    "write_mask",
    "read_manifest",
    "write_dataset",
]

PMAP_MAGIC = b"PMAP"
# refuse absurd headers before allocating (2560x1600 industrial grids fit easily)
MAX_PIXELS = 1 << 28


class FormatError(Exception):
    """Base class for file-format failures."""


class BadMagicError(FormatError):
    """Unrecognized magic bytes / wrong container type."""


class TruncatedError(FormatError):
    """Payload shorter than the header promises."""


class HeaderError(FormatError):
    """Structurally invalid header (dimensions, maxval)."""


class ValueRangeError(FormatError):
    """A parsed probability falls outside [0, 1]."""


class NonFiniteValueError(FormatError):
    """A parsed probability is NaN or infinite."""


def read_probability_map(path) -> ProbabilityMap:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != PMAP_MAGIC:
        raise BadMagicError(f"{path}: not a PMAP file")
    if len(data) < 12:
        raise TruncatedError(f"{path}: header truncated")
    height, width = struct.unpack_from("<II", data, 4)
    if height < 1 or width < 1 or height * width > MAX_PIXELS:
        raise HeaderError(f"{path}: bad dimensions {height}x{width}")
    expected = 12 + 4 * height * width
    if len(data) < expected:
        raise TruncatedError(
            f"{path}: payload truncated ({len(data)} bytes, expected {expected})"
        )
    values = np.frombuffer(data, dtype="<f4", count=height * width, offset=12)
    values = values.reshape(height, width)
    if not np.all(np.isfinite(values)):
        raise NonFiniteValueError(f"{path}: NaN or infinite probability value")
    if float(values.min()) < 0.0 or float(values.max()) > 1.0:
        raise ValueRangeError(f"{path}: probability value outside [0, 1]")
    return ProbabilityMap(values)


def write_probability_map(pmap: ProbabilityMap, path) -> None:
    payload = pmap.values.astype("<f4").tobytes(order="C")
    header = PMAP_MAGIC + struct.pack("<II", pmap.height, pmap.width)
    Path(path).write_bytes(header + payload)


def _parse_pgm_header(data: bytes, path):
    """Parse P5 header tokens, honoring '#' comments; returns
    (width, height, maxval, raster offset)."""
    if len(data) < 2 or data[:2] != b"P5":
        raise BadMagicError(f"{path}: not a binary PGM (P5) file")
    tokens = []
    pos = 2
    while len(tokens) < 3:
        if pos >= len(data):
            raise TruncatedError(f"{path}: PGM header truncated")
        ch = data[pos : pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            token = data[start:pos]
            if not token.isdigit():
                raise HeaderError(f"{path}: non-numeric PGM header token {token!r}")
            tokens.append(int(token))
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data):
        raise TruncatedError(f"{path}: PGM raster missing")
    pos += 1
    width, height, maxval = tokens
    return width, height, maxval, pos


def read_mask(path) -> DefectMask:
    data = Path(path).read_bytes()
    width, height, maxval, offset = _parse_pgm_header(data, path)
    if maxval != 255:
        raise HeaderError(f"{path}: PGM maxval must be 255, got {maxval}")
    if width < 1 or height < 1 or width * height > MAX_PIXELS:
        raise HeaderError(f"{path}: bad dimensions {height}x{width}")
    if len(data) - offset < width * height:
        raise TruncatedError(f"{path}: PGM raster truncated")
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=offset)
    return DefectMask(raster.reshape(height, width) >= 128)


def write_mask(mask: DefectMask, path) -> None:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    raster = np.where(mask.bits, np.uint8(255), np.uint8(0)).tobytes(order="C")
    Path(path).write_bytes(header + raster)


def read_manifest(path) -> List[CalibrationRecord]:
    """Load a dataset manifest; record order follows manifest order."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid manifest JSON: {exc}") from exc
    entries = doc.get("entries") if isinstance(doc, dict) else None
    if not isinstance(entries, list) or not entries:
        raise FormatError(f"{path}: manifest must contain a non-empty 'entries' list")
    root = path.parent
    records, seen = [], set()
    for entry in entries:
        try:
            sample_id = entry["id"]
            map_path = root / entry["probability_map_path"]
            mask_path = root / entry["mask_path"]
        except (TypeError, KeyError) as exc:
            raise FormatError(f"{path}: malformed manifest entry {entry!r}") from exc
        if sample_id in seen:
            raise FormatError(f"{path}: duplicate manifest id {sample_id!r}")
        seen.add(sample_id)
        try:
            pmap = read_probability_map(map_path)
            mask = read_mask(mask_path)
            records.append(CalibrationRecord(id=sample_id, map=pmap, mask=mask))
        except FileNotFoundError as exc:
            raise FormatError(f"{path}: missing file for entry {sample_id!r}: {exc}") from exc
        except ValueError as exc:
            raise FormatError(f"{path}: entry {sample_id!r}: {exc}") from exc
    return records


def write_dataset(records: Sequence[CalibrationRecord], out_dir) -> Path:
    """Write PMAP/PGM files plus a manifest.json; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in records:
        map_name = f"{rec.id}.pmap"
        mask_name = f"{rec.id}.pgm"
        write_probability_map(rec.map, out_dir / map_name)
        write_mask(rec.mask, out_dir / mask_name)
        entries.append(
            {"id": rec.id, "probability_map_path": map_name, "mask_path": mask_name}
        )
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps({"entries": entries}, indent=2) + "\n")
    return manifest_path
