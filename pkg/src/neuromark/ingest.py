"""Parsers for per-ad recording files and label sheets, plus the binary bundle.

Recording files are CSV with a header row naming Time, Electrode,
Attention and Meditation in any order (matching is case-insensitive and
whitespace-tolerant). Label sheets carry exactly 80 codes, one per ad
slot, newline- or comma-separated. A manifest (JSON) pins the mapping of
files to subjects/products/brands/ad types and the per-subject label
sheet, making the on-disk ordering explicit.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ._binio import Reader, Writer, write_atomic
from .core import (
    ADS_PER_SUBJECT,
    AUGMENTED,
    CorruptBundleError,
    Dataset,
    FormatError,
    ORIGINAL,
    RangeError,
    RAW_LABELS,
    Recording,
    ShapeError,
    StimulusMeta,
)

BUNDLE_MAGIC = b"NMK1"
BUNDLE_VERSION = 1

_COLUMNS = ("time", "electrode", "attention", "meditation")


def parse_recording(text: str, sample_rate: float = 512.0,
                    meta: StimulusMeta | None = None) -> Recording:
    """Parse one recording file into a Recording.

    The header row is required; data rows follow in file order and the
    timestamps come straight from the Time column.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("recording file is empty (missing header row)")
    header = [cell.strip().lower() for cell in lines[0].split(",")]
    col = {}
    for name in _COLUMNS:
        if name not in header:
            raise FormatError(f"missing column {name!r} in header {lines[0]!r}")
        col[name] = header.index(name)
    times, samples, attention, meditation = [], [], [], []
    for row_no, line in enumerate(lines[1:], start=2):
        cells = [cell.strip() for cell in line.split(",")]
        if len(cells) < len(header):
            raise FormatError(f"row {row_no}: expected {len(header)} cells, got {len(cells)}")
        try:
            times.append(float(cells[col["time"]]))
            samples.append(float(cells[col["electrode"]]))
            att = float(cells[col["attention"]])
            med = float(cells[col["meditation"]])
        except ValueError as exc:
            raise FormatError(f"row {row_no}: non-numeric cell ({exc})") from None
        for name, value in (("attention", att), ("meditation", med)):
            if not 0.0 <= value <= 100.0:
                raise RangeError(f"row {row_no}: {name} value {value} outside [0, 100]")
        attention.append(int(round(att)))
        meditation.append(int(round(med)))
    meta = meta or _placeholder_meta()
    return Recording(
        samples=np.array(samples, dtype=np.float64),
        sample_rate=sample_rate,
        attention=np.array(attention, dtype=np.int64),
        meditation=np.array(meditation, dtype=np.int64),
        timestamps=np.array(times, dtype=np.float64),
        meta=meta,
    )


def _placeholder_meta() -> StimulusMeta:
    return StimulusMeta(subject_id="unknown", gender="female", product="Sneakers",
                        brand="B1", ad_type=1, raw_label="N")


def serialize_recording(rec: Recording) -> str:
    """Canonical CSV form: fixed column order, shortest round-trip floats."""
    lines = ["Time,Electrode,Attention,Meditation"]
    for t, s, a, m in zip(rec.timestamps, rec.samples, rec.attention, rec.meditation):
        lines.append(f"{float(t)!r},{float(s)!r},{int(a)},{int(m)}")
    return "\n".join(lines) + "\n"


def parse_labels(text: str, subject_id: str = "") -> list[str]:
    """Read a subject's 80 raw label codes in ad order."""
    codes = []
    for line in text.splitlines():
        for cell in line.split(","):
            cell = cell.strip()
            if cell:
                codes.append(cell)
    who = f" for subject {subject_id}" if subject_id else ""
    if len(codes) != ADS_PER_SUBJECT:
        raise ShapeError(f"expected {ADS_PER_SUBJECT} labels{who}, got {len(codes)}")
    for code in codes:
        if code not in RAW_LABELS:
            raise FormatError(f"invalid label code {code!r}{who}; expected one of {RAW_LABELS}")
    return codes


@dataclass(frozen=True)
class ManifestEntry:
    recording_path: str
    subject_id: str
    gender: str
    product: str
    brand: str
    ad_type: int


@dataclass(frozen=True)
class Manifest:
    """Explicit file layout: entries in per-subject ad order plus label sheets."""

    entries: tuple[ManifestEntry, ...]
    labels: dict[str, str]
    root: str = "."

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "labels", dict(self.labels))
        seen = set()
        for e in self.entries:
            key = (e.subject_id, e.product, e.brand, e.ad_type)
            if key in seen:
                raise FormatError(f"duplicate manifest entry for {key}")
            seen.add(key)
        for e in self.entries:
            if e.subject_id not in self.labels:
                raise FormatError(f"no label sheet listed for subject {e.subject_id}")

    def path_of(self, relative: str) -> str:
        return os.path.join(self.root, relative)


def load_manifest(path) -> Manifest:
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: manifest is not valid JSON ({exc})") from None
    try:
        entries = tuple(
            ManifestEntry(
                recording_path=item["recording"],
                subject_id=item["subject_id"],
                gender=item["gender"],
                product=item["product"],
                brand=item["brand"],
                ad_type=int(item["ad_type"]),
            )
            for item in doc["entries"]
        )
        labels = {str(k): str(v) for k, v in doc["labels"].items()}
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: manifest missing field {exc}") from None
    return Manifest(entries=entries, labels=labels, root=os.path.dirname(path) or ".")


def load_dataset(manifest: Manifest) -> Dataset:
    """Assemble a Dataset from a manifest.

    Each subject's labels are joined to that subject's entries in
    manifest order; the final recording order is sorted by
    (subject, product, brand, ad_type) so repeated loads are identical.
    Any file-level failure is re-raised with the path attached.
    """
    labels_of: dict[str, list[str]] = {}
    for subject_id, rel in sorted(manifest.labels.items()):
        path = manifest.path_of(rel)
        try:
            with open(path, "r", encoding="utf-8") as handle:
                labels_of[subject_id] = parse_labels(handle.read(), subject_id)
        except OSError as exc:
            raise FormatError(f"{path}: cannot read label sheet ({exc})") from None
        except (ShapeError, FormatError) as exc:
            raise type(exc)(f"{path}: {exc}") from None

    slot: dict[str, int] = {}
    recordings = []
    for entry in manifest.entries:
        idx = slot.get(entry.subject_id, 0)
        slot[entry.subject_id] = idx + 1
        codes = labels_of[entry.subject_id]
        if idx >= len(codes):
            raise ShapeError(
                f"subject {entry.subject_id} has more manifest entries than labels")
        path = manifest.path_of(entry.recording_path)
        meta = StimulusMeta(
            subject_id=entry.subject_id,
            gender=entry.gender,
            product=entry.product,
            brand=entry.brand,
            ad_type=entry.ad_type,
            raw_label=codes[idx],
        )
        try:
            with open(path, "r", encoding="utf-8") as handle:
                rec = parse_recording(handle.read(), meta=meta)
        except OSError as exc:
            raise FormatError(f"{path}: cannot read recording ({exc})") from None
        except (FormatError, RangeError, ShapeError) as exc:
            raise type(exc)(f"{path}: {exc}") from None
        recordings.append(rec)
    recordings.sort(key=lambda r: (r.meta.subject_id, r.meta.product, r.meta.brand,
                                   r.meta.ad_type))
    return Dataset(recordings=tuple(recordings))


def _write_recording(w: Writer, rec: Recording):
    m = rec.meta
    for value in (m.subject_id, m.gender, m.product, m.brand):
        w.text(value)
    w.u32(m.ad_type)
    w.text(m.raw_label)
    w.u8(0 if rec.provenance == ORIGINAL else 1)
    w.f64(rec.sample_rate)
    w.f64_array(rec.samples)
    w.f64_array(rec.timestamps)
    w.u8_array(rec.attention.astype(np.uint8))
    w.u8_array(rec.meditation.astype(np.uint8))


def _read_recording(r: Reader) -> Recording:
    subject_id = r.text()
    gender = r.text()
    product = r.text()
    brand = r.text()
    ad_type = r.u32()
    raw_label = r.text()
    provenance = ORIGINAL if r.u8() == 0 else AUGMENTED
    sample_rate = r.f64()
    samples = r.f64_array()
    timestamps = r.f64_array()
    attention = r.u8_array().astype(np.int64)
    meditation = r.u8_array().astype(np.int64)
    meta = StimulusMeta(subject_id=subject_id, gender=gender, product=product,
                        brand=brand, ad_type=ad_type, raw_label=raw_label)
    return Recording(samples=samples, sample_rate=sample_rate, attention=attention,
                     meditation=meditation, timestamps=timestamps, meta=meta,
                     provenance=provenance)


def bundle_bytes(ds: Dataset) -> bytes:
    w = Writer()
    w.magic(BUNDLE_MAGIC)
    w.u32(BUNDLE_VERSION)
    w.u32(len(ds.info))
    for key in sorted(ds.info):
        w.text(key)
        w.text(ds.info[key])
    w.u32(len(ds.recordings))
    for rec in ds.recordings:
        _write_recording(w, rec)
    return w.getvalue()


def dataset_from_bytes(data: bytes) -> Dataset:
    r = Reader(data, label="dataset bundle")
    r.magic(BUNDLE_MAGIC)
    version = r.u32()
    if version != BUNDLE_VERSION:
        raise CorruptBundleError(f"unsupported bundle version {version}")
    info = {}
    for _ in range(r.u32()):
        key = r.text()
        info[key] = r.text()
    recordings = tuple(_read_recording(r) for _ in range(r.u32()))
    r.expect_end()
    return Dataset(recordings=recordings, info=info)


def save_bundle(ds: Dataset, path) -> None:
    """Persist a dataset; load_bundle(save_bundle(ds)) is bit-exact."""
    write_atomic(os.fspath(path), bundle_bytes(ds))


def load_bundle(path) -> Dataset:
    with open(os.fspath(path), "rb") as handle:
        return dataset_from_bytes(handle.read())
