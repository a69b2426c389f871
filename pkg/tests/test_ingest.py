import json

import numpy as np
import pytest

from neuromark.core import (
    CorruptBundleError,
    Dataset,
    FormatError,
    RangeError,
    Reaction,
    ShapeError,
    StimulusMeta,
)
from neuromark.ingest import (
    bundle_bytes,
    dataset_from_bytes,
    load_bundle,
    load_dataset,
    load_manifest,
    parse_labels,
    parse_recording,
    save_bundle,
    serialize_recording,
)


def recording_text(rows=8, header="Time,Electrode,Attention,Meditation"):
    lines = [header]
    for i in range(rows):
        lines.append(f"{i / 512.0},{np.sin(i):.6f},{40 + i % 20},{50 + i % 10}")
    return "\n".join(lines) + "\n"


class TestParseRecording:
    def test_basic(self):
        rec = parse_recording(recording_text(rows=3584))
        assert len(rec.samples) == 3584
        assert rec.sample_rate == 512.0
        assert rec.attention.min() >= 0 and rec.attention.max() <= 100

    def test_header_only_gives_empty_recording(self):
        rec = parse_recording("Time,Electrode,Attention,Meditation\n")
        assert len(rec.samples) == 0

    def test_column_order_free_and_case_insensitive(self):
        text = "  attention , TIME, Meditation,electrode\n55,0.0,60,1.5\n56,0.1,61,2.5\n"
        rec = parse_recording(text)
        assert np.allclose(rec.samples, [1.5, 2.5])
        assert np.array_equal(rec.attention, [55, 56])
        assert np.allclose(rec.timestamps, [0.0, 0.1])

    def test_missing_column(self):
        with pytest.raises(FormatError, match="electrode"):
            parse_recording("Time,Attention,Meditation\n0,1,2\n")

    def test_non_numeric_cell_names_row(self):
        text = "Time,Electrode,Attention,Meditation\n0.0,1.0,50,50\n0.1,oops,50,50\n"
        with pytest.raises(FormatError, match="row 3"):
            parse_recording(text)

    def test_attention_out_of_range(self):
        text = "Time,Electrode,Attention,Meditation\n0.0,1.0,150,50\n"
        with pytest.raises(RangeError):
            parse_recording(text)

    def test_serialize_parse_round_trip(self):
        rec = parse_recording(recording_text(rows=64))
        canonical = serialize_recording(rec)
        again = parse_recording(canonical)
        assert again == rec
        # canonical form is a fixed point
        assert serialize_recording(again) == canonical


class TestParseLabels:
    def test_eighty_codes(self):
        text = ",".join(["B", "L", "D", "N"] * 20)
        labels = parse_labels(text, "S01")
        assert len(labels) == 80
        reactions = [Reaction.POSITIVE if c in "BL" else Reaction.NEGATIVE for c in labels]
        assert reactions[:4] == [Reaction.POSITIVE, Reaction.POSITIVE,
                                 Reaction.NEGATIVE, Reaction.NEGATIVE]

    def test_newline_separated(self):
        text = "\n".join(["B"] * 40 + ["N"] * 40)
        assert len(parse_labels(text)) == 80

    def test_wrong_count(self):
        with pytest.raises(ShapeError, match="79"):
            parse_labels(",".join(["B"] * 79), "S07")

    def test_invalid_code(self):
        with pytest.raises(FormatError, match="'Q'"):
            parse_labels(",".join(["B"] * 79 + ["Q"]))


@pytest.fixture
def manifest_dir(tmp_path):
    """Two-subject on-disk layout: 80 tiny recordings + labels each."""
    products = ("Sneakers", "Headphones", "LaptopBags", "Sunglasses", "Smartphones")
    entries = []
    for subject, gender in (("S01", "female"), ("S02", "male")):
        subject_dir = tmp_path / subject
        subject_dir.mkdir()
        codes = []
        i = 0
        for product in products:
            for brand in range(1, 5):
                for ad_type in (1, 2, 3, 4):
                    name = f"ad_{i:03d}.csv"
                    (subject_dir / name).write_text(recording_text(rows=8))
                    entries.append({
                        "recording": f"{subject}/{name}",
                        "subject_id": subject,
                        "gender": gender,
                        "product": product,
                        "brand": f"B{brand}",
                        "ad_type": ad_type,
                    })
                    codes.append("BLDN"[i % 4])
                    i += 1
        (tmp_path / f"{subject}_labels.csv").write_text("\n".join(codes))
    manifest = {
        "labels": {"S01": "S01_labels.csv", "S02": "S02_labels.csv"},
        "entries": entries,
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


class TestLoadDataset:
    def test_load_and_join(self, manifest_dir):
        ds = load_dataset(load_manifest(manifest_dir))
        assert len(ds) == 160
        subjects = {r.meta.subject_id for r in ds.recordings}
        assert subjects == {"S01", "S02"}
        # sorted deterministic order
        keys = [(r.meta.subject_id, r.meta.product, r.meta.brand, r.meta.ad_type)
                for r in ds.recordings]
        assert keys == sorted(keys)

    def test_deterministic(self, manifest_dir):
        m = load_manifest(manifest_dir)
        assert bundle_bytes(load_dataset(m)) == bundle_bytes(load_dataset(m))

    def test_missing_recording_file_names_path(self, manifest_dir, tmp_path):
        (tmp_path / "S01" / "ad_000.csv").unlink()
        with pytest.raises(FormatError, match="ad_000.csv"):
            load_dataset(load_manifest(manifest_dir))

    def test_bad_label_sheet_names_path(self, manifest_dir, tmp_path):
        (tmp_path / "S02_labels.csv").write_text("B,L")
        with pytest.raises(ShapeError, match="S02_labels.csv"):
            load_dataset(load_manifest(manifest_dir))

    def test_duplicate_entry_rejected(self, manifest_dir):
        doc = json.loads(manifest_dir.read_text())
        doc["entries"].append(doc["entries"][0])
        manifest_dir.write_text(json.dumps(doc))
        with pytest.raises(FormatError, match="duplicate"):
            load_manifest(manifest_dir)


class TestBundle:
    def test_round_trip(self, manifest_dir, tmp_path):
        ds = load_dataset(load_manifest(manifest_dir))
        path = tmp_path / "out.nmk"
        save_bundle(ds, path)
        assert load_bundle(path) == ds

    def test_round_trip_preserves_provenance_and_info(self, synth_recording):
        from dataclasses import replace

        rec = synth_recording()
        aug = replace(rec, provenance="augmented")
        ds = Dataset(recordings=(rec, aug), info={"separability": "0.5"})
        back = dataset_from_bytes(bundle_bytes(ds))
        assert back == ds
        assert back.provenance == ("original", "augmented")
        assert back.info == {"separability": "0.5"}

    def test_magic_mismatch(self):
        with pytest.raises(CorruptBundleError, match="magic"):
            dataset_from_bytes(b"JUNKxxxxxxxxxxxxxxx")

    def test_truncation(self, synth_recording):
        data = bundle_bytes(Dataset(recordings=(synth_recording(),)))
        with pytest.raises(CorruptBundleError, match="truncated"):
            dataset_from_bytes(data[: len(data) - 7])

    def test_trailing_garbage(self, synth_recording):
        data = bundle_bytes(Dataset(recordings=(synth_recording(),)))
        with pytest.raises(CorruptBundleError, match="trailing"):
            dataset_from_bytes(data + b"xx")
