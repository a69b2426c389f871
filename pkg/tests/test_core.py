import numpy as np
import pytest
from hypothesis import given, strategies as st

from neuromark.core import (
    Dataset,
    FormatError,
    RangeError,
    Reaction,
    Recording,
    ShapeError,
    StimulusMeta,
    dataset_summary,
    to_reaction,
    validate_recording,
)


def make_meta(**overrides):
    base = dict(subject_id="S01", gender="female", product="Sneakers",
                brand="B1", ad_type=1, raw_label="B")
    base.update(overrides)
    return StimulusMeta(**base)


def make_recording(n=16, meta=None, **overrides):
    fields = dict(
        samples=np.arange(n, dtype=float),
        sample_rate=512.0,
        attention=np.full(4, 50),
        meditation=np.full(4, 50),
        timestamps=np.arange(n) / 512.0,
        meta=meta or make_meta(),
    )
    fields.update(overrides)
    return Recording(**fields)


class TestToReaction:
    @pytest.mark.parametrize("code,expected", [
        ("B", Reaction.POSITIVE),
        ("L", Reaction.POSITIVE),
        ("D", Reaction.NEGATIVE),
        ("N", Reaction.NEGATIVE),
    ])
    def test_mapping(self, code, expected):
        assert to_reaction(code) is expected

    def test_unknown_code_names_offender(self):
        with pytest.raises(FormatError, match="'X'"):
            to_reaction("X")

    def test_partitions_codes_two_and_two(self):
        reactions = [to_reaction(c) for c in "BLDN"]
        assert reactions.count(Reaction.POSITIVE) == 2
        assert reactions.count(Reaction.NEGATIVE) == 2

    @given(st.text(min_size=1, max_size=3))
    def test_total_on_code_set_only(self, code):
        if code in ("B", "L", "D", "N"):
            assert to_reaction(code) in (Reaction.POSITIVE, Reaction.NEGATIVE)
        else:
            with pytest.raises(FormatError):
                to_reaction(code)


class TestStimulusMeta:
    def test_valid(self):
        meta = make_meta()
        assert meta.reaction is Reaction.POSITIVE

    @pytest.mark.parametrize("field,value", [
        ("gender", "other"),
        ("product", "Watches"),
        ("ad_type", 5),
        ("raw_label", "Z"),
    ])
    def test_invalid_fields(self, field, value):
        with pytest.raises(FormatError):
            make_meta(**{field: value})


class TestRecording:
    def test_arrays_are_read_only(self):
        rec = make_recording()
        with pytest.raises(ValueError):
            rec.samples[0] = 5.0

    def test_attention_range_enforced(self):
        with pytest.raises(RangeError):
            make_recording(attention=np.array([50, 101]))

    def test_timestamps_must_increase(self):
        with pytest.raises(FormatError):
            make_recording(timestamps=np.zeros(16))

    def test_timestamp_length_must_match(self):
        with pytest.raises(ShapeError):
            make_recording(timestamps=np.arange(3) / 512.0)

    def test_equality_is_by_value(self):
        assert make_recording() == make_recording()
        assert make_recording() != make_recording(samples=np.ones(16),
                                                  timestamps=np.arange(16) / 512.0)

    def test_validate_rejects_short(self):
        rec = make_recording(n=100)
        with pytest.raises(ShapeError):
            validate_recording(rec)
        validate_recording(rec, min_samples=100)


def paper_shape_dataset(n_subjects=13):
    recordings = []
    products = ("Sneakers", "Headphones", "LaptopBags", "Sunglasses", "Smartphones")
    for s in range(n_subjects):
        gender = "male" if s < 5 else "female"
        i = 0
        for product in products:
            for brand in range(4):
                for ad_type in (1, 2, 3, 4):
                    label = "BLDN"[i % 4]
                    i += 1
                    meta = StimulusMeta(subject_id=f"S{s:02d}", gender=gender,
                                        product=product, brand=f"B{brand + 1}",
                                        ad_type=ad_type, raw_label=label)
                    recordings.append(make_recording(n=4, meta=meta))
    return Dataset(recordings=tuple(recordings))


class TestDatasetSummary:
    def test_paper_shape_counts(self):
        summary = dataset_summary(paper_shape_dataset())
        assert summary.total == 1040
        assert summary.n_original == 1040
        assert summary.n_augmented == 0
        assert all(v == 80 for v in summary.per_subject.values())
        assert summary.per_ad_type == {1: 260, 2: 260, 3: 260, 4: 260}
        assert summary.per_gender == {"female": 640, "male": 400}
        assert sum(summary.per_product.values()) == 1040

    def test_empty_dataset(self):
        summary = dataset_summary(Dataset(recordings=()))
        assert summary.total == 0
        assert summary.per_subject == {}
        assert summary.per_reaction == {}

    def test_augmented_counted_separately(self):
        rec = make_recording()
        aug = make_recording(provenance="augmented")
        summary = dataset_summary(Dataset(recordings=(rec, aug)))
        assert summary.total == 2
        assert summary.n_original == 1
        assert summary.n_augmented == 1
        assert summary.per_subject == {"S01": 1}

    @given(st.randoms(use_true_random=False))
    def test_permutation_invariant(self, rnd):
        ds = paper_shape_dataset(n_subjects=2)
        shuffled = list(ds.recordings)
        rnd.shuffle(shuffled)
        assert dataset_summary(Dataset(recordings=tuple(shuffled))) == dataset_summary(ds)
