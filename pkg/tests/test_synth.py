import numpy as np
import pytest

from neuromark.core import ParameterError, Reaction
from neuromark.ingest import bundle_bytes
from neuromark.synth import (
    BAND_EDGES,
    _band_filter,
    calibrate_band_gains,
    default_spec,
    generate,
    measured_band_power,
)
from neuromark.preprocess import bandpass


class TestSpec:
    def test_zero_separability_shares_profile(self):
        spec = default_spec(n_subjects=1, seed=0, separability=0.0)
        assert spec.positive == spec.negative
        assert spec.attention_positive == spec.attention_negative

    def test_nonzero_separability_distinct(self):
        spec = default_spec(n_subjects=1, seed=0, separability=1.0)
        assert spec.positive.alpha > spec.negative.alpha
        assert spec.positive.theta < spec.negative.theta

    def test_separability_bounds(self):
        with pytest.raises(ParameterError):
            default_spec(separability=1.5)


class TestGenerate:
    def test_shape(self, separable_dataset):
        ds = separable_dataset
        assert len(ds) == 2 * 80
        for rec in ds.recordings:
            assert len(rec.samples) == 3584
            assert rec.sample_rate == 512.0
            assert rec.provenance == "original"

    def test_deterministic_bytes(self):
        spec = default_spec(n_subjects=1, seed=42, separability=0.3)
        assert bundle_bytes(generate(spec)) == bundle_bytes(generate(spec))

    def test_labels_balanced_per_subject(self, separable_dataset):
        by_subject = {}
        for rec in separable_dataset.recordings:
            by_subject.setdefault(rec.meta.subject_id, []).append(rec.meta.reaction)
        for reactions in by_subject.values():
            positives = sum(r is Reaction.POSITIVE for r in reactions)
            assert abs(positives - 40) <= 8  # within 10% of half

    def test_paper_gender_ratio_pattern(self):
        ds = generate(default_spec(n_subjects=2, seed=1, separability=0.0),
                      check_calibration=False)
        genders = {r.meta.subject_id: r.meta.gender for r in ds.recordings}
        assert sorted(genders.values()) == ["female", "male"]

    def test_info_carries_parameters(self, separable_dataset):
        assert separable_dataset.info["separability"] == "1.0"
        assert separable_dataset.info["n_subjects"] == "2"

    def test_attention_separation(self, separable_dataset):
        pos, neg = [], []
        for rec in separable_dataset.recordings:
            (pos if rec.meta.reaction is Reaction.POSITIVE else neg).append(
                np.mean(rec.attention))
        assert np.mean(pos) - np.mean(neg) > 20


class TestBandCalibration:
    def test_component_power_within_twenty_percent(self):
        # long calibration draw per band: filtered-noise Welch power must
        # track the requested band power
        gains = calibrate_band_gains()
        rng = np.random.default_rng(77)
        noise = rng.standard_normal(1 << 15)
        for band, variance in gains.items():
            target = 2.0
            component = bandpass(noise, _band_filter(band, 512.0))
            component = component[1024:-1024] * np.sqrt(target / variance)
            got = measured_band_power(component, band)
            assert got == pytest.approx(target, rel=0.2), band

    def test_band_edges_cover_pipeline_band(self):
        lows = [lo for lo, _ in BAND_EDGES.values()]
        highs = [hi for _, hi in BAND_EDGES.values()]
        assert min(lows) == 0.5
        assert max(highs) == 50.0
