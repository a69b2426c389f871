import numpy as np
import pytest

from neuromark import synth
from neuromark.core import Recording, StimulusMeta


@pytest.fixture
def synth_recording():
    """Factory for 7-second 512 Hz recordings with placeholder metadata."""

    def make(samples=None, zero=False, seed=0, attention_mean=60):
        n = 3584
        if samples is None:
            rng = np.random.default_rng(seed)
            samples = np.zeros(n) if zero else rng.standard_normal(n)
        meta = StimulusMeta(subject_id="S01", gender="female", product="Sneakers",
                            brand="B1", ad_type=1, raw_label="L")
        rng = np.random.default_rng(seed + 1)
        attention = np.clip(np.round(rng.normal(attention_mean, 5, 7)), 0, 100)
        return Recording(
            samples=np.asarray(samples, dtype=float),
            sample_rate=512.0,
            attention=attention.astype(int),
            meditation=np.full(7, 50),
            timestamps=np.arange(len(samples)) / 512.0,
            meta=meta,
        )

    return make


@pytest.fixture(scope="session")
def separable_dataset():
    """Two subjects with fully separable planted structure."""
    return synth.generate(synth.default_spec(n_subjects=2, seed=101, separability=1.0))


@pytest.fixture(scope="session")
def chance_dataset():
    """Two subjects whose classes share one distribution."""
    return synth.generate(synth.default_spec(n_subjects=2, seed=73, separability=0.0))
