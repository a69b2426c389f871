"""Deterministic synthetic EEG sessions with plantable class structure.

Each recording is a sum of band-limited Gaussian noise components (one
per named frequency band) plus a broadband floor. Class structure is
planted as an alpha/theta power swap plus an attention-level shift, both
scaled by a separability knob: at 0 the two classes are statistically
identical, at 1 they are comfortably recoverable from the feature
vector. This is a test harness, not an EEG simulator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (
    ADS_PER_SUBJECT,
    AD_TYPES,
    BRANDS_PER_PRODUCT,
    Dataset,
    ParameterError,
    PRODUCTS,
    Recording,
    SAMPLE_RATE_HZ,
    SAMPLES_PER_AD,
    StimulusMeta,
)
from .features import welch_psd
from .preprocess import BANDPASS_KIND, FilterSpec, bandpass

# Band edges in Hz, chosen to sit on the dyadic splits a 512 Hz
# 4-level transform produces while keeping the conventional names.
BAND_EDGES = {
    "delta": (0.5, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 16.0),
    "beta": (16.0, 32.0),
    "gamma": (32.0, 50.0),
}

_CALIBRATION_LENGTH = 32768
_CALIBRATION_SEED = 202406
_EDGE_PAD = 1024  # samples trimmed from each end so band power is stationary
_SIDE_CHANNEL_SAMPLES = 7  # attention/meditation values per 7 s ad (~1 Hz)


class BandPowers(NamedTuple):
    delta: float
    theta: float
    alpha: float
    beta: float
    gamma: float


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int
    seed: int
    positive: BandPowers
    negative: BandPowers
    noise_floor: float
    attention_positive: float
    attention_negative: float
    separability: float

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ParameterError(f"n_subjects must be >= 1, got {self.n_subjects}")
        for profile in (self.positive, self.negative):
            if any(p < 0 for p in profile):
                raise ParameterError("band powers must be non-negative")
        if self.noise_floor < 0:
            raise ParameterError("noise_floor must be non-negative")
        if not 0.0 <= self.separability <= 1.0:
            raise ParameterError(f"separability must lie in [0, 1], got {self.separability}")
        if self.separability == 0.0 and self.positive != self.negative:
            raise ParameterError("separability 0 requires identical class profiles")


_BASE = BandPowers(delta=4.0, theta=3.0, alpha=2.0, beta=1.5, gamma=1.0)


def default_spec(n_subjects: int = 13, seed: int = 0, separability: float = 1.0) -> SynthSpec:
    """Build a spec whose classes differ by an alpha/theta power swap."""
    s = float(separability)
    positive = _BASE._replace(alpha=_BASE.alpha * (1.0 + s), theta=_BASE.theta / (1.0 + s))
    negative = _BASE._replace(alpha=_BASE.alpha / (1.0 + s), theta=_BASE.theta * (1.0 + s))
    if s == 0.0:
        positive = negative = _BASE
    return SynthSpec(
        n_subjects=n_subjects,
        seed=seed,
        positive=positive,
        negative=negative,
        noise_floor=0.5,
        attention_positive=55.0 + 15.0 * s,
        attention_negative=55.0 - 15.0 * s,
        separability=s,
    )


def _band_filter(band: str, sample_rate: float) -> FilterSpec:
    low, high = BAND_EDGES[band]
    return FilterSpec(BANDPASS_KIND, order=4, cutoffs=(low, high), sample_rate=sample_rate)


def calibrate_band_gains(sample_rate: float = SAMPLE_RATE_HZ) -> dict[str, float]:
    """Measure the variance each band filter leaves in unit white noise.

    The returned per-band variances convert a requested band power into
    the white-noise scale that produces it.
    """
    rng = np.random.default_rng(np.random.SeedSequence(_CALIBRATION_SEED))
    noise = rng.standard_normal(_CALIBRATION_LENGTH)
    gains = {}
    for band in BAND_EDGES:
        filtered = bandpass(noise, _band_filter(band, sample_rate))
        gains[band] = float(np.var(filtered[_EDGE_PAD:-_EDGE_PAD]))
    return gains


def measured_band_power(component: np.ndarray, band: str,
                        sample_rate: float = SAMPLE_RATE_HZ,
                        nperseg: int = 2048) -> float:
    """Welch power of a component integrated over its own band.

    Long segments keep the resolution fine enough that narrow bands are
    not smeared into neighbouring bins; the mask is widened by one bin
    per side to absorb the remaining leakage.
    """
    freqs, psd = welch_psd(component, sample_rate, nperseg=nperseg)
    low, high = BAND_EDGES[band]
    df = freqs[1] - freqs[0]
    mask = (freqs >= low - df) & (freqs <= high + df)
    return float(np.sum(psd[mask]) * df)


def _check_calibration(gains: dict[str, float], sample_rate: float):
    rng = np.random.default_rng(np.random.SeedSequence(_CALIBRATION_SEED + 1))
    noise = rng.standard_normal(_CALIBRATION_LENGTH)
    for band, var in gains.items():
        target = 1.0
        component = bandpass(noise, _band_filter(band, sample_rate)) * np.sqrt(target / var)
        got = measured_band_power(component[_EDGE_PAD:-_EDGE_PAD], band, sample_rate)
        if abs(got - target) > 0.2 * target:
            raise ParameterError(
                f"band {band} calibration off: requested power {target}, measured {got:.3f}")


def _subject_genders(n_subjects: int) -> list[str]:
    # keep the 5:13 male fraction of the collected cohort at any scale
    n_male = round(n_subjects * 5 / 13)
    return ["male"] * n_male + ["female"] * (n_subjects - n_male)


def _ad_slots() -> list[tuple[str, str, int]]:
    slots = []
    for product in PRODUCTS:
        for b in range(1, BRANDS_PER_PRODUCT + 1):
            for ad_type in AD_TYPES:
                slots.append((product, f"B{b}", ad_type))
    return slots


def _subject_labels(seed: int, subject_idx: int) -> list[str]:
    """Exactly half positive per subject, shuffled; codes drawn within class."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, subject_idx, 0xA]))
    n_pos = ADS_PER_SUBJECT // 2
    polarity = np.array([True] * n_pos + [False] * (ADS_PER_SUBJECT - n_pos))
    rng.shuffle(polarity)
    codes = []
    for positive in polarity:
        pick = rng.integers(0, 2)
        codes.append(("B", "L")[pick] if positive else ("D", "N")[pick])
    return codes


def generate(spec: SynthSpec, check_calibration: bool = True) -> Dataset:
    """Produce n_subjects x 80 seven-second recordings at 512 Hz.

    Identical specs yield byte-identical datasets. Every recording is
    independently seeded from (seed, subject, ad slot), so generation
    order never matters.
    """
    sample_rate = SAMPLE_RATE_HZ
    gains = calibrate_band_gains(sample_rate)
    if check_calibration:
        _check_calibration(gains, sample_rate)
    slots = _ad_slots()
    genders = _subject_genders(spec.n_subjects)
    band_filters = {band: _band_filter(band, sample_rate) for band in BAND_EDGES}
    timestamps = np.arange(SAMPLES_PER_AD) / sample_rate
    padded = SAMPLES_PER_AD + 2 * _EDGE_PAD

    recordings = []
    for subj in range(spec.n_subjects):
        subject_id = f"S{subj + 1:02d}"
        codes = _subject_labels(spec.seed, subj)
        for ad_idx, (product, brand, ad_type) in enumerate(slots):
            code = codes[ad_idx]
            positive = code in ("B", "L")
            profile = spec.positive if positive else spec.negative
            att_mean = spec.attention_positive if positive else spec.attention_negative
            rng = np.random.default_rng(np.random.SeedSequence([spec.seed, subj, ad_idx]))
            x = np.zeros(SAMPLES_PER_AD)
            for band, power in zip(BAND_EDGES, profile):
                if power == 0.0:
                    continue
                noise = rng.standard_normal(padded)
                component = bandpass(noise, band_filters[band])[_EDGE_PAD:-_EDGE_PAD]
                x += component * np.sqrt(power / gains[band])
            if spec.noise_floor > 0.0:
                x += np.sqrt(spec.noise_floor) * rng.standard_normal(SAMPLES_PER_AD)
            attention = np.clip(np.round(rng.normal(att_mean, 8.0, size=_SIDE_CHANNEL_SAMPLES)),
                                0, 100).astype(np.int64)
            meditation = np.clip(np.round(rng.normal(50.0, 10.0, size=_SIDE_CHANNEL_SAMPLES)),
                                 0, 100).astype(np.int64)
            meta = StimulusMeta(subject_id=subject_id, gender=genders[subj],
                                product=product, brand=brand, ad_type=ad_type,
                                raw_label=code)
            recordings.append(Recording(
                samples=x,
                sample_rate=sample_rate,
                attention=attention,
                meditation=meditation,
                timestamps=timestamps,
                meta=meta,
            ))
    info = {
        "generator": "synth",
        "n_subjects": str(spec.n_subjects),
        "seed": str(spec.seed),
        "separability": repr(spec.separability),
    }
    return Dataset(recordings=tuple(recordings), info=info)
