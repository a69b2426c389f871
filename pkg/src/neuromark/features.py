"""The 10-element feature vector and the MinMax scaling applied before training.

Per recording: five 4-level db4 band energies (D1..D4, A4), total Welch
power, the two Hjorth descriptors, the DFA scaling exponent and the mean
attention value.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import wavelet
from .core import (
    DegenerateInputError,
    ParameterError,
    Recording,
    ShapeError,
)

FEATURE_NAMES = (
    "d1_gamma_energy",
    "d2_beta_energy",
    "d3_alpha_energy",
    "d4_theta_energy",
    "a4_delta_energy",
    "psd_energy",
    "hjorth_mobility",
    "hjorth_complexity",
    "dfa_alpha",
    "attention_mean",
)


@dataclass(frozen=True)
class FeatureVector:
    d1_gamma_energy: float
    d2_beta_energy: float
    d3_alpha_energy: float
    d4_theta_energy: float
    a4_delta_energy: float
    psd_energy: float
    hjorth_mobility: float
    hjorth_complexity: float
    dfa_alpha: float
    attention_mean: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES])


def welch_psd(signal, sample_rate: float, nperseg: int = 256,
              overlap: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Averaged-periodogram one-sided PSD estimate.

    Hann-windowed segments of ``nperseg`` samples with the given overlap
    fraction. The density normalization makes sum(psd) * df track the
    mean-square power of the signal.

    Returns (frequencies, psd).
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected 1-d signal, got shape {x.shape}")
    if len(x) < nperseg:
        raise ShapeError(f"signal length {len(x)} shorter than segment length {nperseg}")
    if not (0.0 <= overlap < 1.0):
        raise ParameterError(f"overlap must lie in [0, 1), got {overlap}")
    step = max(int(round(nperseg * (1.0 - overlap))), 1)
    n = np.arange(nperseg)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / nperseg)
    norm = sample_rate * float(np.sum(window ** 2))
    n_segments = 1 + (len(x) - nperseg) // step
    acc = np.zeros(nperseg // 2 + 1)
    for k in range(n_segments):
        seg = x[k * step : k * step + nperseg]
        spectrum = np.fft.rfft(seg * window)
        acc += (spectrum.real ** 2 + spectrum.imag ** 2) / norm
    psd = acc / n_segments
    # one-sided: double everything except DC and (for even nperseg) Nyquist
    if nperseg % 2 == 0:
        psd[1:-1] *= 2.0
    else:
        psd[1:] *= 2.0
    freqs = np.fft.rfftfreq(nperseg, d=1.0 / sample_rate)
    return freqs, psd


def psd_total_power(signal, sample_rate: float, nperseg: int = 256) -> float:
    """Integrate the Welch PSD: sum(psd) * df."""
    freqs, psd = welch_psd(signal, sample_rate, nperseg=nperseg)
    df = freqs[1] - freqs[0]
    return float(np.sum(psd) * df)


def hjorth(signal) -> tuple[float, float]:
    """Mobility and complexity of a signal.

    The derivative is the first difference. Mobility is
    sqrt(var(y') / var(y)); complexity is mobility(y') / mobility(y).
    Both are invariant to amplitude scaling. Constant inputs have no
    defined value and raise DegenerateInputError.
    """
    x = np.asarray(signal, dtype=np.float64)
    if len(x) < 3:
        raise ShapeError(f"need at least 3 samples for Hjorth parameters, got {len(x)}")
    var_x = float(np.var(x))
    d1 = np.diff(x)
    var_d1 = float(np.var(d1))
    if var_x <= 0.0 or var_d1 <= 0.0:
        raise DegenerateInputError("Hjorth parameters are undefined for constant signals")
    mobility = np.sqrt(var_d1 / var_x)
    d2 = np.diff(d1)
    var_d2 = float(np.var(d2))
    mobility_d1 = np.sqrt(var_d2 / var_d1)
    return float(mobility), float(mobility_d1 / mobility)


def default_box_sizes(n: int, n_sizes: int = 16) -> np.ndarray:
    """Log-spaced integer box sizes in [4, n // 4]."""
    hi = n // 4
    if hi < 4:
        raise ParameterError(f"signal of length {n} too short for DFA box sizes")
    sizes = np.unique(np.round(
        np.logspace(np.log10(4), np.log10(hi), n_sizes)).astype(int))
    return sizes[(sizes >= 4) & (sizes <= hi)]


def dfa(signal, box_sizes=None) -> float:
    """Detrended fluctuation analysis scaling exponent.

    The mean-removed signal is integrated into a profile; each box of
    size n is linearly detrended and the RMS residual F(n) collected;
    the exponent is the least-squares slope of log F against log n.
    White noise sits near 0.5, its running sum near 1.5.
    """
    x = np.asarray(signal, dtype=np.float64)
    if box_sizes is None:
        sizes = default_box_sizes(len(x))
    else:
        sizes = np.unique(np.asarray(box_sizes, dtype=int))
        sizes = sizes[(sizes >= 4) & (sizes <= len(x) // 4)]
    if len(sizes) < 4:
        raise ParameterError(
            f"need at least 4 valid box sizes in [4, {len(x) // 4}], got {len(sizes)}")
    profile = np.cumsum(x - x.mean())
    fluct = np.empty(len(sizes))
    for i, n in enumerate(sizes):
        m = len(profile) // n
        boxes = profile[: m * n].reshape(m, n)
        t = np.arange(n, dtype=np.float64)
        tc = t - t.mean()
        slope = (boxes @ tc) / float(np.sum(tc * tc))
        resid = boxes - boxes.mean(axis=1, keepdims=True) - np.outer(slope, tc)
        fluct[i] = np.sqrt(np.mean(resid ** 2))
    if np.any(fluct <= 0.0):
        raise DegenerateInputError(
            "detrending removed all fluctuation; DFA exponent undefined")
    coeffs = np.polyfit(np.log(sizes), np.log(fluct), 1)
    return float(coeffs[0])


@dataclass(frozen=True, eq=False)
class ScalerParams:
    """Per-feature minimum and maximum learned from a training set."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.minimum, dtype=np.float64).copy()
        hi = np.asarray(self.maximum, dtype=np.float64).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ShapeError("scaler minimum/maximum must be matching 1-d arrays")
        if np.any(hi < lo):
            raise ParameterError("scaler maximum must be >= minimum per feature")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)


def fit_scaler(vectors) -> ScalerParams:
    """Learn per-feature min/max; needs at least two vectors."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ShapeError(f"scaler needs a 2-d matrix with >= 2 rows, got shape {X.shape}")
    return ScalerParams(minimum=X.min(axis=0), maximum=X.max(axis=0))


def apply_scaler(params: ScalerParams, vectors) -> np.ndarray:
    """Map each feature through (x - min) / (max - min); constants go to 0.

    Values outside the training range are left outside [0, 1] unclamped.
    """
    X = np.asarray(vectors, dtype=np.float64)
    span = params.maximum - params.minimum
    safe = np.where(span > 0.0, span, 1.0)
    scaled = (X - params.minimum) / safe
    return np.where(span > 0.0, scaled, 0.0)


def extract(rec: Recording) -> FeatureVector:
    """Compute the full feature vector of a (preprocessed) recording."""
    x = np.asarray(rec.samples, dtype=np.float64)
    coeffs = wavelet.decompose(x, wavelet.DB4, 4, mode="symmetric")
    energies = wavelet.band_energies(coeffs)
    power = psd_total_power(x, rec.sample_rate)
    mobility, complexity = hjorth(x)
    alpha = dfa(x)
    if rec.attention.size == 0:
        raise DegenerateInputError("recording has an empty attention stream")
    return FeatureVector(
        d1_gamma_energy=float(energies[0]),
        d2_beta_energy=float(energies[1]),
        d3_alpha_energy=float(energies[2]),
        d4_theta_energy=float(energies[3]),
        a4_delta_energy=float(energies[4]),
        psd_energy=power,
        hjorth_mobility=mobility,
        hjorth_complexity=complexity,
        dfa_alpha=alpha,
        attention_mean=float(np.mean(rec.attention)),
    )


def feature_matrix_csv(vectors, labels) -> str:
    """Render feature rows as CSV with a header; the label is the last column."""
    rows = [",".join(FEATURE_NAMES) + ",label"]
    for vec, label in zip(vectors, labels, strict=True):
        arr = vec.as_array() if isinstance(vec, FeatureVector) else np.asarray(vec)
        value = label.value if hasattr(label, "value") else str(label)
        rows.append(",".join(repr(float(v)) for v in arr) + f",{value}")
    return "\n".join(rows) + "\n"
