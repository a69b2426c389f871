"""Daubechies discrete wavelet transform built from first principles.

Analysis is correlation with the filter taps followed by dyadic
downsampling; synthesis is the adjoint (for orthogonal wavelets the
synthesis bank reuses the analysis taps). Two boundary modes are
supported:

* ``symmetric`` (default) — half-point mirror extension, kind to short
  EEG epochs; per-band coefficient counts are (n + L - 2)//2 + 1.
* ``periodic`` — periodization; counts halve exactly (rounded up) and,
  for even level lengths, the transform is orthogonal, so coefficient
  energy equals signal energy to machine precision.

Filter taps are embedded to full double precision and self-checked at
import time against the quadrature-mirror and sum invariants.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParameterError, ShapeError

_DB4_DEC_LO = (
    -0.010597401784997278,
    0.032883011666982945,
    0.030841381835986965,
    -0.18703481171888114,
    -0.02798376941698385,
    0.6308807679295904,
    0.7148465705525415,
    0.23037781330885523,
)

_DB7_DEC_LO = (
    0.0003537138000010399,
    -0.0018016407039998328,
    0.00042957797300470274,
    0.012550998556013784,
    -0.01657454163101562,
    -0.03802993693503463,
    0.0806126091510659,
    0.07130921926705004,
    -0.22403618499416572,
    -0.14390600392910627,
    0.4697822874053586,
    0.7291320908465551,
    0.39653931948230575,
    0.07785205408506236,
)

MODES = ("symmetric", "periodic")


@dataclass(frozen=True, eq=False)
class WaveletSpec:
    """Analysis/synthesis filter banks for one named wavelet."""

    name: str
    dec_lo: np.ndarray
    dec_hi: np.ndarray
    rec_lo: np.ndarray
    rec_hi: np.ndarray

    def __post_init__(self):
        for attr in ("dec_lo", "dec_hi", "rec_lo", "rec_hi"):
            arr = np.asarray(getattr(self, attr), dtype=np.float64).copy()
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)
        if abs(self.dec_lo.sum() - np.sqrt(2.0)) > 1e-12:
            raise ParameterError(f"{self.name}: lowpass taps must sum to sqrt(2)")
        if abs(self.dec_hi.sum()) > 1e-12:
            raise ParameterError(f"{self.name}: highpass taps must sum to 0")
        qmf = _qmf(self.dec_lo)
        if not np.allclose(self.dec_hi, qmf, atol=1e-12):
            raise ParameterError(f"{self.name}: quadrature-mirror relation violated")

    def __len__(self) -> int:
        return len(self.dec_lo)


def _qmf(lo: np.ndarray) -> np.ndarray:
    L = len(lo)
    signs = np.where(np.arange(L) % 2 == 0, 1.0, -1.0)
    return signs * lo[::-1]


def _make_spec(name: str, dec_lo) -> WaveletSpec:
    lo = np.asarray(dec_lo, dtype=np.float64)
    hi = _qmf(lo)
    # orthogonal bank: the adjoint synthesis reuses the analysis taps
    return WaveletSpec(name=name, dec_lo=lo, dec_hi=hi, rec_lo=lo.copy(), rec_hi=hi.copy())


DB4 = _make_spec("db4", _DB4_DEC_LO)
DB7 = _make_spec("db7", _DB7_DEC_LO)

_BY_NAME = {"db4": DB4, "db7": DB7}


def get_wavelet(name: str) -> WaveletSpec:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ParameterError(f"unknown wavelet {name!r}; available: {sorted(_BY_NAME)}") from None


@dataclass(frozen=True, eq=False)
class DwtCoeffs:
    """Multi-level analysis output. details[0] is D1 (finest band)."""

    details: tuple[np.ndarray, ...]
    approximation: np.ndarray
    levels: int
    original_length: int
    wavelet: str
    mode: str
    level_lengths: tuple[int, ...]

    def total_energy(self) -> float:
        e = float(np.sum(self.approximation ** 2))
        for d in self.details:
            e += float(np.sum(d * d))
        return e


def _analysis_length(n: int, filt_len: int, mode: str) -> int:
    if mode == "symmetric":
        return (n + filt_len - 2) // 2 + 1
    return (n + 1) // 2


def _sym_ext(x: np.ndarray, pad: int) -> np.ndarray:
    return np.concatenate([x[:pad][::-1], x, x[-pad:][::-1]])


def _per_ext(x: np.ndarray, pad: int) -> np.ndarray:
    reps = 1 + (pad + len(x) - 1) // len(x)
    return np.tile(x, reps)[: len(x) + pad]


def _analyze_once(x: np.ndarray, spec: WaveletSpec, mode: str):
    L = len(spec)
    if mode == "symmetric":
        ext = _sym_ext(x, L - 1)
    else:
        if len(x) % 2:
            x = np.concatenate([x, x[-1:]])  # pad odd lengths to even
        ext = _per_ext(x, L - 1)
    a = np.correlate(ext, spec.dec_lo, mode="valid")[0::2]
    d = np.correlate(ext, spec.dec_hi, mode="valid")[0::2]
    return a, d


def _synthesize_once(a, d, spec: WaveletSpec, mode: str, out_len: int) -> np.ndarray:
    L = len(spec)
    if mode == "symmetric":
        n_ext = out_len + 2 * (L - 1)
        up_a = np.zeros(n_ext)
        up_d = np.zeros(n_ext)
        up_a[0::2][: len(a)] = a
        up_d[0::2][: len(d)] = d
        y = np.convolve(up_a, spec.rec_lo) + np.convolve(up_d, spec.rec_hi)
        return y[L - 1 : L - 1 + out_len]
    n = 2 * len(a)
    up_a = np.zeros(n)
    up_d = np.zeros(n)
    up_a[0::2] = a
    up_d[0::2] = d
    y = np.convolve(up_a, spec.rec_lo) + np.convolve(up_d, spec.rec_hi)
    out = y[:n].copy()
    tail = y[n:]
    np.add.at(out, np.arange(n, n + len(tail)) % n, tail)
    return out[:out_len]


def max_levels(n: int, spec: WaveletSpec, mode: str = "symmetric") -> int:
    """Deepest decomposition that still shrinks the sequence.

    Symmetric-mode lengths converge to the filter length instead of
    halving, so the cascade is cut off once a level stops compressing.
    """
    levels = 0
    while n >= (len(spec) if mode == "symmetric" else 2):
        shorter = _analysis_length(n, len(spec), mode)
        if shorter >= n:
            break
        n = shorter
        levels += 1
    return levels


def decompose(signal, spec: WaveletSpec, levels: int, mode: str = "symmetric") -> DwtCoeffs:
    """Run the Mallat cascade for the given number of levels.

    Raises ShapeError if the signal is too short to support the cascade.
    """
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    if levels < 1:
        raise ParameterError(f"levels must be >= 1, got {levels}")
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected 1-d signal, got shape {x.shape}")
    if len(x) < len(spec):
        raise ShapeError(
            f"signal length {len(x)} is shorter than the {spec.name} filter ({len(spec)})")
    details = []
    lengths = []
    a = x
    for lvl in range(levels):
        if mode == "symmetric" and len(a) < len(spec):
            raise ShapeError(
                f"signal of length {len(x)} too short for {levels} {spec.name} levels "
                f"(level {lvl + 1} input has {len(a)} samples, filter needs {len(spec)})")
        if len(a) < 2:
            raise ShapeError(f"signal of length {len(x)} too short for {levels} levels")
        lengths.append(len(a))
        a, d = _analyze_once(a, spec, mode)
        details.append(d)
    return DwtCoeffs(
        details=tuple(details),
        approximation=a,
        levels=levels,
        original_length=len(x),
        wavelet=spec.name,
        mode=mode,
        level_lengths=tuple(lengths),
    )


def reconstruct(coeffs: DwtCoeffs, spec: WaveletSpec) -> np.ndarray:
    """Invert decompose; output length equals the original signal length."""
    if coeffs.wavelet != spec.name:
        raise ShapeError(
            f"coefficients were produced with {coeffs.wavelet!r}, not {spec.name!r}")
    if len(coeffs.details) != coeffs.levels or len(coeffs.level_lengths) != coeffs.levels:
        raise ShapeError("level count inconsistent with stored coefficient bands")
    for lvl, (d, n_in) in enumerate(zip(coeffs.details, coeffs.level_lengths)):
        expect = _analysis_length(n_in, len(spec), coeffs.mode)
        if len(d) != expect:
            raise ShapeError(
                f"detail band {lvl + 1} has {len(d)} coefficients, expected {expect} "
                f"for {spec.name}/{coeffs.mode}")
    a = np.asarray(coeffs.approximation, dtype=np.float64)
    for d, n_in in zip(reversed(coeffs.details), reversed(coeffs.level_lengths)):
        a = _synthesize_once(a, d, spec, coeffs.mode, n_in)
    return a


# Table ordering of the 4-level bands: D1..D4 then A4, i.e. the
# gamma/beta/alpha/theta/delta naming used by the feature vector.
BAND_ORDER = ("D1", "D2", "D3", "D4", "A4")


def band_energies(coeffs: DwtCoeffs) -> np.ndarray:
    """Sum of squared coefficients per band, ordered D1, D2, D3, D4, A4."""
    if coeffs.levels != 4:
        raise ShapeError(f"band energies need a 4-level decomposition, got {coeffs.levels}")
    out = [float(np.sum(d * d)) for d in coeffs.details]
    out.append(float(np.sum(coeffs.approximation ** 2)))
    return np.array(out)
