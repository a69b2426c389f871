"""Gaussian-noise augmentation of raw recordings for subject-dependent training.

Noise is zero-mean so amplitudes are preserved; each copy's standard
deviation is a requested fraction of the original's. Copies are made
from the raw signal before preprocessing and inherit the original's
labels and metadata, flagged as augmented so no split can ever leak
them into a test partition.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np

from .core import AUGMENTED, DegenerateInputError, ParameterError, Recording

DEFAULT_NOISE_FRACTIONS = (0.05, 0.10, 0.15, 0.20, 0.25)


def augment(recordings: Sequence[Recording], copies: int,
            noise_fractions: Sequence[float] = DEFAULT_NOISE_FRACTIONS,
            seed: int = 0) -> list[Recording]:
    """Return every original followed by ``copies`` noisy versions of each.

    Copy j of original i adds zero-mean Gaussian noise with standard
    deviation noise_fractions[j] * std(original). Each copy is seeded
    from (seed, i, j), so results are independent of iteration order.
    """
    fractions = tuple(float(f) for f in noise_fractions)
    if copies != len(fractions):
        raise ParameterError(
            f"copies={copies} but {len(fractions)} noise fractions were given")
    if any(f <= 0 for f in fractions):
        raise ParameterError(f"noise fractions must be positive, got {fractions}")
    out: list[Recording] = list(recordings)
    for i, rec in enumerate(recordings):
        scale = float(np.std(rec.samples))
        if scale == 0.0:
            raise DegenerateInputError(
                f"recording {i} has zero variance; noise scale undefined")
        for j, fraction in enumerate(fractions):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i, j]))
            noise = rng.normal(0.0, fraction * scale, size=len(rec.samples))
            out.append(replace(rec, samples=rec.samples + noise, provenance=AUGMENTED))
    return out
