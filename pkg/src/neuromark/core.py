"""Shared domain types for the consumer-reaction EEG pipeline.

Everything downstream (ingest, preprocessing, features, classifiers,
evaluation) works on the types defined here. All containers are immutable
after construction; numpy arrays are copied in and marked read-only, so
recordings can be shared freely across workers.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

SAMPLE_RATE_HZ = 512.0
AD_SECONDS = 7
SAMPLES_PER_AD = int(SAMPLE_RATE_HZ) * AD_SECONDS  # 3584
ADS_PER_SUBJECT = 80

PRODUCTS = ("Sneakers", "Headphones", "LaptopBags", "Sunglasses", "Smartphones")
BRANDS_PER_PRODUCT = 4
AD_TYPES = (1, 2, 3, 4)
RAW_LABELS = ("B", "L", "D", "N")
GENDERS = ("male", "female")

ORIGINAL = "original"
AUGMENTED = "augmented"


class NeuromarkError(Exception):
    """Base class for all pipeline errors."""


class FormatError(NeuromarkError):
    """Malformed input: bad header, unknown code, unparseable cell."""


class RangeError(NeuromarkError):
    """A value fell outside its documented range."""


class ShapeError(NeuromarkError):
    """Wrong length/count/dimensionality."""


class ParameterError(NeuromarkError):
    """Invalid configuration value."""


class DegenerateInputError(NeuromarkError):
    """Input on which the operation is mathematically undefined."""


class DegenerateTrainingError(NeuromarkError):
    """Training data cannot support the requested model (e.g. one class)."""


class CorruptBundleError(NeuromarkError):
    """Bundle file failed magic/length validation."""


class DivergenceError(NeuromarkError):
    """Optimization produced a non-finite value."""


class StratificationError(NeuromarkError):
    """Not enough members of some class to stratify folds."""


class Reaction(enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"


_REACTION_OF_CODE = {
    "B": Reaction.POSITIVE,
    "L": Reaction.POSITIVE,
    "D": Reaction.NEGATIVE,
    "N": Reaction.NEGATIVE,
}


def to_reaction(raw_label: str) -> Reaction:
    """Collapse a Buy/Like/Dislike/Neutral code to the binary reaction.

    B and L map to POSITIVE, D and N to NEGATIVE. Anything else raises
    FormatError naming the offending code.
    """
    try:
        return _REACTION_OF_CODE[raw_label]
    except KeyError:
        raise FormatError(f"unknown label code {raw_label!r}; expected one of {RAW_LABELS}") from None


@dataclass(frozen=True)
class StimulusMeta:
    """Identity of one ad presentation plus its ground-truth choice."""

    subject_id: str
    gender: str
    product: str
    brand: str
    ad_type: int
    raw_label: str

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise FormatError(f"gender must be one of {GENDERS}, got {self.gender!r}")
        if self.product not in PRODUCTS:
            raise FormatError(f"product must be one of {PRODUCTS}, got {self.product!r}")
        if self.ad_type not in AD_TYPES:
            raise FormatError(f"ad_type must be in {AD_TYPES}, got {self.ad_type!r}")
        if self.raw_label not in RAW_LABELS:
            raise FormatError(f"raw_label must be one of {RAW_LABELS}, got {self.raw_label!r}")

    @property
    def reaction(self) -> Reaction:
        return to_reaction(self.raw_label)


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != 1:
        raise ShapeError(f"expected a 1-d sequence, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Recording:
    """One single-electrode trace with its slow side channels and metadata.

    samples/timestamps are aligned float64 arrays; attention and meditation
    are integer streams in [0, 100] that may run at any rate (only their
    mean is consumed downstream).
    """

    samples: np.ndarray
    sample_rate: float
    attention: np.ndarray
    meditation: np.ndarray
    timestamps: np.ndarray
    meta: StimulusMeta
    provenance: str = ORIGINAL

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_array(self.samples, np.float64))
        object.__setattr__(self, "attention", _frozen_array(self.attention, np.int64))
        object.__setattr__(self, "meditation", _frozen_array(self.meditation, np.int64))
        object.__setattr__(self, "timestamps", _frozen_array(self.timestamps, np.float64))
        if self.sample_rate <= 0:
            raise RangeError(f"sample_rate must be positive, got {self.sample_rate}")
        if len(self.timestamps) != len(self.samples):
            raise ShapeError(
                f"timestamps length {len(self.timestamps)} != samples length {len(self.samples)}")
        if len(self.timestamps) > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise FormatError("timestamps must be strictly increasing")
        for name in ("attention", "meditation"):
            stream = getattr(self, name)
            if stream.size and (stream.min() < 0 or stream.max() > 100):
                raise RangeError(f"{name} values must lie in [0, 100]")
        if self.provenance not in (ORIGINAL, AUGMENTED):
            raise FormatError(f"provenance must be original or augmented, got {self.provenance!r}")

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.meta == other.meta
            and self.provenance == other.provenance
            and np.array_equal(self.samples, other.samples)
            and np.array_equal(self.attention, other.attention)
            and np.array_equal(self.meditation, other.meditation)
            and np.array_equal(self.timestamps, other.timestamps)
        )

    def __len__(self) -> int:
        return len(self.samples)


def validate_recording(rec: Recording, min_samples: int = SAMPLES_PER_AD) -> None:
    """Reject recordings too short for feature extraction.

    Parsing accepts any length; this is the single place where the
    minimum-length policy is enforced before analysis.
    """
    if len(rec.samples) < min_samples:
        raise ShapeError(
            f"recording has {len(rec.samples)} samples, need at least {min_samples}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of recordings plus free-form bundle metadata."""

    recordings: tuple[Recording, ...]
    info: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "recordings", tuple(self.recordings))
        object.__setattr__(self, "info", dict(self.info))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.recordings == other.recordings and self.info == other.info

    def __len__(self) -> int:
        return len(self.recordings)

    @property
    def provenance(self) -> tuple[str, ...]:
        return tuple(r.provenance for r in self.recordings)

    def originals(self) -> tuple[int, ...]:
        """Indices of non-augmented recordings, in dataset order."""
        return tuple(i for i, r in enumerate(self.recordings) if r.provenance == ORIGINAL)


@dataclass(frozen=True)
class DatasetSummary:
    total: int
    n_original: int
    n_augmented: int
    per_subject: dict[str, int]
    per_gender: dict[str, int]
    per_product: dict[str, int]
    per_ad_type: dict[int, int]
    per_raw_label: dict[str, int]
    per_reaction: dict[str, int]


def dataset_summary(ds: Dataset) -> DatasetSummary:
    """Count originals per subject/gender/product/ad type/label.

    Augmented entries are tallied separately so the categorical counts
    always describe the collected data; originals + augmented = total.
    """
    per_subject: dict[str, int] = {}
    per_gender: dict[str, int] = {}
    per_product: dict[str, int] = {}
    per_ad_type: dict[int, int] = {}
    per_raw_label: dict[str, int] = {}
    per_reaction: dict[str, int] = {}
    n_augmented = 0
    for rec in ds.recordings:
        if rec.provenance == AUGMENTED:
            n_augmented += 1
            continue
        m = rec.meta
        per_subject[m.subject_id] = per_subject.get(m.subject_id, 0) + 1
        per_gender[m.gender] = per_gender.get(m.gender, 0) + 1
        per_product[m.product] = per_product.get(m.product, 0) + 1
        per_ad_type[m.ad_type] = per_ad_type.get(m.ad_type, 0) + 1
        per_raw_label[m.raw_label] = per_raw_label.get(m.raw_label, 0) + 1
        reaction = m.reaction.value
        per_reaction[reaction] = per_reaction.get(reaction, 0) + 1
    return DatasetSummary(
        total=len(ds.recordings),
        n_original=len(ds.recordings) - n_augmented,
        n_augmented=n_augmented,
        per_subject=dict(sorted(per_subject.items())),
        per_gender=dict(sorted(per_gender.items())),
        per_product=dict(sorted(per_product.items())),
        per_ad_type=dict(sorted(per_ad_type.items())),
        per_raw_label=dict(sorted(per_raw_label.items())),
        per_reaction=dict(sorted(per_reaction.items())),
    )


def format_summary(summary: DatasetSummary) -> str:
    lines = [
        f"recordings: {summary.total} ({summary.n_original} original, "
        f"{summary.n_augmented} augmented)",
        f"subjects: {len(summary.per_subject)}",
    ]
    for title, counts in (
        ("per gender", summary.per_gender),
        ("per product", summary.per_product),
        ("per ad type", summary.per_ad_type),
        ("per raw label", summary.per_raw_label),
        ("per reaction", summary.per_reaction),
    ):
        body = ", ".join(f"{k}={v}" for k, v in counts.items())
        lines.append(f"{title}: {body}")
    return "\n".join(lines)
