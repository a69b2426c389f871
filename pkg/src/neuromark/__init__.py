"""Single-electrode EEG consumer-reaction pipeline.

Preprocess 7-second recordings, extract the 10-element feature vector,
classify positive/negative reactions with four classical models and a
hybrid dense+convolutional network, and evaluate under the
subject-dependent and subject-independent protocols.
"""

from .core import (
    Dataset,
    Reaction,
    Recording,
    StimulusMeta,
    dataset_summary,
    to_reaction,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Reaction",
    "Recording",
    "StimulusMeta",
    "dataset_summary",
    "to_reaction",
    "__version__",
]
