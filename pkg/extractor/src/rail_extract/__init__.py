"""Embedding dumper for folder datasets.

Runs a vision-language encoder over an image-classification directory
tree and writes unit-norm image embeddings, labels, and class-text
embeddings in the RAILEMB1 container, the format the recursive learner
reads. Pure plumbing: no training, no augmentation, no dataset downloads.
"""

from .dataset import ScannedDataset, resolve_dataset, scan_dataset
from .emb import write_embeddings, write_text_table
from .encoders import FakeEncoder, load_encoder
from .errors import DatasetNotFound, EmptyClassList, ExtractError, ModelLoadError
from .extract import DEFAULT_PROMPT, ExtractionJob, ExtractionResult, extract

__version__ = "0.1.0"
