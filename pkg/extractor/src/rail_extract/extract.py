"""Run an encoder over a folder dataset and dump embedding files.

The output of one job is one embedding file per split plus one text-table
file, all in the RAILEMB1 container, named ``<dataset>.<split>.emb`` and
``<dataset>.text.emb`` under the job's output directory. The extractor
does no learning and keeps no state; it exists so the learner never has
to touch images or model weights.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import resolve_dataset, scan_dataset
from .emb import write_embeddings, write_text_table
from .encoders import load_encoder

DEFAULT_PROMPT = "A photo of a {}."


@dataclass
class ExtractionJob:
    """Everything one extraction run depends on.

    ``max_per_class`` caps how many images per class are embedded from
    each split (first files in sorted order), for few-shot dumps; None
    embeds everything.
    """

    dataset: str
    model: str
    out_dir: str
    prompt_template: str = DEFAULT_PROMPT
    batch_size: int = 64
    device: str = "cpu"
    max_per_class: int = None

    def __post_init__(self):
        if "{}" not in self.prompt_template:
            raise ValueError(
                f"prompt template {self.prompt_template!r} has no "
                "{} placeholder for the class name"
            )
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.max_per_class is not None and self.max_per_class < 1:
            raise ValueError("max_per_class must be >= 1 or None")


@dataclass
class ExtractionResult:
    """Paths written by one job plus per-split row counts."""

    domain: str
    class_names: list
    text_table: str
    files: dict = field(default_factory=dict)   # role -> path
    counts: dict = field(default_factory=dict)  # role -> rows written


def extract(job):
    """Embed every split of the job's dataset. Returns ExtractionResult.

    Raises DatasetNotFound, EmptyClassList, or ModelLoadError before any
    file is touched; writes are atomic per file.
    """
    root = resolve_dataset(job.dataset)
    data = scan_dataset(root)
    encoder = load_encoder(job.model, job.device)
    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    source = f"model={encoder.name} dataset={root}"

    prompts = [job.prompt_template.format(name) for name in data.class_names]
    table_path = out_dir / f"{data.name}.text.emb"
    write_text_table(table_path, data.class_names,
                     encoder.encode_texts(prompts),
                     prompt_template=job.prompt_template)

    result = ExtractionResult(domain=data.name, class_names=data.class_names,
                              text_table=str(table_path))
    for role in sorted(data.splits):
        paths, labels = [], []
        for index, name in enumerate(data.class_names):
            chosen = data.splits[role][name][:job.max_per_class]
            paths.extend(chosen)
            labels.extend([index] * len(chosen))
        features = _encode_files(encoder, paths, job.batch_size)
        out_path = out_dir / f"{data.name}.{role}.emb"
        write_embeddings(out_path, data.name, features,
                         np.asarray(labels), data.class_names,
                         role=role, normalized=True, source=source)
        result.files[role] = str(out_path)
        result.counts[role] = len(paths)
    return result


def _encode_files(encoder, paths, batch_size):
    chunks = []
    for start in range(0, len(paths), batch_size):
        blobs = [p.read_bytes() for p in paths[start:start + batch_size]]
        chunks.append(encoder.encode_images(blobs))
    return np.concatenate(chunks, axis=0)
