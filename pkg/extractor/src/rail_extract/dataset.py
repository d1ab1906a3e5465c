"""Image-folder dataset resolution.

A dataset is a directory of class subdirectories, optionally grouped under
``train``/``val``/``test`` split directories:

    pets/train/husky/001.jpg        pets/husky/001.jpg
    pets/train/tabby/004.jpg   or   pets/tabby/004.jpg
    pets/test/husky/009.jpg

Without split directories the whole tree counts as the train split. Class
order is the sorted union of class directory names across splits, which is
what "dataset order" means for a folder dataset. Scanning is pure listing,
so extraction stays deterministic for a fixed tree.
"""

import os
from dataclasses import dataclass
from pathlib import Path

from .errors import DatasetNotFound, EmptyClassList

IMAGE_EXTS = frozenset(
    {".jpg", ".jpeg", ".png", ".bmp", ".gif", ".webp", ".ppm", ".pgm",
     ".tif", ".tiff"}
)
SPLIT_DIRS = ("train", "val", "test")
DATASETS_ENV = "RAIL_DATASETS"


@dataclass
class ScannedDataset:
    """One resolved dataset: class list plus per-split image paths."""

    name: str
    class_names: list
    splits: dict  # role -> {class name -> sorted list of Paths}

    def count(self, role):
        return sum(len(v) for v in self.splits[role].values())


def resolve_dataset(identifier):
    """Map an identifier to a dataset directory.

    A string that names an existing directory wins; otherwise the
    identifier is looked up under ``$RAIL_DATASETS``. Raises
    DatasetNotFound when neither resolves.
    """
    direct = Path(identifier)
    if direct.is_dir():
        return direct
    base = os.environ.get(DATASETS_ENV)
    if base:
        under = Path(base) / identifier
        if under.is_dir():
            return under
    hint = f" (and not under ${DATASETS_ENV})" if base else ""
    raise DatasetNotFound(f"no dataset directory {identifier!r}{hint}")


def scan_dataset(root):
    """List classes and image files. Raises EmptyClassList when there is
    nothing to embed: no class directories, or a split with no images."""
    root = Path(root)
    split_roots = {name: root / name for name in SPLIT_DIRS
                   if (root / name).is_dir()}
    if not split_roots:
        split_roots = {"train": root}

    splits = {}
    for role, split_root in split_roots.items():
        classes = sorted(p.name for p in split_root.iterdir() if p.is_dir())
        splits[role] = {
            name: sorted(p for p in (split_root / name).iterdir()
                         if p.suffix.lower() in IMAGE_EXTS)
            for name in classes
        }

    class_names = sorted({name for per in splits.values() for name in per})
    if not class_names:
        raise EmptyClassList(f"{root}: no class directories found")
    for role, per in splits.items():
        if sum(len(v) for v in per.values()) == 0:
            raise EmptyClassList(f"{root}: split {role!r} contains no images")
        for name in class_names:
            per.setdefault(name, [])

    return ScannedDataset(name=root.name, class_names=class_names,
                          splits=splits)
