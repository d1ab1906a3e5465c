"""Builders for fake image-folder datasets.

The files are random bytes with image extensions: the fake encoder hashes
bytes and never decodes, so tests need no real image data.
"""

import numpy as np
import pytest


def make_tree(root, splits=None, classes=("husky", "tabby", "zebra"),
              per_class=4, seed=0, flat=False):
    """Create a dataset directory; returns its path.

    ``splits`` maps split name to images per class (overriding
    ``per_class``); ``flat=True`` puts class dirs at the root instead.
    """
    rng = np.random.default_rng(seed)
    if flat:
        layout = {None: {c: per_class for c in classes}}
    else:
        splits = splits or {"train": per_class, "test": max(per_class // 2, 1)}
        layout = {s: {c: n for c in classes} if not isinstance(n, dict) else n
                  for s, n in splits.items()}
    for split, per in layout.items():
        base = root if split is None else root / split
        for cls, count in per.items():
            d = base / cls
            d.mkdir(parents=True, exist_ok=True)
            for i in range(count):
                payload = rng.integers(0, 256, size=64, dtype=np.uint8)
                (d / f"{i:03d}.png").write_bytes(payload.tobytes())
    return root


@pytest.fixture
def pets_dir(tmp_path):
    return make_tree(tmp_path / "pets")
