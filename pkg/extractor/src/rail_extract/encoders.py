"""Embedding backends.

Two model-identifier schemes:

``fake:<dim>``
    Hash-based stand-in for tests and plumbing checks. Each image (by file
    bytes) and each prompt string maps to a fixed unit vector drawn from a
    generator seeded with its digest, so output is deterministic across
    runs and machines, needs no weights, and distinct inputs land on
    well-spread directions.

``clip:<model id>``
    A real vision-language encoder loaded through ``transformers``
    (for example ``clip:openai/clip-vit-base-patch16``). Imports and
    weight loading happen lazily and failures surface as ModelLoadError,
    so the package works without torch installed.
"""

import hashlib

import numpy as np

from .errors import ModelLoadError


def load_encoder(model_id, device="cpu"):
    """Resolve a model identifier to an encoder object."""
    scheme, _, rest = model_id.partition(":")
    if scheme == "fake" and rest:
        try:
            dim = int(rest)
        except ValueError:
            raise ModelLoadError(f"bad fake encoder dim {rest!r}") from None
        if dim < 1:
            raise ModelLoadError(f"fake encoder dim must be >= 1, got {dim}")
        return FakeEncoder(dim)
    if scheme == "clip" and rest:
        return ClipEncoder(rest, device)
    raise ModelLoadError(
        f"unknown model identifier {model_id!r}; "
        "expected 'fake:<dim>' or 'clip:<model id>'"
    )


class FakeEncoder:
    """Deterministic hash-to-unit-vector encoder."""

    def __init__(self, dim):
        self.dim = dim
        self.name = f"fake:{dim}"

    def encode_images(self, blobs):
        return np.stack([self._vector(b"img\x00", blob) for blob in blobs])

    def encode_texts(self, texts):
        return np.stack(
            [self._vector(b"txt\x00", t.encode("utf-8")) for t in texts]
        )

    def _vector(self, kind, payload):
        digest = hashlib.blake2b(kind + payload, digest_size=16).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)


class ClipEncoder:
    """Contrastive vision-language model via the transformers library."""

    def __init__(self, model_id, device="cpu"):
        try:
            import torch
            from PIL import Image
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelLoadError(
                f"clip backend needs torch, pillow, and transformers: {exc}"
            ) from exc
        try:
            self._model = CLIPModel.from_pretrained(model_id).to(device)
            self._processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise ModelLoadError(f"cannot load {model_id!r}: {exc}") from exc
        self._model.eval()
        self._torch = torch
        self._image_cls = Image
        self._device = device
        self.name = f"clip:{model_id}"

    def encode_images(self, blobs):
        import io

        images = [self._image_cls.open(io.BytesIO(b)).convert("RGB")
                  for b in blobs]
        inputs = self._processor(images=images, return_tensors="pt")
        inputs = {k: v.to(self._device) for k, v in inputs.items()}
        with self._torch.no_grad():
            feats = self._model.get_image_features(**inputs)
        return self._normalize(feats)

    def encode_texts(self, texts):
        inputs = self._processor(text=texts, return_tensors="pt",
                                 padding=True)
        inputs = {k: v.to(self._device) for k, v in inputs.items()}
        with self._torch.no_grad():
            feats = self._model.get_text_features(**inputs)
        return self._normalize(feats)

    def _normalize(self, feats):
        out = feats.cpu().numpy().astype(np.float64)
        return out / np.linalg.norm(out, axis=1, keepdims=True)
