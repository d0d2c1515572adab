"""Encoder models served by the sidecar.

Two implementations of one small contract: unit-norm text/image embeddings
of a fixed dimension plus an image-text matching score as a (negative,
positive) logit pair.

* HashedEncoder is a dependency-free stand-in whose vectors come from
  content digests. It exists so the service and its protocol conformance
  suite run on any machine, with no weights and no GPU.
* Blip2Encoder wraps a pretrained BLIP-2 retrieval checkpoint through
  transformers; it is imported lazily and only constructed when requested.
"""

from __future__ import annotations

import hashlib
import io

import numpy as np


class ModelNotLoadedError(RuntimeError):
    pass


class HashedEncoder:
    """Deterministic digest-seeded embeddings; no model weights involved.

    The ITM logit pair is (0, 2 * cosine(query, candidate)), which keeps the
    protocol's ordering semantics: identical texts score a positive logit
    above the negative one.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.model_id = f"hashed-{dim}"

    def _vector(self, key: bytes) -> np.ndarray:
        digest = hashlib.blake2b(
            b"%d\x1f" % self.seed + key, digest_size=8
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        vec = rng.standard_normal(self.dim)
        return vec / np.linalg.norm(vec)

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector(b"text\x00" + text.encode("utf-8"))

    def embed_image(self, png_bytes: bytes) -> np.ndarray:
        return self._vector(b"image\x00" + hashlib.sha256(png_bytes).digest())

    def itm_logits(self, query_kind: str, query_payload, candidate_text: str):
        query_vec = (
            self.embed_text(query_payload)
            if query_kind == "text"
            else self.embed_image(query_payload)
        )
        return (0.0, 2.0 * float(np.dot(query_vec, self.embed_text(candidate_text))))


class Blip2Encoder:
    """BLIP-2 retrieval checkpoint behind the same contract.

    Image-vs-text pairs go through the checkpoint's image-text matching
    head; its two-way output is mapped to the protocol's (negative,
    positive) order. Text-vs-text pairs have no matching head in this model
    family, so they score by projected-embedding cosine scaled into a logit,
    which preserves ranking semantics.
    """

    ITM_COSINE_SCALE = 4.0

    def __init__(self, checkpoint: str = "Salesforce/blip2-itm-vit-g", device: str = "cpu"):
        try:
            import torch
            from transformers import AutoProcessor, Blip2ForImageTextRetrieval
        except ImportError as exc:
            raise ModelNotLoadedError(
                "blip2 extras not installed (pip install 'vlm-sidecar[blip2]')"
            ) from exc
        self._torch = torch
        self.device = device
        self.model_id = checkpoint
        self.processor = AutoProcessor.from_pretrained(checkpoint)
        self.model = Blip2ForImageTextRetrieval.from_pretrained(checkpoint)
        self.model.to(device)
        self.model.eval()
        with torch.no_grad():
            probe = self._text_features("dimension probe")
        self.dim = int(probe.shape[-1])

    def _decode_image(self, png_bytes: bytes):
        from PIL import Image

        return Image.open(io.BytesIO(png_bytes)).convert("RGB")

    def _text_features(self, text: str):
        inputs = self.processor(text=text, return_tensors="pt").to(self.device)
        with self._torch.no_grad():
            out = self.model.get_text_features(**inputs)
        # pooled projection of the first token, unit-normalized
        feats = out.text_embeds[:, 0, :] if hasattr(out, "text_embeds") else out[0][:, 0, :]
        return self._torch.nn.functional.normalize(feats, dim=-1)[0]

    def _image_features(self, png_bytes: bytes):
        image = self._decode_image(png_bytes)
        inputs = self.processor(images=image, return_tensors="pt").to(self.device)
        with self._torch.no_grad():
            out = self.model.get_image_features(**inputs)
        feats = out.image_embeds if hasattr(out, "image_embeds") else out[0]
        # multiple query tokens: mean-pool then renormalize
        pooled = feats.mean(dim=1) if feats.dim() == 3 else feats
        return self._torch.nn.functional.normalize(pooled, dim=-1)[0]

    def embed_text(self, text: str) -> np.ndarray:
        return self._text_features(text).cpu().numpy().astype(float)

    def embed_image(self, png_bytes: bytes) -> np.ndarray:
        return self._image_features(png_bytes).cpu().numpy().astype(float)

    def itm_logits(self, query_kind: str, query_payload, candidate_text: str):
        if query_kind == "image":
            image = self._decode_image(query_payload)
            inputs = self.processor(
                images=image, text=candidate_text, return_tensors="pt"
            ).to(self.device)
            with self._torch.no_grad():
                out = self.model(**inputs, use_image_text_matching_head=True)
            pair = out.logits_per_image[0]
            # model emits (no-match, match); protocol order is (neg, pos)
            return (float(pair[0]), float(pair[1]))
        cos = float(
            self._torch.dot(
                self._text_features(query_payload), self._text_features(candidate_text)
            )
        )
        return (0.0, self.ITM_COSINE_SCALE * cos)


def load_encoder(spec: str, device: str = "cpu"):
    """Build an encoder from a CLI spec: 'hashed[:dim]' or 'blip2[:checkpoint]'."""
    name, _, arg = spec.partition(":")
    if name == "hashed":
        return HashedEncoder(dim=int(arg) if arg else 256)
    if name == "blip2":
        return Blip2Encoder(checkpoint=arg or "Salesforce/blip2-itm-vit-g", device=device)
    raise ValueError(f"unknown model spec {spec!r} (hashed[:dim] or blip2[:checkpoint])")
