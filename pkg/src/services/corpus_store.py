"""Corpus container on disk and in-memory utterance storage.

On disk a corpus is a directory holding `manifest.json` and one binary blob
per utterance:

    magic "MIRU" | version u32 | T u32 | D_v u32 | D_a u32 |
    visual f32[T×D_v] | audio f32[T×D_a] | labels u32[T]

All integers and floats are little-endian; matrices are row-major.
"""

import json
import logging
from pathlib import Path

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ValidationError

from src.exceptions import FormatError, InputError
from src.models.corpus import CorpusSpec, Utterance

logger = logging.getLogger(__name__)

BLOB_MAGIC = b"MIRU"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
_HEADER_WORDS = 4  # version, T, D_v, D_a


class CorpusManifest(BaseModel):
    """Contents of manifest.json.

    Attributes:
        version: Container format version.
        spec: Echo of the generating spec, None for corpora saved without one.
        ids: Utterance ids in corpus order.
        frames: Frame count per utterance.
        d_visual: Visual frame width.
        d_audio: Audio frame width.
        vocab_size: Label alphabet size.
    """

    version: int
    spec: CorpusSpec | None = None
    ids: list[str]
    frames: list[int]
    d_visual: int
    d_audio: int
    vocab_size: int


def blob_name(utterance_id: str) -> str:
    return f"{utterance_id}.bin"


def encode_utterance(utterance: Utterance) -> bytes:
    """Serialise one utterance to its blob bytes."""
    frames = utterance.frames
    header = np.array(
        [FORMAT_VERSION, frames, utterance.visual.shape[1], utterance.audio.shape[1]],
        dtype="<u4",
    )
    return b"".join(
        [
            BLOB_MAGIC,
            header.tobytes(),
            np.ascontiguousarray(utterance.visual, dtype="<f4").tobytes(),
            np.ascontiguousarray(utterance.audio, dtype="<f4").tobytes(),
            np.ascontiguousarray(utterance.labels, dtype="<u4").tobytes(),
        ]
    )


def _take(buf: bytes, offset: int, count: int, dtype: str, section: str) -> npt.NDArray[np.generic]:
    size = np.dtype(dtype).itemsize * count
    if offset + size > len(buf):
        raise FormatError(
            f"truncated: need {size} bytes, {len(buf) - offset} available", section, offset
        )
    return np.frombuffer(buf, dtype=dtype, count=count, offset=offset)


def decode_utterance(utterance_id: str, buf: bytes) -> Utterance:
    """Parse blob bytes.

    Raises:
        FormatError: On bad magic, unsupported version or truncation, naming
            the section and byte offset.
    """
    if len(buf) < len(BLOB_MAGIC) or buf[: len(BLOB_MAGIC)] != BLOB_MAGIC:
        raise FormatError(f"{utterance_id}: bad magic", "magic", 0)
    offset = len(BLOB_MAGIC)
    version, frames, d_visual, d_audio = (
        int(x) for x in _take(buf, offset, _HEADER_WORDS, "<u4", "header")
    )
    if version != FORMAT_VERSION:
        raise FormatError(f"{utterance_id}: unsupported version {version}", "header", offset)
    offset += 4 * _HEADER_WORDS
    visual = _take(buf, offset, frames * d_visual, "<f4", "visual")
    offset += 4 * frames * d_visual
    audio = _take(buf, offset, frames * d_audio, "<f4", "audio")
    offset += 4 * frames * d_audio
    labels = _take(buf, offset, frames, "<u4", "labels")
    offset += 4 * frames
    if offset != len(buf):
        raise FormatError(f"{utterance_id}: {len(buf) - offset} trailing bytes", "labels", offset)
    return Utterance(
        id=utterance_id,
        visual=visual.reshape(frames, d_visual).astype(np.float32),
        audio=audio.reshape(frames, d_audio).astype(np.float32),
        labels=labels.astype(np.int64),
    )


def save_corpus(
    utterances: list[Utterance],
    path: str | Path,
    spec: CorpusSpec | None = None,
) -> CorpusManifest:
    """Write a corpus directory (created if missing).

    Args:
        utterances: Utterances to store; all share D_v and D_a.
        path: Target directory.
        spec: Generating spec, echoed into the manifest.

    Returns:
        The manifest written.
    """
    if not utterances:
        raise InputError("cannot save an empty corpus")
    d_visual = utterances[0].visual.shape[1]
    d_audio = utterances[0].audio.shape[1]
    for u in utterances:
        if u.visual.shape[1] != d_visual or u.audio.shape[1] != d_audio:
            raise InputError(f"utterance {u.id}: frame widths differ from the corpus")
    vocab = spec.vocab_size if spec else max(int(u.labels.max()) for u in utterances) + 1

    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for u in utterances:
        (root / blob_name(u.id)).write_bytes(encode_utterance(u))
    manifest = CorpusManifest(
        version=FORMAT_VERSION,
        spec=spec,
        ids=[u.id for u in utterances],
        frames=[u.frames for u in utterances],
        d_visual=d_visual,
        d_audio=d_audio,
        vocab_size=vocab,
    )
    (root / MANIFEST_NAME).write_text(
        json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    logger.info("Saved %d utterances to %s", len(utterances), root)
    return manifest


def read_manifest(path: str | Path) -> CorpusManifest:
    """Read and validate a corpus manifest."""
    manifest_path = Path(path) / MANIFEST_NAME
    try:
        raw = manifest_path.read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(f"cannot read {manifest_path}: {e}", "manifest") from e
    try:
        manifest = CorpusManifest.model_validate(json.loads(raw))
    except (json.JSONDecodeError, ValidationError) as e:
        raise FormatError(f"invalid manifest: {e}", "manifest") from e
    if manifest.version != FORMAT_VERSION:
        raise FormatError(f"unsupported corpus version {manifest.version}", "manifest")
    if len(manifest.ids) != len(manifest.frames):
        raise FormatError(
            f"manifest lists {len(manifest.ids)} ids but {len(manifest.frames)} frame counts",
            "manifest",
        )
    return manifest


def load_corpus(path: str | Path) -> list[Utterance]:
    """Load a corpus directory written by `save_corpus`.

    Raises:
        FormatError: On a malformed manifest or blob, or when the manifest and
            the blobs on disk disagree.
    """
    root = Path(path)
    manifest = read_manifest(root)
    blobs = sorted(p.name for p in root.glob("*.bin"))
    if len(blobs) != len(manifest.ids):
        raise FormatError(
            f"manifest lists {len(manifest.ids)} utterances, found {len(blobs)} blobs",
            "manifest",
        )
    utterances: list[Utterance] = []
    for utt_id, frames in zip(manifest.ids, manifest.frames, strict=True):
        blob = root / blob_name(utt_id)
        if not blob.exists():
            raise FormatError(f"missing blob for {utt_id}", "manifest")
        utterance = decode_utterance(utt_id, blob.read_bytes())
        if utterance.frames != frames:
            raise FormatError(
                f"{utt_id}: manifest says T={frames}, blob has T={utterance.frames}", "header", 4
            )
        if utterance.visual.shape[1] != manifest.d_visual or (
            utterance.audio.shape[1] != manifest.d_audio
        ):
            raise FormatError(f"{utt_id}: frame widths disagree with the manifest", "header", 4)
        utterance.check_vocab(manifest.vocab_size)
        utterances.append(utterance)
    return utterances


class CorpusStore:
    """In-memory corpus with unique ids and a seeded held-out split.

    Attributes:
        _utterances: Utterances keyed by id, in corpus order.
    """

    def __init__(self, utterances: list[Utterance]) -> None:
        self._utterances: dict[str, Utterance] = {}
        for u in utterances:
            if u.id in self._utterances:
                raise InputError(f"duplicate utterance id {u.id}")
            self._utterances[u.id] = u

    def get_all(self) -> list[Utterance]:
        return list(self._utterances.values())

    def split(self, val_fraction: float, seed: int = 0) -> tuple[list[Utterance], list[Utterance]]:
        """Deterministic train/validation split.

        Args:
            val_fraction: Fraction held out, rounded to a whole utterance count.
            seed: Shuffle seed.

        Returns:
            (train, validation), each in corpus order. With more than one
            utterance and a positive fraction, both sides are non-empty.
        """
        items = self.get_all()
        n_val = round(len(items) * val_fraction)
        if val_fraction > 0 and len(items) > 1:
            n_val = min(max(n_val, 1), len(items) - 1)
        order = np.random.default_rng([seed, 2]).permutation(len(items))
        held_out = {int(i) for i in order[:n_val]}
        train = [u for i, u in enumerate(items) if i not in held_out]
        val = [u for i, u in enumerate(items) if i in held_out]
        return train, val

