"""Binary dataset files.

Layout (little-endian):

  magic        4 bytes  b"CALD"
  version      u16
  reserved     u16      0
  spec length  u32, spec JSON (UTF-8, sorted keys), spec crc32 u32
  block count  u32
  per block:   kind u8 (0 labels, 1 features), split u8, modality u16,
               rows u32, cols u32, payload (int64 labels / float64 features),
               payload crc32 u32

The spec JSON is the dataset provenance (generation spec plus applied noise).
"""

import io
import json
import logging
import struct
import zlib
from pathlib import Path
from typing import BinaryIO, List, Tuple

import numpy as np

from synthdata import SPLITS, DatasetSpec, MultimodalDataset, NoiseSpec, Split

logger = logging.getLogger(__name__)

MAGIC = b"CALD"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHH")
_U32 = struct.Struct("<I")
_BLOCK = struct.Struct("<BBHII")

KIND_LABELS = 0
KIND_FEATURES = 1


class DatasetError(ValueError):
    """Base class for dataset file problems."""


class DatasetFormatError(DatasetError):
    """Not a dataset file, or its structure is inconsistent."""


class DatasetVersionError(DatasetError):
    """The file was written by an unsupported format version."""


class DatasetTruncatedError(DatasetError):
    """The file ends before all declared content was read."""


class DatasetChecksumError(DatasetError):
    """A block's payload does not match its stored CRC32."""

    def __init__(self, block: str):
        self.block = block
        super().__init__(f"checksum mismatch in block '{block}'")


def _block_name(kind: int, split: int, modality: int) -> str:
    split_name = SPLITS[split] if split < len(SPLITS) else f"split{split}"
    if kind == KIND_LABELS:
        return f"{split_name}/labels"
    return f"{split_name}/m{modality}"


def _blocks(dataset: MultimodalDataset) -> List[Tuple[int, int, int, np.ndarray]]:
    blocks = []
    for split_idx, name in enumerate(SPLITS):
        split = dataset[name]
        blocks.append((KIND_LABELS, split_idx, 0, split.labels.astype("<i8").reshape(-1, 1)))
        for m, features in enumerate(split.features):
            blocks.append((KIND_FEATURES, split_idx, m, features.astype("<f8")))
    return blocks


def dataset_to_bytes(dataset: MultimodalDataset) -> bytes:
    spec_bytes = json.dumps(dataset.provenance(), sort_keys=True).encode("utf-8")
    parts = [
        _HEADER.pack(MAGIC, FORMAT_VERSION, 0),
        _U32.pack(len(spec_bytes)),
        spec_bytes,
        _U32.pack(zlib.crc32(spec_bytes)),
    ]
    blocks = _blocks(dataset)
    parts.append(_U32.pack(len(blocks)))
    for kind, split_idx, modality, array in blocks:
        payload = np.ascontiguousarray(array).tobytes()
        rows, cols = array.shape
        parts.append(_BLOCK.pack(kind, split_idx, modality, rows, cols))
        parts.append(payload)
        parts.append(_U32.pack(zlib.crc32(payload)))
    return b"".join(parts)


def save_dataset(dataset: MultimodalDataset, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dataset_to_bytes(dataset))
    logger.info(f"Saved dataset to {path}")
    return path


def _remaining(stream: BinaryIO) -> int:
    here = stream.tell()
    end = stream.seek(0, io.SEEK_END)
    stream.seek(here)
    return end - here


def _read(stream: BinaryIO, size: int, what: str) -> bytes:
    # sizes come from the file itself; check them before allocating
    remaining = _remaining(stream)
    if size > remaining:
        raise DatasetTruncatedError(
            f"{what} declares {size} bytes but only {remaining} remain in the file"
        )
    data = stream.read(size)
    if len(data) != size:
        raise DatasetTruncatedError(f"file ends inside {what}: wanted {size} bytes, got {len(data)}")
    return data


def _read_u32(stream: BinaryIO, what: str) -> int:
    return _U32.unpack(_read(stream, _U32.size, what))[0]


def _parse_provenance(spec_bytes: bytes) -> Tuple[DatasetSpec, List[NoiseSpec]]:
    try:
        provenance = json.loads(spec_bytes.decode("utf-8"))
        spec = DatasetSpec(**provenance["spec"])
        noise = [NoiseSpec(**entry) for entry in provenance.get("noise", [])]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(f"unreadable spec block: {e}") from e
    return spec, noise


def load_dataset(path) -> MultimodalDataset:
    """Read a dataset file, verifying every checksum."""
    with open(path, "rb") as stream:
        header = stream.read(_HEADER.size)
        if len(header) < 4 or header[:4] != MAGIC:
            raise DatasetFormatError(f"{path} is not a dataset file (bad magic)")
        if len(header) != _HEADER.size:
            raise DatasetTruncatedError(f"file ends inside the header of {path}")
        _, version, _ = _HEADER.unpack(header)
        if version != FORMAT_VERSION:
            raise DatasetVersionError(
                f"{path} has format version {version}, this build reads version {FORMAT_VERSION}"
            )

        spec_len = _read_u32(stream, "spec length")
        spec_bytes = _read(stream, spec_len, "spec block")
        if _read_u32(stream, "spec checksum") != zlib.crc32(spec_bytes):
            raise DatasetChecksumError("spec")
        spec, noise = _parse_provenance(spec_bytes)

        labels = {}
        features = {name: [None] * spec.num_modalities for name in SPLITS}
        for _ in range(_read_u32(stream, "block count")):
            kind, split_idx, modality, rows, cols = _BLOCK.unpack(
                _read(stream, _BLOCK.size, "block header")
            )
            name = _block_name(kind, split_idx, modality)
            if kind not in (KIND_LABELS, KIND_FEATURES) or split_idx >= len(SPLITS):
                raise DatasetFormatError(f"unknown block '{name}' (kind {kind})")
            payload = _read(stream, rows * cols * 8, f"block '{name}'")
            if _read_u32(stream, f"checksum of '{name}'") != zlib.crc32(payload):
                raise DatasetChecksumError(name)
            split_name = SPLITS[split_idx]
            if kind == KIND_LABELS:
                labels[split_name] = np.frombuffer(payload, dtype="<i8").astype(np.int64)
            else:
                if modality >= spec.num_modalities:
                    raise DatasetFormatError(f"block '{name}' names a modality outside the spec")
                block = np.frombuffer(payload, dtype="<f8").astype(np.float64)
                features[split_name][modality] = block.reshape(rows, cols)
        if stream.read(1):
            raise DatasetFormatError(f"trailing bytes after the last block of {path}")

    splits = {}
    for name in SPLITS:
        if name not in labels or any(block is None for block in features[name]):
            raise DatasetFormatError(f"split '{name}' is incomplete in {path}")
        label_vec = labels[name]
        if label_vec.size and (label_vec.min() < 0 or label_vec.max() >= spec.classes):
            raise DatasetFormatError(f"labels of split '{name}' fall outside [0, {spec.classes})")
        try:
            splits[name] = Split(features[name], label_vec)
        except ValueError as e:
            raise DatasetFormatError(str(e)) from e
    logger.info(f"Loaded dataset from {path}")
    return MultimodalDataset(spec, splits, noise)
