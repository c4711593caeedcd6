"""On-disk checkpoints: a directory of ``<name>.mbt`` tensors and ``manifest.txt``.

Tensor file layout (little endian)::

    b"MBT1" | u32 rank | rank x u32 dims | float32 data, row-major
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"MBT1"
FORMAT_VERSION = "1"
MANIFEST = "manifest.txt"


def encode_tensor(arr: np.ndarray) -> bytes:
    # np.asarray rather than ascontiguousarray: the latter promotes 0-d to 1-d
    arr = np.asarray(arr, dtype="<f4")
    head = MAGIC + struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.tobytes(order="C")


def decode_tensor(buf: bytes, name: str = "<tensor>") -> np.ndarray:
    if buf[:4] != MAGIC:
        raise CheckpointError(f"{name}: bad magic {buf[:4]!r}, expected {MAGIC!r}")
    try:
        (rank,) = struct.unpack_from("<I", buf, 4)
        dims = struct.unpack_from(f"<{rank}I", buf, 8)
    except struct.error as exc:
        raise CheckpointError(f"{name}: truncated header") from exc
    offset = 8 + 4 * rank
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    if len(buf) - offset != 4 * count:
        raise CheckpointError(
            f"{name}: payload has {len(buf) - offset} bytes, header implies {4 * count}"
        )
    return np.frombuffer(buf, dtype="<f4", offset=offset).reshape(dims).astype(np.float32)


def write_tensor(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(encode_tensor(arr))


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read tensor file {path}: {exc}") from exc
    return decode_tensor(buf, str(path))


@dataclass
class ModelCheckpoint:
    manifest: dict[str, str] = field(default_factory=dict)
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def checkpoint_id(self) -> str:
        """Content hash of the tensor payloads; stable across save/load."""
        h = hashlib.sha256()
        for name in sorted(self.tensors):
            h.update(name.encode())
            h.update(encode_tensor(self.tensors[name]))
        return h.hexdigest()[:16]

    def subset(self, prefix: str) -> dict[str, np.ndarray]:
        """Tensors under ``prefix.`` with the prefix stripped."""
        cut = len(prefix) + 1
        return {k[cut:]: v for k, v in self.tensors.items() if k.startswith(prefix + ".")}

    def save(self, path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        for stale in path.glob("*.mbt"):
            if stale.stem not in self.tensors:
                stale.unlink()
        for name, arr in sorted(self.tensors.items()):
            write_tensor(path / f"{name}.mbt", arr)
        meta = {k: v for k, v in self.manifest.items() if not k.startswith("tensor.")}
        meta["format_version"] = FORMAT_VERSION
        meta["checkpoint_id"] = self.checkpoint_id
        lines = [f"{k} = {_clean(v)}" for k, v in sorted(meta.items())]
        lines += [
            f"tensor.{name} = {'x'.join(map(str, arr.shape)) or 'scalar'}"
            for name, arr in sorted(self.tensors.items())
        ]
        (path / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> ModelCheckpoint:
        path = Path(path)
        mpath = path / MANIFEST
        if not mpath.is_file():
            raise CheckpointError(f"{path}: no {MANIFEST}")
        manifest = parse_manifest(mpath.read_text(encoding="utf-8"), str(mpath))
        if manifest.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(
                f"{mpath}: unsupported format_version {manifest.get('format_version')!r}"
            )
        tensors = {}
        for key, shape in manifest.items():
            if not key.startswith("tensor."):
                continue
            name = key[len("tensor."):]
            arr = read_tensor(path / f"{name}.mbt")
            expected = "x".join(map(str, arr.shape)) or "scalar"
            if expected != shape:
                raise CheckpointError(f"{name}.mbt has shape {expected}, manifest says {shape}")
            tensors[name] = arr
        meta = {k: v for k, v in manifest.items() if not k.startswith("tensor.")}
        return cls(meta, tensors)


def _clean(value) -> str:
    return str(value).replace("\n", " ").strip()


def parse_manifest(text: str, source: str = "manifest") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if " = " not in line and "=" not in line:
            raise CheckpointError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in out:
            raise CheckpointError(f"{source}:{lineno}: duplicate key {key}")
        out[key] = value.strip()
    return out
