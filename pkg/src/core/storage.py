"""Byte-reproducible artifact files shared by datasets, checkpoints and the manifest.

``.npz`` containers are written through ``zipfile`` with a fixed timestamp
(``np.savez`` stamps the current time), so equal content gives equal bytes.
Every writer goes through a temporary file and ``os.replace``.
"""

import io
import json
import os
import zipfile
from pathlib import Path
from typing import Any, Dict, Mapping, Union

import numpy as np

from src.core.errors import ArtifactError

ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)

PathLike = Union[str, Path]


def write_npz(path: PathLike, arrays: Mapping[str, np.ndarray]) -> Path:
    """Write arrays as sorted, timestamp-free ``.npz`` entries."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_DEFLATED) as archive:
        for name in sorted(arrays):
            buffer = io.BytesIO()
            np.lib.format.write_array(buffer, np.asarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            archive.writestr(info, buffer.getvalue())
    os.replace(tmp, path)
    return path


def read_npz(path: PathLike, kind: str = "archive") -> Dict[str, np.ndarray]:
    """Load every entry of an ``.npz`` file.

    Raises:
        ArtifactError: If the file is missing or not a readable archive
    """
    path = Path(path)
    if not path.exists():
        raise ArtifactError(kind, str(path))
    try:
        with np.load(path, allow_pickle=False) as archive:
            return {name: archive[name] for name in archive.files}
    except (OSError, ValueError, zipfile.BadZipFile) as exc:
        raise ArtifactError(kind, str(path), detail=str(exc)) from exc


def encode_json(value: Any) -> np.ndarray:
    """JSON document stored as a 0-d unicode array (no pickling needed)."""
    return np.array(json.dumps(value, sort_keys=True))


def decode_json(value: np.ndarray) -> Any:
    return json.loads(str(value[()]))


def write_json(path: PathLike, payload: Any) -> Path:
    """Atomically write pretty-printed, key-sorted JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    os.replace(tmp, path)
    return path


def read_json(path: PathLike, kind: str = "json") -> Any:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(kind, str(path))
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ArtifactError(kind, str(path), detail=str(exc)) from exc
