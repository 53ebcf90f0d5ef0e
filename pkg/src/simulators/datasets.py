"""Dataset files: one ``.npz`` container per simulated dataset stack.

Entries: ``source<i>/values`` (float64, B x n x d), optional
``source<i>/presence`` and ``source<i>/times``, ``theta``, optional
``conditions`` and a ``meta`` JSON document holding source names, parameter
names, the generating config echo and simulation diagnostics.
"""

from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.core.errors import ArtifactError
from src.core.storage import PathLike, decode_json, encode_json, read_npz, write_npz
from src.fusion.missingness import MultiSourceDataset, SourceData

DATASET_VERSION = 1


def save_datasets(path: PathLike, data: MultiSourceDataset, config: Optional[Dict[str, Any]] = None,
                  diagnostics: Optional[Dict[str, Any]] = None) -> Path:
    arrays: Dict[str, np.ndarray] = {}
    for i, source in enumerate(data.sources):
        arrays[f"source{i}/values"] = source.values
        if source.presence is not None:
            arrays[f"source{i}/presence"] = source.presence
        if source.times is not None:
            arrays[f"source{i}/times"] = np.asarray(source.times, dtype=np.float64)
    if data.theta is not None:
        arrays["theta"] = data.theta
    if data.conditions is not None:
        arrays["conditions"] = data.conditions
    arrays["meta"] = encode_json({
        "version": DATASET_VERSION,
        "sources": [s.name for s in data.sources],
        "shapes": [list(s.values.shape) for s in data.sources],
        "parameter_names": list(data.parameter_names),
        "config": config or {},
        "diagnostics": {**data.diagnostics, **(diagnostics or {})},
    })
    return write_npz(path, arrays)


def load_datasets(path: PathLike) -> Tuple[MultiSourceDataset, Dict[str, Any]]:
    """Returns the dataset stack and its meta document.

    Raises:
        ArtifactError: If the file is missing, unreadable or inconsistent
    """
    arrays = read_npz(path, kind="dataset")
    if "meta" not in arrays:
        raise ArtifactError("dataset", str(path), detail="no meta entry")
    meta = decode_json(arrays["meta"])
    sources = []
    for i, name in enumerate(meta["sources"]):
        values = arrays.get(f"source{i}/values")
        if values is None or list(values.shape) != meta["shapes"][i]:
            raise ArtifactError("dataset", str(path), detail=f"source '{name}' is missing or has the wrong shape")
        sources.append(SourceData(name, values, arrays.get(f"source{i}/presence"), arrays.get(f"source{i}/times")))
    data = MultiSourceDataset(sources, arrays.get("theta"), arrays.get("conditions"), list(meta["parameter_names"]),
                              dict(meta.get("diagnostics", {})))
    return data, meta
