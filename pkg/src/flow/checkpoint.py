"""Versioned ``.npz`` checkpoints.

Layout::

    format_version      int64 scalar
    meta                JSON string: config echo, RNG state, Adam settings
    param/<name>        parameter arrays
    adam.m/<name>       first-moment accumulators
    adam.v/<name>       second-moment accumulators
    standardizer.*      standardisation statistics (optional)
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from src.core.errors import ArtifactError
from src.core.storage import PathLike, decode_json, encode_json, read_npz, write_npz
from src.diffcore.layers import ParameterStore
from src.diffcore.optim import AdamState
from src.flow.standardize import Standardizer

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    params: ParameterStore
    optimizer: Optional[AdamState] = None
    config: Dict[str, Any] = field(default_factory=dict)
    rng_state: Optional[Dict[str, Any]] = None
    standardizer: Optional[Standardizer] = None
    extra: Dict[str, Any] = field(default_factory=dict)


def save_checkpoint(path: PathLike, checkpoint: Checkpoint) -> Path:
    """Serialise a checkpoint; returns the written path."""
    meta: Dict[str, Any] = {
        "config": checkpoint.config,
        "rng_state": checkpoint.rng_state,
        "extra": checkpoint.extra,
        "parameter_names": list(checkpoint.params),
    }
    arrays: Dict[str, np.ndarray] = {"format_version": np.array(FORMAT_VERSION, dtype=np.int64)}
    for name, value in checkpoint.params.items():
        arrays[f"param/{name}"] = value
    if checkpoint.optimizer is not None:
        opt = checkpoint.optimizer
        meta["adam"] = {"step": opt.step, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps}
        for name in opt.m:
            arrays[f"adam.m/{name}"] = opt.m[name]
            arrays[f"adam.v/{name}"] = opt.v[name]
    if checkpoint.standardizer is not None:
        arrays.update(checkpoint.standardizer.to_arrays())
    arrays["meta"] = encode_json(meta)
    write_npz(path, arrays)
    return Path(path)


def load_checkpoint(path: PathLike) -> Checkpoint:
    """Load a checkpoint written by ``save_checkpoint``.

    Raises:
        ArtifactError: If the file is missing, unreadable or of an unknown version
    """
    arrays = read_npz(path, kind="checkpoint")
    version = int(arrays.get("format_version", np.array(-1)))
    if version != FORMAT_VERSION:
        raise ArtifactError("checkpoint", str(path), detail=f"unsupported format_version {version}")
    meta = decode_json(arrays["meta"])
    params = ParameterStore({name: arrays[f"param/{name}"] for name in meta["parameter_names"]})
    optimizer = None
    if "adam" in meta:
        adam = meta["adam"]
        optimizer = AdamState(
            step=int(adam["step"]),
            m={name: arrays[f"adam.m/{name}"] for name in meta["parameter_names"] if f"adam.m/{name}" in arrays},
            v={name: arrays[f"adam.v/{name}"] for name in meta["parameter_names"] if f"adam.v/{name}" in arrays},
            beta1=adam["beta1"],
            beta2=adam["beta2"],
            eps=adam["eps"],
        )
    return Checkpoint(
        params=params,
        optimizer=optimizer,
        config=meta.get("config", {}),
        rng_state=meta.get("rng_state"),
        standardizer=Standardizer.from_arrays(arrays),
        extra=meta.get("extra", {}),
    )
