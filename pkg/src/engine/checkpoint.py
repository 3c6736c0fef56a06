"""
Checkpoint codec
Flat JSON documents for one genome ({spec, tensors, adam, rng_state}) and
the run manifest that ties a population's genome files together. Python's
float repr round-trips exactly, so save -> load is bit-exact.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .autodiff import Tensor
from .errors import CheckpointError, CDEGANError
from .nets import AdamState, MlpSpec, ParamSet

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def genome_to_dict(params: ParamSet, adam: Optional[AdamState] = None, rng_state: Optional[Dict] = None) -> Dict[str, Any]:
    return {
        "spec": params.spec.to_dict(),
        "tensors": [
            {"name": t.name, "shape": list(t.shape), "values": t.values.reshape(-1).tolist()}
            for t in params
        ],
        "adam": adam.to_dict() if adam is not None else None,
        "rng_state": rng_state,
    }


def genome_from_dict(data: Dict[str, Any]) -> Tuple[ParamSet, Optional[AdamState], Optional[Dict]]:
    """
    Rebuild (params, adam, rng_state) from a genome document.

    Raises:
        CheckpointError: Missing keys, wrong shapes or non-finite values
    """
    try:
        spec = MlpSpec.from_dict(data["spec"])
        tensors = []
        for i, entry in enumerate(data["tensors"]):
            values = np.asarray(entry["values"], dtype=np.float64)
            shape = tuple(entry["shape"])
            if values.size != int(np.prod(shape)):
                raise CheckpointError(f"tensors[{i}]: {values.size} values for shape {list(shape)}")
            tensors.append(Tensor(values.reshape(shape), requires_grad=True, name=entry.get("name", "")))
        params = ParamSet(spec, tensors)
        adam = AdamState.from_dict(data["adam"], params) if data.get("adam") else None
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError, CDEGANError) as e:
        raise CheckpointError(f"Invalid genome document: {e}") from e
    return params, adam, data.get("rng_state")


def save_genome(path: Path, params: ParamSet, adam: Optional[AdamState] = None, rng_state: Optional[Dict] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(genome_to_dict(params, adam, rng_state)))
    return path


def load_genome(path: Path) -> Tuple[ParamSet, Optional[AdamState], Optional[Dict]]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: not valid JSON ({e})") from e
    return genome_from_dict(data)


def write_manifest(directory: Path, manifest: Dict[str, Any]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2))
    logger.info(f"Wrote checkpoint manifest {path}")
    return path


def read_manifest(path: Path) -> Tuple[Path, Dict[str, Any]]:
    """
    Read a manifest given its file or its checkpoint directory.

    Returns:
        tuple: (checkpoint directory, manifest dict)
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise CheckpointError(f"No checkpoint manifest at {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: not valid JSON ({e})") from e

    required = ["iteration", "config", "generators", "discriminators", "best_generator"]
    missing = [key for key in required if key not in manifest]
    if missing:
        raise CheckpointError(f"{path}: manifest missing keys: {', '.join(missing)}")
    return path.parent, manifest
