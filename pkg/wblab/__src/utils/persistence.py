import csv
import hashlib
import json
import logging
import os
import flax
import numpy as np
from typing import Any, Dict, Iterable, List, Sequence, Tuple

logger = logging.getLogger(__name__)

Column = Tuple[str, str]


def _format(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return "%.17g" % float(value)


def write_csv(path: str, columns: Sequence[Column], rows: Iterable[Sequence[Any]]) -> str:
    """
    Writes a comma-separated table with a `name [unit]` header row.

    Reals are written with 17 significant digits so that the file round-trips exactly;
    failed entries are written as `nan`.

    Args:
        path (str): Destination file.
        columns (Sequence[Tuple[str, str]]): (name, unit) per column; an empty unit
            gives `[-]`.
        rows (Iterable[Sequence]): One sequence of values per row.

    Returns:
        str: `path`.
    """
    header = [f"{name} [{unit or '-'}]" for name, unit in columns]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} entries for {len(columns)} columns")
            writer.writerow([_format(v) for v in row])
    logger.debug("wrote %s", path)
    return path


def read_csv(path: str) -> Tuple[List[str], List[List[float]]]:
    """Reads a table written by `write_csv`: header labels and float rows."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        return header, [[float(v) for v in row] for row in reader]


def _jsonable(value: Any):
    if isinstance(value, (np.generic, np.ndarray)) or hasattr(value, "__array__"):
        array = np.asarray(value)
        return array.item() if array.ndim == 0 else array.tolist()
    raise TypeError(f"cannot serialise {type(value).__name__} to JSON")


def dumps_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, default=_jsonable) + "\n"


def write_json(path: str, payload: Dict[str, Any]) -> str:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_json(payload))
    return path


def save_state(path: str, state: Any) -> str:
    """Checkpoints a solver state pytree with flax msgpack serialization."""
    with open(path, "wb") as f:
        f.write(flax.serialization.to_bytes(state))
    return path


def load_state(path: str, template: Any) -> Any:
    """Restores a state saved by `save_state` into the structure of `template`."""
    with open(path, "rb") as f:
        return flax.serialization.from_bytes(template, f.read())


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir: str, files: Sequence[str], version: str, config_hash: str,
                   wall_time: float) -> str:
    """
    Writes `manifest.json` listing every produced file with its SHA-256 and size.

    Only the manifest carries the wall time; the data files themselves depend on the
    configuration alone.
    """
    entries = []
    for name in sorted(set(files)):
        path = os.path.join(out_dir, name)
        entries.append({"name": name, "sha256": sha256_file(path), "bytes": os.path.getsize(path)})
    manifest = {
        "files": entries,
        "version": version,
        "config_sha256": config_hash,
        "wall_time_s": round(float(wall_time), 6),
    }
    return write_json(os.path.join(out_dir, "manifest.json"), manifest)
