"""
artifacts.py - JSON and CSV outputs with a metadata header

Every artifact carries the config fingerprint, lattice and tolerances.
Nothing time-dependent is written, so identical configs give byte-identical
files. CSV metadata lives in leading ``# key: value`` comment lines.
"""

import io
import json
from pathlib import Path
from typing import Any

import pandas as pd

from bolax import __version__
from bolax.config import ExperimentConfig

FLOAT_FORMAT = "%.17g"


def metadata(cfg: ExperimentConfig, command: str) -> dict[str, Any]:
    return {
        "command": command,
        "bolax_version": __version__,
        "config_hash": cfg.fingerprint(),
        "lattice": cfg.lattice.model_dump(),
        "tolerances": cfg.tolerances.model_dump(),
        "seed": cfg.seed,
    }


def write_json(path: Path, payload: dict[str, Any], meta: dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"metadata": meta, **payload}
    path.write_text(json.dumps(document, indent=2) + "\n")
    return path


def write_csv(path: Path, frame: pd.DataFrame, meta: dict[str, Any]) -> Path:
    """Write ``frame`` with 17 significant digits under a comment header."""
    path.parent.mkdir(parents=True, exist_ok=True)
    header = "".join(f"# {key}: {json.dumps(value)}\n" for key, value in meta.items())
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    path.write_text(header + body)
    return path


def read_csv(path: Path) -> tuple[dict[str, Any], pd.DataFrame]:
    """Inverse of ``write_csv``: the metadata mapping and the table."""
    meta: dict[str, Any] = {}
    body: list[str] = []
    for line in path.read_text().splitlines(keepends=True):
        if not body and line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        else:
            body.append(line)
    return meta, pd.read_csv(io.StringIO("".join(body)), float_precision="round_trip")
