"""
results.py

Writers for result tables (`;`-separated CSV or JSON records) and the JSON sidecar that
accompanies every emitted file.
"""

import json
import logging
import time
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


CSV_SEPARATOR = ";"
FLOAT_FORMAT = "%.10g"
FORMATS = ("csv", "json")


def _plain(value):
    if is_dataclass(value):
        return _plain(asdict(value))
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def write_table(df: pd.DataFrame, path, fmt: str = "csv") -> Path:
    """
    Write a result table.

    CSV uses `;` and a fixed float format so that reruns are byte-identical.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        df.to_csv(path, sep=CSV_SEPARATOR, index=False, float_format=FLOAT_FORMAT)
    elif fmt == "json":
        path.write_text(df.to_json(orient="records", double_precision=10, indent=2), encoding="utf-8")
    else:
        raise ValueError(f"unknown output format: {fmt}")
    logger.info("table: %s | rows: %d", path, len(df))
    return path


def write_sidecar(path, config, version: str, started: float, extra: dict = None) -> Path:
    """
    JSON metadata next to `path` (`<path>.json`).

    Parameters
    ----------
    path : str or Path
        The data file the sidecar describes.
    config : dataclass or dict
        Full run configuration.
    version : str
        Package version.
    started : float
        `time.perf_counter()` at the start of the run.
    extra : dict, optional
        Additional fields (for instance per-point convergence reports).
    """
    path = Path(path)
    config = _plain(config)
    meta = {
        "file": path.name,
        "version": version,
        "config": config,
        "n_cut": config.get("n_cut"),
        "l_max": config.get("l_max"),
        "seed": config.get("solver", {}).get("seed", config.get("seed")),
        "wall_time_s": round(time.perf_counter() - started, 3),
        "timestamp_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        meta.update(_plain(extra))
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    return sidecar


def read_table(path) -> pd.DataFrame:
    path = Path(path)
    if path.suffix == ".json":
        return pd.read_json(path, orient="records")
    return pd.read_csv(path, sep=CSV_SEPARATOR)
