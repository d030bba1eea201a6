"""
Flat-file writers. CSV is the canonical output; JSON reports mirror it.

Rows are written in the order given and floats via repr, so two runs of the
same configuration produce byte-identical files.
"""
import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """Convert numpy scalars to plain Python values for csv/json."""
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_csv(path: Path, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _plain(v) for k, v in row.items()})
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_plain)
        f.write("\n")
    logger.info(f"Wrote report {path}")
    return path


def read_csv(path: Path) -> List[Dict[str, str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
