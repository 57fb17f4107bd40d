"""CSV emission with a provenance comment row."""

from __future__ import annotations

import csv
import math
import os

import numpy as np

__all__ = ["write_csv", "read_csv", "format_cell"]


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path, cfg, header, rows) -> str:
    """Write ``rows`` under a ``# ...`` provenance line and a header row; return the path."""
    from .. import __version__

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# zbridge {__version__} scenario={cfg.scenario} config_hash={cfg.hash} seed={cfg.seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_cell(v) for v in row])
    return str(path)


def read_csv(path):
    """Return ``(comment, header, rows)`` with cells left as strings."""
    with open(path, newline="") as fh:
        comment = fh.readline().rstrip("\n")
        r = csv.reader(fh)
        header = next(r)
        return comment, header, list(r)
