"""CSV emission shared by the CLI and analysis outputs.

All files are RFC-4180 (CRLF, header row); floats are rendered with 17
significant digits so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path


def fmt(value) -> str:
    """Render one cell; floats keep full double precision."""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_rows(path, header, rows) -> None:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_rows(path):
    """Read back (header, rows-as-strings)."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        return header, [row for row in reader if row]
