"""Deterministic CSV/TSV writers shared by the reports and the CLI."""
from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Mapping, Sequence


def format_value(v) -> str:
    """Fixed textual form: floats with 17 significant digits, ``inf``/``nan`` spelled out."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if v is None:
        return ""
    try:
        import numpy as np
        if isinstance(v, np.floating):
            return format_value(float(v))
        if isinstance(v, np.integer):
            return str(int(v))
        if isinstance(v, np.bool_):
            return format_value(bool(v))
    except ImportError:  # pragma: no cover
        pass
    return str(v)


def rows_to_csv(columns: Sequence[str], rows: Iterable[Mapping], delimiter: str = ",") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, columns: Sequence[str], rows: Iterable[Mapping], delimiter: str = ",") -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(columns, rows, delimiter))
