"""CSV writers with a provenance header, and optional SVG scatter plots.

Header lines start with ``# `` and hold ``key=value`` pairs; everything
needed to regenerate a file is in its header. Floats are written with
``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from . import __version__


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    if hasattr(v, "item"):
        return _fmt(v.item())
    return str(v)


def header_lines(meta: dict) -> list[str]:
    lines = [f"# qcduffing_version={__version__}"]
    for k, v in meta.items():
        if isinstance(v, (dict, list, tuple)):
            v = json.dumps(v, sort_keys=True, default=_json_default)
        lines.append(f"# {k}={v}")
    return lines


def _json_default(o):
    if hasattr(o, "__dataclass_fields__"):
        from dataclasses import asdict

        return asdict(o)
    if hasattr(o, "tolist"):
        return o.tolist()
    return str(o)


def write_csv(path, meta: dict, columns: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for line in header_lines(meta):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())
    return path


def read_csv(path):
    """Return (meta, columns, rows-as-strings) from a file written by :func:`write_csv`."""
    meta = {}
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


def csv_body(path) -> str:
    """File contents without the header block (used for determinism checks)."""
    return "\n".join(l for l in Path(path).read_text().splitlines() if not l.startswith("# "))


def write_svg_scatter(path, x, y, title: str, xlabel: str, ylabel: str, size: float = 1.0) -> Path:
    """Self-contained SVG scatter plot (fonts converted to paths, no external refs)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "qcduffing", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.scatter(x, y, s=size, c="k", marker=".", linewidths=0)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
