from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

import numpy as np

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Table:
    """A CSV table whose columns are documented in a leading comment line."""

    columns: tuple[str, ...]
    rows: list[tuple[Any, ...]] = field(default_factory=list)
    description: str = ""

    def append(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValueError(
                f"expected {len(self.columns)} values, got {len(values)}"
            )

        self.rows.append(values)

    def column(self, name: str) -> list[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    def write(self, path: Path) -> None:
        header = "# columns: " + ", ".join(self.columns)
        if self.description:
            header += f" ({self.description})"

        with path.open("w", newline="", encoding="utf-8") as f:
            f.write(header + "\n")
            writer = csv.writer(f, lineterminator="\n")
            for row in self.rows:
                writer.writerow([_format(value) for value in row])


def _format(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    elif isinstance(value, (float, np.floating)):
        return repr(float(value))
    elif value is None:
        return ""

    return str(value)


def jsonable(value: Any) -> Any:
    """Convert numpy values, named tuples and dataclasses into JSON types."""
    if isinstance(value, Mapping):
        return {str(key): jsonable(item) for key, item in value.items()}
    elif hasattr(value, "_asdict"):
        return jsonable(value._asdict())
    elif is_dataclass(value) and not isinstance(value, type):
        return {f.name: jsonable(getattr(value, f.name)) for f in fields(value)}
    elif isinstance(value, np.ndarray):
        return [jsonable(item) for item in value.tolist()]
    elif isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    elif isinstance(value, np.generic):
        return jsonable(value.item())
    elif isinstance(value, float) and not math.isfinite(value):
        return None
    elif isinstance(value, Path):
        return str(value)

    return value


@dataclass(frozen=True)
class PlotSpec:
    """Describes the matplotlib script emitted next to a table."""

    csv_name: str
    columns: tuple[str, ...]
    x: str
    ys: tuple[str, ...]
    title: str
    #: ``(intercept, slope, label)`` of a reference line
    reference: tuple[float, float, str] | None = None
    logx: bool = False


_PLOT_TEMPLATE = '''\
"""Plot {title} from {csv_name}."""
import csv

import matplotlib.pyplot as plt

with open({csv_name!r}, newline="") as f:
    rows = [row for row in csv.reader(f) if row and not row[0].startswith("#")]

columns = {columns!r}
x = [float(row[columns.index({x!r})]) for row in rows]
fig, ax = plt.subplots()
for name in {ys!r}:
    y = [float(row[columns.index(name)]) for row in rows]
    ax.plot(x, y, "o", label=name)
{reference}
ax.set_xscale({xscale!r})
ax.set_xlabel({x!r})
ax.set_title({title!r})
ax.legend()
fig.savefig({image!r}, dpi=150)
'''

_REFERENCE_TEMPLATE = '''\
grid = sorted([0.0] + x) if {linear!r} else sorted(x)
ax.plot(grid, [{intercept!r} + {slope!r} * t for t in grid], "--", label={label!r})'''


def plot_script(spec: PlotSpec) -> str:
    reference = ""
    if spec.reference is not None:
        intercept, slope, label = spec.reference
        reference = _REFERENCE_TEMPLATE.format(
            linear=not spec.logx, intercept=intercept, slope=slope, label=label
        )

    return _PLOT_TEMPLATE.format(
        title=spec.title,
        csv_name=spec.csv_name,
        columns=list(spec.columns),
        x=spec.x,
        ys=list(spec.ys),
        reference=reference,
        xscale="log" if spec.logx else "linear",
        image=Path(spec.csv_name).with_suffix(".png").name,
    )


def write_artifacts(
    out: Path,
    table: Table,
    report: Mapping[str, Any],
    plot: PlotSpec | None,
    attachments: Mapping[str, Table] | None = None,
) -> list[Path]:
    """
    Write ``results.csv``, ``report.json``, ``plot.py`` and any extra tables.

    :return: the paths written, in order

    """
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "results.csv"]
    table.write(written[0])
    for name, extra in (attachments or {}).items():
        extra.write(out / name)
        written.append(out / name)

    report_path = out / "report.json"
    report_path.write_text(
        json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append(report_path)
    if plot is not None:
        script = out / "plot.py"
        script.write_text(plot_script(plot), encoding="utf-8")
        written.append(script)

    logger.info("wrote %s", ", ".join(path.name for path in written))
    return written
