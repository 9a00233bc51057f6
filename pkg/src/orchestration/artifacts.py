from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import orjson
import pandas as pd
from pydantic import BaseModel

from .schemas import ArtifactRef

logger = logging.getLogger(__name__)

_PREAMBLE = """set datafile separator ","
set key autotitle columnhead
set terminal pngcairo size 900,700
set output "{png}"
set title "{title}"
"""

GNUPLOT_TEMPLATES = {
    "plane": """set xlabel "u"
set ylabel "v"
set cblabel "log train loss"
set view map
plot "{csv}" using 1:2:(log($3)) with image notitle
""",
    "ray": """set xlabel "distance"
set ylabel "train loss"
plot "{csv}" using 3:4 with points pt 7 ps 0.5 title "train loss"
""",
    "segment": """set xlabel "t (0 = first endpoint, 1 = second)"
set ylabel "train loss"
set y2label "test error"
set y2tics
plot "{csv}" using 1:3 with linespoints title "train loss", \\
     "{csv}" using 1:4 axes x1y2 with linespoints title "test error"
""",
    "ensemble": """set style fill solid 0.5
set boxwidth 0.6
set ylabel "mean prediction distance"
set xtics rotate by -45
plot "{csv}" using 2:xtic(1) with boxes notitle
""",
    "curve": """set xlabel "iteration"
set ylabel "test error"
plot "{csv}" using 1:5 with lines title "SGD", \\
     "{csv}" using 1:6 with lines title "SWA"
""",
    "quad": """set logscale xy
set xlabel "averaged iterates k"
set ylabel "distance to optimum"
plot "{csv}" using 1:2 with linespoints title "running average", \\
     "{csv}" using 1:3 with lines title "raw iterate rms"
""",
}


def write_csv(df: pd.DataFrame, out_dir: str | Path, name: str, description: Optional[str] = None) -> ArtifactRef:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"{name}.csv"
    df.to_csv(path, index=False)
    return ArtifactRef(
        path=str(path),
        format="csv",
        rows=int(len(df)),
        columns=[str(c) for c in df.columns],
        description=description,
    )


def write_gnuplot(kind: str, table: ArtifactRef, title: Optional[str] = None) -> ArtifactRef:
    """Plot script next to `table`; it reads the CSV by file name so the pair can be moved together."""
    if kind not in GNUPLOT_TEMPLATES:
        raise KeyError(f"no gnuplot template {kind!r}")
    csv_path = Path(table.path)
    script = csv_path.with_suffix(".gp")
    body = _PREAMBLE.format(png=csv_path.with_suffix(".png").name, title=title or csv_path.stem)
    body += GNUPLOT_TEMPLATES[kind].format(csv=csv_path.name)
    script.write_text(body, encoding="utf-8")
    return ArtifactRef(path=str(script), format="gnuplot", description=f"gnuplot script for {csv_path.name}")


def write_json(model: BaseModel, path: str | Path) -> ArtifactRef:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(orjson.dumps(model.model_dump(mode="json"), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))
    logger.debug("JSON written | path=%s", p)
    return ArtifactRef(path=str(p), format="json")
