"""Experiment driver: workload sweeps, the analytics-count and
qualified-data-distribution experiments, and report emission (CSV, SVG
heatmap, text table, recommendation table).

The sweep grid statistics follow the cross-pattern comparison scheme: per
cell, the sample standard deviation of the per-pattern mean makespans, then
a min-max normalization of those deviations into [0, 1] across the grid
("gray value": 0 where patterns agree most, 1 where they differ most), plus
an optimal-pattern label with an epsilon tie rule.
"""

import concurrent.futures
import csv
import io
import math
import os
import statistics
from dataclasses import dataclass, field

from .costmodel import label_for_means, predict, preset_profile, recommend
from .errors import ConfigurationError
from .orchestrator import run_pattern
from .workload import MIB, PATTERNS, WorkloadSpec

DEFAULT_QUALIFIED_PCTS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
DEFAULT_SIZES_MIB = (8, 16, 32, 64, 128)

#: Representative (q, size-MiB) points for the four quadrant rows of the
#: summary table. The desk grid is the reference grid scaled down 4x, so
#: 16 MiB stands in for the small-size half and 128 MiB for the large half.
QUADRANT_POINTS = (
    ("<=50% qualified, <=128MB", 0.2, 16),
    ("<=50% qualified, >128MB", 0.2, 128),
    (">50% qualified, <=128MB", 0.8, 16),
    (">50% qualified, >128MB", 0.8, 128),
)

SWEEP_CSV_COLUMNS = (
    "preset", "pattern", "qualified_pct", "size_bytes", "steps", "instances",
    "pool", "rep", "makespan_ms", "bytes_transferred", "analyses_completed",
)

GRID_CSV_COLUMNS = (
    "qualified_pct", "size_bytes", "std_ms", "gray", "label",
    "mean_p_ms", "mean_c_ms", "mean_m_ms",
)


@dataclass
class SweepRow:
    preset: str
    pattern: str
    qualified_pct: float
    size_bytes: int
    steps: int
    instances: int
    pool: int
    rep: int
    makespan_ms: float
    bytes_transferred: int
    analyses_completed: int


@dataclass
class CellResult:
    qualified_pct: float
    size_bytes: int
    means_ms: dict
    std_ms: float = 0.0
    gray: float = 0.0
    label: str = ""
    error: str = None


@dataclass
class SweepGrid:
    qualified_pcts: tuple
    sizes_bytes: tuple
    cells: list
    epsilon: float = 0.05

    def cell(self, qualified_pct, size_bytes):
        for c in self.cells:
            if c.qualified_pct == qualified_pct and c.size_bytes == size_bytes:
                return c
        raise KeyError((qualified_pct, size_bytes))


def _run_once(workload, pattern, mode):
    if mode == "predict":
        return predict(workload, pattern)
    return run_pattern(workload, pattern)


def run_cell(workload, mode="live"):
    """All patterns x repetitions for one workload; returns (means, rows)."""
    reps = 1 if mode == "predict" else workload.repetitions
    means = {}
    rows = []
    for pattern in workload.patterns:
        samples = []
        for rep in range(reps):
            report = _run_once(workload, pattern, mode)
            samples.append(report.makespan_ms)
            rows.append(SweepRow(
                preset=workload.preset,
                pattern=pattern,
                qualified_pct=workload.qualified_pct,
                size_bytes=workload.payload_bytes,
                steps=workload.steps,
                instances=workload.instances,
                pool=workload.pool,
                rep=rep,
                makespan_ms=report.makespan_ms,
                bytes_transferred=report.bytes_transferred,
                analyses_completed=report.analyses_completed,
            ))
        means[pattern] = sum(samples) / len(samples)
    return means, rows


def cross_pattern_std(means):
    """Sample standard deviation over the 2-3 per-pattern means."""
    values = list(means.values())
    if len(values) < 2:
        return 0.0
    return statistics.stdev(values)


def normalize_gray(stds):
    """Min-max map into [0, 1]; a grid without spread maps to all zeros."""
    lo, hi = min(stds), max(stds)
    if math.isclose(lo, hi):
        return [0.0 for _ in stds]
    return [(s - lo) / (hi - lo) for s in stds]


def run_sweep(base, qualified_pcts=DEFAULT_QUALIFIED_PCTS,
              sizes_mib=DEFAULT_SIZES_MIB, mode="live", epsilon=0.05,
              parallel_cells=False):
    """Sweep qualified-% x payload-size; label each cell.

    A failing cell records its diagnostic and the sweep continues.
    ``parallel_cells`` is allowed only in predict mode, where runs are pure.
    """
    if parallel_cells and mode != "predict":
        raise ConfigurationError("--parallel-cells is only valid in predict mode")
    cells = []
    all_rows = []
    specs = [
        (q, int(s * MIB), base.replace(qualified_pct=q, payload_bytes=int(s * MIB)))
        for s in sizes_mib for q in qualified_pcts
    ]

    def one(args):
        q, size_bytes, workload = args
        try:
            means, rows = run_cell(workload, mode)
            return CellResult(q, size_bytes, means), rows
        except Exception as exc:
            return CellResult(q, size_bytes, {}, error=f"{type(exc).__name__}: {exc}"), []

    if parallel_cells:
        with concurrent.futures.ThreadPoolExecutor(
                max_workers=min(8, os.cpu_count() or 2)) as pool:
            results = list(pool.map(one, specs))
    else:
        results = [one(s) for s in specs]
    for cell, rows in results:
        cells.append(cell)
        all_rows.extend(rows)

    good = [c for c in cells if not c.error]
    stds = [cross_pattern_std(c.means_ms) for c in good]
    grays = normalize_gray(stds) if good else []
    for c, s, g in zip(good, stds, grays):
        c.std_ms = s
        c.gray = g
        c.label = label_for_means(c.means_ms, epsilon)
    grid = SweepGrid(tuple(qualified_pcts),
                     tuple(int(s * MIB) for s in sizes_mib), cells, epsilon)
    grid.rows = all_rows
    return grid


def run_analytics_count_experiment(base, k_values, mode="live"):
    """Makespan per pattern as the number of triggered analytics grows."""
    series = {}
    for k in k_values:
        means, _ = run_cell(base.replace(instances=int(k)), mode)
        series[int(k)] = means
    return series


def run_distribution_experiment(base, blocks=((1, 5), (6, 10), (11, 15),
                                              (16, 20), (21, 25)),
                                mode="live"):
    """Makespan per pattern for block-shaped qualified-data distributions."""
    series = {}
    for first, last in blocks:
        pct = (last - first + 1) / base.steps
        workload = base.replace(distribution=f"block:{first}-{last}",
                                qualified_pct=pct)
        means, _ = run_cell(workload, mode)
        series[(first, last)] = means
    return series


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def sweep_rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_CSV_COLUMNS)
    for r in rows:
        w.writerow([r.preset, r.pattern, repr(r.qualified_pct), r.size_bytes,
                    r.steps, r.instances, r.pool, r.rep, repr(r.makespan_ms),
                    r.bytes_transferred, r.analyses_completed])
    return buf.getvalue()


def grid_to_csv(grid):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GRID_CSV_COLUMNS)
    for c in sorted(grid.cells, key=lambda c: (c.size_bytes, c.qualified_pct)):
        w.writerow([
            repr(c.qualified_pct), c.size_bytes, repr(c.std_ms), repr(c.gray),
            c.label if not c.error else f"error:{c.error}",
            repr(c.means_ms["P"]) if "P" in c.means_ms else "",
            repr(c.means_ms["C"]) if "C" in c.means_ms else "",
            repr(c.means_ms["M"]) if "M" in c.means_ms else "",
        ])
    return buf.getvalue()


def grid_from_csv(text, epsilon=0.05):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != GRID_CSV_COLUMNS:
        raise ConfigurationError(f"unexpected grid CSV header {header}")
    cells = []
    for row in reader:
        means = {}
        for pattern, value in zip(PATTERNS, row[5:8]):
            if value:
                means[pattern] = float(value)
        label = row[4]
        error = None
        if label.startswith("error:"):
            error = label[len("error:"):]
            label = ""
        cells.append(CellResult(
            qualified_pct=float(row[0]), size_bytes=int(row[1]),
            means_ms=means, std_ms=float(row[2]), gray=float(row[3]),
            label=label, error=error,
        ))
    qs = tuple(sorted({c.qualified_pct for c in cells}))
    sizes = tuple(sorted({c.size_bytes for c in cells}))
    return SweepGrid(qs, sizes, cells, epsilon)


def grid_to_svg(grid):
    """Deterministic grayscale heatmap, label text overlaid per cell."""
    if not grid.cells:
        raise ConfigurationError("cannot render an empty grid")
    qs = sorted(grid.qualified_pcts)
    sizes = sorted(grid.sizes_bytes, reverse=True)
    cw, ch = 96, 56
    left, top, right, bottom = 86, 30, 16, 54
    width = left + cw * len(qs) + right
    height = top + ch * len(sizes) + bottom
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="13">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    by_key = {(c.qualified_pct, c.size_bytes): c for c in grid.cells}
    for row_i, size in enumerate(sizes):
        y = top + row_i * ch
        parts.append(
            f'<text x="{left - 8}" y="{y + ch / 2 + 4:g}" text-anchor="end">'
            f'{size // MIB}MiB</text>'
        )
        for col_i, q in enumerate(qs):
            x = left + col_i * cw
            cell = by_key.get((q, size))
            if cell is None:
                continue
            if cell.error:
                fill, text, tcolor = "#ffdddd", "ERR", "#aa0000"
            else:
                lum = int(round(40 + 215 * cell.gray))
                fill = f"#{lum:02x}{lum:02x}{lum:02x}"
                text = cell.label
                tcolor = "#000000" if cell.gray > 0.5 else "#ffffff"
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" '
                f'stroke="#808080"/>'
            )
            parts.append(
                f'<text x="{x + cw / 2:g}" y="{y + ch / 2 + 4:g}" text-anchor="middle" '
                f'fill="{tcolor}">{text}</text>'
            )
    for col_i, q in enumerate(qs):
        x = left + col_i * cw
        parts.append(
            f'<text x="{x + cw / 2:g}" y="{height - bottom + 20}" '
            f'text-anchor="middle">{int(round(q * 100))}%</text>'
        )
    parts.append(
        f'<text x="{left + cw * len(qs) / 2:g}" y="{height - bottom + 40}" '
        f'text-anchor="middle">qualified data (%)</text>'
    )
    parts.append('</svg>')
    return "\n".join(parts) + "\n"


def grid_to_text(grid):
    if not grid.cells:
        raise ConfigurationError("cannot render an empty grid")
    qs = sorted(grid.qualified_pcts)
    sizes = sorted(grid.sizes_bytes, reverse=True)
    by_key = {(c.qualified_pct, c.size_bytes): c for c in grid.cells}
    colw = 11
    lines = []
    header = "size \\ q".rjust(10) + "".join(
        f"{int(round(q * 100))}%".rjust(colw) for q in qs
    )
    lines.append(header)
    for size in sizes:
        row = f"{size // MIB:>7}MiB"
        for q in qs:
            cell = by_key.get((q, size))
            if cell is None:
                row += "-".rjust(colw)
            elif cell.error:
                row += "ERR".rjust(colw)
            else:
                row += f"{cell.label}({cell.gray:.2f})".rjust(colw)
        lines.append(row)
    return "\n".join(lines) + "\n"


def emit_report(grid, fmt, out_dir, stem="grid"):
    """Write one report artifact; deterministic bytes for identical inputs."""
    if not grid.cells:
        raise ConfigurationError("nothing to report: empty grid")
    renderers = {
        "csv": (grid_to_csv, ".csv"),
        "svg-heatmap": (grid_to_svg, ".svg"),
        "text-table": (grid_to_text, ".txt"),
    }
    if fmt not in renderers:
        raise ConfigurationError(f"unknown report format {fmt!r}")
    render, suffix = renderers[fmt]
    content = render(grid)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, stem + suffix)
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(content)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    paths = [path]
    if getattr(grid, "rows", None) and fmt == "csv":
        rows_path = os.path.join(out_dir, stem + "_runs.csv")
        with open(rows_path, "w", encoding="utf-8") as f:
            f.write(sweep_rows_to_csv(grid.rows))
        paths.append(rows_path)
    return paths


def table_one_analog(base=None, epsilon=0.05):
    """Predicted best-pattern labels in the summary-table layout:
    (factor, setting A choice, setting B choice) rows."""
    base = base or WorkloadSpec(steps=20, repetitions=1)
    rows = []
    for factor, q, size_mib in QUADRANT_POINTS:
        labels = {}
        for preset in ("a", "b"):
            workload = base.replace(preset=preset, qualified_pct=q,
                                    payload_bytes=int(size_mib * MIB))
            labels[preset] = recommend(workload, similarity_epsilon=epsilon).label
        rows.append((factor, labels["a"], labels["b"]))
    return rows


def table_one_text(rows):
    lines = [f"{'factor':<28}{'setting A':<12}{'setting B':<12}"]
    for factor, a, b in rows:
        lines.append(f"{factor:<28}{a:<12}{b:<12}")
    return "\n".join(lines) + "\n"
