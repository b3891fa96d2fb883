"""Minimal static SVG renderings of a report directory.

Three figures, built straight from the report CSVs with no other state so
identical reports yield byte-identical files:

    error_densities.svg    estimated error densities per scenario, each
                           approach variant against the true distribution
    accuracy_summary.svg   MAE-of-means and KS statistic dot panels per
                           approach variant
    decomposition.svg      mean absolute decomposition components per scenario

The SVG is hand assembled (fixed coordinate formatting, no timestamps or
generated ids) to keep output deterministic.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ConfigError

WIDTH, HEIGHT = 860.0, 420.0
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70.0, 20.0, 46.0, 50.0

VARIANT_ORDER = (
    ("1", "plausible", "#30609e"),
    ("2", "no_covariate", "#8fce8f"),
    ("2", "covariate", "#2c7a2c"),
    ("3", "no_covariate", "#e89c9c"),
    ("3", "covariate", "#b03030"),
)
TRUE_COLOR = "#555555"


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        raise ConfigError(f"missing report file {path.name}", str(path))
    with open(path, encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def _svg_document(body: list[str], title: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:g}" '
        f'height="{HEIGHT:g}" viewBox="0 0 {WIDTH:g} {HEIGHT:g}">\n'
        f'<rect width="{WIDTH:g}" height="{HEIGHT:g}" fill="white"/>\n'
        f'<text x="{WIDTH / 2:g}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _polyline(xs, ys, color: str, width: float = 1.6) -> str:
    points = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    return (f'<polyline fill="none" stroke="{color}" '
            f'stroke-width="{width:g}" points="{points}"/>')


def _text(x: float, y: float, label: str, size: int = 11,
          anchor: str = "middle", color: str = "#000000") -> str:
    return (f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="{anchor}" '
            f'font-family="sans-serif" font-size="{size}" '
            f'fill="{color}">{label}</text>')


def _density(samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Gaussian kernel density on a fixed grid (Silverman bandwidth)."""
    sd = samples.std()
    if sd == 0 or samples.size < 2:
        # Degenerate: a spike at the common value.
        out = np.zeros_like(grid)
        out[np.argmin(np.abs(grid - samples.mean()))] = 1.0
        return out
    bandwidth = 0.9 * sd * samples.size ** (-0.2)
    # Histogram the samples first so huge sample vectors stay cheap.
    edges = np.linspace(grid[0], grid[-1], 201)
    counts, _ = np.histogram(samples, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    z = (grid[:, None] - centers[None, :]) / bandwidth
    dens = (np.exp(-0.5 * z * z) @ counts) / (samples.size * bandwidth * np.sqrt(2 * np.pi))
    return dens


def _true_error_table(report_dir: Path) -> dict:
    """Recompute true errors per (model, scenario) from the data CSVs."""
    counterfactual = {}
    for row in _read_csv(report_dir / "world.csv"):
        if row["x_kind"].startswith("scenario"):
            counterfactual[(int(row["location_id"]), row["x_kind"])] = float(row["y_value"])
    errors: dict = {}
    for row in _read_csv(report_dir / "projections.csv"):
        kind = row["x_kind"]
        if not kind.startswith("scenario"):
            continue
        key = (int(row["model_id"]), kind)
        value = float(row["y_projected"]) - counterfactual[(int(row["location_id"]), kind)]
        errors.setdefault(key, []).append(value)
    return {key: np.asarray(vals) for key, vals in errors.items()}


def _scenario_kinds(true_errors: dict) -> list[str]:
    kinds = sorted({kind for _, kind in true_errors}, key=_scenario_sort_key)
    return kinds


def _scenario_sort_key(kind: str):
    order = {"scenario_low": 0, "scenario_high": 1}
    if kind in order:
        return (order[kind], kind)
    return (int(kind.rsplit("_", 1)[1]), kind)


def _scenario_kind_for_index(index: int, kinds: list[str]) -> str:
    return kinds[index]


def plot_error_densities(report_dir: Path, out_path: Path) -> None:
    estimates = _read_csv(report_dir / "approach_estimates.csv")
    true_errors = _true_error_table(report_dir)
    kinds = _scenario_kinds(true_errors)
    n_panels = len(kinds)

    # Pooled estimate summaries approximate each variant's density through a
    # Normal with the pooled mean and quantile-implied spread per model, then
    # averaged over models. That keeps this plot a pure function of the CSVs.
    body = []
    panel_w = (WIDTH - MARGIN_L - MARGIN_R) / n_panels
    all_true = np.concatenate(list(true_errors.values()))
    lo = float(all_true.min()) - 0.05
    hi = float(all_true.max()) + 0.05
    grid = np.linspace(lo, hi, 241)

    for panel, kind in enumerate(kinds):
        x0 = MARGIN_L + panel * panel_w
        x1 = x0 + panel_w - 30.0
        y0, y1 = HEIGHT - MARGIN_B, MARGIN_T + 16.0

        def to_x(v):
            return x0 + (v - lo) / (hi - lo) * (x1 - x0)

        curves = []
        truth = np.concatenate([vals for (m, k), vals in true_errors.items()
                                if k == kind])
        curves.append((TRUE_COLOR, _density(truth, grid), "true"))
        for approach, variant, color in VARIANT_ORDER:
            rows = [r for r in estimates
                    if r["approach"] == approach and r["variant"] == variant
                    and r["location_id"] == "-1"
                    and _scenario_kind_for_index(int(r["scenario_index"]), kinds) == kind]
            if not rows:
                if approach == "1":
                    body.append(_text((x0 + x1) / 2, (y0 + y1) / 2,
                                      "no plausible locations (approach 1)",
                                      size=12, color="#30609e"))
                continue
            # Normal mixture over models from (mean, q05, q95).
            mixture = np.zeros_like(grid)
            for r in rows:
                mean = float(r["mean"])
                spread = (float(r["q95"]) - float(r["q05"])) / 3.29
                if spread <= 0:
                    spread = (hi - lo) / 200.0
                z = (grid - mean) / spread
                mixture += np.exp(-0.5 * z * z) / (spread * np.sqrt(2 * np.pi))
            curves.append((color, mixture / len(rows), f"{approach}:{variant}"))

        peak = max(float(c.max()) for _, c, _ in curves) or 1.0
        for color, dens, _ in curves:
            ys = y0 - dens / peak * (y0 - y1)
            body.append(_polyline([to_x(v) for v in grid], ys, color))
        body.append(_polyline([x0, x1], [y0, y0], "#000000", 1.0))
        body.append(_text((x0 + x1) / 2, y0 + 18, kind, size=12))
        body.append(_text((x0 + x1) / 2, y0 + 34, "estimated error", size=10))
        for tick in np.linspace(lo, hi, 5):
            body.append(_text(to_x(tick), y0 + 10, f"{tick:.2f}", size=8))

    legend_y = MARGIN_T
    body.append(_text(MARGIN_L, legend_y, "true", 10, "start", TRUE_COLOR))
    offset = MARGIN_L + 50
    for approach, variant, color in VARIANT_ORDER:
        body.append(_text(offset, legend_y, f"{approach}:{variant}", 10, "start", color))
        offset += 120
    out_path.write_text(_svg_document(body, "Estimated error distributions by scenario"),
                        encoding="utf-8")


def plot_accuracy_summary(report_dir: Path, out_path: Path) -> None:
    rows = _read_csv(report_dir / "report.csv")
    body = []
    panels = (("mae_of_means", "MAE of means"), ("ks_d", "KS statistic"))
    panel_w = (WIDTH - MARGIN_L - MARGIN_R) / len(panels)
    slots = {(a, v): k for k, (a, v, _) in enumerate(VARIANT_ORDER)}
    colors = {(a, v): c for a, v, c in VARIANT_ORDER}

    for p, (column, label) in enumerate(panels):
        x0 = MARGIN_L + p * panel_w
        x1 = x0 + panel_w - 40.0
        y0, y1 = HEIGHT - MARGIN_B, MARGIN_T + 16.0
        values = [float(r[column]) for r in rows if r[column] != ""]
        if not values:
            continue
        vmax = max(values) * 1.15 or 1.0

        def to_y(v):
            return y0 - v / vmax * (y0 - y1)

        for r in rows:
            if r[column] == "":
                continue
            slot = slots.get((r["approach"], r["variant"]))
            if slot is None:
                continue
            x = x0 + (slot + 0.5) / len(VARIANT_ORDER) * (x1 - x0)
            jitter = (int(r["model_id"]) - 4.5) * 2.2 + int(r["scenario_index"]) * 1.1
            body.append(f'<circle cx="{_fmt(x + jitter)}" cy="{_fmt(to_y(float(r[column])))}" '
                        f'r="3" fill="{colors[(r["approach"], r["variant"])]}" '
                        f'fill-opacity="0.65"/>')
        if column == "ks_d":
            crits = [float(r["ks_critical"]) for r in rows if r["ks_critical"] != ""]
            if crits:
                crit = float(np.median(crits))
                body.append(_polyline([x0, x1], [to_y(crit), to_y(crit)], "#000000", 1.0))
                body.append(_text(x1, to_y(crit) - 5, "critical (5%)", 9, "end"))
        body.append(_polyline([x0, x1], [y0, y0], "#000000", 1.0))
        for k, (a, v, c) in enumerate(VARIANT_ORDER):
            x = x0 + (k + 0.5) / len(VARIANT_ORDER) * (x1 - x0)
            body.append(_text(x, y0 + 14, f"{a}", 10, "middle", c))
            body.append(_text(x, y0 + 27, v.replace("_", " "), 8, "middle", c))
        body.append(_text((x0 + x1) / 2, y1 - 8, label, 12))
        for tick in np.linspace(0, vmax, 5):
            body.append(_text(x0 - 6, to_y(tick) + 3, f"{tick:.3f}", 8, "end"))
    out_path.write_text(_svg_document(body, "Approach accuracy per (model, scenario)"),
                        encoding="utf-8")


def plot_decomposition(report_dir: Path, out_path: Path) -> None:
    rows = _read_csv(report_dir / "decomposition.csv")
    body = []
    scenarios = sorted({int(r["scenario_index"]) for r in rows})
    components = (("calibration_error", "#30609e"), ("scenario_spec_error", "#c05090"),
                  ("observed_deviation", "#777777"), ("total_error", "#202020"))
    panel_w = (WIDTH - MARGIN_L - MARGIN_R) / max(len(scenarios), 1)
    values = {}
    for j in scenarios:
        sub = [r for r in rows if int(r["scenario_index"]) == j]
        values[j] = [float(np.mean([abs(float(r[name])) for r in sub]))
                     for name, _ in components]
    vmax = max(max(v) for v in values.values()) * 1.2 or 1.0
    y0, y1 = HEIGHT - MARGIN_B, MARGIN_T + 16.0
    for p, j in enumerate(scenarios):
        x0 = MARGIN_L + p * panel_w
        x1 = x0 + panel_w - 50.0
        bar_w = (x1 - x0) / len(components) * 0.7
        for k, ((name, color), value) in enumerate(zip(components, values[j])):
            x = x0 + (k + 0.15) / len(components) * (x1 - x0)
            h = value / vmax * (y0 - y1)
            body.append(f'<rect x="{_fmt(x)}" y="{_fmt(y0 - h)}" '
                        f'width="{_fmt(bar_w)}" height="{_fmt(h)}" fill="{color}"/>')
            body.append(_text(x + bar_w / 2, y0 + 12,
                              name.replace("_error", "").replace("_", " "), 8))
            body.append(_text(x + bar_w / 2, y0 - h - 4, f"{value:.3f}", 8))
        body.append(_polyline([x0, x1], [y0, y0], "#000000", 1.0))
        body.append(_text((x0 + x1) / 2, y0 + 30, f"scenario {j}", 11))
    out_path.write_text(_svg_document(body, "Mean absolute error decomposition"),
                        encoding="utf-8")


def plot_report_dir(report_dir, out_dir=None) -> list[Path]:
    """Render all three figures; returns the written paths."""
    report_dir = Path(report_dir)
    out = Path(out_dir) if out_dir is not None else report_dir
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, fn in (("error_densities.svg", plot_error_densities),
                     ("accuracy_summary.svg", plot_accuracy_summary),
                     ("decomposition.svg", plot_decomposition)):
        path = out / name
        fn(report_dir, path)
        written.append(path)
    return written
