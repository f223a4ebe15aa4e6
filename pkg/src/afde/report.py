"""Report emission: JSON (always), flattened CSV series and log-log SVG plots.

SVG output is deterministic: fixed hash salt, no date metadata, text kept as
text rather than glyph paths.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

# (x path, y path, fit key, target exponent key in the verdict threshold)
PLOTS = {
    "smoothing": [("t", "sup", "sup_slope"), ("t", "width_1", "width_slope_1"), ("t", "width_2", "width_slope_2"), ("t", "width_3", "width_slope_3")],
    "profile_tail": [("tail_axis_1/y", "tail_axis_1/F", "tail_exponent_1"), ("tail_axis_2/y", "tail_axis_2/F", "tail_exponent_2"),
                     ("tail_axis_3/y", "tail_axis_3/F", "tail_exponent_3")],
    "ghp": [("bump/t", "bump/C1", None), ("bump/t", "bump/C2", None), ("exact/t", "exact/C2", None), ("delayed/t", "delayed/C2", None)],
    "acre": [("bump/t", "bump/E", "bump_E"), ("delayed/t", "delayed/E", "delayed_E"), ("bump/t", "bump/E_core", "bump_E_core")],
    "rates_semigroup": [("bump/t", "bump/L1", None), ("bump/t", "bump/L2", None)],
    "local_mass": [("t", "X", None), ("t", "bound", None)],
}


def report_stem(name: str, config_sha: str) -> str:
    return f"{name}-{config_sha[:12]}"


def write_json(d: dict, path: Path) -> Path:
    path.write_text(json.dumps(d, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def _lookup(series: dict, key: str):
    cur = series
    for part in key.split("/"):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur


def _flat_series(series: dict, prefix: str = "") -> dict[str, list]:
    out = {}
    for k, v in series.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flat_series(v, name + "/"))
        elif isinstance(v, list) and v and all(isinstance(x, (int, float)) for x in v):
            out[name] = v
    return out


def write_csv(d: dict, path: Path) -> Path:
    """Long format: series,index,value (one row per sample)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "index", "value"])
        for name, vals in sorted(_flat_series(d.get("series", {})).items()):
            for i, v in enumerate(vals):
                w.writerow([name, i, repr(float(v))])
    return path


def _plot_items(d: dict):
    for xk, yk, fk in PLOTS.get(d["name"], []):
        x, y = _lookup(d["series"], xk), _lookup(d["series"], yk)
        if x is None or y is None:
            continue
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = (x > 0) & (y > 0)
        if ok.sum() < 2:
            continue
        yield xk, yk, x[ok], y[ok], d.get("fits", {}).get(fk) if fk else None, d.get("verdicts", {}).get(fk) if fk else None


def write_svg(d: dict, path: Path) -> Optional[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    items = list(_plot_items(d))
    if not items:
        return None
    with matplotlib.rc_context({"svg.hashsalt": "afde", "svg.fonttype": "none", "font.size": 9}):
        fig, axes = plt.subplots(1, len(items), figsize=(3.6 * len(items), 3.2), squeeze=False)
        for ax, (xk, yk, x, y, fit, verdict) in zip(axes[0], items):
            ax.loglog(x, y, "o", ms=3, label=yk)
            if fit is not None:
                xs = np.geomspace(fit["window"][0], fit["window"][1], 50)
                ax.loglog(xs, np.exp(fit["intercept"]) * xs ** fit["exponent"], "-", lw=1, label=f"slope {fit['exponent']:.4g}")
                thr = verdict.get("threshold") if verdict else None
                if isinstance(thr, dict) and "target" in thr and "rel_tol" in thr:
                    # tolerance band around the target slope, pinned at the window centre
                    xc = math.sqrt(xs[0] * xs[-1])
                    yc = math.exp(fit["intercept"]) * xc ** fit["exponent"]
                    lo = yc * (xs / xc) ** (thr["target"] * (1 - thr["rel_tol"]))
                    hi = yc * (xs / xc) ** (thr["target"] * (1 + thr["rel_tol"]))
                    ax.fill_between(xs, np.minimum(lo, hi), np.maximum(lo, hi), alpha=0.2, lw=0, label=f"target {thr['target']:.4g}")
            ax.set_xlabel(xk.split("/")[-1])
            ax.set_title(yk, fontsize=9)
            ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return path


def emit_report(d: dict, out_dir, config_sha: str, formats: Iterable[str] = ("json",)) -> list[Path]:
    """Write the report; JSON is always written. Returns the files produced."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = report_stem(d["name"], config_sha)
    d = {**d, "config_sha256": config_sha}
    files = [write_json(d, out / f"{stem}.json")]
    formats = set(formats)
    if "csv" in formats:
        files.append(write_csv(d, out / f"{stem}.csv"))
    if "svg" in formats:
        p = write_svg(d, out / f"{stem}.svg")
        if p is not None:
            files.append(p)
    return files


def format_text(d: dict) -> str:
    lines = [f"{d['name']}: {'PASS' if d.get('passed') else 'FAIL'}"]
    for k, v in d.get("verdicts", {}).items():
        lines.append(f"  [{'PASS' if v['passed'] else 'FAIL'}] {k}: measured={_short(v['measured'])} threshold={_short(v['threshold'])}"
                     + (f"  ({v['note']})" if v.get("note") else ""))
    for k, f in d.get("fits", {}).items():
        lines.append(f"  fit {k}: exponent={f['exponent']:.6g} residual={f['residual']:.3g} window={f['window']}")
    return "\n".join(lines)


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_short(x)}" for k, x in v.items()) + "}"
    if isinstance(v, list):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)
