"""Report bundle: fold-summary CSVs, SVG figures and a markdown digest.

Figures are views over the summary tables. Every number drawn as a value
label is the exact string written to the companion CSV.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.ticker import MaxNLocator

from .errors import UsageError
from .fairmetrics import optimal_ratio, positive_sum
from .plotstyle import COLORS, RC, new_panel, to_svg

CURVE_HEADER = [
    "variant", "difficulty", "ratio_m", "k",
    "acc_m_mean", "acc_m_std", "acc_f_mean", "acc_f_std", "acc_overall_mean", "acc_overall_std",
    "gap_abs_mean", "gap_abs_std", "benefited",
    "rel_imp_m_mean", "rel_imp_m_std", "rel_imp_f_mean", "rel_imp_f_std", "n_folds",
]
RATIO_HEADER = [
    "variant", "difficulty", "k", "ratio_m",
    "acc_overall_mean", "acc_overall_std", "gap_abs_mean", "gap_abs_std", "n_folds",
]
IDEAL_HEADER = ["variant", "difficulty", "k", "ratio_max_overall", "ratio_min_gap", "f_share_min_gap", "coincide"]
PANELS = ("accuracy", "gap", "relimp")


def num(v: float) -> str:
    return f"{v:.4f}"


@dataclass
class ReportBundle:
    markdown: str
    svgs: dict = field(default_factory=dict)
    csvs: dict = field(default_factory=dict)

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in [("report.md", self.markdown), *sorted(self.svgs.items()), *sorted(self.csvs.items())]:
            path = out / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
        return written


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _cells(table):
    return sorted({(r.variant, r.difficulty, r.ratio_m) for r in table.records})


def cell_slug(cell) -> str:
    variant, difficulty, ratio = cell
    return f"{variant}_d{difficulty:g}_r{ratio:g}"


def curve_summary(table, cell) -> list[dict]:
    """Fold mean/std per k for one (variant, difficulty, ratio) cell; accuracies in percent."""
    variant, difficulty, ratio = cell
    by_k = defaultdict(list)
    for r in table.records:
        if (r.variant, r.difficulty, r.ratio_m) == cell:
            by_k[r.k].append(r)
    if not by_k:
        raise UsageError(f"cell {cell} not in results", "report")
    rows = []
    for k in sorted(by_k):
        rs = sorted(by_k[k], key=lambda r: r.fold)
        col = lambda name, scale=1.0: np.array([getattr(r, name) for r in rs]) * scale  # noqa: E731
        signed = float(np.mean(col("acc_m") - col("acc_f")))
        row = {"variant": variant, "difficulty": difficulty, "ratio_m": ratio, "k": k, "n_folds": len(rs)}
        for name, scale in [("acc_m", 100), ("acc_f", 100), ("acc_overall", 100), ("gap_abs", 1),
                            ("rel_imp_m", 1), ("rel_imp_f", 1)]:
            values = col(name, scale)
            row[f"{name}_mean"] = float(values.mean())
            row[f"{name}_std"] = float(values.std())
        row["benefited"] = "none" if signed == 0 else ("M" if signed > 0 else "F")
        rows.append(row)
    return rows


def _curve_csv_row(row):
    return [row["variant"], f"{row['difficulty']:g}", f"{row['ratio_m']:g}", row["k"],
            *[num(row[c]) if c.endswith(("_mean", "_std")) else row[c] for c in CURVE_HEADER[4:-1]],
            row["n_folds"]]


def _band(ax, ks, rows, name, color, label):
    mean = np.array([r[f"{name}_mean"] for r in rows])
    std = np.array([r[f"{name}_std"] for r in rows])
    (line,) = ax.plot(ks, mean, color=color, label=label, marker="o", markersize=3)
    line.set_gid(f"series-{name}")
    ax.fill_between(ks, mean - std, mean + std, color=color, alpha=0.2, linewidth=0)
    return mean


def _value_label(ax, x, y, text, color):
    t = ax.annotate(text, (x, y), xytext=(6, 0), textcoords="offset points",
                    color=color, fontsize=12, va="center")
    t.set_gid("value-label")


def emit_curves(table, cell) -> dict:
    """Accuracy, gap and relative-improvement panels vs ensemble size for one cell."""
    rows = curve_summary(table, cell)
    ks = [r["k"] for r in rows]
    title = f"{cell[0]}  difficulty={cell[1]:g}  ratio_m={cell[2]:g}"
    svgs = {}
    with plt.rc_context(RC):
        fig, ax = new_panel()
        for name, key, label in [("acc_m", "M", "M"), ("acc_f", "F", "F"), ("acc_overall", "overall", "overall")]:
            _band(ax, ks, rows, name, COLORS[key], label)
            _value_label(ax, ks[-1], rows[-1][f"{name}_mean"], num(rows[-1][f"{name}_mean"]), COLORS[key])
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
        ax.set(xlabel="ensemble size k", ylabel="accuracy (%)", title=title)
        ax.legend(loc="lower right")
        svgs["accuracy"] = to_svg(fig)

        fig, ax = new_panel()
        mean = np.array([r["gap_abs_mean"] for r in rows])
        std = np.array([r["gap_abs_std"] for r in rows])
        ax.fill_between(ks, mean - std, mean + std, color=COLORS["neutral"], alpha=0.15, linewidth=0)
        for i in range(len(ks)):
            color = COLORS.get(rows[i]["benefited"], COLORS["neutral"])
            if i + 1 < len(ks):
                ax.plot(ks[i:i + 2], mean[i:i + 2], color=color)
            ax.plot([ks[i]], [mean[i]], "o", color=color, markersize=4)
        for key in ("M", "F"):
            ax.plot([], [], color=COLORS[key], label=f"{key} ahead")
        for i in {0, len(ks) - 1}:
            _value_label(ax, ks[i], mean[i], num(mean[i]), COLORS["neutral"])
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
        ax.set(xlabel="ensemble size k", ylabel="absolute gap (accuracy points)", title=title)
        ax.legend(loc="upper right")
        svgs["gap"] = to_svg(fig)

        fig, ax = new_panel()
        for name, key in [("rel_imp_m", "M"), ("rel_imp_f", "F")]:
            _band(ax, ks, rows, name, COLORS[key], key)
            _value_label(ax, ks[-1], rows[-1][f"{name}_mean"], num(rows[-1][f"{name}_mean"]), COLORS[key])
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
        ax.set(xlabel="ensemble size k", ylabel="relative improvement (%)", title=title)
        ax.legend(loc="upper left")
        svgs["relimp"] = to_svg(fig)
    return svgs


@dataclass
class RatioAnalysis:
    ratio_svg: str
    ideal_svg: str
    ratio_rows: list
    ideal_rows: list


def _check_ratio_grid(table, variant, difficulties, k):
    present = {(r.difficulty, r.ratio_m) for r in table.records if r.variant == variant and r.k == k}
    ratios = sorted({ratio for _, ratio in present})
    if len(ratios) < 2:
        raise UsageError("need at least two ratios to locate an optimum", "report")
    missing = [(d, r) for d in difficulties for r in ratios if (d, r) not in present]
    if missing:
        listed = ", ".join(f"(difficulty={d:g}, ratio_m={r:g})" for d, r in missing)
        raise UsageError(f"incomplete grid at k={k}; missing {listed}", "report")
    return ratios


def emit_ratio_analysis(table, difficulties, k, variant=None) -> RatioAnalysis:
    """Overall accuracy and gap vs ratio per difficulty, plus the ideal-ratio table."""
    variant = variant or table.records[0].variant
    difficulties = sorted(difficulties)
    ratios = _check_ratio_grid(table, variant, difficulties, k)
    ratio_rows, ideal_rows = [], []
    for d in difficulties:
        recs = [r for r in table.records if r.variant == variant and r.difficulty == d and r.k == k]
        for ratio in ratios:
            rs = [r for r in recs if r.ratio_m == ratio]
            acc = np.array([r.acc_overall for r in rs]) * 100
            gap = np.array([r.gap_abs for r in rs])
            ratio_rows.append([variant, f"{d:g}", k, f"{ratio:g}", num(acc.mean()), num(acc.std()),
                               num(gap.mean()), num(gap.std()), len(rs)])
        opt = optimal_ratio(recs)
        ideal_rows.append([variant, f"{d:g}", k, f"{opt.ratio_max_overall:g}", f"{opt.ratio_min_gap:g}",
                           f"{1 - opt.ratio_min_gap:g}", str(opt.coincide).lower()])

    cmap = plt.get_cmap("Greens")
    shades = np.linspace(0.35, 0.95, len(difficulties))
    with plt.rc_context(RC):
        fig, (ax_acc, ax_gap) = plt.subplots(2, 1, figsize=(800 / 72, 1200 / 72), sharex=True)
        for d, shade, ideal in zip(difficulties, shades, ideal_rows):
            rows = [r for r in ratio_rows if r[1] == f"{d:g}"]
            xs = [float(r[3]) for r in rows]
            color = cmap(shade)
            ax_acc.plot(xs, [float(r[4]) for r in rows], color=color, marker="o", markersize=3, label=f"{d:g}")
            ax_gap.plot(xs, [float(r[6]) for r in rows], color=color, marker="o", markersize=3)
            ax_acc.axvline(float(ideal[3]), color=color, linestyle="--", linewidth=1)
            ax_gap.axvline(float(ideal[4]), color=color, linestyle="--", linewidth=1)
        ax_acc.set(ylabel="overall accuracy (%)", title=f"{variant}, k={k}")
        ax_acc.legend(title="difficulty", loc="lower center", ncol=4)
        ax_gap.set(xlabel="ratio_m (share of M in training)", ylabel="absolute gap (accuracy points)")
        ratio_svg = to_svg(fig)

        fig, ax = new_panel()
        xs = [float(r[1]) for r in ideal_rows]
        ax.plot(xs, [float(r[3]) for r in ideal_rows], color=COLORS["overall"], marker="o", label="max overall")
        ax.plot(xs, [float(r[4]) for r in ideal_rows], color=COLORS["neutral"], marker="s", linestyle="--", label="min gap")
        for r in ideal_rows:
            _value_label(ax, float(r[1]), float(r[4]), r[4], COLORS["neutral"])
        ax.set(xlabel="difficulty", ylabel="ideal ratio_m", ylim=(-0.05, 1.05), title=f"Ideal balance ratio, k={k}")
        ax.legend(loc="upper right")
        ideal_svg = to_svg(fig)
    return RatioAnalysis(ratio_svg, ideal_svg, ratio_rows, ideal_rows)


def build_report(table) -> ReportBundle:
    if not table.records:
        raise UsageError("results table is empty", "report")
    bundle = ReportBundle("")
    curve_rows, ratio_rows, ideal_rows = [], [], []
    md = ["# Ensemble fairness report", ""]
    if table.manifest.get("config_digest"):
        md += [f"Config digest `{table.manifest['config_digest'][:16]}`, "
               f"platform `{table.manifest.get('platform', '?')}`.", ""]
    md += ["| variant | difficulty | ratio_m | k | overall k=1 | overall k=K | gap k=1 | gap k=K | positive-sum folds |",
           "|---|---|---|---|---|---|---|---|---|"]
    for cell in _cells(table):
        rows = curve_summary(table, cell)
        curve_rows += [_curve_csv_row(r) for r in rows]
        for panel, svg in emit_curves(table, cell).items():
            bundle.svgs[f"curves_{cell_slug(cell)}_{panel}.svg"] = svg
        K = rows[-1]["k"]
        folds = defaultdict(list)
        for r in table.records:
            if (r.variant, r.difficulty, r.ratio_m) == cell:
                folds[r.fold].append(r)
        n_pos = sum(positive_sum(c, K) for c in folds.values()) if K > 1 else 0
        md.append(f"| {cell[0]} | {cell[1]:g} | {cell[2]:g} | {K} | {num(rows[0]['acc_overall_mean'])} | "
                  f"{num(rows[-1]['acc_overall_mean'])} | {num(rows[0]['gap_abs_mean'])} | "
                  f"{num(rows[-1]['gap_abs_mean'])} | {n_pos}/{len(folds)} |")
    md.append("")
    for variant in sorted({r.variant for r in table.records}):
        recs = [r for r in table.records if r.variant == variant]
        K = max(r.k for r in recs)
        difficulties = sorted({r.difficulty for r in recs})
        try:
            analysis = emit_ratio_analysis(table, difficulties, K, variant)
        except UsageError as exc:
            md += [f"Ratio analysis for {variant} skipped: {exc}", ""]
            continue
        bundle.svgs[f"ratio_analysis_{variant}_k{K}.svg"] = analysis.ratio_svg
        bundle.svgs[f"ideal_ratio_{variant}_k{K}.svg"] = analysis.ideal_svg
        ratio_rows += analysis.ratio_rows
        ideal_rows += analysis.ideal_rows
        md += [f"## Ideal balance ratio ({variant}, k={K})", "",
               "| difficulty | ratio max overall | ratio min gap | F share | coincide |", "|---|---|---|---|---|"]
        md += [f"| {r[1]} | {r[3]} | {r[4]} | {r[5]} | {r[6]} |" for r in analysis.ideal_rows]
        md.append("")
    bundle.csvs["curves.csv"] = _csv_text(CURVE_HEADER, curve_rows)
    bundle.csvs["ratio_curves.csv"] = _csv_text(RATIO_HEADER, ratio_rows)
    bundle.csvs["ideal_ratio.csv"] = _csv_text(IDEAL_HEADER, ideal_rows)
    md += ["Files: " + ", ".join(sorted([*bundle.svgs, *bundle.csvs])), ""]
    bundle.markdown = "\n".join(md)
    return bundle
