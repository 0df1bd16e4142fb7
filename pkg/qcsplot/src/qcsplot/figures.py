"""Figure renderers for qcslab result directories.

This package never recomputes science: it reads the documented CSV schemas
and draws.  Rendering is deterministic - fixed figure geometry, the Agg
backend, and a checksum of the consumed inputs embedded in the PNG metadata
and recorded in a manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (6.0, 4.0)
DPI = 150

QS_COLOR = "#c44e52"
QCS_COLOR = "#4c72b0"
ARCH_COLORS = {"R": "#ffcc00", "T": "#cbdaf1", "S": "#829fca", "ST": "#2c5aa0"}


class SchemaError(ValueError):
    pass


def read_results(rundir: Path) -> list[dict]:
    path = rundir / "results.csv"
    if not path.exists():
        raise SchemaError(f"missing results.csv in {rundir}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    required = {"protocol", "L", "S", "metric", "value"}
    if rows and not required.issubset(rows[0]):
        missing = sorted(required - set(rows[0]))
        raise SchemaError(f"results.csv missing columns: {missing}")
    return rows


def input_checksum(rundir: Path, names: list[str]) -> str:
    digest = hashlib.sha256()
    for name in sorted(names):
        digest.update(name.encode())
        digest.update((rundir / name).read_bytes())
    return digest.hexdigest()


def _save(fig, out_path: Path, checksum: str) -> None:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(
        out_path,
        dpi=DPI,
        format="png",
        metadata={"Software": "qcsplot", "qcslab-input-sha256": checksum},
    )
    plt.close(fig)


def _grouped(rows, metric, protocol=None):
    out = {}
    for row in rows:
        if row["metric"] != metric:
            continue
        if protocol and row["protocol"] != protocol:
            continue
        key = (row["protocol"], int(row["L"]), row["task"], row["extra"])
        out.setdefault(key, []).append(float(row["value"]))
    return out


def _require(rows, metric):
    if not any(r["metric"] == metric for r in rows):
        raise SchemaError(f"no rows with metric column value {metric!r}")


# ---------------------------------------------------------------------------
# renderers, one per recipe
# ---------------------------------------------------------------------------


def render_fig1f(rundir: Path, outdir: Path) -> list[Path]:
    rows = read_results(rundir)
    _require(rows, "bayes_error")
    groups = _grouped(rows, "bayes_error")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    qs = [v for (p, _, _, _), vals in groups.items() if p == "QS" for v in vals]
    if qs:
        ax.axhline(qs[0], color=QS_COLOR, ls="--", label="QS (Bayes, S = N)")
    ls, best, spread = [], [], []
    for (p, l, _, _), vals in sorted(groups.items()):
        if p != "QCS":
            continue
        ls.append(l)
        best.append(min(vals))
        spread.append(np.std(vals))
    ax.errorbar(ls, best, yerr=spread, color=QCS_COLOR, marker="o",
                label="QCS (best of restarts)")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("processing layers L (N fixed, S = N/L)")
    ax.set_ylabel("classification error")
    ax.legend()
    ax.set_title("single-qubit region task: error vs circuit depth")
    out = outdir / "fig1f_error_vs_L.png"
    _save(fig, out, input_checksum(rundir, ["results.csv"]))
    return [out]


def _render_decision_map(rundir: Path, outdir: Path, name: str) -> list[Path]:
    grid_path = rundir / "decision_grid.csv"
    if not grid_path.exists():
        return []
    with open(grid_path, newline="") as fh:
        grows = list(csv.DictReader(fh))
    pts_path = rundir / "test_points.csv"
    with open(pts_path, newline="") as fh:
        prows = list(csv.DictReader(fh))
    t1 = np.array([float(r["theta1"]) for r in grows])
    t2 = np.array([float(r["theta2"]) for r in grows])
    n = int(np.sqrt(len(t1)))
    outs = []
    for col in ("qs_pred", "qcs_pred"):
        pred = np.array([float(r[col]) for r in grows]).reshape(n, n)
        fig, ax = plt.subplots(figsize=(4.5, 4.0))
        ax.imshow(
            pred.T, origin="lower", extent=[t1.min(), t1.max(), t2.min(), t2.max()],
            cmap="coolwarm", alpha=0.55, interpolation="nearest",
        )
        px = np.array([float(r["theta1"]) for r in prows])
        py = np.array([float(r["theta2"]) for r in prows])
        lab = np.array([int(r["label"]) for r in prows])
        # points the map classifies incorrectly are drawn in black
        ix = np.clip(((px - t1.min()) / (t1.max() - t1.min()) * (n - 1)).round().astype(int), 0, n - 1)
        iy = np.clip(((py - t2.min()) / (t2.max() - t2.min()) * (n - 1)).round().astype(int), 0, n - 1)
        wrong = pred[ix, iy] != lab
        ax.scatter(px[~wrong], py[~wrong], c=lab[~wrong], cmap="coolwarm", s=4,
                   vmin=lab.min(), vmax=lab.max())
        ax.scatter(px[wrong], py[wrong], c="black", s=6)
        ax.set_xlabel("theta_1")
        ax.set_ylabel("theta_2")
        ax.set_title(f"{col.split('_')[0].upper()} decision map")
        out = outdir / f"{name}_map_{col.split('_')[0]}.png"
        _save(fig, out, input_checksum(rundir, ["decision_grid.csv", "test_points.csv"]))
        outs.append(out)
    return outs


def render_fig2(rundir: Path, outdir: Path, name: str) -> list[Path]:
    rows = read_results(rundir)
    _require(rows, "test_error")
    groups = _grouped(rows, "test_error")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for (p, l, _, _), vals in sorted(groups.items()):
        color = QS_COLOR if p == "QS" else QCS_COLOR
        label = f"{p} (L={l})"
        ax.bar(label, np.mean(vals), color=color)
    ax.set_ylabel("classification error")
    ax.set_title(f"{name}: discrimination error at fixed sensing budget")
    out = outdir / f"{name}_errors.png"
    _save(fig, out, input_checksum(rundir, ["results.csv"]))
    return [out] + _render_decision_map(rundir, outdir, name)


def render_fig3de(rundir: Path, outdir: Path) -> list[Path]:
    rows = read_results(rundir)
    _require(rows, "test_error")
    by_m: dict = {}
    for row in rows:
        if row["metric"] != "test_error":
            continue
        m = row["task"].split("M=")[1].rstrip("]")
        rms = float(row["extra"].split("=")[1])
        by_m.setdefault(m, {}).setdefault(row["protocol"], {}).setdefault(rms, []).append(
            float(row["value"])
        )
    outs = []
    for m, archs in sorted(by_m.items()):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        for kind in ("R", "T", "S", "ST"):
            if kind not in archs:
                continue
            x = sorted(archs[kind])
            y = [min(archs[kind][r]) for r in x]
            ax.plot(x, y, marker="o", color=ARCH_COLORS[kind], label=kind)
        ax.set_xlabel("RMS imparted phase per bin (rad)")
        ax.set_ylabel("classification error (best of restarts)")
        ax.set_title(f"spatiotemporal task, M = {m} qubits")
        ax.legend()
        out = outdir / f"fig3d_M{m}.png"
        _save(fig, out, input_checksum(rundir, ["results.csv"]))
        outs.append(out)
    # panel e: error vs M at the middle signal strength
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for kind in ("R", "T", "S", "ST"):
        ms, ys = [], []
        for m, archs in sorted(by_m.items(), key=lambda kv: int(kv[0])):
            if kind in archs:
                rmss = sorted(archs[kind])
                mid = rmss[len(rmss) // 2]
                ms.append(int(m))
                ys.append(min(archs[kind][mid]))
        if ms:
            ax.plot(ms, ys, marker="s", color=ARCH_COLORS[kind], label=kind)
    ax.set_xlabel("sensing qubits M")
    ax.set_ylabel("classification error")
    ax.legend()
    ax.set_title("error vs sensor count at fixed signal strength")
    out = outdir / "fig3e_vs_M.png"
    _save(fig, out, input_checksum(rundir, ["results.csv"]))
    outs.append(out)
    return outs


def render_fig4d(rundir: Path, outdir: Path) -> list[Path]:
    rows = read_results(rundir)
    _require(rows, "expected_mse")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for protocol, color in (("QS", QS_COLOR), ("QCS", QCS_COLOR)):
        degs, mses = [], []
        for row in rows:
            if row["metric"] == "expected_mse" and row["protocol"] == protocol:
                degs.append(int(row["task"].split("^")[1]))
                mses.append(float(row["value"]))
        order = np.argsort(degs)
        ax.semilogy(np.array(degs)[order], np.array(mses)[order], marker="o",
                    color=color, label=protocol)
    ax.set_xlabel("polynomial degree m")
    ax.set_ylabel("expected MSE")
    ax.legend()
    ax.set_title("1D monomial estimation error vs degree")
    out = outdir / "fig4d_mse_vs_degree.png"
    _save(fig, out, input_checksum(rundir, ["results.csv"]))
    return [out]


def render_fig4ef(rundir: Path, outdir: Path) -> list[Path]:
    rows = read_results(rundir)
    outs = []
    for metric, ylabel, fname in (
        ("expected_mse", "expected MSE", "fig4ef_mse.png"),
        ("threshold_error", "threshold classification error", "fig4ef_error.png"),
    ):
        _require(rows, metric)
        fig, ax = plt.subplots(figsize=FIGSIZE)
        tasks_order = ["xor", "spirals"]
        width = 0.35
        for k, (protocol, color) in enumerate((("QS", QS_COLOR), ("QCS", QCS_COLOR))):
            vals = []
            for t in tasks_order:
                v = [float(r["value"]) for r in rows
                     if r["metric"] == metric and r["protocol"] == protocol and r["task"] == t]
                vals.append(v[0] if v else np.nan)
            ax.bar(np.arange(2) + k * width, vals, width, color=color, label=protocol)
        ax.set_xticks(np.arange(2) + width / 2)
        ax.set_xticklabels(tasks_order)
        ax.set_ylabel(ylabel)
        if metric == "expected_mse":
            ax.set_yscale("log")
        ax.legend()
        out = outdir / fname
        _save(fig, out, input_checksum(rundir, ["results.csv"]))
        outs.append(out)
    return outs


def render_fig5d(rundir: Path, outdir: Path) -> list[Path]:
    rows = read_results(rundir)
    _require(rows, "test_error")
    qcs = [float(r["value"]) for r in rows
           if r["metric"] == "test_error" and r["protocol"] == "QCS"]
    qs = [float(r["value"]) for r in rows
          if r["metric"] == "test_error" and r["protocol"] == "QS-TMS"]
    fig, ax = plt.subplots(figsize=(4.5, 4.0))
    ax.bar(["QS (TMS)", "QCS best", "QCS mean"],
           [qs[0] if qs else np.nan, min(qcs), float(np.mean(qcs))],
           color=[QS_COLOR, QCS_COLOR, "#86a7d3"])
    ax.set_ylabel("single-shot classification error")
    ax.set_title("hybrid sensor vs photon-matched TMS baseline")
    out = outdir / "fig5d_errors.png"
    _save(fig, out, input_checksum(rundir, ["results.csv"]))
    return [out] + _render_decision_map(rundir, outdir, "fig5d")


def render_app_complexity(rundir: Path, outdir: Path) -> list[Path]:
    rows = read_results(rundir)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    series = {
        ("QS", "bayes_error"): ("QS (exact Bayes)", QS_COLOR, "o", {}),
        ("QS-formula", "gaussian_error"): ("QS (analytic)", QS_COLOR, "", {"ls": "--"}),
        ("QCS", "bayes_error"): ("QCS (best of restarts)", QCS_COLOR, "s", {}),
    }
    for (protocol, metric), (label, color, marker, kw) in series.items():
        pts: dict = {}
        for row in rows:
            if row["protocol"] == protocol and row["metric"] == metric:
                r = int(row["task"].split("=")[1])
                pts.setdefault(r, []).append(float(row["value"]))
        if not pts:
            continue
        xs = sorted(pts)
        ys = [min(pts[x]) for x in xs]
        ax.plot(xs, ys, marker=marker or None, color=color, label=label, **kw)
    ax.set_xlabel("regions per class R")
    ax.set_ylabel("classification error")
    ax.legend()
    ax.set_title("task complexity sweep at fixed sensing budget")
    out = outdir / "app_complexity.png"
    _save(fig, out, input_checksum(rundir, ["results.csv"]))
    return [out]


def render_app_nrelu(rundir: Path, outdir: Path) -> list[Path]:
    rows = read_results(rundir)
    _require(rows, "test_error")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for protocol, color in (("QS", QS_COLOR), ("QCS", QCS_COLOR)):
        pts = {}
        for row in rows:
            if row["protocol"] == protocol and row["metric"] == "test_error":
                pts[int(row["extra"].split("=")[1])] = float(row["value"])
        xs = sorted(pts)
        ax.plot(xs, [pts[x] for x in xs], marker="o", color=color, label=protocol)
    ax.set_xlabel("hidden rectifier layers (nReLU)")
    ax.set_ylabel("classification error")
    ax.legend()
    ax.set_title("postprocessor depth sweep")
    out = outdir / "app_nrelu.png"
    _save(fig, out, input_checksum(rundir, ["results.csv"]))
    return [out]


def render_app_shots(rundir: Path, outdir: Path) -> list[Path]:
    rows = read_results(rundir)
    _require(rows, "bayes_error_S1")
    groups: dict = {}
    for row in rows:
        if row["metric"] == "bayes_error_S1":
            groups.setdefault(row["extra"], []).append(float(row["value"]))
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for k, (extra, vals) in enumerate(sorted(groups.items())):
        ax.scatter(np.full(len(vals), k), vals, color=QCS_COLOR, alpha=0.7)
        ax.hlines(min(vals), k - 0.2, k + 0.2, color="black")
    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels(sorted(groups))
    ax.set_ylabel("single-shot inference error")
    ax.set_title("training-shot count vs single-shot inference")
    out = outdir / "app_shots.png"
    _save(fig, out, input_checksum(rundir, ["results.csv"]))
    return [out]


def render_app_gauss(rundir: Path, outdir: Path) -> list[Path]:
    rows = read_results(rundir)
    _require(rows, "expected_mse")
    degs, mses = [], []
    for row in rows:
        if row["metric"] == "expected_mse":
            degs.append(int(row["task"].split("^")[1]))
            mses.append(float(row["value"]))
    order = np.argsort(degs)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.semilogy(np.array(degs)[order], np.array(mses)[order], marker="o", color=QCS_COLOR)
    ax.set_xlabel("target polynomial degree m")
    ax.set_ylabel("expected MSE")
    ax.set_title("classical Gaussian-sample estimator error scaling")
    out = outdir / "app_gauss.png"
    _save(fig, out, input_checksum(rundir, ["results.csv"]))
    return [out]


RENDERERS = {
    "fig1f": render_fig1f,
    "fig2e": lambda r, o: render_fig2(r, o, "fig2e"),
    "fig2k": lambda r, o: render_fig2(r, o, "fig2k"),
    "fig3de": render_fig3de,
    "fig4d": render_fig4d,
    "fig4ef": render_fig4ef,
    "fig5d": render_fig5d,
    "app_complexity": render_app_complexity,
    "app_nrelu": render_app_nrelu,
    "app_shots": render_app_shots,
    "app_gauss": render_app_gauss,
}


def plot_recipe(rundir: str | Path, figure: str, outdir: str | Path) -> list[Path]:
    """Render one recipe's figures and append to the output manifest."""
    rundir, outdir = Path(rundir), Path(outdir)
    if figure not in RENDERERS:
        raise SchemaError(f"unknown figure {figure!r}; choose from {sorted(RENDERERS)}")
    outputs = RENDERERS[figure](rundir, outdir)
    manifest_path = outdir / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    manifest[figure] = {
        "input_sha256": input_checksum(rundir, ["results.csv"]),
        "outputs": sorted(p.name for p in outputs),
    }
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return outputs
