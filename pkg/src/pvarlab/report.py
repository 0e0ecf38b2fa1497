"""Write a run manifest to disk: delimited tables, JSON and matplotlib figures."""

from __future__ import annotations

import io
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SUMMARY_HEADER = "mesh_n,p,median_vp,p05,p95,classification"
PNG_META = {"Software": None}


def _g(v) -> str:
    return f"{v:.17g}"


def summary_csv(manifest) -> str:
    buf = io.StringIO()
    buf.write(SUMMARY_HEADER + "\n")
    for row in manifest.summary:
        buf.write(",".join([str(row["mesh_n"]), _g(row["p"]), _g(row["median_vp"]),
                            _g(row["p05"]), _g(row["p95"]), row["classification"]]) + "\n")
    return buf.getvalue()


def tailgrid_csv(manifest) -> str:
    buf = io.StringIO()
    if manifest.tailgrid is not None:
        manifest.tailgrid.to_csv(buf)
    else:
        buf.write("h,a,alpha_hat,n,ci_low,ci_high\n")
    return buf.getvalue()


def bounds_json(manifest) -> str:
    if manifest.bounds is not None:
        d = manifest.bounds.to_dict()
    else:
        d = {"envelope": None, "T": manifest.config.get("T"), "levels": [], "tau_tails": [], "C1": None}
    return _dumps(d)


def _finite(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _dumps(d) -> str:
    return json.dumps(_finite(d), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def plot_sharpness(manifest, ax=None):
    """Median p-variation against mesh size, one line per p, 5-95% band shaded."""
    own = ax is None
    if own:
        fig, ax = plt.subplots(figsize=(6, 4))
    ps = sorted({row["p"] for row in manifest.summary})
    for p in ps:
        rows = [r for r in manifest.summary if r["p"] == p]
        n = np.array([r["mesh_n"] for r in rows])
        med = np.array([r["median_vp"] for r in rows])
        ax.fill_between(n, [r["p05"] for r in rows], [r["p95"] for r in rows], alpha=0.15)
        ax.plot(n, med, "o-", label=f"p={p:g} ({rows[0]['classification']})")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("mesh points n")
    ax.set_ylabel(r"$v_p$ (median, 5-95%)")
    ax.legend(fontsize=8)
    return ax.figure if own else ax


def plot_tailgrid(manifest, ax=None):
    """Estimated alpha(h, a) against a for each h, with the fitted envelope dashed."""
    own = ax is None
    if own:
        fig, ax = plt.subplots(figsize=(6, 4))
    cells = list(manifest.tailgrid)
    env = manifest.fit.envelope if manifest.fit is not None else None
    for h in sorted({c.h for c in cells}):
        row = sorted((c for c in cells if c.h == h and c.alpha_hat > 0), key=lambda c: c.a)
        if not row:
            continue
        a = np.array([c.a for c in row])
        y = np.array([c.alpha_hat for c in row])
        err = np.array([[c.alpha_hat - c.ci_low for c in row], [c.ci_high - c.alpha_hat for c in row]])
        line = ax.errorbar(a, y, yerr=err, fmt="o", ms=3, label=f"h={h:.3g}")
        if env is not None:
            ax.plot(a, [min(env(h, ai), 1.0) for ai in a], "--", color=line[0].get_color(), lw=0.8)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("a")
    ax.set_ylabel(r"$\hat\alpha(h, a)$")
    if env is not None:
        ax.set_title(f"K={env.K:.3g}, beta={env.beta:.3g}, gamma={env.gamma:.3g}, p*={env.pstar:.3g}", fontsize=9)
    ax.legend(fontsize=7)
    return ax.figure if own else ax


def plot_checks(manifest, ax=None):
    """Measured value and 3-sigma limit per check, on a log scale."""
    own = ax is None
    rows = [c for c in manifest.checks if c["bound"] > 0]
    if own:
        fig, ax = plt.subplots(figsize=(6, max(2.5, 0.25 * len(rows) + 1)))
    y = np.arange(len(rows))
    ax.barh(y, [max(c["measured"], 1e-12) for c in rows], color=["C2" if c["passed"] else "C3" for c in rows])
    ax.plot([c["bound"] + 3 * c["se"] for c in rows], y, "k|", ms=12)
    ax.set_yticks(y, [c["name"] for c in rows], fontsize=7)
    ax.set_xscale("log")
    ax.set_xlabel("measured (bar) vs bound + 3 se (tick)")
    return ax.figure if own else ax


def _savefig(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=PNG_META)
    plt.close(fig)


def emit_report(manifest, out_dir: str, fmt: str = "csv", figures: bool = True) -> list:
    """Write summary.csv, tailgrid.csv, bounds.json, manifest.json and figures.

    Output is a deterministic function of the manifest. With fmt="json" the
    two tables are also written as JSON arrays.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        _write(path, text)
        written.append(path)

    put("summary.csv", summary_csv(manifest))
    put("tailgrid.csv", tailgrid_csv(manifest))
    put("bounds.json", bounds_json(manifest))
    put("manifest.json", _dumps(manifest.to_dict()))
    if fmt == "json":
        put("summary.json", _dumps(manifest.summary))
        put("tailgrid.json", _dumps(manifest.to_dict()["tailgrid"]))

    if figures:
        if manifest.summary:
            path = os.path.join(out_dir, "sharpness.png")
            _savefig(plot_sharpness(manifest), path)
            written.append(path)
        if manifest.tailgrid:
            path = os.path.join(out_dir, "tailgrid.png")
            _savefig(plot_tailgrid(manifest), path)
            written.append(path)
        if any(c["bound"] > 0 for c in manifest.checks):
            path = os.path.join(out_dir, "checks.png")
            _savefig(plot_checks(manifest), path)
            written.append(path)
    return written
