"""Renderers: one function per figure kind, presentation only.

Every numeric series drawn here is read from a pipeline output file; the
only synthesized lines are fixed reference guides (a slope-1/3 ray, fitted
curves evaluated from their published parameters). Images embed a constant
Software tag so byte-identical inputs give byte-identical PNGs.
"""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .figspec import FigureKind, FigureSpec
from .readers import SchemaMismatchError, read_csv, read_json

PNG_META = {"Software": "impactplots"}
DPI = 120


def _save(fig, output):
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, dpi=DPI, metadata=PNG_META)
    plt.close(fig)
    return output


def _eval_fit(doc, lags):
    power = np.power(doc["b"] * lags, doc["nu"], where=lags > 0,
                     out=np.zeros_like(lags, dtype=float))
    decay = np.exp(-power)
    if doc["form"] == "DECAY":
        return doc["a"] * decay
    if doc["form"] == "SATURATING":
        return doc["a"] * (1.0 - decay)
    raise SchemaMismatchError(f"unknown fit form: {doc['form']!r}")


def render_lag_curve_fit(spec: FigureSpec):
    meta, cols = read_csv(spec.inputs["curve"], ("lag", "value", "count"))
    fit = read_json(spec.inputs["fit"], ("form", "a", "b", "nu"))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    lags = cols["lag"]
    start = 1 if fit["form"] == "DECAY" else 0  # autocorrelation lag 0 is pinned
    ax.plot(lags[start:], cols["value"][start:], "o", ms=3, color="tab:red",
            label=meta.get("kind", "curve"))
    dense = np.linspace(max(lags[start], 1e-9), lags[-1], 400)
    ax.plot(dense, _eval_fit(fit, dense), "-", color="black", lw=1,
            label=f"fit a={fit['a']:.3g}, b={fit['b']:.3g}, nu={fit['nu']:.3g}")
    ax.set_xlabel("lag (trades)")
    ax.set_ylabel("value")
    ax.legend(frameon=False)
    ax.set_title("Lag curve with stretched-exponential fit")
    return _save(fig, spec.output)


def render_propagator_bounds(spec: FigureSpec):
    meta, cols = read_csv(spec.inputs["propagator"], ("lag", "g", "G"))
    bounds = read_json(spec.inputs["bounds"], ("bound_lower", "bound_upper"))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(cols["lag"], cols["G"], "o-", ms=3, color="tab:red", label="propagator")
    ax.axhspan(bounds["bound_lower"], bounds["bound_upper"], color="tab:red",
               alpha=0.15, label="large-lag bounds")
    if "corrected" in spec.inputs:
        _, corr = read_csv(spec.inputs["corrected"], ("lag", "g", "G"))
        ax.plot(corr["lag"], corr["G"], "-", color="tab:blue", lw=1.5,
                label="bias-corrected")
    ax.set_xlabel("lag (trades)")
    ax.set_ylabel("price move (rebased bps)")
    ax.legend(frameon=False)
    ax.set_title("Impact propagator with theoretical bounds")
    return _save(fig, spec.output)


def render_imbalance_profile(spec: FigureSpec):
    meta, cols = read_csv(spec.inputs["profile"], ("group", "mean_x", "mean_y", "count"))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(cols["mean_x"], cols["mean_y"], "o", ms=4, color="tab:red",
            label="rank-group means")
    span = np.array([cols["mean_x"].min(), cols["mean_x"].max()])
    ax.plot(span, span / 3.0, "--", color="gray", lw=1, label="slope 1/3 guide")
    ax.axhline(0.0, color="black", lw=0.5)
    ax.axvline(0.0, color="black", lw=0.5)
    ax.set_xlabel("imbalance / std(imbalance)")
    ax.set_ylabel("return / mean |return|")
    ax.legend(frameon=False)
    ax.set_title("Binned imbalance vs return")
    return _save(fig, spec.output)


def _window_days(starts):
    # nanosecond timestamps on the x axis as days since the first window
    return (starts - starts.min()) / 86_400e9


def render_monthly_stats(spec: FigureSpec):
    meta, cols = read_csv(spec.inputs["windowed"],
                          ("window_start", "window_end", "n_trades", "n_eff",
                           "r_at", "low_sample"))
    usable = np.array([v != "true" for v in cols["low_sample"]]) \
        if cols["low_sample"].dtype.kind == "U" else np.ones(len(cols["n_eff"]), bool)
    days = _window_days(cols["window_start"])
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 5.5), sharex=True)
    ax1.plot(days, cols["n_eff"], "o-", ms=4, color="tab:blue")
    if not usable.all():
        ax1.plot(days[~usable], cols["n_eff"][~usable], "x", ms=6, color="gray")
    ax1.set_ylabel("effective correlated orders")
    ax2.plot(days, cols["r_at"], "s-", ms=4, color="tab:green")
    ax2.set_ylabel("response at reference lag")
    ax2.set_xlabel("window start (days from first)")
    fig.suptitle("Windowed flow statistics")
    return _save(fig, spec.output)


def render_monthly_cum_autocorr(spec: FigureSpec):
    meta, cols = read_csv(spec.inputs["curves"],
                          ("window_start", "lag", "value", "count"))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    starts = np.unique(cols["window_start"])
    cmap = plt.get_cmap("viridis")
    for i, start in enumerate(starts):
        sel = cols["window_start"] == start
        color = cmap(i / max(len(starts) - 1, 1))
        ax.plot(cols["lag"][sel], cols["value"][sel], "-", color=color, lw=1.2,
                label=f"window {i}")
    ax.set_xlabel("lag (trades)")
    ax.set_ylabel("cumulative sign autocorrelation")
    if len(starts) <= 12:
        ax.legend(frameon=False, fontsize=7)
    ax.set_title("Cumulative sign autocorrelation per window")
    return _save(fig, spec.output)


def render_category_propagators(spec: FigureSpec):
    meta, cols = read_csv(spec.inputs["curves"], ("category", "lag", "g", "G"))
    doc = read_json(spec.inputs["bounds"], ("bounds",))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    categories = sorted(set(cols["category"].tolist()))
    colors = {cat: color for cat, color
              in zip(categories, ("tab:red", "tab:blue", "tab:green", "tab:orange"))}
    for cat in categories:
        sel = cols["category"] == cat
        color = colors.get(cat, "tab:gray")
        ax.plot(cols["lag"][sel], cols["G"][sel], "o-", ms=3, lw=1, color=color,
                label=cat)
        band = doc["bounds"].get(cat)
        if band:
            ax.axhspan(band["lower"], band["upper"], color=color, alpha=0.12)
    ax.set_xlabel("lag (trades)")
    ax.set_ylabel("price move (rebased bps)")
    ax.legend(frameon=False)
    ax.set_title("Per-category propagators with bounds")
    return _save(fig, spec.output)


def render_size_distributions(spec: FigureSpec):
    meta, cols = read_csv(spec.inputs["sizes"],
                          ("category", "mean_notional", "bin_left", "bin_right", "mass"))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    categories = sorted(set(cols["category"].tolist()))
    for cat, color in zip(categories, ("tab:red", "tab:blue", "tab:green", "tab:orange")):
        sel = cols["category"] == cat
        centers = 0.5 * (cols["bin_left"][sel] + cols["bin_right"][sel])
        mass = cols["mass"][sel]
        mean = cols["mean_notional"][sel][0]
        positive = mass > 0
        ax.semilogy(centers[positive], mass[positive], "o-", ms=3, lw=1,
                    color=color, label=f"{cat} (mean {mean:.3g})")
    ax.set_xlabel("size / mean size")
    ax.set_ylabel("probability mass")
    ax.legend(frameon=False)
    ax.set_title("Trade size distributions")
    return _save(fig, spec.output)


RENDERERS = {
    FigureKind.LAG_CURVE_FIT: render_lag_curve_fit,
    FigureKind.PROPAGATOR_BOUNDS: render_propagator_bounds,
    FigureKind.IMBALANCE_PROFILE: render_imbalance_profile,
    FigureKind.MONTHLY_STATS: render_monthly_stats,
    FigureKind.MONTHLY_CUM_AUTOCORR: render_monthly_cum_autocorr,
    FigureKind.CATEGORY_PROPAGATORS: render_category_propagators,
    FigureKind.SIZE_DISTRIBUTIONS: render_size_distributions,
}


def render(spec: FigureSpec):
    """Render one figure; returns the written path."""
    return RENDERERS[spec.kind](spec)
