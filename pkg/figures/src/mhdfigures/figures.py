"""Six figure builders: tables in, matplotlib figures out."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .tables import SchemaError, Table, load_table  # noqa: E402

AXIS_NAMES = ("x", "y", "z", "t")
TERM_ORDER = ("equation", "initial", "boundary", "data")
LOSS_TERMS = (("L_f", "tab:green"), ("L_g", "tab:red"),
              ("L_h", "tab:purple"), ("L_data", "tab:brown"))
PHASE_COLORS = {"adam": "tab:blue", "lbfgs": "tab:orange"}


def component_names(table: Table) -> list[str]:
    """Field names appearing as matched '<name>_pred'/'<name>_exact' pairs."""
    names = set()
    for col in table.header:
        if col.endswith("_pred") and f"{col[:-5]}_exact" in table.header:
            names.add(col[:-5])
    return sorted(names)


def select_plane(table: Table, slices: dict[str, float]):
    """Mask rows down to one x/y plane, fixing any z and t columns.

    Requested slice values snap to the nearest value present; with no
    request, t defaults to its first slice and z to its middle one.
    """
    table.require("x", "y")
    extra = [a for a in AXIS_NAMES if table.has(a) and a not in ("x", "y")]
    for key in slices:
        if key not in extra:
            have = ", ".join(extra) if extra else "none"
            raise SchemaError(f"{table.path.name}: no axis column '{key}' "
                              f"to slice on (have {have})")
    mask = np.ones(len(table), dtype=bool)
    parts = []
    for axis in extra:
        col = table.floats(axis)
        uniq = np.unique(col)
        if uniq.size == 0:
            continue
        want = slices.get(axis)
        if want is None:
            value = uniq[0] if axis == "t" else uniq[uniq.size // 2]
        else:
            value = uniq[np.argmin(np.abs(uniq - want))]
        mask &= col == value
        parts.append(f"{axis} = {value:g}")
    return mask, ", ".join(parts)


def pivot(x: np.ndarray, y: np.ndarray, values: np.ndarray):
    """Scattered tensor-grid rows to a (ny, nx) array plus its axes."""
    xs, ys = np.unique(x), np.unique(y)
    grid = np.full((ys.size, xs.size), np.nan)
    grid[np.searchsorted(ys, y), np.searchsorted(xs, x)] = values
    return xs, ys, grid


def fig_loss(log: Table):
    """Loss curves over epochs, one segment per optimizer phase.

    An empty table still yields labeled axes: a run that aborted before
    its first epoch has a valid, header-only log.
    """
    log.require("epoch", "phase", "total")
    epoch = log.floats("epoch")
    phase = log.strings("phase")
    total = log.floats("total")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.set_title("training loss")
    phases = list(dict.fromkeys(phase))
    for name in phases:
        m = (phase == name) & (total > 0)
        if m.any():
            ax.plot(epoch[m], total[m], lw=1.5, label=f"total ({name})",
                    color=PHASE_COLORS.get(name))
    for term, color in LOSS_TERMS:
        if not log.has(term):
            continue
        vals = log.floats(term)
        m = vals > 0
        if m.any():
            ax.plot(epoch[m], vals[m], lw=0.8, alpha=0.7, label=term,
                    color=color)
    for name in phases[1:]:
        start = epoch[phase == name]
        if start.size:
            ax.axvline(start.min(), color="0.6", lw=0.8, ls="--")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def fig_contours(grid: Table, slices: dict[str, float] | None = None,
                 field: str = "abserr", cmap: str = "viridis",
                 components: tuple[str, ...] = ()):
    """Per-component heatmap panels of one column family on an x/y plane."""
    names = list(components) if components else component_names(grid)
    if not names:
        raise SchemaError(f"{grid.path.name}: no component column pairs "
                          "like 'u1_pred'/'u1_exact'")
    mask, caption = select_plane(grid, slices or {})
    if not mask.any():
        raise SchemaError(f"{grid.path.name}: no data rows")
    for name in names:
        grid.require(f"{name}_{field}")
    x = grid.floats("x")[mask]
    y = grid.floats("y")[mask]
    ncols = min(3, len(names))
    nrows = -(-len(names) // ncols)
    fig, axs = plt.subplots(nrows, ncols,
                            figsize=(4.2 * ncols, 3.4 * nrows),
                            squeeze=False)
    for ax, name in zip(axs.flat, names):
        xs, ys, plane = pivot(x, y, grid.floats(f"{name}_{field}")[mask])
        mesh = ax.pcolormesh(xs, ys, plane, cmap=cmap, shading="nearest")
        fig.colorbar(mesh, ax=ax)
        ax.set_title(f"{name} {field}")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_aspect("equal")
    for ax in axs.flat[len(names):]:
        ax.set_axis_off()
    if caption:
        fig.suptitle(caption)
    fig.tight_layout(rect=(0, 0, 1, 0.95) if caption else None)
    return fig


def fig_streamlines(grid: Table, slices: dict[str, float] | None = None,
                    vector: str = "velocity", cmap: str = "viridis"):
    """Field lines of the predicted velocity or magnetic field."""
    pair = {"velocity": ("u1", "u2"), "magnetic": ("b1", "b2")}
    if vector not in pair:
        raise SchemaError(f"unknown vector '{vector}'; have velocity, "
                          "magnetic")
    c1, c2 = pair[vector]
    grid.require(f"{c1}_pred", f"{c2}_pred")
    mask, caption = select_plane(grid, slices or {})
    if not mask.any():
        raise SchemaError(f"{grid.path.name}: no data rows")
    x = grid.floats("x")[mask]
    y = grid.floats("y")[mask]
    xs, ys, u = pivot(x, y, grid.floats(f"{c1}_pred")[mask])
    _, _, v = pivot(x, y, grid.floats(f"{c2}_pred")[mask])
    fig, ax = plt.subplots(figsize=(6.6, 4.6))
    mesh = ax.pcolormesh(xs, ys, np.hypot(u, v), cmap=cmap,
                         shading="nearest", alpha=0.85)
    fig.colorbar(mesh, ax=ax, label=f"|{vector[0]}|")
    try:
        ax.streamplot(xs, ys, u, v, color="k", density=1.3, linewidth=0.8,
                      arrowsize=0.9)
    except ValueError as err:
        raise SchemaError(f"{grid.path.name}: streamlines need an evenly "
                          f"spaced x/y grid ({err})") from None
    title = f"{vector} field lines"
    ax.set_title(f"{title} ({caption})" if caption else title)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    fig.tight_layout()
    return fig


def fig_gradients(hist: Table, epoch: int = -1):
    """Per-layer histograms of loss-term gradients, one panel per layer."""
    hist.require("term", "layer", "epoch", "bin_lo", "bin_hi", "count")
    if len(hist) == 0:
        raise SchemaError(f"{hist.path.name}: no data rows")
    epochs = np.unique(hist.floats("epoch")).astype(int)
    pick = int(epochs.max()) if epoch < 0 else int(epoch)
    if pick not in epochs:
        have = ", ".join(str(e) for e in epochs)
        raise SchemaError(f"{hist.path.name}: no rows for epoch {pick} "
                          f"(have {have})")
    ep = hist.floats("epoch").astype(int)
    term = hist.strings("term")
    # layers are labels ("subnet1.layer0"), not indices
    layer = hist.strings("layer")
    lo = hist.floats("bin_lo")
    hi = hist.floats("bin_hi")
    count = hist.floats("count")
    layers = sorted(set(layer[ep == pick]))
    present = set(term[ep == pick])
    order = [t for t in TERM_ORDER if t in present]
    order += sorted(present - set(TERM_ORDER))
    ncols = min(3, max(1, len(layers)))
    nrows = -(-len(layers) // ncols)
    fig, axs = plt.subplots(nrows, ncols,
                            figsize=(4.4 * ncols, 3.2 * nrows),
                            squeeze=False)
    for ax, lay in zip(axs.flat, layers):
        for i, name in enumerate(order):
            m = (ep == pick) & (layer == lay) & (term == name)
            if not m.any():
                continue
            srt = np.argsort(lo[m])
            edges = np.append(lo[m][srt], hi[m][srt][-1])
            ax.stairs(count[m][srt], edges, fill=True, alpha=0.45,
                      label=name, color=f"C{i}")
        ax.set_title(str(lay))
        ax.set_xlabel("gradient")
        ax.set_ylabel("count")
        if ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=8)
    for ax in axs.flat[len(layers):]:
        ax.set_axis_off()
    fig.suptitle(f"gradient histograms, epoch {pick}")
    fig.tight_layout(rect=(0, 0, 1, 0.94))
    return fig


def fig_profile(grid: Table, component: str = "u1", along: str = "y",
                at: float = 2.0, slices: dict[str, float] | None = None):
    """Exact (red) and predicted (blue) profile of one component along a
    grid line, cut at the nearest grid value of the other axis."""
    if along not in ("x", "y"):
        raise SchemaError(f"profile axis must be x or y, not '{along}'")
    grid.require(f"{component}_pred", f"{component}_exact")
    mask, caption = select_plane(grid, slices or {})
    if not mask.any():
        raise SchemaError(f"{grid.path.name}: no data rows")
    x = grid.floats("x")[mask]
    y = grid.floats("y")[mask]
    run_axis, cut_axis = (y, x) if along == "y" else (x, y)
    cut_name = "x" if along == "y" else "y"
    uniq = np.unique(cut_axis)
    cut = uniq[np.argmin(np.abs(uniq - at))]
    m = cut_axis == cut
    order = np.argsort(run_axis[m])
    line = run_axis[m][order]
    exact = grid.floats(f"{component}_exact")[mask][m][order]
    pred = grid.floats(f"{component}_pred")[mask][m][order]
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(line, exact, color="red", lw=1.8, label="exact")
    ax.plot(line, pred, color="blue", lw=1.2, ls="--", label="predicted")
    ax.set_xlabel(along)
    ax.set_ylabel(component)
    title = f"{component} at {cut_name} = {cut:g}"
    ax.set_title(f"{title} ({caption})" if caption else title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def fig_robustness(sweep_dir: Path, component: str = "u1"):
    """Pooled relative error of one component across a sweep's run dirs,
    one bar per subdirectory, labeled by directory name."""
    sweep_dir = Path(sweep_dir)
    subdirs = sorted(p for p in sweep_dir.iterdir()
                     if p.is_dir() and (p / "metrics.csv").is_file())
    if not subdirs:
        raise SchemaError(f"{sweep_dir}: no subdirectories with metrics.csv")
    labels, values = [], []
    for sub in subdirs:
        table = load_table(sub / "metrics.csv")
        table.require("component", "time", "error")
        comp = table.strings("component")
        time = table.strings("time")
        err = table.floats("error")
        m = (comp == component) & (time == "")
        if not m.any():
            raise SchemaError(f"{sub.name}/metrics.csv: no pooled row for "
                              f"component '{component}'")
        labels.append(sub.name)
        values.append(float(err[m][0]))
    fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(labels)), 4.2))
    pos = np.arange(len(labels))
    ax.bar(pos, values, color="tab:blue", width=0.65)
    for i, v in enumerate(values):
        ax.annotate(f"{v:.2e}", (i, v), ha="center", va="bottom", fontsize=8)
    ax.set_xticks(pos)
    ax.set_xticklabels(labels, rotation=30, ha="right")
    if all(v > 0 for v in values):
        ax.set_yscale("log")
    ax.set_ylabel(f"relative L2 error, {component}")
    ax.set_title("error by sweep point")
    fig.tight_layout()
    return fig
