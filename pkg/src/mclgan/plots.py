import os
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import seaborn as sns  # noqa: E402
import pandas as pd  # noqa: E402
import numpy as np  # noqa: E402
import logging  # noqa: E402

logger = logging.getLogger("mclgan")


def plot_snapshot(snapshot, spec=None, ax=None, pt_size=8, palette="tab20", legend=False, **axparams):
    """Depicts generated points colored by their expert discriminator.

    This function is intended to be called with a snapshot table (columns x, y, expert_id),
    as in RunLog.snapshots or snapshot_<step>.csv.

    :param snapshot: Pandas dataframe with the generated points.
    :param spec: If a MixtureSpec is given, its component centers are marked.
    :param ax: The axis for the plot.
    :param pt_size: Specify the size for the data points in the plot.
    :param palette: Seaborn palette for the expert ids.
    :param legend: If True, add a legend of the expert ids.
    :param \\**axparams: Additional keyword parameters are passed to ax.set()."""
    if ax is None:
        _, ax = plt.subplots(figsize=(5, 5))
    sns.scatterplot(data=snapshot, x="x", y="y", hue="expert_id", palette=palette, s=pt_size, linewidth=0, legend=legend, ax=ax)
    if spec is not None:
        ax.scatter(spec.centers[:, 0], spec.centers[:, 1], marker="x", color="black", s=40, label="mode centers")
    axparams.setdefault("aspect", "equal")
    ax.set(**axparams)
    return ax


def plot_utilization(table, ax=None, annotate=True, bar_width=0.8, color="C0", **axparams):
    """Depicts the share of expert assignments per discriminator as a barplot.

    :param table: Pandas dataframe with columns discriminator, count and share, as from RunLog.utilization_table().
    :param ax: The axis for the plot.
    :param annotate: If True, print the counts above the bars.
    :param bar_width: Set relative width of the plotted bars.
    :param \\**axparams: Additional keyword parameters are passed to ax.set()."""
    if ax is None:
        _, ax = plt.subplots()
    ax.bar(table["discriminator"], table["share"], width=bar_width, color=color)
    if annotate:
        for p, n in zip(ax.patches, table["count"]):
            ax.annotate(f"{n}", (p.get_x() + p.get_width() / 2, p.get_height()), ha="center", va="bottom", fontsize="small")
    axparams.setdefault("xlabel", "discriminator")
    axparams.setdefault("ylabel", "share of expert assignments")
    ax.set(**axparams)
    return ax


def plot_metrics(metrics, columns=("coverage", "F8", "F1_8", "entropy"), ax=None, lw=1, ls="solid", legend=True, colors=None, **axparams):
    """Depicts evaluation metrics over training steps.

    :param metrics: Pandas dataframe as in metrics.csv.
    :param columns: The metrics to plot.
    :param lw: Specify witdh of the lines. See matplotlib Line2D for details.
    :param ls: Specify style of the lines. See matplotlib Line2D for details.
    :param colors: Provide a dictionary with column keys and color values. By default, colors are automatically assigned.
    :param \\**axparams: Additional keyword parameters are passed to ax.set()."""
    if colors is None:
        colors = {}
    if ax is None:
        _, ax = plt.subplots()
    for col in columns:
        ax.plot(metrics["step"], metrics[col], label=col, color=colors.get(col, None), lw=lw, ls=ls)
    axparams.setdefault("xlabel", "step")
    ax.set(**axparams)
    if legend:
        ax.legend()
    return ax


def write_run_plots(log, out_dir):
    """Saves snapshot_<step>.png, utilization_<step>.png and metrics.png of a RunLog to out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    spec = log.config.mixture()
    limit = np.abs(spec.centers).max() + 1
    files = []
    for step, frame in log.snapshots.items():
        fig, ax = plt.subplots(figsize=(5, 5))
        plot_snapshot(frame, spec, ax=ax, title=f"step {step}", xlim=(-limit, limit), ylim=(-limit, limit))
        files.append(os.path.join(out_dir, f"snapshot_{step}.png"))
        fig.savefig(files[-1], dpi=100)
        plt.close(fig)
    for step in log.utilization:
        fig, ax = plt.subplots()
        plot_utilization(log.utilization_table(step), ax=ax, title=f"step {step}")
        files.append(os.path.join(out_dir, f"utilization_{step}.png"))
        fig.savefig(files[-1], dpi=100)
        plt.close(fig)
    metrics = log.metrics_table()
    if isinstance(metrics, pd.DataFrame) and len(metrics) > 1:
        fig, axs = plt.subplots(1, 2, figsize=(10, 4))
        plot_metrics(metrics, ("coverage", "active_disc"), ax=axs[0])
        plot_metrics(metrics, ("hq_ratio", "F8", "F1_8", "entropy"), ax=axs[1], ylim=(0, 1.05))
        files.append(os.path.join(out_dir, "metrics.png"))
        fig.savefig(files[-1], dpi=100)
        plt.close(fig)
    logger.info("saved %s figures to %s", len(files), out_dir)
    return files
