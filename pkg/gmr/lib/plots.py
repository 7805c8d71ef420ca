import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_cv_curve(grid, selection=None, save_plot_path="cv_curve.png"):
    """
    CV mean against lambda for every rank, with one-SE bands and the
    selected lambdas marked.

    Args:
        grid (CVGrid): Cross-validation losses.
        selection (SelectionResult, optional): Marks lambda_min and the kSE choices.
        save_plot_path (str): Output image path.
    """
    mean, se = grid.cv_mean, grid.cv_se
    lambdas = np.asarray(grid.lambdas, dtype=float)

    plt.figure(figsize=(10, 6))
    for i, rank in enumerate(grid.ranks):
        plt.plot(lambdas, mean[i], label=f"S = {rank}")
        plt.fill_between(lambdas, mean[i] - se[i], mean[i] + se[i], alpha=0.2)
    if selection is not None:
        plt.axvline(selection.lambda_min, color="k", linestyle="--", label="min")
        for k, (_, lam) in sorted(selection.lambda_kse.items()):
            plt.axvline(lam, color="grey", linestyle=":")
            plt.text(lam, plt.ylim()[1], f"{k:g}SE", rotation=90, va="top", fontsize=8)
    plt.xlabel("lambda")
    plt.ylabel("APE")
    plt.title("Cross-validation curve")
    plt.legend()
    plt.tight_layout()

    if save_plot_path:
        plt.savefig(save_plot_path, bbox_inches="tight", dpi=150)
    plt.close()
    return save_plot_path


def plot_study(records, save_plot_path="simulation.png"):
    """
    Boxplots of TDR and FDR per penalization level, one row per scenario.
    """
    scenarios = list(dict.fromkeys(records["scenario"]))
    levels = list(dict.fromkeys(records["level"]))

    fig, axes = plt.subplots(
        len(scenarios), 2, figsize=(10, 3 * len(scenarios)), squeeze=False, sharey=True
    )
    for row, scenario in enumerate(scenarios):
        subset = records[records["scenario"] == scenario]
        for col, metric in enumerate(("tdr", "fdr")):
            ax = axes[row, col]
            ax.boxplot(
                [subset.loc[subset["level"] == level, metric].dropna() for level in levels],
                labels=levels,
            )
            ax.set_ylim(-0.05, 1.05)
            ax.set_title(f"{metric.upper()} - {scenario}", fontsize=9)
    fig.tight_layout()

    if save_plot_path:
        fig.savefig(save_plot_path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return save_plot_path
