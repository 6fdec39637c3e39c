import matplotlib.pyplot as plt
import numpy as np

import rigidnet.localization.localization as loc
import rigidnet.rigidity.rigidity as rig


def plot_framework(fw: rig.Framework, ax=None, color: str = "xkcd:grey", labels: bool = True) -> plt.figure:
    """Draw the edges and vertices of a framework.

    Parameters
    ----------
    fw : rig.Framework
        Framework to draw.
    ax : matplotlib axes, optional
        Axes to draw on. Defaults to the current axes.
    color : str, optional
        Edge colour.
    labels : bool, optional
        Whether to print vertex ids next to the vertices. True by default.

    Returns
    -------
    plt.figure
    """
    if ax is None:
        ax = plt.gca()
    config = fw.config
    for i, j in fw.graph.edges:
        ax.plot(config[[i - 1, j - 1], 0], config[[i - 1, j - 1], 1], color=color, linewidth=1)
    ax.scatter(config[:, 0], config[:, 1], color="xkcd:black", s=20, zorder=3)
    if labels:
        for v, (x, y) in enumerate(config, start=1):
            ax.annotate(str(v), (x, y), textcoords="offset points", xytext=(4, 4))
    ax.set_aspect("equal")
    return ax.figure


def plot_localization(trajectory: loc.LocalizationTrajectory, net: loc.SensorNetwork) -> plt.figure:
    """Estimate trajectories over the true network, next to the error curves.

    Parameters
    ----------
    trajectory : loc.LocalizationTrajectory
        Result of simulate_localization.
    net : loc.SensorNetwork
        Network that was localized.

    Returns
    -------
    plt.figure
    """
    fig, (left, right) = plt.subplots(1, 2)
    plot_framework(net.framework, ax=left)
    for v in net.followers:
        path = trajectory.estimates[:, v - 1, :]
        left.plot(path[:, 0], path[:, 1], color="xkcd:crimson", linewidth=0.8)
        left.scatter(path[0, 0], path[0, 1], color="xkcd:crimson", marker="x")
    anchors = np.asarray(net.anchors, dtype=int) - 1
    left.scatter(
        net.framework.config[anchors, 0], net.framework.config[anchors, 1],
        color="xkcd:royal blue", marker="s", s=60, zorder=4,
    )
    left.set_title("Location estimates")

    right.semilogy(trajectory.times, trajectory.location_error, color="xkcd:crimson")
    right.semilogy(trajectory.times, trajectory.bearing_error, color="xkcd:royal blue")
    right.axhline(loc.LOCATION_THRESHOLD, color="xkcd:crimson", linestyle="--", linewidth=0.8)
    right.legend(["Location error", "Bearing error"])
    right.set_xlabel("Time", fontsize=14)
    right.set_ylabel("Error", fontsize=14)
    fig.set_size_inches(14, 6)
    return fig
