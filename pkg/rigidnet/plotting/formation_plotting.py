import matplotlib.pyplot as plt

import rigidnet.formation.formation as form
from rigidnet.plotting.localization_plotting import plot_framework


def plot_formation(trajectory: form.FormationTrajectory, target: form.TargetFormation) -> plt.figure:
    """Agent paths with the final formation drawn on top, next to the error curves.

    Parameters
    ----------
    trajectory : form.FormationTrajectory
        Result of simulate_formation.
    target : form.TargetFormation
        Target the agents were driven to.

    Returns
    -------
    plt.figure
    """
    fig, (left, right) = plt.subplots(1, 2)
    positions = trajectory.positions
    for v in range(positions.shape[1]):
        left.plot(positions[:, v, 0], positions[:, v, 1], color="xkcd:crimson", linewidth=0.8)
        left.scatter(positions[0, v, 0], positions[0, v, 1], color="xkcd:crimson", marker="x")
    plot_framework(target.framework.with_config(positions[-1]), ax=left, color="xkcd:royal blue")
    left.set_title("Agent trajectories (final: %s)" % trajectory.equilibrium)

    right.semilogy(trajectory.times, trajectory.angle_error, color="xkcd:crimson")
    right.semilogy(trajectory.times, trajectory.attitude_error, color="xkcd:royal blue")
    right.legend(["Signed angle error", "Attitude disagreement"])
    right.set_xlabel("Time", fontsize=14)
    right.set_ylabel("Error", fontsize=14)
    fig.set_size_inches(14, 6)
    return fig
